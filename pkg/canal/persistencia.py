# canal/persistencia.py
"""
Caché binaria de ensembles.

Formato (little-endian):
    cabecera  magic b"MFLXENS\\0", versión, config_hash (64 ASCII), R, S,
              base_seed, C_n², l0, L0
    estados   S × int32
    datos     R × S × S × complex128 (re, im intercalados), fila mayor [r][k][i]

Al lado va `<archivo>.meta`, un texto clave=valor con la configuración, el hash
de configuración y el SHA-256 de los datos.
"""
from __future__ import annotations

import hashlib
import logging
import os
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from dotenv import dotenv_values

from canal.ensemble import ChannelEnsemble, run_ensemble
from core.configuracion import SimulationConfig, config_from_mapping, config_hash
from core.errores import (
    ErrorArchivoTruncado,
    ErrorConfiguracion,
    ErrorHashDistinto,
    ErrorPersistencia,
    ErrorVersion,
)
from optica.turbulencia import TurbulenceParams

logger = logging.getLogger(__name__)

MAGIC = b"MFLXENS\0"
FORMAT_VERSION = 1

HEADER_DTYPE = np.dtype([
    ("magic", "S8"),
    ("version", "<u4"),
    ("config_hash", "S64"),
    ("n_realizations", "<u8"),
    ("n_states", "<u4"),
    ("base_seed", "<u8"),
    ("cn2", "<f8"),
    ("l0", "<f8"),
    ("L0", "<f8"),
])
STATE_DTYPE = np.dtype("<i4")
PAYLOAD_DTYPE = np.dtype("<c16")


def meta_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def _reemplazo_atomico(destino: Path, contenido: bytes):
    temporal = destino.with_name(destino.name + ".tmp")
    with open(temporal, "wb") as fh:
        fh.write(contenido)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(temporal, destino)


# ================================
# ESCRITURA
# ================================
def save_ensemble(ensemble: ChannelEnsemble, path: str | Path) -> Path:
    """Escribe cabecera, estados y datos; luego el archivo .meta. Ambos de forma atómica."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    cabecera = np.zeros(1, dtype=HEADER_DTYPE)
    cabecera["magic"] = MAGIC
    cabecera["version"] = FORMAT_VERSION
    cabecera["config_hash"] = ensemble.config_hash.encode("ascii")
    cabecera["n_realizations"] = ensemble.n_realizations
    cabecera["n_states"] = len(ensemble.states)
    cabecera["base_seed"] = ensemble.base_seed
    cabecera["cn2"] = ensemble.params.cn2
    cabecera["l0"] = ensemble.params.l0
    cabecera["L0"] = ensemble.params.L0

    datos = np.ascontiguousarray(ensemble.alpha, dtype=PAYLOAD_DTYPE).tobytes()
    contenido = (cabecera.tobytes()
                 + np.asarray(ensemble.states, dtype=STATE_DTYPE).tobytes()
                 + datos)

    meta = {
        "format_version": FORMAT_VERSION,
        "config_hash": ensemble.config_hash,
        "payload_sha256": hashlib.sha256(datos).hexdigest(),
        "created_at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "n_realizations": ensemble.n_realizations,
        "states": ",".join(str(s) for s in ensemble.states),
    }
    if ensemble.config is not None:
        meta.update(ensemble.config.as_dict())
    texto = "".join(f"{clave}={valor!r}\n" if isinstance(valor, float) else f"{clave}={valor}\n"
                    for clave, valor in meta.items())

    _reemplazo_atomico(path, contenido)
    _reemplazo_atomico(meta_path(path), texto.encode("utf-8"))
    logger.info("Ensemble guardado en %s (%d realizaciones, %d bytes)",
                path, ensemble.n_realizations, len(contenido))
    return path


# ================================
# LECTURA
# ================================
def read_metadata(path: str | Path) -> dict[str, str]:
    sidecar = meta_path(path)
    if not sidecar.is_file():
        raise ErrorPersistencia(f"Falta el archivo de metadatos {sidecar}")
    return {k: v for k, v in dotenv_values(sidecar).items() if v is not None}


def _config_de_metadatos(meta: dict[str, str]) -> SimulationConfig | None:
    claves = set(SimulationConfig.__dataclass_fields__)
    valores = {k: v for k, v in meta.items() if k in claves}
    if set(valores) != claves:
        return None
    try:
        return config_from_mapping(valores)
    except ErrorConfiguracion as exc:
        raise ErrorPersistencia(f"Configuración ilegible en los metadatos: {exc}") from exc


def load_ensemble(path: str | Path, expected_hash: str | None = None) -> ChannelEnsemble:
    """
    Carga una caché verificando formato, longitud y hashes.

    Raises:
        ErrorVersion: versión de formato no soportada.
        ErrorArchivoTruncado: el archivo es más corto de lo que indica la cabecera.
        ErrorHashDistinto: la cabecera, los metadatos, los datos o `expected_hash` no coinciden.
        ErrorPersistencia: archivo inexistente o ilegible.
    """
    path = Path(path)
    if not path.is_file():
        raise ErrorPersistencia(f"No existe la caché {path}")
    contenido = path.read_bytes()
    if len(contenido) < HEADER_DTYPE.itemsize:
        raise ErrorArchivoTruncado(f"{path}: cabecera incompleta")

    cabecera = np.frombuffer(contenido, dtype=HEADER_DTYPE, count=1)[0]
    if cabecera["magic"] != MAGIC.rstrip(b"\0"):
        raise ErrorPersistencia(f"{path}: no es una caché de ensembles")
    if int(cabecera["version"]) != FORMAT_VERSION:
        raise ErrorVersion(f"{path}: versión {int(cabecera['version'])} no soportada "
                           f"(se espera {FORMAT_VERSION})")

    n_real = int(cabecera["n_realizations"])
    n_states = int(cabecera["n_states"])
    inicio_estados = HEADER_DTYPE.itemsize
    inicio_datos = inicio_estados + n_states * STATE_DTYPE.itemsize
    esperado = inicio_datos + n_real * n_states * n_states * PAYLOAD_DTYPE.itemsize
    if len(contenido) < esperado:
        raise ErrorArchivoTruncado(f"{path}: {len(contenido)} bytes, la cabecera indica {esperado}")
    if len(contenido) > esperado:
        raise ErrorPersistencia(f"{path}: {len(contenido) - esperado} bytes sobrantes")

    huella = cabecera["config_hash"].decode("ascii", errors="replace")
    meta = read_metadata(path)
    if meta.get("config_hash") != huella:
        raise ErrorHashDistinto(f"{path}: el hash de la cabecera no coincide con los metadatos")
    if expected_hash is not None and expected_hash != huella:
        raise ErrorHashDistinto(f"{path}: hash {huella[:12]} distinto del esperado {expected_hash[:12]}")
    datos = contenido[inicio_datos:]
    if meta.get("payload_sha256") != hashlib.sha256(datos).hexdigest():
        raise ErrorHashDistinto(f"{path}: los datos no coinciden con su SHA-256")

    config = _config_de_metadatos(meta)
    if config is not None and config_hash(config) != huella:
        raise ErrorHashDistinto(f"{path}: la configuración de los metadatos no reproduce el hash")

    estados = np.frombuffer(contenido, dtype=STATE_DTYPE, count=n_states, offset=inicio_estados)
    alpha = np.frombuffer(datos, dtype=PAYLOAD_DTYPE).astype(np.complex128)
    logger.info("Caché %s cargada: %d realizaciones", path, n_real)
    return ChannelEnsemble(
        states=tuple(int(s) for s in estados),
        alpha=alpha.reshape(n_real, n_states, n_states),
        params=TurbulenceParams(float(cabecera["cn2"]), float(cabecera["l0"]), float(cabecera["L0"])),
        base_seed=int(cabecera["base_seed"]),
        config_hash=huella,
        config=config,
    )


def cache_is_current(path: str | Path, config: SimulationConfig) -> bool:
    """True si la caché existe, es legible y corresponde a `config`."""
    path = Path(path)
    if not path.is_file() or not meta_path(path).is_file():
        return False
    try:
        load_ensemble(path, expected_hash=config_hash(config))
    except ErrorPersistencia as exc:
        logger.info("Caché %s descartada: %s", path, exc)
        return False
    return True


def obtener_ensemble(config: SimulationConfig, path: str | Path, n_jobs: int = 1,
                     force: bool = False) -> tuple[ChannelEnsemble, bool]:
    """
    Reutiliza la caché de `config` en `path` o genera y guarda el ensemble.

    Returns:
        (ensemble, reutilizada)
    """
    path = Path(path)
    if not force and cache_is_current(path, config):
        logger.info("Caché %s vigente", path)
        return load_ensemble(path, expected_hash=config_hash(config)), True
    ensemble = run_ensemble(config, n_jobs=n_jobs)
    save_ensemble(ensemble, path)
    return ensemble, False
