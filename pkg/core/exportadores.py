"""
Exportadores de resultados de modeflux.
Tablas CSV con comentarios de procedencia y JSON con claves ordenadas.
"""
import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from core.errores import ErrorPersistencia

logger = logging.getLogger(__name__)


def _limpiar(valor):
    """Convierte tipos de numpy/pandas a tipos JSON; los no finitos van como texto."""
    if isinstance(valor, dict):
        return {str(k): _limpiar(v) for k, v in valor.items()}
    if isinstance(valor, (list, tuple, np.ndarray, pd.Index)):
        return [_limpiar(v) for v in valor]
    if isinstance(valor, (np.integer,)):
        return int(valor)
    if isinstance(valor, (float, np.floating)):
        valor = float(valor)
        return valor if math.isfinite(valor) else str(valor)
    return valor


def _formato_float(valor) -> str:
    """12 cifras significativas; los enteros conservan '.0' y se releen como float."""
    return repr(float(f"{valor:.12g}"))


class ExportadorCSV:
    """
    CSV separado por comas, punto decimal, fila de encabezado y líneas de
    procedencia con prefijo '#'.
    """

    @staticmethod
    def generar_csv(tabla: pd.DataFrame, path: str | Path, config_hash: str,
                    titulo: str = "resultados", index: bool = False,
                    extra: dict | None = None) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(f"# modeflux {titulo}\n")
                fh.write(f"# config_hash={config_hash}\n")
                for clave, valor in (extra or {}).items():
                    fh.write(f"# {clave}={valor}\n")
                tabla.to_csv(fh, index=index, lineterminator="\n", float_format=_formato_float)
        except OSError as exc:
            raise ErrorPersistencia(f"No se pudo escribir {path}: {exc}") from exc
        logger.info("CSV %s escrito (%d filas)", path, len(tabla))
        return path

    @staticmethod
    def leer_csv(path: str | Path) -> pd.DataFrame:
        return pd.read_csv(path, comment="#")

    @staticmethod
    def leer_procedencia(path: str | Path) -> dict[str, str]:
        """Pares clave=valor de las líneas '#' iniciales."""
        procedencia = {}
        with open(path, encoding="utf-8") as fh:
            for linea in fh:
                if not linea.startswith("#"):
                    break
                texto = linea[1:].strip()
                if "=" in texto:
                    clave, valor = texto.split("=", 1)
                    procedencia[clave.strip()] = valor.strip()
        return procedencia


class ExportadorJSON:
    """JSON UTF-8 con claves ordenadas; siempre incluye `config_hash`."""

    @staticmethod
    def generar_json(datos: dict, path: str | Path, config_hash: str) -> Path:
        path = Path(path)
        payload = _limpiar({**datos, "config_hash": config_hash})
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            texto = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)
            path.write_text(texto + "\n", encoding="utf-8")
        except OSError as exc:
            raise ErrorPersistencia(f"No se pudo escribir {path}: {exc}") from exc
        logger.info("JSON %s escrito", path)
        return path

    @staticmethod
    def leer_json(path: str | Path) -> dict:
        return json.loads(Path(path).read_text(encoding="utf-8"))
