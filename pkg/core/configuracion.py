# core/configuracion.py
"""
Configuración de simulación: archivo clave=valor (sintaxis .env) con unidades SI
en el nombre de cada clave.

    wavelength_m=850e-9
    w0_m=0.016
    cn2_m_2_3=6e-15
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from dotenv import dotenv_values

from canal.deteccion import DetectionParams
from core.errores import ErrorConfiguracion, ErrorPersistencia
from optica.modos import make_grid, mode_fits, mode_states
from optica.propagacion import PathConfig, check_sampling
from optica.turbulencia import TurbulenceParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulationConfig:
    wavelength_m: float = 850e-9
    w0_m: float = 0.016
    z_m: float = 1000.0
    screen_spacing_m: float = 50.0
    cn2_m_2_3: float = 1e-15
    l0_m: float = 0.005
    outer_scale_m: float = 20.0
    grid_n_points: int = 512
    grid_extent_m: float = 0.5
    max_state: int = 10
    realizations: int = 2000
    base_seed: int = 2024
    detection_eta: float = 1.0
    detection_tau_s: float = 1e-9
    detection_temperature_k: float = 300.0
    detection_load_ohm: float = 50.0

    def __post_init__(self):
        positivos = (
            "wavelength_m", "w0_m", "z_m", "screen_spacing_m", "l0_m", "outer_scale_m",
            "grid_extent_m", "detection_eta", "detection_tau_s", "detection_temperature_k",
            "detection_load_ohm",
        )
        for clave in positivos:
            if not getattr(self, clave) > 0:
                raise ErrorConfiguracion(f"{clave}: debe ser > 0 (valor: {getattr(self, clave)})")
        if self.cn2_m_2_3 < 0:
            raise ErrorConfiguracion(f"cn2_m_2_3: debe ser ≥ 0 (valor: {self.cn2_m_2_3})")
        if self.realizations < 1:
            raise ErrorConfiguracion(f"realizations: debe ser ≥ 1 (valor: {self.realizations})")
        if self.max_state < 0:
            raise ErrorConfiguracion(f"max_state: debe ser ≥ 0 (valor: {self.max_state})")
        if self.base_seed < 0:
            raise ErrorConfiguracion(f"base_seed: debe ser ≥ 0 (valor: {self.base_seed})")
        if self.detection_eta > 1:
            raise ErrorConfiguracion(f"detection_eta: debe ser ≤ 1 (valor: {self.detection_eta})")
        # Restricciones compuestas: se delegan en los tipos de dominio
        grid = self.to_grid()
        path = self.to_path()
        self.to_turbulence()
        if not mode_fits(self.max_state, grid, self.w0_m):
            raise ErrorConfiguracion(
                f"w0_m/max_state: el modo |ℓ|={self.max_state} no cabe en grid_extent_m={self.grid_extent_m}"
            )
        if grid.spacing > self.l0_m:
            raise ErrorConfiguracion(
                f"grid_n_points/l0_m: paso {grid.spacing:.3e} m mayor que l0 {self.l0_m} m"
            )
        try:
            check_sampling(grid, path)
        except ErrorConfiguracion as exc:
            raise ErrorConfiguracion(f"screen_spacing_m: {exc}") from exc

    # ---- Conversión a tipos de dominio ----
    def to_grid(self):
        try:
            return make_grid(self.grid_n_points, self.grid_extent_m)
        except ErrorConfiguracion as exc:
            raise ErrorConfiguracion(f"grid_n_points/grid_extent_m: {exc}") from exc

    def to_path(self):
        try:
            return PathConfig(self.z_m, self.screen_spacing_m, self.wavelength_m)
        except ErrorConfiguracion as exc:
            raise ErrorConfiguracion(f"z_m/screen_spacing_m: {exc}") from exc

    def to_turbulence(self):
        try:
            return TurbulenceParams(self.cn2_m_2_3, self.l0_m, self.outer_scale_m)
        except ErrorConfiguracion as exc:
            raise ErrorConfiguracion(f"l0_m/outer_scale_m: {exc}") from exc

    def to_detection(self):
        return DetectionParams(
            eta=self.detection_eta,
            tau=self.detection_tau_s,
            temperature=self.detection_temperature_k,
            load_resistance=self.detection_load_ohm,
            wavelength=self.wavelength_m,
        )

    def states(self) -> tuple[int, ...]:
        return mode_states(self.max_state)

    def with_seed(self, base_seed: int) -> "SimulationConfig":
        return replace(self, base_seed=int(base_seed))

    def as_dict(self) -> dict:
        return asdict(self)


_TIPOS = {f.name: f.type for f in fields(SimulationConfig)}


def _convertir(clave: str, texto: str | None):
    if texto is None or texto.strip() == "":
        raise ErrorConfiguracion(f"{clave}: falta el valor")
    try:
        if _TIPOS[clave] == "int":
            valor = float(texto)
            if not valor.is_integer():
                raise ValueError(texto)
            return int(valor)
        return float(texto)
    except ValueError:
        raise ErrorConfiguracion(f"{clave}: valor no numérico {texto!r}") from None


def config_from_mapping(valores: dict) -> SimulationConfig:
    desconocidas = sorted(set(valores) - set(_TIPOS))
    if desconocidas:
        raise ErrorConfiguracion(f"Claves desconocidas en la configuración: {', '.join(desconocidas)}")
    return SimulationConfig(**{clave: _convertir(clave, str(v) if v is not None else None)
                               for clave, v in valores.items()})


def cargar_configuracion(path: str | Path | None = None) -> SimulationConfig:
    """
    Lee un archivo de configuración; sin ruta devuelve los valores por defecto.

    Raises:
        ErrorConfiguracion: clave desconocida, valor ilegible o restricción violada.
        ErrorPersistencia: el archivo no existe.
    """
    if path is None:
        return SimulationConfig()
    path = Path(path)
    if not path.is_file():
        raise ErrorPersistencia(f"No existe el archivo de configuración: {path}")
    config = config_from_mapping(dict(dotenv_values(path)))
    logger.info("Configuración cargada de %s (hash %s)", path, config_hash(config)[:12])
    return config


def serializar_configuracion(config: SimulationConfig) -> str:
    """Serialización canónica: líneas `clave=repr(valor)` ordenadas."""
    return "\n".join(f"{clave}={valor!r}" for clave, valor in sorted(config.as_dict().items()))


def config_hash(config: SimulationConfig) -> str:
    return hashlib.sha256(serializar_configuracion(config).encode("utf-8")).hexdigest()


def guardar_configuracion(config: SimulationConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(serializar_configuracion(config) + "\n", encoding="utf-8")
    return path

