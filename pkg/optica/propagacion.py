# optica/propagacion.py
"""
Propagación en vacío por espectro angular y split-step simétrico a través de
la pila de pantallas de fase.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from core.errores import ErrorConfiguracion, ErrorDimension, ErrorDominio
from optica.modos import ComplexField, GridSpec
from optica.turbulencia import PhaseScreen, TurbulenceParams, generate_phase_screen

logger = logging.getLogger(__name__)

# Ventana absorbente: súper-gaussiana de orden 8 en el 10 % exterior de cada semieje
WINDOW_BAND_FRACTION = 0.10
WINDOW_EXPONENT = 8
WINDOW_LOSS_WARNING = 0.01


@dataclass(frozen=True)
class PathConfig:
    """Trayecto de z = total_distance con pantallas cada screen_spacing metros."""

    total_distance: float
    screen_spacing: float
    wavelength: float

    def __post_init__(self):
        for campo in ("total_distance", "screen_spacing", "wavelength"):
            valor = getattr(self, campo)
            if not np.isfinite(valor) or valor <= 0:
                raise ErrorConfiguracion(f"{campo} debe ser > 0 (recibido: {valor})")
        n = round(self.total_distance / self.screen_spacing)
        if n < 1 or abs(n * self.screen_spacing - self.total_distance) > 1e-9 * self.total_distance:
            raise ErrorConfiguracion(
                f"total_distance={self.total_distance} no es múltiplo de "
                f"screen_spacing={self.screen_spacing}"
            )

    @property
    def n_screens(self) -> int:
        return round(self.total_distance / self.screen_spacing)


# ================================
# PASO EN VACÍO
# ================================
@lru_cache(maxsize=16)
def _transferencia(grid: GridSpec, dz: float, wavelength: float) -> np.ndarray:
    k = 2.0 * np.pi / wavelength
    kx, ky = grid.frequencies()
    kappa2 = kx ** 2 + ky ** 2
    propagante = kappa2 < k ** 2
    raiz = np.sqrt(np.where(propagante, k ** 2 - kappa2, 0.0))
    # exp(j·dz·(√(k²−κ²) − k)) sin cancelación; las evanescentes se anulan
    h = np.where(propagante, np.exp(-1j * dz * kappa2 / (k + raiz)), 0.0)
    h.flags.writeable = False
    return h


def _perfil_ventana(eje: np.ndarray, semiancho: float) -> np.ndarray:
    inicio = (1.0 - WINDOW_BAND_FRACTION) * semiancho
    u = np.clip((np.abs(eje) - inicio) / (semiancho - inicio), 0.0, None)
    # u ∈ [0, 1] dentro de la banda; e⁻¹ en su mitad
    return np.exp(-((2.0 * u) ** WINDOW_EXPONENT))


@lru_cache(maxsize=8)
def absorbing_window(grid: GridSpec) -> np.ndarray:
    """
    Producto separable w(x)·w(y). Vale 1 en el 90 % interior de cada semieje y cae
    como exp(−(2u)^8) a lo largo de la banda exterior (u de 0 a 1).
    """
    perfil = _perfil_ventana(grid.axis(), grid.extent / 2.0)
    ventana = np.outer(perfil, perfil)
    ventana.flags.writeable = False
    return ventana


def _aplicar_transferencia(samples: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(np.fft.fft2(samples) * h)


def angular_spectrum_step(field: ComplexField, dz: float, wavelength: float) -> ComplexField:
    """Paso de vacío de dz metros; unitario salvo componentes evanescentes."""
    if dz < 0:
        raise ErrorDominio(f"dz debe ser ≥ 0 (recibido: {dz})")
    if dz == 0:
        return field
    h = _transferencia(field.grid, float(dz), float(wavelength))
    return ComplexField(field.grid, _aplicar_transferencia(field.samples, h))


def back_propagate(field: ComplexField, dz: float, wavelength: float) -> ComplexField:
    """Paso inverso: aplica la transferencia conjugada de un paso de dz."""
    if dz < 0:
        raise ErrorDominio(f"dz debe ser ≥ 0 (recibido: {dz})")
    if dz == 0:
        return field
    h = _transferencia(field.grid, float(dz), float(wavelength))
    return ComplexField(field.grid, _aplicar_transferencia(field.samples, h.conj()))


def back_propagate_many(samples: np.ndarray, grid: GridSpec, dz: float,
                        wavelength: float) -> np.ndarray:
    h = _transferencia(grid, float(dz), float(wavelength))
    return _aplicar_transferencia(samples, h.conj())


def check_sampling(grid: GridSpec, path: PathConfig):
    """Cota anti-aliasing del espectro angular: dz ≤ n·Δ²/λ."""
    cota = grid.n_points * grid.spacing ** 2 / path.wavelength
    if path.screen_spacing > cota:
        raise ErrorConfiguracion(
            f"screen_spacing={path.screen_spacing} m supera la cota de muestreo "
            f"{cota:.1f} m para esta grilla"
        )


# ================================
# PANTALLAS Y SPLIT-STEP
# ================================
def apply_screen(field: ComplexField, screen: PhaseScreen) -> ComplexField:
    if field.grid != screen.grid:
        raise ErrorDimension("El campo y la pantalla usan grillas distintas")
    return ComplexField(field.grid, field.samples * np.exp(1j * screen.phases))


def generate_screen_stack(path: PathConfig, params: TurbulenceParams, grid: GridSpec,
                          rng: np.random.Generator) -> list[PhaseScreen]:
    """Una pantalla por segmento, en orden de propagación."""
    return [
        generate_phase_screen(grid, params, path.screen_spacing, rng, wavelength=path.wavelength)
        for _ in range(path.n_screens)
    ]


def propagate_stack(samples: np.ndarray, grid: GridSpec, screens: Sequence[PhaseScreen | None],
                    path: PathConfig, window: bool = True) -> np.ndarray:
    """
    Split-step simétrico sobre un arreglo (..., n, n) de campos.

    Cada segmento es [Δz/2 vacío → pantalla → Δz/2 vacío]; la ventana absorbente
    se aplica tras cada subpaso de vacío. Una pantalla `None` es un segmento en vacío.
    """
    check_sampling(grid, path)
    h = _transferencia(grid, path.screen_spacing / 2.0, path.wavelength)
    w = absorbing_window(grid) if window else None
    potencia_inicial = np.sum(np.abs(samples) ** 2, axis=(-2, -1))

    u = np.asarray(samples, dtype=np.complex128)
    for screen in screens:
        u = _aplicar_transferencia(u, h)
        if w is not None:
            u = u * w
        if screen is not None:
            if screen.grid != grid:
                raise ErrorDimension("La pantalla y el campo usan grillas distintas")
            u = u * np.exp(1j * screen.phases)
        u = _aplicar_transferencia(u, h)
        if w is not None:
            u = u * w

    if w is not None:
        potencia_final = np.sum(np.abs(u) ** 2, axis=(-2, -1))
        with np.errstate(divide="ignore", invalid="ignore"):
            perdida = np.where(potencia_inicial > 0, 1.0 - potencia_final / potencia_inicial, 0.0)
        peor = float(np.max(perdida))
        if peor > WINDOW_LOSS_WARNING:
            logger.warning("La ventana absorbente eliminó %.2f%% de la potencia", 100.0 * peor)
    return u


def propagate_through_screens(field: ComplexField, screens: Sequence[PhaseScreen],
                              path: PathConfig) -> ComplexField:
    return ComplexField(field.grid, propagate_stack(field.samples, field.grid, screens, path))


def propagate_vacuum(field: ComplexField, path: PathConfig) -> ComplexField:
    """Mismos subpasos y ventana que la propagación turbulenta, sin pantallas."""
    return ComplexField(
        field.grid, propagate_stack(field.samples, field.grid, [None] * path.n_screens, path)
    )


def propagate_turbulent(field: ComplexField, path: PathConfig, params: TurbulenceParams,
                        rng: np.random.Generator) -> ComplexField:
    """
    Propaga `field` hasta z = path.total_distance a través de pantallas nuevas.

    Raises:
        ErrorConfiguracion: la cota anti-aliasing no se cumple para screen_spacing.
    """
    check_sampling(field.grid, path)
    screens = generate_screen_stack(path, params, field.grid, rng)
    return propagate_through_screens(field, screens, path)
