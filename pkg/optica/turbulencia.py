# optica/turbulencia.py
"""
Espectro de von Karman modificado, pantallas de fase aleatorias y varianza de Rytov.

Las pantallas se sintetizan por el método FFT y se completan con tres niveles
de subarmónicos 3×3, porque la escala externa (20 m) es mucho mayor que la
ventana de cálculo.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import integrate
from scipy.special import j0

from core.errores import ErrorConfiguracion, ErrorDimension, ErrorDominio, ErrorEstadistico
from optica.modos import GridSpec

logger = logging.getLogger(__name__)

# Coeficientes del espectro de von Karman modificado
BETA_1 = 0.033
BETA_2 = 1.802
BETA_3 = 0.254

DEFAULT_WAVELENGTH = 850e-9
SUBHARMONIC_LEVELS = 3
MIN_SCREENS = 100


@dataclass(frozen=True)
class TurbulenceParams:
    """C_n² en m^(−2/3), escala interna l0 y externa L0 en metros."""

    cn2: float
    l0: float
    L0: float

    def __post_init__(self):
        if not np.isfinite(self.cn2) or self.cn2 < 0:
            raise ErrorConfiguracion(f"cn2 debe ser ≥ 0 (recibido: {self.cn2})")
        if not (0 < self.l0 < self.L0) or not np.isfinite(self.L0):
            raise ErrorConfiguracion(
                f"Se requiere 0 < l0 < L0 (recibido: l0={self.l0}, L0={self.L0})"
            )

    @property
    def kappa_l(self) -> float:
        return 3.3 / self.l0

    @property
    def kappa_0(self) -> float:
        return 2.0 * np.pi / self.L0


@dataclass(frozen=True, eq=False)
class PhaseScreen:
    grid: GridSpec
    phases: np.ndarray
    params: TurbulenceParams
    slab_thickness: float

    def __post_init__(self):
        arr = np.asarray(self.phases, dtype=float)
        if arr.shape != (self.grid.n_points, self.grid.n_points):
            raise ErrorDimension(f"phases con forma {arr.shape} no coincide con la grilla")
        if not np.all(np.isfinite(arr)):
            raise ErrorDominio("La pantalla contiene fases no finitas")
        arr = arr.view()
        arr.flags.writeable = False
        object.__setattr__(self, "phases", arr)


# ================================
# ESPECTRO
# ================================
def von_karman_psd(kappa, params: TurbulenceParams):
    """
    Densidad espectral del índice de refracción Φ_n(κ) en m^−3.

    Acepta escalares o arreglos; κ negativo lanza ErrorDominio. No se recorta:
    el factor entre corchetes puede ser levemente negativo para κ ≫ κ_l.
    """
    kappa_arr = np.asarray(kappa, dtype=float)
    if np.any(kappa_arr < 0) or not np.all(np.isfinite(kappa_arr)):
        raise ErrorDominio("kappa debe ser finito y ≥ 0")
    x = kappa_arr / params.kappa_l
    corchete = 1.0 + BETA_2 * x - BETA_3 * x ** (7.0 / 6.0)
    valor = (BETA_1 * params.cn2 * corchete * np.exp(-(x ** 2))
             / (params.kappa_0 ** 2 + kappa_arr ** 2) ** (11.0 / 6.0))
    return float(valor) if np.ndim(kappa) == 0 else valor


def phase_psd(kappa, params: TurbulenceParams, slab_thickness: float,
              wavelength: float = DEFAULT_WAVELENGTH):
    """PSD de fase de una lámina delgada: 2π·k²·Δz·Φ_n(κ), recortada en 0."""
    k = 2.0 * np.pi / wavelength
    return np.maximum(2.0 * np.pi * k ** 2 * slab_thickness * von_karman_psd(kappa, params), 0.0)


def rytov_variance(cn2: float, wavelength: float, z: float) -> float:
    """σ_R² = 1.23·C_n²·k^(7/6)·z^(11/6)."""
    if cn2 < 0 or wavelength <= 0 or z <= 0:
        raise ErrorDominio(
            f"rytov_variance requiere cn2 ≥ 0, wavelength > 0 y z > 0 "
            f"(recibido: {cn2}, {wavelength}, {z})"
        )
    k = 2.0 * np.pi / wavelength
    return 1.23 * cn2 * k ** (7.0 / 6.0) * z ** (11.0 / 6.0)


# ================================
# SÍNTESIS DE PANTALLAS
# ================================
def _psd_en_frecuencia(f: np.ndarray, params, slab_thickness, wavelength) -> np.ndarray:
    # PSD en frecuencia ordinaria (ciclos/m): W(f) = (2π)²·Φ_φ(2πf)
    return (2.0 * np.pi) ** 2 * phase_psd(2.0 * np.pi * f, params, slab_thickness, wavelength)


def _componente_fft(grid: GridSpec, params, slab_thickness, wavelength, rng) -> np.ndarray:
    n = grid.n_points
    df = 1.0 / grid.extent
    f = np.fft.fftfreq(n, d=grid.spacing)
    fx, fy = np.meshgrid(f, f)
    psd = _psd_en_frecuencia(np.hypot(fx, fy), params, slab_thickness, wavelength)
    psd[0, 0] = 0.0
    cn = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) * np.sqrt(psd) * df
    return np.real(np.fft.ifft2(cn)) * n * n


def _componente_subarmonica(grid: GridSpec, params, slab_thickness, wavelength, rng) -> np.ndarray:
    eje = grid.axis()
    baja = np.zeros((grid.n_points, grid.n_points), dtype=complex)
    for p in range(1, SUBHARMONIC_LEVELS + 1):
        df = 1.0 / (3 ** p * grid.extent)
        fv = np.arange(-1, 2) * df
        fx, fy = np.meshgrid(fv, fv)
        psd = _psd_en_frecuencia(np.hypot(fx, fy), params, slab_thickness, wavelength)
        psd[1, 1] = 0.0
        cn = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))) * np.sqrt(psd) * df
        # ∑ cn[i, j]·exp(j2π(fv[j]·x + fv[i]·y)) es separable en x e y
        fase = np.exp(2j * np.pi * np.outer(fv, eje))
        baja += fase.T @ cn @ fase
    baja = baja.real
    return baja - baja.mean()


def generate_phase_screen(grid: GridSpec, params: TurbulenceParams, slab_thickness: float,
                          rng: np.random.Generator,
                          wavelength: float = DEFAULT_WAVELENGTH) -> PhaseScreen:
    """
    Pantalla de fase gaussiana de media nula con PSD 2π·k²·Δz·Φ_n(κ).

    Args:
        grid: grilla de la pantalla; su paso debe resolver l0.
        params: parámetros de turbulencia.
        slab_thickness: espesor Δz de la lámina que representa (m).
        rng: generador propio de esta pantalla; el resultado depende solo de su estado.
        wavelength: longitud de onda para la conversión índice → fase.

    Raises:
        ErrorConfiguracion: Δz ≤ 0 o grilla más gruesa que l0.
    """
    if not slab_thickness > 0:
        raise ErrorConfiguracion(f"slab_thickness debe ser > 0 (recibido: {slab_thickness})")
    if grid.spacing > params.l0:
        raise ErrorConfiguracion(
            f"La grilla no resuelve l0: paso {grid.spacing:.3e} m > l0 {params.l0:.3e} m"
        )
    alta = _componente_fft(grid, params, slab_thickness, wavelength, rng)
    baja = _componente_subarmonica(grid, params, slab_thickness, wavelength, rng)
    return PhaseScreen(grid=grid, phases=alta + baja, params=params,
                       slab_thickness=float(slab_thickness))


# ================================
# FUNCIÓN DE ESTRUCTURA
# ================================
def _desplazamientos(n_points: int, max_shift: int | None) -> np.ndarray:
    tope = min(max_shift or n_points // 4, n_points - 1)
    return np.unique(np.geomspace(1, tope, num=40).astype(int))


def structure_function_profile(screens: Sequence[PhaseScreen],
                               max_shift: int | None = None) -> pd.Series:
    """
    Función de estructura de fase promedio del ensemble.

    Promedia E[(θ(x) − θ(x + r))²] sobre desplazamientos en x y en y.

    Returns:
        Serie indexada por separación en metros (`separation_m`).

    Raises:
        ErrorEstadistico: menos de 100 pantallas.
        ErrorDimension: pantallas sobre grillas distintas.
    """
    if len(screens) < MIN_SCREENS:
        raise ErrorEstadistico(
            f"Se necesitan al menos {MIN_SCREENS} pantallas (recibidas: {len(screens)})"
        )
    grid = screens[0].grid
    if any(s.grid != grid for s in screens):
        raise ErrorDimension("Todas las pantallas deben compartir la grilla")

    shifts = _desplazamientos(grid.n_points, max_shift)
    acumulado = np.zeros(len(shifts))
    for screen in screens:
        theta = screen.phases
        for idx, s in enumerate(shifts):
            dx = np.mean((theta[:, s:] - theta[:, :-s]) ** 2)
            dy = np.mean((theta[s:, :] - theta[:-s, :]) ** 2)
            acumulado[idx] += 0.5 * (dx + dy)

    logger.debug("Función de estructura sobre %d pantallas y %d separaciones",
                 len(screens), len(shifts))
    return pd.Series(acumulado / len(screens),
                     index=pd.Index(shifts * grid.spacing, name="separation_m"),
                     name="structure_function_rad2")


def analytic_structure_function(r, params: TurbulenceParams, slab_thickness: float,
                                wavelength: float = DEFAULT_WAVELENGTH) -> np.ndarray:
    """D(r) = 4π∫κ·Φ_φ(κ)·[1 − J0(κr)] dκ, integrada numéricamente."""
    kappa_max = 10.0 * params.kappa_l

    def integrando(kappa, sep):
        return kappa * phase_psd(kappa, params, slab_thickness, wavelength) * (1.0 - j0(kappa * sep))

    valores = []
    for sep in np.atleast_1d(np.asarray(r, dtype=float)):
        if sep < 0:
            raise ErrorDominio("La separación debe ser ≥ 0")
        integral, _ = integrate.quad(integrando, 0.0, kappa_max, args=(sep,),
                                     limit=500, points=[params.kappa_0, params.kappa_l])
        valores.append(4.0 * np.pi * integral)
    return np.asarray(valores)
