# optica/modos.py
"""
Grilla espacial, campos complejos y base de modos OAM (Laguerre-Gauss p=0).

Los campos llevan unidades físicas: ∑|u|²·dA es la potencia en vatios, así que
los modos se generan ya normalizados a potencia unitaria.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from core.errores import ErrorConfiguracion, ErrorDimension, ErrorDominio

logger = logging.getLogger(__name__)

ModeState = int  # carga topológica ℓ con signo

MAX_STATE = 10
MIN_POINTS = 64


def mode_states(max_state: int = MAX_STATE) -> tuple[ModeState, ...]:
    """Estados −max_state..+max_state en orden creciente."""
    return tuple(range(-int(max_state), int(max_state) + 1))


# ================================
# GRILLA
# ================================
@dataclass(frozen=True)
class GridSpec:
    """Grilla cuadrada centrada: la muestra (a, b) está en ((a−n/2)Δ, (b−n/2)Δ)."""

    n_points: int
    extent: float

    def __post_init__(self):
        n = self.n_points
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            raise ErrorConfiguracion(f"n_points debe ser entero (recibido: {n!r})")
        if n < MIN_POINTS or (n & (n - 1)) != 0:
            raise ErrorConfiguracion(
                f"n_points debe ser potencia de dos y ≥ {MIN_POINTS} (recibido: {n})"
            )
        if not np.isfinite(self.extent) or self.extent <= 0:
            raise ErrorConfiguracion(f"extent debe ser > 0 (recibido: {self.extent})")

    @property
    def spacing(self) -> float:
        return self.extent / self.n_points

    @property
    def area_element(self) -> float:
        return self.spacing ** 2

    def axis(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.n_points // 2) * self.spacing

    def coordinate(self, a: int, b: int) -> tuple[float, float]:
        half = self.n_points // 2
        return ((a - half) * self.spacing, (b - half) * self.spacing)

    def cartesian(self) -> tuple[np.ndarray, np.ndarray]:
        """Mallas (x, y); x varía a lo largo de las columnas."""
        return _malla_cartesiana(self)

    def polar(self) -> tuple[np.ndarray, np.ndarray]:
        """Mallas (r, φ)."""
        return _malla_polar(self)

    def frequencies(self) -> tuple[np.ndarray, np.ndarray]:
        """Frecuencias espaciales angulares (κx, κy) en rad/m, orden de np.fft."""
        return _malla_frecuencias(self)


def _solo_lectura(*arrays: np.ndarray):
    for arr in arrays:
        arr.flags.writeable = False
    return arrays


@lru_cache(maxsize=8)
def _malla_cartesiana(grid: GridSpec):
    eje = grid.axis()
    x, y = np.meshgrid(eje, eje)
    return _solo_lectura(x, y)


@lru_cache(maxsize=8)
def _malla_polar(grid: GridSpec):
    x, y = _malla_cartesiana(grid)
    return _solo_lectura(np.hypot(x, y), np.arctan2(y, x))


@lru_cache(maxsize=8)
def _malla_frecuencias(grid: GridSpec):
    kappa = 2.0 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.spacing)
    kx, ky = np.meshgrid(kappa, kappa)
    return _solo_lectura(kx, ky)


def make_grid(n_points: int, extent: float) -> GridSpec:
    """Crea la grilla; n_points potencia de dos (≥64) y extent > 0, si no ErrorConfiguracion."""
    return GridSpec(n_points=n_points, extent=float(extent))


# ================================
# CAMPO COMPLEJO
# ================================
@dataclass(frozen=True, eq=False)
class ComplexField:
    """Campo óptico muestreado, amplitud en √W/m."""

    grid: GridSpec
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128)
        forma = (self.grid.n_points, self.grid.n_points)
        if arr.shape != forma:
            raise ErrorDimension(f"samples con forma {arr.shape}, se esperaba {forma}")
        if not np.all(np.isfinite(arr)):
            raise ErrorDominio("El campo contiene muestras no finitas")
        arr = arr.view()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def power(self) -> float:
        """∑|u|²·dA en vatios."""
        return float(np.sum(self.intensity()) * self.grid.area_element)

    def _misma_grilla(self, other: "ComplexField"):
        if self.grid != other.grid:
            raise ErrorDimension(f"Grillas distintas: {self.grid} vs {other.grid}")

    def __add__(self, other: "ComplexField") -> "ComplexField":
        self._misma_grilla(other)
        return ComplexField(self.grid, self.samples + other.samples)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        self._misma_grilla(other)
        return ComplexField(self.grid, self.samples - other.samples)

    def __mul__(self, escalar: complex) -> "ComplexField":
        return ComplexField(self.grid, self.samples * complex(escalar))

    __rmul__ = __mul__

    def __truediv__(self, escalar: complex) -> "ComplexField":
        return ComplexField(self.grid, self.samples / complex(escalar))


# ================================
# MODOS LG / OAM
# ================================
def mode_fits(state: ModeState, grid: GridSpec, w0: float) -> bool:
    return grid.extent >= 6.0 * w0 * np.sqrt(abs(state) / 2.0 + 1.0)


def _validar_modo(state: ModeState, grid: GridSpec, w0: float, max_state: int):
    if not np.isfinite(w0) or w0 <= 0:
        raise ErrorConfiguracion(f"w0 debe ser > 0 (recibido: {w0})")
    if abs(state) > max_state:
        raise ErrorConfiguracion(f"|ℓ|={abs(state)} supera max_state={max_state}")
    if not mode_fits(state, grid, w0):
        raise ErrorConfiguracion(
            f"El modo ℓ={state} con w0={w0} m no cabe en una ventana de {grid.extent} m"
        )


def _amplitud_lg(state: ModeState, grid: GridSpec, w0: float) -> np.ndarray:
    r, phi = grid.polar()
    abs_l = abs(int(state))
    # |ℓ|! en escala logarítmica
    log_amp = -((r / w0) ** 2) - 0.5 * gammaln(abs_l + 1)
    if abs_l:
        with np.errstate(divide="ignore"):
            log_amp = log_amp + abs_l * np.log(np.sqrt(2.0) * r / w0)
    amplitud = np.sqrt(2.0 / np.pi) / w0 * np.exp(log_amp)
    return amplitud * np.exp(-1j * state * phi)


def lg_mode_field(state: ModeState, grid: GridSpec, w0: float,
                  max_state: int = MAX_STATE) -> ComplexField:
    """
    Modo OAM de orden radial cero en z=0:
    √(2/(π|ℓ|!))·(1/w0)·(√2 r/w0)^|ℓ|·exp(−r²/w0²)·exp(−jℓφ).
    """
    _validar_modo(state, grid, w0, max_state)
    return ComplexField(grid, _amplitud_lg(state, grid, w0))


@lru_cache(maxsize=4)
def _base_modal(states: tuple, grid: GridSpec, w0: float, max_state: int) -> np.ndarray:
    for s in states:
        _validar_modo(s, grid, w0, max_state)
    base = np.stack([_amplitud_lg(s, grid, w0) for s in states])
    base.flags.writeable = False
    return base


def basis_stack(states: Sequence[ModeState], grid: GridSpec, w0: float,
                max_state: int = MAX_STATE) -> np.ndarray:
    """Arreglo (S, n, n) con los modos de `states` (cacheado, solo lectura)."""
    return _base_modal(tuple(int(s) for s in states), grid, float(w0), int(max_state))


# ================================
# PRODUCTO INTERNO Y DESCOMPOSICIÓN
# ================================
def inner_product(a: ComplexField, b: ComplexField) -> complex:
    """∫ a·b* dA como suma de Riemann."""
    if a.grid != b.grid:
        raise ErrorDimension(f"Grillas distintas: {a.grid} vs {b.grid}")
    return complex(np.vdot(b.samples, a.samples) * a.grid.area_element)


def decompose_many(samples: np.ndarray, grid: GridSpec, states: Sequence[ModeState],
                   w0: float, max_state: int = MAX_STATE) -> np.ndarray:
    """
    Coeficientes de varios campos a la vez.

    Args:
        samples: arreglo (K, n, n) con K campos sobre `grid`.

    Returns:
        Matriz (K, S) con alpha[k, i] = ⟨campo_k, u_i⟩.
    """
    samples = np.asarray(samples)
    if samples.shape[-2:] != (grid.n_points, grid.n_points):
        raise ErrorDimension(f"samples con forma {samples.shape} no coincide con la grilla")
    base = basis_stack(states, grid, w0, max_state)
    alpha = np.tensordot(samples, base.conj(), axes=([-2, -1], [-2, -1]))
    return alpha * grid.area_element


def decompose(field: ComplexField, states: Sequence[ModeState], w0: float,
              max_state: int = MAX_STATE) -> np.ndarray:
    """α_i = ⟨campo, u_i⟩ para cada estado de la base."""
    return decompose_many(field.samples, field.grid, states, w0, max_state)


def gram_matrix(states: Sequence[ModeState], grid: GridSpec, w0: float,
                max_state: int = MAX_STATE) -> np.ndarray:
    """G[k, i] = ⟨u_k, u_i⟩; la identidad salvo error de discretización."""
    base = basis_stack(states, grid, w0, max_state)
    return decompose_many(base, grid, states, w0, max_state)


# ================================
# SUPERPOSICIÓN
# ================================
def _validar_amplitudes(states, amplitudes) -> np.ndarray:
    amplitudes = np.asarray(amplitudes, dtype=float)
    if amplitudes.ndim != 1 or len(states) != amplitudes.size:
        raise ErrorDimension(
            f"{len(states)} estados y {amplitudes.size} amplitudes: deben coincidir"
        )
    if not np.all(np.isfinite(amplitudes)):
        raise ErrorDominio("Las amplitudes deben ser finitas")
    return amplitudes


def superpose(states: Sequence[ModeState], amplitudes: Sequence[float], grid: GridSpec,
              w0: float, max_state: int = MAX_STATE) -> ComplexField:
    """Campo transmitido ∑ρ_k·u_k(r, 0) (suma coherente)."""
    amplitudes = _validar_amplitudes(states, amplitudes)
    base = basis_stack(states, grid, w0, max_state)
    return ComplexField(grid, np.tensordot(amplitudes, base, axes=1))


def incoherent_intensity(states: Sequence[ModeState], amplitudes: Sequence[float],
                         grid: GridSpec, w0: float, max_state: int = MAX_STATE) -> np.ndarray:
    """Intensidad ∑ρ_k²|u_k|² de canales mutuamente incoherentes (solo para comparar)."""
    amplitudes = _validar_amplitudes(states, amplitudes)
    base = basis_stack(states, grid, w0, max_state)
    return np.tensordot(amplitudes ** 2, np.abs(base) ** 2, axes=1)
