# canal/deteccion.py
"""
Receptor de conteo de fotones: constantes físicas, estadística de interferencia
(modelo de Laguerre) y parámetros de la aproximación gaussiana que usan las tasas.

Los conteos se tratan como reales tras el ajuste de momentos; las PMF de
Laguerre y Poisson existen como oráculos de validación.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy import constants, stats

from core.errores import ErrorConfiguracion, ErrorDimension, ErrorDominio

logger = logging.getLogger(__name__)

# Reescalado de la recurrencia de Laguerre
_TOPE_RECURRENCIA = 1e100


@dataclass(frozen=True)
class DetectionParams:
    """η, τ (s), T_o (K), R_L (Ω) y longitud de onda (m)."""

    eta: float = 1.0
    tau: float = 1e-9
    temperature: float = 300.0
    load_resistance: float = 50.0
    wavelength: float = 850e-9

    def __post_init__(self):
        for campo in ("eta", "tau", "temperature", "load_resistance", "wavelength"):
            valor = getattr(self, campo)
            if not np.isfinite(valor) or valor <= 0:
                raise ErrorConfiguracion(f"{campo} debe ser > 0 (recibido: {valor})")
        if self.eta > 1:
            raise ErrorConfiguracion(f"eta debe ser ≤ 1 (recibido: {self.eta})")


@dataclass(frozen=True)
class PhotonStats:
    """Conteos medios de señal e interferencia y varianza térmica de un canal."""

    m_s: float
    m_c: float
    sigma_th2: float

    def __post_init__(self):
        _no_negativos(m_s=self.m_s, m_c=self.m_c, sigma_th2=self.sigma_th2)

    def moments(self) -> tuple[float, float]:
        return count_moments(self.m_s, self.m_c, self.sigma_th2)

    def noise_variances(self) -> tuple[float, float]:
        return noise_variances(self.m_c, self.sigma_th2)


def _no_negativos(**valores):
    for nombre, valor in valores.items():
        if np.any(np.asarray(valor) < 0):
            raise ErrorDominio(f"{nombre} debe ser ≥ 0 (recibido: {valor})")


# ================================
# CONSTANTES DEL RECEPTOR
# ================================
def photon_conversion_mu(params: DetectionParams) -> float:
    """μ = ητ/(hν): fotones por símbolo por vatio."""
    energia_foton = constants.h * constants.c / params.wavelength
    return params.eta * params.tau / energia_foton


def thermal_variance(params: DetectionParams) -> float:
    """σ_th² = 2·k_B·T_o·τ/(R_L·q²) en cuentas²."""
    return (2.0 * constants.k * params.temperature * params.tau
            / (params.load_resistance * constants.e ** 2))


# ================================
# INTERFERENCIA
# ================================
def _validar_conjunto(i: int, tx_set: Sequence[int], n: int | None = None):
    if i not in tx_set:
        raise ErrorDominio(f"El estado {i} no pertenece al conjunto transmitido {list(tx_set)}")
    if n is not None and n != len(tx_set):
        raise ErrorDimension(f"N={n} no coincide con |tx_set|={len(tx_set)}")


def crosstalk_sum(i: int, tx_set: Iterable[int], X: pd.DataFrame, received: int | None = None) -> float:
    """∑_{k∈tx, k≠i} E[|α_kj|²] con j = received (por defecto j = i)."""
    j = i if received is None else received
    interferentes = [k for k in tx_set if k != i]
    if not interferentes:
        return 0.0
    return float(X.loc[interferentes, j].sum())


def interference_stats(i: int, tx_set: Sequence[int], X: pd.DataFrame, Pt: float, N: int,
                       mu: float) -> tuple[float, float]:
    """
    Varianza por cuadratura de la interferencia y conteo medio de interferencia.

    Returns:
        (σ_c,i², m_c,i) con σ_c,i² = (Pt/2N)·∑_{k≠i}E[|α_ki|²] y m_c,i = 2μσ_c,i².
    """
    _validar_conjunto(i, tx_set, N)
    if Pt < 0:
        raise ErrorDominio(f"Pt debe ser ≥ 0 (recibido: {Pt})")
    sigma_c2 = Pt / (2.0 * N) * crosstalk_sum(i, tx_set, X)
    return sigma_c2, 2.0 * mu * sigma_c2


# ================================
# MODELO DE LAGUERRE
# ================================
def _log_laguerre_hasta(n_max: int, x: float) -> np.ndarray:
    """log L_k(x) para k = 0..n_max con x ≤ 0 (todos los L_k son positivos)."""
    salida = np.empty(n_max + 1)
    salida[0] = 0.0
    if n_max == 0:
        return salida
    previo, actual, escala = 1.0, 1.0 - x, 0.0
    salida[1] = np.log(actual)
    for k in range(1, n_max):
        siguiente = ((2 * k + 1 - x) * actual - k * previo) / (k + 1)
        previo, actual = actual, siguiente
        if actual > _TOPE_RECURRENCIA:
            escala += np.log(actual)
            previo, actual = previo / actual, 1.0
        salida[k + 1] = escala + np.log(actual)
    return salida


def laguerre_pmf(n, m_s: float, m_c: float):
    """
    Probabilidad de n fotones con señal coherente m_s e interferencia gaussiana m_c.

    pmf(n) = m_c^n/(1+m_c)^(n+1)·exp(−m_s/(1+m_c))·L_n(−m_s/(m_c(1+m_c))),
    evaluada en escala logarítmica.
    """
    n_arr = np.asarray(n)
    if np.any(n_arr < 0) or not np.all(np.equal(np.mod(n_arr, 1), 0)):
        raise ErrorDominio("n debe ser entero ≥ 0")
    if not m_c > 0:
        raise ErrorDominio(f"laguerre_pmf requiere m_c > 0 (recibido: {m_c}); usar poisson_pmf")
    _no_negativos(m_s=m_s)
    n_int = n_arr.astype(np.int64)
    x = -m_s / (m_c * (1.0 + m_c))
    log_l = _log_laguerre_hasta(int(n_int.max()) if n_int.size else 0, x)[n_int]
    log_pmf = (n_int * np.log(m_c) - (n_int + 1) * np.log1p(m_c)
               - m_s / (1.0 + m_c) + log_l)
    pmf = np.exp(log_pmf)
    return float(pmf) if np.ndim(n) == 0 else pmf


def poisson_pmf(n, m: float):
    """Límite m_c = 0 del modelo de Laguerre."""
    _no_negativos(n=n, m=m)
    pmf = stats.poisson.pmf(n, m)
    return float(pmf) if np.ndim(n) == 0 else pmf


def laguerre_cf(omega, m_s: float, m_c: float):
    """Ψ(jω) = exp[−m_s(1−e^{jω})/(1+m_c(1−e^{jω}))]/(1+m_c(1−e^{jω}))."""
    w = 1.0 - np.exp(1j * np.asarray(omega, dtype=float))
    d = 1.0 + m_c * w
    psi = np.exp(-m_s * w / d) / d
    return complex(psi) if np.ndim(omega) == 0 else psi


def count_moments(m_s: float, m_c: float, sigma_th2: float) -> tuple[float, float]:
    """Media m_s + m_c y varianza media + m_c² + 2m_s·m_c + σ_th² del conteo."""
    _no_negativos(m_s=m_s, m_c=m_c, sigma_th2=sigma_th2)
    media = m_s + m_c
    return media, media + m_c ** 2 + 2.0 * m_s * m_c + sigma_th2


def noise_variances(m_c, sigma_th2: float):
    """(σ_Zs², σ_Z0²) = (1 + 2m_c, m_c + m_c² + σ_th²)."""
    _no_negativos(m_c=m_c, sigma_th2=sigma_th2)
    return 1.0 + 2.0 * m_c, m_c + m_c ** 2 + sigma_th2


# ================================
# MUESTREADOR MONTE CARLO
# ================================
def sample_detected_count(rho_i, alpha_row, tx_amplitudes, mu: float, sigma_th2: float,
                          rng: np.random.Generator):
    """
    Conteo detectado con suma coherente de señal e interferencia.

    Λ_i = μ·|ρ_i·α_ii + ∑_k ρ_k·α_ki|², luego Poisson(Λ_i) más ruido térmico.

    Args:
        rho_i: amplitud del canal propio (escalar o arreglo de lote).
        alpha_row: [α_ii, α_k1,i, α_k2,i, ...]; admite un eje de lote al frente.
        tx_amplitudes: amplitudes ρ_k de los interferentes, en el mismo orden.
    """
    alpha_row = np.asarray(alpha_row, dtype=complex)
    tx_amplitudes = np.asarray(tx_amplitudes, dtype=float)
    if alpha_row.shape[-1] != tx_amplitudes.shape[-1] + 1:
        raise ErrorDimension(
            f"alpha_row tiene {alpha_row.shape[-1]} entradas para "
            f"{tx_amplitudes.shape[-1]} interferentes"
        )
    campo = np.asarray(rho_i) * alpha_row[..., 0]
    campo = campo + np.sum(tx_amplitudes * alpha_row[..., 1:], axis=-1)
    tasa = mu * np.abs(campo) ** 2
    conteo = rng.poisson(tasa) + rng.normal(0.0, np.sqrt(sigma_th2), size=np.shape(tasa))
    return float(conteo) if np.ndim(conteo) == 0 else conteo
