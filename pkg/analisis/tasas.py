# analisis/tasas.py
"""
Tasas alcanzables del enlace multiplexado (cota inferior, en nats por uso del canal).

La interferencia solo se conoce por su estadística: m_c,i se calcula una vez por
(tx_set, Pt) con la diafonía media del ensemble, no por realización.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import stats

from canal.deteccion import (
    DetectionParams,
    crosstalk_sum,
    interference_stats,
    noise_variances,
    photon_conversion_mu,
    thermal_variance,
)
from canal.ensemble import ChannelEnsemble, mean_crosstalk
from core.errores import ErrorDimension, ErrorDominio, ErrorEstadistico
from optica.modos import ModeState

logger = logging.getLogger(__name__)


# ================================
# PRESUPUESTO DE ENLACE
# ================================
@dataclass(frozen=True)
class LinkBudget:
    """Potencia total Pt (W) repartida por igual entre los modos de tx_set."""

    Pt: float
    tx_set: tuple[ModeState, ...]
    detection: DetectionParams = field(default_factory=DetectionParams)

    def __post_init__(self):
        tx = tuple(int(s) for s in self.tx_set)
        if not tx:
            raise ErrorDimension("tx_set no puede estar vacío")
        if len(set(tx)) != len(tx):
            raise ErrorDimension(f"tx_set con estados repetidos: {list(tx)}")
        if not np.isfinite(self.Pt) or self.Pt < 0:
            raise ErrorDominio(f"Pt debe ser ≥ 0 (recibido: {self.Pt})")
        object.__setattr__(self, "tx_set", tx)

    @property
    def N(self) -> int:
        return len(self.tx_set)

    @property
    def mu(self) -> float:
        return photon_conversion_mu(self.detection)

    @property
    def sigma_th2(self) -> float:
        return thermal_variance(self.detection)

    def with_power(self, Pt: float) -> "LinkBudget":
        return replace(self, Pt=float(Pt))


def dbm_to_watts(p_dbm):
    return 1e-3 * np.power(10.0, np.asarray(p_dbm, dtype=float) / 10.0)


def watts_to_dbm(p_w):
    p_w = np.asarray(p_w, dtype=float)
    if np.any(p_w <= 0):
        raise ErrorDominio("watts_to_dbm requiere potencias > 0")
    return 10.0 * np.log10(p_w / 1e-3)


# ================================
# COTA DE TASA
# ================================
def rate_bound(senal, var_s, var_0):
    """
    Cota inferior para el canal m + √m·Z_s + Z_0 con potencia media `senal`.

    Forma estable de ½log(A/V_s) + ½log(1+2V_s/A) − A/V_s − 1 + √(A(A+2V_s))/V_s
    − √(πV_0/(2A·V_s)). Los valores negativos se recortan a 0; senal = 0 da 0.
    """
    senal, var_s, var_0 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (senal, var_s, var_0)))
    activa = senal > 0
    a = np.where(activa, senal, 1.0)
    razon = 2.0 * var_s / a
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cota = (0.5 * np.log(a / var_s) + 0.5 * np.log1p(razon) - 1.0
                + 2.0 / (1.0 + np.sqrt(1.0 + razon))
                - np.sqrt(np.pi * var_0 / (2.0 * a * var_s)))
    cota = np.where(activa, cota, 0.0)
    recortadas = int(np.count_nonzero(activa & (cota < 0)))
    if recortadas:
        logger.debug("Cota de tasa negativa recortada a 0 en %d punto(s)", recortadas)
    return np.maximum(cota, 0.0)


def _escalar_o_arreglo(valor, referencia):
    return float(valor) if np.ndim(referencia) == 0 else valor


def conditional_rate(gain2, budget: LinkBudget, m_c_i: float):
    """
    Tasa del canal i condicionada a |α_ii|², con la potencia repartida entre N modos.

    Args:
        gain2: |α_ii|² (escalar o arreglo de realizaciones).
        m_c_i: conteo medio de interferencia del canal (ver `interference_stats`).
    """
    g = np.asarray(gain2, dtype=float)
    if np.any(g < 0):
        raise ErrorDominio(f"gain2 debe ser ≥ 0 (recibido: {gain2})")
    var_s, var_0 = noise_variances(m_c_i, budget.sigma_th2)
    senal = budget.mu * g * budget.Pt / budget.N
    return _escalar_o_arreglo(rate_bound(senal, var_s, var_0), gain2)


def interference_count(i: ModeState, budget: LinkBudget, X: pd.DataFrame) -> float:
    """m_c,i del canal i para el presupuesto dado."""
    return interference_stats(i, budget.tx_set, X, budget.Pt, budget.N, budget.mu)[1]


# ================================
# RÉGIMEN ASINTÓTICO
# ================================
def asymptotic_sir(i: ModeState, tx_set: Sequence[ModeState], gain2, X: pd.DataFrame):
    """γ_i = |α_ii|² / ∑_{k≠i} E[|α_ki|²]; no depende de Pt."""
    if i not in tx_set:
        raise ErrorDominio(f"El estado {i} no pertenece al conjunto transmitido {list(tx_set)}")
    denominador = crosstalk_sum(i, tx_set, X)
    if denominador <= 0:
        raise ErrorDominio(
            f"SIR indefinido para el estado {i}: no hay interferencia (N={len(tx_set)}); "
            "usar la tasa no asintótica"
        )
    g = np.asarray(gain2, dtype=float)
    if np.any(g < 0):
        raise ErrorDominio(f"gain2 debe ser ≥ 0 (recibido: {gain2})")
    return _escalar_o_arreglo(g / denominador, gain2)


def _tasa_asintotica(gamma: np.ndarray) -> np.ndarray:
    """Versión sin validar: γ = 0 da 0 y γ = ∞ da ∞."""
    gamma = np.asarray(gamma, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        tasa = (0.5 * np.log(gamma / 2.0 + 2.0) - 1.0
                + 2.0 / (1.0 + np.sqrt(1.0 + 4.0 / gamma))
                - np.sqrt(np.pi / (4.0 * gamma)))
    tasa = np.where(gamma > 0, tasa, 0.0)
    return np.maximum(tasa, 0.0)


def asymptotic_rate(gamma):
    """
    Tasa límite a Pt alto en función del SIR instantáneo.

    ½log(γ/2+2) − γ/2 − 1 + √(γ(γ+4))/2 − √(π/(4γ)), evaluada como
    ½log(γ/2+2) − 1 + 2/(1+√(1+4/γ)) − √(π/(4γ)) y recortada en 0.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(~(g > 0)):
        raise ErrorDominio(f"asymptotic_rate requiere γ > 0 (recibido: {gamma})")
    return _escalar_o_arreglo(_tasa_asintotica(g), gamma)


# ================================
# PROMEDIOS SOBRE EL ENSEMBLE
# ================================
def _ganancias_propias(ensemble: ChannelEnsemble, tx_set: Sequence[ModeState]) -> np.ndarray:
    """|α_ii|² por realización, forma (R, N)."""
    idx = ensemble.indices_of(tx_set)
    return np.abs(ensemble.alpha[:, idx, idx]) ** 2


def per_mode_rates(ensemble: ChannelEnsemble, budget: LinkBudget,
                   X: pd.DataFrame | None = None) -> pd.DataFrame:
    """Tasa condicional de cada canal de tx_set en cada realización (R × N)."""
    X = mean_crosstalk(ensemble) if X is None else X
    ganancias = _ganancias_propias(ensemble, budget.tx_set)
    columnas = {}
    for n, i in enumerate(budget.tx_set):
        columnas[i] = conditional_rate(ganancias[:, n], budget, interference_count(i, budget, X))
    return pd.DataFrame(columnas).rename_axis(index="realization", columns="state")


def average_aar(ensemble: ChannelEnsemble, budget: LinkBudget,
                Pt_grid: Sequence[float] | None = None) -> pd.DataFrame:
    """
    Tasa agregada media E[∑_i C_i] para cada potencia de `Pt_grid` (W).

    Devuelve una fila por potencia con `Pt_dBm`, `aar_nats` y la tasa media de
    cada modo (`rate_<ℓ>`); la suma de estas últimas es `aar_nats`.
    """
    if ensemble.n_realizations < 1:
        raise ErrorEstadistico("Ensemble vacío")
    ensemble.indices_of(budget.tx_set)
    potencias = [budget.Pt] if Pt_grid is None else [float(p) for p in Pt_grid]
    X = mean_crosstalk(ensemble)
    filas = []
    for Pt in potencias:
        medias = per_mode_rates(ensemble, budget.with_power(Pt), X).mean(axis=0)
        fila = {"Pt_W": Pt, "Pt_dBm": float(watts_to_dbm(Pt)) if Pt > 0 else -math.inf}
        fila["aar_nats"] = float(medias.sum())
        fila.update({f"rate_{i:+d}": float(medias[i]) for i in budget.tx_set})
        filas.append(fila)
    tabla = pd.DataFrame(filas).set_index("Pt_W")
    logger.info("AAR media para %s en %d potencia(s)", list(budget.tx_set), len(potencias))
    return tabla


def asymptotic_aar_from_arrays(ganancias: np.ndarray, cruce: np.ndarray, indices: Sequence[int]) -> float:
    """
    Núcleo de la AAR asintótica media sobre arreglos precalculados.

    Args:
        ganancias: |α_ii|² por realización y estado, forma (R, S).
        cruce: diafonía media X[k, i], forma (S, S).
        indices: posiciones de tx_set en el eje de estados.
    """
    idx = np.asarray(indices)
    sub = cruce[np.ix_(idx, idx)]
    interferencia = sub.sum(axis=0) - np.diag(sub)
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = ganancias[:, idx] / interferencia
    gamma = np.nan_to_num(gamma, nan=0.0, posinf=np.inf)
    return float(_tasa_asintotica(gamma).sum(axis=1).mean())


def average_asymptotic_aar(ensemble: ChannelEnsemble, tx_set: Sequence[ModeState],
                           X: pd.DataFrame | None = None) -> float:
    """
    E[∑_i C∞_i] sobre el ensemble.

    Con N = 1 no hay interferencia y el SIR es infinito: devuelve `math.inf`
    como marca del régimen no limitado por interferencia.
    """
    tx_set = tuple(int(s) for s in tx_set)
    indices = ensemble.indices_of(tx_set)
    if len(tx_set) == 1:
        logger.info("N=1: sin interferencia, la AAR asintótica no está acotada")
        return math.inf
    X = mean_crosstalk(ensemble) if X is None else X
    cruce = X.loc[list(ensemble.states), list(ensemble.states)].to_numpy()
    ganancias = np.abs(np.diagonal(ensemble.alpha, axis1=1, axis2=2)) ** 2
    return asymptotic_aar_from_arrays(ganancias, cruce, indices)


# ================================
# ENTRADA SEMINORMAL
# ================================
def sample_half_normal(rng: np.random.Generator, Pt: float, N: int, size=None):
    """Amplitudes ρ ≥ 0 con densidad √(2N/πPt)·exp(−Nρ²/2Pt), es decir E[ρ²] = Pt/N."""
    if not Pt > 0:
        raise ErrorDominio(f"Pt debe ser > 0 (recibido: {Pt})")
    if N < 1:
        raise ErrorDominio(f"N debe ser ≥ 1 (recibido: {N})")
    return stats.halfnorm(scale=math.sqrt(Pt / N)).rvs(size=size, random_state=rng)
