# analisis/diversidad.py
"""
Diversidad modal: el canal i combina la potencia recibida en las ramas j ∈ 𝓜_i.

El receptor conoce |α_ij|² instantáneo en cada rama y solo la estadística de la
interferencia, así que el ruido de cada rama sale de la diafonía media X.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from analisis.tasas import LinkBudget, rate_bound, watts_to_dbm
from canal.deteccion import crosstalk_sum, noise_variances
from canal.ensemble import ChannelEnsemble, mean_crosstalk
from core.errores import ErrorDimension, ErrorDominio, ErrorEstadistico
from optica.modos import ModeState

logger = logging.getLogger(__name__)

# Umbral de SINR por defecto para la probabilidad de corte (dB)
DEFAULT_OUTAGE_THRESHOLD_DB = 20.0
DEFAULT_EPSILON = 0.01


class CombiningRule(str, enum.Enum):
    MRC = "MRC"
    EGC = "EGC"


@dataclass(frozen=True)
class DiversityConfig:
    channel: ModeState
    branch_set: tuple[ModeState, ...]
    rule: CombiningRule = CombiningRule.MRC

    def __post_init__(self):
        ramas = tuple(int(j) for j in self.branch_set)
        if not ramas:
            raise ErrorDimension("El conjunto de ramas no puede estar vacío")
        if len(set(ramas)) != len(ramas):
            raise ErrorDimension(f"Ramas repetidas: {list(ramas)}")
        object.__setattr__(self, "channel", int(self.channel))
        object.__setattr__(self, "branch_set", ramas)
        object.__setattr__(self, "rule", CombiningRule(self.rule))

    @property
    def M(self) -> int:
        return len(self.branch_set)


@dataclass(frozen=True)
class CombinerOutput:
    """Coeficientes β de las ramas, ζ resultante y tasa condicionada en una realización."""

    beta: np.ndarray
    sinr: float
    rate: float | None = None

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if not np.all(np.isfinite(beta)):
            raise ErrorDominio("Coeficientes de combinación no finitos")
        if not self.sinr >= 0:
            raise ErrorDominio(f"SINR negativa o indefinida: {self.sinr}")
        object.__setattr__(self, "beta", beta)


# ================================
# RUIDO POR RAMA
# ================================
def branch_noise(i: ModeState, j: ModeState, tx_set: Sequence[ModeState], X: pd.DataFrame,
                 Pt: float, N: int, mu: float, sigma_th2: float) -> tuple[float, float, float]:
    """
    Interferencia media y varianzas de ruido de la rama j del canal i.

    Returns:
        (m_c,j, σ_Zs,j², σ_Z0,j²) con m_c,j = (μPt/N)·∑_{k≠i} E[|α_kj|²].
    """
    if i not in tx_set:
        raise ErrorDominio(f"El estado {i} no pertenece al conjunto transmitido {list(tx_set)}")
    if N != len(tx_set):
        raise ErrorDimension(f"N={N} no coincide con |tx_set|={len(tx_set)}")
    if Pt < 0:
        raise ErrorDominio(f"Pt debe ser ≥ 0 (recibido: {Pt})")
    m_c = mu * Pt / N * crosstalk_sum(i, tx_set, X, received=j)
    var_s, var_0 = noise_variances(m_c, sigma_th2)
    return m_c, var_s, var_0


def branch_noise_arrays(i: ModeState, branch_set: Sequence[ModeState], budget: LinkBudget,
                        X: pd.DataFrame) -> tuple[np.ndarray, np.ndarray]:
    """(σ_Zs², σ_Z0²) de todas las ramas, en el orden de branch_set."""
    ruido = [branch_noise(i, j, budget.tx_set, X, budget.Pt, budget.N, budget.mu, budget.sigma_th2)
             for j in branch_set]
    return np.array([r[1] for r in ruido]), np.array([r[2] for r in ruido])


def branch_interference(i: ModeState, branch_set: Sequence[ModeState], tx_set: Sequence[ModeState],
                        X: pd.DataFrame) -> np.ndarray:
    """S_j = ∑_{k≠i} E[|α_kj|²] por rama."""
    if i not in tx_set:
        raise ErrorDominio(f"El estado {i} no pertenece al conjunto transmitido {list(tx_set)}")
    return np.array([crosstalk_sum(i, tx_set, X, received=j) for j in branch_set])


# ================================
# COEFICIENTES
# ================================
def _validar_ramas(fadings, var_s, var_0):
    g = np.asarray(fadings, dtype=float)
    var_s = np.asarray(var_s, dtype=float)
    var_0 = np.asarray(var_0, dtype=float)
    if g.shape[-1] != var_s.shape[-1] or g.shape[-1] != var_0.shape[-1]:
        raise ErrorDimension(
            f"{g.shape[-1]} desvanecimientos para {var_s.shape[-1]}/{var_0.shape[-1]} varianzas"
        )
    if np.any(g < 0):
        raise ErrorDominio("Los desvanecimientos |α_ij|² deben ser ≥ 0")
    return g, var_s, var_0


def _potencia_por_modo(mu_pt_over_n: float) -> float:
    if not mu_pt_over_n > 0:
        raise ErrorDominio(f"μPt/N debe ser > 0 (recibido: {mu_pt_over_n})")
    return float(mu_pt_over_n)


def mrc_coefficients(fadings, var_s, var_0, mu_pt_over_n: float) -> np.ndarray:
    """β_j = |α_ij|²/(|α_ij|²σ_Zs,j² + σ_Z0,j²·N/(μPt)), con constante arbitraria υ = 1."""
    g, var_s, var_0 = _validar_ramas(fadings, var_s, var_0)
    a = _potencia_por_modo(mu_pt_over_n)
    if np.any(var_s <= 0) or np.any(var_0 <= 0):
        raise ErrorDominio("MRC requiere varianzas de ruido > 0 en todas las ramas")
    return g / (g * var_s + var_0 / a)


def egc_coefficients(fadings) -> np.ndarray:
    return np.ones_like(np.asarray(fadings, dtype=float))


def asymptotic_mrc_coefficients(fadings, interference) -> np.ndarray:
    """β_j = |α_ij|²/(2|α_ij|²S_j + S_j²): maximizan la SINR asintótica."""
    g = np.asarray(fadings, dtype=float)
    S = np.asarray(interference, dtype=float)
    if np.any(S <= 0):
        raise ErrorDominio("Coeficientes asintóticos indefinidos sin interferencia (N=1)")
    return g / (2.0 * g * S + S ** 2)


# ================================
# SINR DEL COMBINADOR
# ================================
def combiner_sinr(beta, fadings, var_s, var_0, mu_pt_over_n: float):
    """
    ζ = (μPt/N)·(∑β|α|²)² / ∑β²(|α|²σ_Zs² + σ_Z0²·N/(μPt)).

    El último eje recorre las ramas; los ejes previos son de lote.
    """
    g, var_s, var_0 = _validar_ramas(fadings, var_s, var_0)
    a = _potencia_por_modo(mu_pt_over_n)
    beta = np.asarray(beta, dtype=float)
    numerador = np.sum(beta * g, axis=-1) ** 2
    denominador = np.sum(beta ** 2 * (g * var_s + var_0 / a), axis=-1)
    if np.any(denominador <= 0):
        raise ErrorDominio("Combinador degenerado: todas las ramas tienen β = 0 o ruido nulo")
    zeta = a * numerador / denominador
    return float(zeta) if np.ndim(zeta) == 0 else zeta


def mrc_sinr(fadings, var_s, var_0, mu_pt_over_n: float):
    """ζ_MRC = (μPt/N)·∑ |α|⁴/(|α|²σ_Zs² + σ_Z0²·N/(μPt)): suma de las SINR de cada rama."""
    g, var_s, var_0 = _validar_ramas(fadings, var_s, var_0)
    a = _potencia_por_modo(mu_pt_over_n)
    denominador = g * var_s + var_0 / a
    if np.any((denominador <= 0) & (g > 0)):
        raise ErrorDominio("Rama con ruido nulo")
    with np.errstate(divide="ignore", invalid="ignore"):
        terminos = np.where(g > 0, g ** 2 / denominador, 0.0)
    zeta = a * np.sum(terminos, axis=-1)
    return float(zeta) if np.ndim(zeta) == 0 else zeta


def _sinr_asintotica_combinada(beta, g, S):
    """(∑β|α|²)² / ∑β²(2|α|²S + S²), límite de combiner_sinr cuando Pt → ∞."""
    numerador = np.sum(beta * g, axis=-1) ** 2
    denominador = np.sum(beta ** 2 * (2.0 * g * S + S ** 2), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denominador > 0, numerador / denominador, 0.0)


def asymptotic_sinr(i: ModeState, branch_set: Sequence[ModeState], tx_set: Sequence[ModeState],
                    fadings, X: pd.DataFrame):
    """
    ζ∞ = ∑_j |α_ij|⁴/(2|α_ij|²S_j + S_j²); no lee Pt.

    Raises:
        ErrorDominio: alguna rama sin interferencia (N=1): el canal no está
            limitado por interferencia y ζ∞ no está definido.
    """
    S = branch_interference(i, branch_set, tx_set, X)
    if np.any(S <= 0):
        raise ErrorDominio(f"SINR asintótica indefinida para el canal {i}: rama sin interferencia")
    g = np.asarray(fadings, dtype=float)
    if g.shape[-1] != len(S):
        raise ErrorDimension(f"{g.shape[-1]} desvanecimientos para {len(S)} ramas")
    zeta = np.sum(g ** 2 / (2.0 * g * S + S ** 2), axis=-1)
    return float(zeta) if np.ndim(zeta) == 0 else zeta


# ================================
# ESTADÍSTICAS DE SALIDA
# ================================
def eff(zeta_samples) -> float:
    """Figura de desvanecimiento efectiva 10·log10(Var[ζ]/E[ζ]²); −∞ si ζ es constante."""
    zeta = np.asarray(zeta_samples, dtype=float).ravel()
    if zeta.size < 2:
        raise ErrorEstadistico("EFF necesita al menos 2 muestras")
    media = zeta.mean()
    if media == 0:
        raise ErrorEstadistico("EFF indefinida: media nula")
    varianza = zeta.var(ddof=1)
    if varianza == 0:
        return -math.inf
    return float(10.0 * np.log10(varianza / media ** 2))


def outage_probability(zeta_samples, zeta_th):
    """Pr{ζ < ζ_th} empírica (admite un arreglo de umbrales)."""
    zeta = np.sort(np.asarray(zeta_samples, dtype=float).ravel())
    if zeta.size == 0:
        raise ErrorEstadistico("outage_probability necesita al menos una muestra")
    p = np.searchsorted(zeta, np.asarray(zeta_th, dtype=float), side="left") / zeta.size
    return float(p) if np.ndim(zeta_th) == 0 else p


def diversity_conditional_rate(fadings, beta, budget: LinkBudget, var_s, var_0):
    """
    Tasa condicionada a los desvanecimientos de todas las ramas.

    La salida del combinador es m̃ + √m̃·𝒵_s + 𝒵_0 con
    E[m̃] = (μPt/N)∑β|α|², σ_𝒵s² = ∑β²|α|²σ_Zs²/∑β|α|² y σ_𝒵0² = ∑β²σ_Z0².
    """
    g, var_s, var_0 = _validar_ramas(fadings, var_s, var_0)
    beta = np.asarray(beta, dtype=float)
    ponderada = np.sum(beta * g, axis=-1)
    if np.any(ponderada <= 0):
        raise ErrorDominio("Combinador degenerado: ∑β|α|² = 0")
    senal = budget.mu * budget.Pt / budget.N * ponderada
    efectiva_s = np.sum(beta ** 2 * g * var_s, axis=-1) / ponderada
    efectiva_0 = np.sum(beta ** 2 * var_0, axis=-1)
    tasa = rate_bound(senal, efectiva_s, efectiva_0)
    return float(tasa) if np.ndim(tasa) == 0 else tasa


def epsilon_outage_rate(rate_samples, epsilon: float) -> float:
    """
    Mayor C de la muestra con Pr{tasa < C} < ε (estadístico de orden inferior).

    Con ε = 0.5 devuelve la mediana si el número de muestras es impar y la
    mediana inferior (x_(n/2) de la muestra ordenada) si es par; no interpola.
    """
    if not 0 < epsilon < 1:
        raise ErrorDominio(f"ε debe estar en (0, 1) (recibido: {epsilon})")
    xs = np.sort(np.asarray(rate_samples, dtype=float).ravel())
    if xs.size == 0:
        raise ErrorEstadistico("epsilon_outage_rate necesita al menos una muestra")
    debajo = np.searchsorted(xs, xs, side="left") / xs.size
    return float(xs[debajo < epsilon].max())


# ================================
# MUESTRAS SOBRE EL ENSEMBLE
# ================================
def branch_fadings(ensemble: ChannelEnsemble, i: ModeState, branch_set: Sequence[ModeState]) -> np.ndarray:
    """|α_ij|² por realización y rama, forma (R, M)."""
    fila = ensemble.index_of(i)
    return np.abs(ensemble.alpha[:, fila, ensemble.indices_of(branch_set)]) ** 2


def _coeficientes(config: DiversityConfig, g, var_s, var_0, a, S):
    if config.rule is CombiningRule.EGC:
        return egc_coefficients(g)
    if np.all(S > 0):
        return asymptotic_mrc_coefficients(g, S)
    return mrc_coefficients(g, var_s, var_0, a)


def combine(ensemble: ChannelEnsemble, config: DiversityConfig, budget: LinkBudget, realization: int,
            X: pd.DataFrame | None = None) -> CombinerOutput:
    """
    Combinador del canal en una realización: β con la regla de `config`, la ζ
    que producen esos β y la tasa condicionada (None si ∑β|α|² = 0).
    """
    if not 0 <= realization < ensemble.n_realizations:
        raise ErrorDominio(f"Realización {realization} fuera de [0, {ensemble.n_realizations})")
    X = mean_crosstalk(ensemble) if X is None else X
    g = branch_fadings(ensemble, config.channel, config.branch_set)[realization]
    var_s, var_0 = branch_noise_arrays(config.channel, config.branch_set, budget, X)
    S = branch_interference(config.channel, config.branch_set, budget.tx_set, X)
    a = _potencia_por_modo(budget.mu * budget.Pt / budget.N)
    beta = _coeficientes(config, g, var_s, var_0, a, S)
    if np.sum(beta * g) <= 0:
        return CombinerOutput(beta, 0.0, None)
    return CombinerOutput(beta, combiner_sinr(beta, g, var_s, var_0, a),
                          diversity_conditional_rate(g, beta, budget, var_s, var_0))


def sinr_samples(ensemble: ChannelEnsemble, config: DiversityConfig, budget: LinkBudget,
                 X: pd.DataFrame | None = None) -> np.ndarray:
    """ζ del combinador a potencia finita en cada realización."""
    X = mean_crosstalk(ensemble) if X is None else X
    g = branch_fadings(ensemble, config.channel, config.branch_set)
    var_s, var_0 = branch_noise_arrays(config.channel, config.branch_set, budget, X)
    a = budget.mu * budget.Pt / budget.N
    if config.rule is CombiningRule.MRC:
        return mrc_sinr(g, var_s, var_0, a)
    return combiner_sinr(egc_coefficients(g), g, var_s, var_0, a)


def asymptotic_sinr_samples(ensemble: ChannelEnsemble, config: DiversityConfig,
                            tx_set: Sequence[ModeState], X: pd.DataFrame | None = None) -> np.ndarray:
    """ζ∞ en cada realización (MRC, o EGC con β = 1)."""
    X = mean_crosstalk(ensemble) if X is None else X
    g = branch_fadings(ensemble, config.channel, config.branch_set)
    if config.rule is CombiningRule.MRC:
        return asymptotic_sinr(config.channel, config.branch_set, tx_set, g, X)
    S = branch_interference(config.channel, config.branch_set, tx_set, X)
    if np.any(S <= 0):
        raise ErrorDominio(f"SINR asintótica indefinida para el canal {config.channel}")
    return _sinr_asintotica_combinada(egc_coefficients(g), g, S)


def rate_samples(ensemble: ChannelEnsemble, config: DiversityConfig, budget: LinkBudget,
                 X: pd.DataFrame | None = None) -> np.ndarray:
    """
    Tasa condicionada del canal en cada realización.

    MRC usa los coeficientes que maximizan la SINR asintótica aunque la tasa se
    evalúe a Pt finita; sin interferencia (N=1) usa los de potencia finita.
    Las realizaciones con ∑β|α|² = 0 tienen tasa 0.
    """
    X = mean_crosstalk(ensemble) if X is None else X
    g = branch_fadings(ensemble, config.channel, config.branch_set)
    var_s, var_0 = branch_noise_arrays(config.channel, config.branch_set, budget, X)
    S = branch_interference(config.channel, config.branch_set, budget.tx_set, X)
    if budget.Pt == 0:
        return np.zeros(ensemble.n_realizations)
    a = budget.mu * budget.Pt / budget.N
    beta = _coeficientes(config, g, var_s, var_0, a, S)
    activas = np.sum(beta * g, axis=-1) > 0
    tasas = np.zeros(ensemble.n_realizations)
    if np.any(activas):
        tasas[activas] = diversity_conditional_rate(g[activas], beta[activas], budget, var_s, var_0)
    return tasas


def outage_curve(ensemble: ChannelEnsemble, i: ModeState, branch_set: Sequence[ModeState],
                 budget: LinkBudget, Pt_grid: Sequence[float],
                 threshold_db: float = DEFAULT_OUTAGE_THRESHOLD_DB,
                 epsilon: float = DEFAULT_EPSILON,
                 rule: CombiningRule = CombiningRule.MRC) -> pd.DataFrame:
    """
    Probabilidad de corte y tasa ε-outage con y sin diversidad frente a Pt (W).

    Columnas: Pt_dBm, p_out_no_div, p_out_div, rate_out_no_div, rate_out_div.
    """
    sin_div = DiversityConfig(i, (i,), rule)
    con_div = DiversityConfig(i, tuple(branch_set), rule)
    umbral = 10.0 ** (threshold_db / 10.0)
    X = mean_crosstalk(ensemble)
    filas = []
    for Pt in Pt_grid:
        presupuesto = budget.with_power(Pt)
        filas.append({
            "Pt_dBm": float(watts_to_dbm(Pt)),
            "p_out_no_div": outage_probability(sinr_samples(ensemble, sin_div, presupuesto, X), umbral),
            "p_out_div": outage_probability(sinr_samples(ensemble, con_div, presupuesto, X), umbral),
            "rate_out_no_div": epsilon_outage_rate(rate_samples(ensemble, sin_div, presupuesto, X), epsilon),
            "rate_out_div": epsilon_outage_rate(rate_samples(ensemble, con_div, presupuesto, X), epsilon),
        })
    logger.info("Curva de corte del canal %d con ramas %s: %d potencias", i, list(branch_set), len(filas))
    return pd.DataFrame(filas)
