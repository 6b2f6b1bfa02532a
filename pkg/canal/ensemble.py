# canal/ensemble.py
"""
Matrices de acoplamiento por realización y ensembles Monte Carlo.

Cada realización comparte una sola pila de pantallas entre todos los modos
lanzados; la realización r usa el flujo aleatorio derivado de (base_seed, r).
"""
from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats

from core.configuracion import SimulationConfig, config_hash
from core.errores import (
    ErrorDimension,
    ErrorDominio,
    ErrorEstadistico,
    ErrorSimulacion,
)
from optica.modos import GridSpec, ModeState, basis_stack, decompose_many
from optica.propagacion import (
    PathConfig,
    back_propagate_many,
    check_sampling,
    generate_screen_stack,
    propagate_stack,
)
from optica.turbulencia import TurbulenceParams

logger = logging.getLogger(__name__)

PASSIVITY_TOLERANCE = 1e-3
MIN_PHASE_SAMPLES = 500


def realization_rng(base_seed: int, r: int) -> np.random.Generator:
    """Flujo independiente para la realización r, sin depender del orden de ejecución."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(r),)))


# ================================
# TIPOS
# ================================
@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """alpha[k, i]: acoplamiento del estado transmitido k al estado recibido i."""

    states: tuple[ModeState, ...]
    alpha: np.ndarray

    def __post_init__(self):
        states = tuple(int(s) for s in self.states)
        alpha = np.asarray(self.alpha, dtype=np.complex128)
        if alpha.shape != (len(states), len(states)):
            raise ErrorDimension(f"alpha con forma {alpha.shape} para {len(states)} estados")
        if not np.all(np.isfinite(alpha)):
            raise ErrorDominio("La matriz de acoplamiento tiene entradas no finitas")
        alpha = alpha.view()
        alpha.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "alpha", alpha)

    def row_powers(self) -> np.ndarray:
        return np.sum(np.abs(self.alpha) ** 2, axis=1)

    def is_passive(self) -> bool:
        return bool(np.all(self.row_powers() <= 1.0 + PASSIVITY_TOLERANCE))


@dataclass(frozen=True, eq=False)
class ChannelEnsemble:
    """
    Colección de matrices de acoplamiento de una misma configuración.

    `alpha` es un arreglo (R, S, S) de solo lectura; `realizations` lo expone
    como lista de CouplingMatrix.
    """

    states: tuple[ModeState, ...]
    alpha: np.ndarray
    params: TurbulenceParams
    base_seed: int
    config_hash: str
    config: SimulationConfig | None = field(default=None)

    def __post_init__(self):
        states = tuple(int(s) for s in self.states)
        alpha = np.asarray(self.alpha, dtype=np.complex128)
        if alpha.ndim != 3 or alpha.shape[1:] != (len(states), len(states)):
            raise ErrorDimension(f"alpha con forma {alpha.shape} para {len(states)} estados")
        if alpha.shape[0] < 1:
            raise ErrorEstadistico("Un ensemble necesita al menos una realización")
        if len(set(states)) != len(states):
            raise ErrorDimension("Estados duplicados en el ensemble")
        alpha = alpha.view()
        alpha.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "alpha", alpha)

    @property
    def n_realizations(self) -> int:
        return self.alpha.shape[0]

    @property
    def realizations(self) -> list[CouplingMatrix]:
        return [CouplingMatrix(self.states, a) for a in self.alpha]

    def index_of(self, state: ModeState) -> int:
        try:
            return self.states.index(int(state))
        except ValueError:
            raise ErrorDominio(f"El estado {state} no está en el ensemble {self.states}") from None

    def indices_of(self, states: Sequence[ModeState]) -> list[int]:
        return [self.index_of(s) for s in states]

    def gains(self) -> np.ndarray:
        """|α|² de todas las realizaciones, forma (R, S, S)."""
        return np.abs(self.alpha) ** 2

    def equals(self, other: "ChannelEnsemble") -> bool:
        """Igualdad bit a bit de datos y metadatos."""
        return (
            self.states == other.states
            and self.params == other.params
            and self.base_seed == other.base_seed
            and self.config_hash == other.config_hash
            and self.alpha.shape == other.alpha.shape
            and self.alpha.tobytes() == other.alpha.tobytes()
        )


# ================================
# GENERACIÓN
# ================================
def compute_coupling_matrix(path: PathConfig, params: TurbulenceParams, grid: GridSpec,
                            w0: float, states: Sequence[ModeState],
                            rng: np.random.Generator, max_state: int | None = None) -> CouplingMatrix:
    """
    Lanza cada u_k por la MISMA pila de pantallas y descompone el campo recibido.

    La base de recepción es la base analítica propagada en vacío hasta z; se
    implementa retropropagando el campo recibido a la cintura.
    """
    states = tuple(int(s) for s in states)
    tope = max(abs(s) for s in states) if max_state is None else max_state
    check_sampling(grid, path)
    screens = generate_screen_stack(path, params, grid, rng)
    lanzados = basis_stack(states, grid, w0, tope)
    recibidos = propagate_stack(lanzados, grid, screens, path)
    en_cintura = back_propagate_many(recibidos, grid, path.total_distance, path.wavelength)
    alpha = decompose_many(en_cintura, grid, states, w0, tope)
    matriz = CouplingMatrix(states, alpha)
    if not matriz.is_passive():
        logger.warning("Realización no pasiva: potencia máxima por fila %.6f",
                       float(matriz.row_powers().max()))
    return matriz


def _realizacion(config: SimulationConfig, r: int) -> np.ndarray:
    rng = realization_rng(config.base_seed, r)
    matriz = compute_coupling_matrix(
        config.to_path(), config.to_turbulence(), config.to_grid(), config.w0_m,
        config.states(), rng, config.max_state,
    )
    return matriz.alpha


def run_ensemble(config: SimulationConfig, n_jobs: int = 1,
                 realizations: int | None = None) -> ChannelEnsemble:
    """
    Genera el ensemble completo de `config`.

    Args:
        config: configuración validada.
        n_jobs: procesos de joblib; el resultado no depende de este valor.
        realizations: si se da, reemplaza config.realizations (útil en pruebas).

    Raises:
        ErrorSimulacion: falta de memoria u otro fallo de recursos; no se
            devuelven resultados parciales.
    """
    total = config.realizations if realizations is None else int(realizations)
    if total < 1:
        raise ErrorEstadistico("Se requiere al menos una realización")
    if realizations is not None and realizations != config.realizations:
        config = replace(config, realizations=total)

    inicio = time.perf_counter()
    logger.info("Generando %d realizaciones (C_n²=%.2e, n_jobs=%d)", total, config.cn2_m_2_3, n_jobs)
    try:
        if n_jobs == 1:
            resultados = []
            paso = max(total // 10, 1)
            for r in range(total):
                resultados.append(_realizacion(config, r))
                if (r + 1) % paso == 0:
                    logger.info("%d/%d realizaciones", r + 1, total)
        else:
            resultados = Parallel(n_jobs=n_jobs)(
                delayed(_realizacion)(config, r) for r in range(total)
            )
    except MemoryError as exc:
        raise ErrorSimulacion(f"Memoria insuficiente generando el ensemble: {exc}") from exc

    logger.info("Ensemble listo en %.1f s", time.perf_counter() - inicio)
    return ChannelEnsemble(
        states=config.states(),
        alpha=np.stack(resultados),
        params=config.to_turbulence(),
        base_seed=config.base_seed,
        config_hash=config_hash(config),
        config=config,
    )


def concatenate_ensembles(a: ChannelEnsemble, b: ChannelEnsemble) -> ChannelEnsemble:
    """Une dos ensembles con los mismos estados y parámetros de turbulencia."""
    if a.states != b.states:
        raise ErrorDimension("Los ensembles tienen estados distintos")
    if a.params != b.params:
        raise ErrorDimension("Los ensembles tienen parámetros de turbulencia distintos")
    if a.config_hash == b.config_hash:
        huella = a.config_hash
    else:
        huella = hashlib.sha256(f"{a.config_hash}+{b.config_hash}".encode("ascii")).hexdigest()
    return ChannelEnsemble(
        states=a.states,
        alpha=np.concatenate([a.alpha, b.alpha]),
        params=a.params,
        base_seed=a.base_seed,
        config_hash=huella,
        config=a.config if a.config_hash == b.config_hash else None,
    )


# ================================
# ESTADÍSTICA DEL CANAL
# ================================
def mean_crosstalk(ensemble: ChannelEnsemble) -> pd.DataFrame:
    """X[k][i] = E[|α_ki|²]; filas = estado transmitido, columnas = estado recibido."""
    etiquetas = pd.Index(ensemble.states, name="transmitted")
    return pd.DataFrame(
        ensemble.gains().mean(axis=0),
        index=etiquetas,
        columns=pd.Index(ensemble.states, name="received"),
    )


def fading_samples(ensemble: ChannelEnsemble, k: ModeState, i: ModeState) -> np.ndarray:
    """|α_ki|² de cada realización."""
    return np.abs(ensemble.alpha[:, ensemble.index_of(k), ensemble.index_of(i)]) ** 2


def channel_matrix(coupling: CouplingMatrix | ChannelEnsemble, tx_set: Sequence[ModeState]) -> np.ndarray:
    """H[i, k] = α_ki restringida a tx_set; con un ensemble devuelve (R, N, N)."""
    indices = [coupling.states.index(int(s)) for s in tx_set]
    alpha = coupling.alpha
    sub = alpha[..., indices, :][..., :, indices]
    return np.swapaxes(sub, -1, -2)


def received_powers(H: np.ndarray, rho: Sequence[float]) -> np.ndarray:
    """Y = |H·ρ|² (superposición coherente de señal y diafonía)."""
    rho = np.asarray(rho, dtype=float)
    if H.shape[-1] != rho.shape[-1]:
        raise ErrorDimension(f"H con {H.shape[-1]} columnas y {rho.shape[-1]} amplitudes")
    return np.abs(H @ rho) ** 2


def correlation_coefficient(ensemble: ChannelEnsemble, i: ModeState, j: ModeState) -> float:
    """Correlación de Pearson entre |α_ii|² y |α_ij|² (covarianza insesgada)."""
    if ensemble.n_realizations < 2:
        raise ErrorEstadistico("La correlación necesita al menos 2 realizaciones")
    a = fading_samples(ensemble, i, i)
    b = fading_samples(ensemble, i, j)
    sa, sb = np.std(a, ddof=1), np.std(b, ddof=1)
    if sa == 0 or sb == 0:
        raise ErrorEstadistico(f"Varianza nula en |α_{i}{i}|² o |α_{i}{j}|²")
    cov = np.cov(a, b, ddof=1)[0, 1]
    return float(np.clip(cov / (sa * sb), -1.0, 1.0))


def correlation_profile(ensemble: ChannelEnsemble, i: ModeState) -> pd.Series:
    """Correlación de |α_ii|² con |α_ij|² para cada estado recibido j."""
    valores = {}
    for j in ensemble.states:
        try:
            valores[j] = correlation_coefficient(ensemble, i, j)
        except ErrorEstadistico:
            valores[j] = np.nan
    return pd.Series(valores, name="correlation").rename_axis("received")


def phase_uniformity_check(ensemble: ChannelEnsemble, k: ModeState, i: ModeState) -> float:
    """Distancia de Kolmogorov-Smirnov entre ∠α_ki y la uniforme en [0, 2π)."""
    if k == i:
        raise ErrorDominio("phase_uniformity_check requiere k ≠ i")
    if ensemble.n_realizations < MIN_PHASE_SAMPLES:
        raise ErrorEstadistico(
            f"Se necesitan al menos {MIN_PHASE_SAMPLES} realizaciones "
            f"(hay {ensemble.n_realizations})"
        )
    fases = np.mod(np.angle(ensemble.alpha[:, ensemble.index_of(k), ensemble.index_of(i)]), 2 * np.pi)
    return float(stats.kstest(fases, stats.uniform(loc=0.0, scale=2 * np.pi).cdf).statistic)
