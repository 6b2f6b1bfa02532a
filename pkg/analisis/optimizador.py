# analisis/optimizador.py
"""
Búsquedas exhaustivas: conjunto transmitido que maximiza la AAR asintótica media
y conjunto mínimo de ramas de diversidad con EFF saturada.

Empates: gana el conjunto ordenado lexicográficamente menor.
"""
from __future__ import annotations

import itertools
import logging
import math
import time
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from analisis.diversidad import branch_interference, eff
from analisis.tasas import asymptotic_aar_from_arrays
from canal.ensemble import ChannelEnsemble, mean_crosstalk
from core.errores import ErrorDominio, ErrorEstadistico
from optica.modos import ModeState

logger = logging.getLogger(__name__)

CHUNK_SIZE = 2000
DEFAULT_MAX_BRANCHES = 7
DEFAULT_SATURATION_DB = 0.3
DEFAULT_DIVERSITY_WINDOW = 5


# ================================
# CONJUNTO TRANSMITIDO ÓPTIMO
# ================================
def _arreglos_busqueda(ensemble: ChannelEnsemble):
    """Estados ordenados, |α_ii|² (R, S) y diafonía media (S, S) en ese orden."""
    orden = np.argsort(ensemble.states)
    estados = tuple(ensemble.states[o] for o in orden)
    ganancias = (np.abs(np.diagonal(ensemble.alpha, axis1=1, axis2=2)) ** 2)[:, orden]
    cruce = mean_crosstalk(ensemble).to_numpy()[np.ix_(orden, orden)]
    return estados, ganancias, cruce


def _evaluar_bloque(ganancias: np.ndarray, cruce: np.ndarray, bloque: list[tuple[int, ...]]):
    mejor, elegido = -math.inf, None
    for combinacion in bloque:
        valor = asymptotic_aar_from_arrays(ganancias, cruce, combinacion)
        if elegido is None or valor > mejor:
            mejor, elegido = valor, combinacion
    return mejor, elegido


def _bloques(iterable: Iterable, tamano: int):
    iterador = iter(iterable)
    while bloque := list(itertools.islice(iterador, tamano)):
        yield bloque


def _buscar_conjunto(ensemble: ChannelEnsemble, N: int, n_jobs: int = 1) -> tuple[tuple[ModeState, ...], float]:
    estados, ganancias, cruce = _arreglos_busqueda(ensemble)
    if not 1 <= N <= len(estados):
        raise ErrorDominio(f"N debe estar entre 1 y {len(estados)} (recibido: {N})")
    inicio = time.perf_counter()
    combinaciones = itertools.combinations(range(len(estados)), N)
    if n_jobs == 1:
        resultados = [_evaluar_bloque(ganancias, cruce, b) for b in _bloques(combinaciones, CHUNK_SIZE)]
    else:
        resultados = Parallel(n_jobs=n_jobs)(
            delayed(_evaluar_bloque)(ganancias, cruce, b) for b in _bloques(combinaciones, CHUNK_SIZE)
        )
    # Bloques en orden lexicográfico: con ">" estricto sobrevive el primero empatado
    mejor, elegido = -math.inf, None
    for valor, combinacion in resultados:
        if elegido is None or valor > mejor:
            mejor, elegido = valor, combinacion
    conjunto = tuple(estados[k] for k in elegido)
    logger.info("N=%d: conjunto óptimo %s (%.4f nats) en %.1f s",
                N, list(conjunto), mejor, time.perf_counter() - inicio)
    return conjunto, mejor


def optimal_transmit_set(ensemble: ChannelEnsemble, N: int, n_jobs: int = 1) -> tuple[ModeState, ...]:
    """Subconjunto de N estados con mayor AAR asintótica media (búsqueda exhaustiva)."""
    return _buscar_conjunto(ensemble, N, n_jobs)[0]


def optimal_sets_by_count(ensemble: ChannelEnsemble, N_range: Iterable[int], n_jobs: int = 1) -> pd.DataFrame:
    """Óptimo para cada N: columnas `set` (tupla ordenada) y `objective_nats`."""
    filas = []
    for N in N_range:
        conjunto, valor = _buscar_conjunto(ensemble, int(N), n_jobs)
        filas.append({"N": int(N), "set": conjunto, "objective_nats": valor})
    if not filas:
        raise ErrorDominio("N_range vacío")
    return pd.DataFrame(filas).set_index("N")


def optimal_mode_count(ensemble: ChannelEnsemble, N_range: Iterable[int], n_jobs: int = 1,
                       tabla: pd.DataFrame | None = None) -> tuple[int, tuple[ModeState, ...]]:
    """
    N que maximiza la AAR asintótica de su conjunto óptimo.

    N = 1 tiene objetivo infinito (sin interferencia); solo se elige si no hay
    otro candidato finito. `tabla` reutiliza un resultado de optimal_sets_by_count.
    """
    if tabla is None:
        tabla = optimal_sets_by_count(ensemble, N_range, n_jobs)
    finitos = tabla[np.isfinite(tabla["objective_nats"])]
    candidatos = finitos if not finitos.empty else tabla
    N_opt = int(candidatos["objective_nats"].idxmax())
    return N_opt, tabla.loc[N_opt, "set"]


# ================================
# CONJUNTO DE DIVERSIDAD
# ================================
def _terminos_ramas(ensemble: ChannelEnsemble, i: ModeState, candidatos: Sequence[ModeState],
                    tx_set: Sequence[ModeState]) -> np.ndarray:
    """Aporte |α_ij|⁴/(2|α_ij|²S_j + S_j²) de cada rama a ζ∞, forma (R, M)."""
    S = branch_interference(i, candidatos, tx_set, mean_crosstalk(ensemble))
    if np.any(S <= 0):
        raise ErrorDominio(f"SINR asintótica indefinida para el canal {i}: rama sin interferencia")
    g = np.abs(ensemble.alpha[:, ensemble.index_of(i), ensemble.indices_of(candidatos)]) ** 2
    return g ** 2 / (2.0 * g * S + S ** 2)


def diversity_search_record(ensemble: ChannelEnsemble, i: ModeState, tx_set: Sequence[ModeState],
                            max_size: int = DEFAULT_MAX_BRANCHES,
                            window: int | None = DEFAULT_DIVERSITY_WINDOW) -> pd.DataFrame:
    """
    Para cada M = 1..max_size, el conjunto de M ramas (con i) de menor EFF de ζ∞.

    Se lleva el mejor acumulado: si ningún conjunto de tamaño M mejora al de M−1,
    la fila M repite el anterior, así eff_db no crece con M. `window=None` busca
    entre todos los estados; si no, entre los de |j − i| ≤ window.
    """
    if i not in tx_set:
        raise ErrorDominio(f"El estado {i} no pertenece al conjunto transmitido {list(tx_set)}")
    if max_size < 1:
        raise ErrorDominio(f"max_size debe ser ≥ 1 (recibido: {max_size})")
    vecinos = sorted(s for s in ensemble.states
                     if s != i and (window is None or abs(s - i) <= window))
    ramas = [i] + vecinos
    terminos = _terminos_ramas(ensemble, i, ramas, tx_set)

    mejor_conjunto, mejor_eff = (i,), eff(terminos[:, 0])
    filas = [{"M": 1, "best_set": mejor_conjunto, "eff_db": mejor_eff}]
    for M in range(2, min(max_size, len(ramas)) + 1):
        for extra in itertools.combinations(range(1, len(ramas)), M - 1):
            valor = eff(terminos[:, [0, *extra]].sum(axis=1))
            if valor < mejor_eff:
                mejor_eff = valor
                mejor_conjunto = tuple(sorted((i, *(ramas[k] for k in extra))))
        filas.append({"M": M, "best_set": mejor_conjunto, "eff_db": mejor_eff})
    logger.info("Registro de diversidad del canal %d: %d tamaños evaluados", i, len(filas))
    return pd.DataFrame(filas).set_index("M")


def best_diversity_set(ensemble: ChannelEnsemble, i: ModeState, tx_set: Sequence[ModeState],
                       max_size: int = DEFAULT_MAX_BRANCHES,
                       saturation_delta: float = DEFAULT_SATURATION_DB,
                       window: int | None = DEFAULT_DIVERSITY_WINDOW,
                       record: pd.DataFrame | None = None) -> tuple[ModeState, ...]:
    """
    Conjunto mínimo de ramas con la EFF saturada.

    Se detiene en el primer M cuya mejora sobre M−1 es menor que
    `saturation_delta` (dB) y devuelve el conjunto de M−1.
    """
    if record is None:
        record = diversity_search_record(ensemble, i, tx_set, max_size, window)
    previo = None
    for _, fila in record.iterrows():
        if previo is not None:
            mejora = previo["eff_db"] - fila["eff_db"]
            if previo["eff_db"] == -math.inf or mejora < saturation_delta:
                return previo["best_set"]
        previo = fila
    return previo["best_set"]


# ================================
# PENDIENTE DE LA PROBABILIDAD DE CORTE
# ================================
def _pendiente_log(curva: pd.Series, Pt_dbm: float) -> float:
    curva = curva.sort_index()
    x = curva.index.to_numpy(dtype=float)
    if Pt_dbm - 1.0 < x[0] or Pt_dbm + 1.0 > x[-1]:
        raise ErrorDominio(f"La curva no cubre {Pt_dbm - 1:g}..{Pt_dbm + 1:g} dBm")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_p = np.log10(curva.to_numpy(dtype=float))
        extremos = np.interp([Pt_dbm - 1.0, Pt_dbm + 1.0], x, log_p)
    if not np.all(np.isfinite(extremos)):
        raise ErrorEstadistico(f"Probabilidad de corte nula alrededor de {Pt_dbm:g} dBm")
    return float((extremos[1] - extremos[0]) / 2.0)


def normalized_outage_slope(curve_with: pd.Series, curve_without: pd.Series, Pt_dbm: float) -> float:
    """
    Cociente de pendientes de log10 P_out frente a Pt (dB), con y sin diversidad.

    Las curvas son Series de P_out indexadas por Pt en dBm; cada pendiente es la
    diferencia centrada entre Pt−1 dB y Pt+1 dB (interpolando en log10 P_out).
    """
    sin_div = _pendiente_log(curve_without, Pt_dbm)
    if sin_div == 0:
        raise ErrorEstadistico(f"Pendiente nula sin diversidad en {Pt_dbm:g} dBm")
    return _pendiente_log(curve_with, Pt_dbm) / sin_div
