import itertools
import math
import unittest

import numpy as np
import pandas as pd
from django.test import SimpleTestCase
from scipy import stats

from analisis.diversidad import (
    CombinerOutput,
    CombiningRule,
    DiversityConfig,
    asymptotic_mrc_coefficients,
    asymptotic_sinr,
    asymptotic_sinr_samples,
    branch_fadings,
    branch_noise,
    branch_noise_arrays,
    combine,
    combiner_sinr,
    diversity_conditional_rate,
    eff,
    egc_coefficients,
    epsilon_outage_rate,
    mrc_coefficients,
    mrc_sinr,
    outage_curve,
    outage_probability,
    rate_samples,
    sinr_samples,
)
from analisis.optimizador import (
    best_diversity_set,
    diversity_search_record,
    normalized_outage_slope,
    optimal_mode_count,
    optimal_sets_by_count,
    optimal_transmit_set,
)
from analisis.tasas import (
    LinkBudget,
    asymptotic_rate,
    asymptotic_sir,
    average_aar,
    average_asymptotic_aar,
    conditional_rate,
    dbm_to_watts,
    interference_count,
    sample_half_normal,
    watts_to_dbm,
)
from canal.deteccion import noise_variances, photon_conversion_mu, thermal_variance, DetectionParams
from canal.ensemble import ChannelEnsemble, concatenate_ensembles, mean_crosstalk
from canal.tests import SLOW, ensemble_de_referencia
from core.errores import ErrorDimension, ErrorDominio, ErrorEstadistico
from optica.turbulencia import TurbulenceParams

PARAMS = TurbulenceParams(cn2=6e-15, l0=0.005, L0=20.0)
MU = photon_conversion_mu(DetectionParams())
SIGMA_TH2 = thermal_variance(DetectionParams())


def crear_ensemble(alpha, seed=0):
    alpha = np.asarray(alpha, dtype=complex)
    mitad = alpha.shape[1] // 2
    return ChannelEnsemble(states=tuple(range(-mitad, mitad + 1)), alpha=alpha, params=PARAMS,
                           base_seed=seed, config_hash="0" * 64)


def ensemble_con_fugas(n_real=400, max_state=5, seed=0, fuga=0.05):
    """Ganancia propia aleatoria, fuga fuerte a los vecinos cercanos y un piso débil al resto."""
    rng = np.random.default_rng(seed)
    S = 2 * max_state + 1
    distancia = np.abs(np.subtract.outer(np.arange(S), np.arange(S)))
    escala = np.where(distancia == 0, 0.0, np.where(distancia <= 2, fuga / distancia, 1e-5))
    ruido = rng.standard_normal((n_real, S, S)) + 1j * rng.standard_normal((n_real, S, S))
    alpha = np.sqrt(escala / 2) * ruido
    idx = np.arange(S)
    alpha[:, idx, idx] = np.sqrt(rng.uniform(0.3, 1.0, size=(n_real, S)))
    return crear_ensemble(alpha, seed)


def tasa_literal(g, Pt, N, m_c, mu=MU, sigma_th2=SIGMA_TH2):
    """Cota de tasa escrita término a término, sin reordenar."""
    var_s = 1 + 2 * m_c
    var_0 = m_c + m_c ** 2 + sigma_th2
    x = mu * g * Pt
    return (0.5 * math.log(x / (N * var_s))
            + 0.5 * math.log(1 + 2 * N * var_s / x)
            - x / (N * var_s) - 1
            + math.sqrt(x * (x + 2 * N * var_s)) / (N * var_s)
            - math.sqrt(math.pi * N * var_0 / (2 * x * var_s)))


# ================================
# TASAS
# ================================
class PowerUnitsTests(SimpleTestCase):
    def test_conversions(self):
        self.assertAlmostEqual(float(dbm_to_watts(0.0)), 1e-3)
        self.assertAlmostEqual(float(dbm_to_watts(-10.0)), 1e-4)
        self.assertAlmostEqual(float(watts_to_dbm(1e-2)), 10.0)
        with self.assertRaises(ErrorDominio):
            watts_to_dbm(0.0)

    def test_link_budget(self):
        budget = LinkBudget(Pt=1e-3, tx_set=[0, -10, 10])
        self.assertEqual(budget.N, 3)
        self.assertEqual(budget.tx_set, (0, -10, 10))
        self.assertEqual(budget.with_power(2e-3).Pt, 2e-3)
        with self.assertRaises(ErrorDimension):
            LinkBudget(Pt=1e-3, tx_set=[])
        with self.assertRaises(ErrorDimension):
            LinkBudget(Pt=1e-3, tx_set=[1, 1])
        with self.assertRaises(ErrorDominio):
            LinkBudget(Pt=-1.0, tx_set=[0])


class ConditionalRateTests(SimpleTestCase):
    def setUp(self):
        self.ensemble = ensemble_con_fugas(max_state=10, seed=1)
        self.X = mean_crosstalk(self.ensemble)
        self.budget = LinkBudget(Pt=float(dbm_to_watts(-10.0)), tx_set=(0, -10, 10))

    def test_no_signal(self):
        self.assertEqual(conditional_rate(0.0, self.budget, 3.0), 0.0)
        self.assertEqual(conditional_rate(0.8, self.budget.with_power(0.0), 0.0), 0.0)
        with self.assertRaises(ErrorDominio):
            conditional_rate(-0.1, self.budget, 0.0)

    def test_matches_literal_formula(self):
        m_c = interference_count(0, self.budget, self.X)
        esperado = tasa_literal(0.8, self.budget.Pt, 3, m_c)
        self.assertGreater(esperado, 0)
        self.assertAlmostEqual(conditional_rate(0.8, self.budget, m_c) / esperado, 1.0, places=9)

    def test_monotone_in_gain(self):
        m_c = interference_count(0, self.budget, self.X)
        tasas = conditional_rate(np.linspace(0, 1, 201), self.budget, m_c)
        self.assertTrue(np.all(np.diff(tasas) >= -1e-12))

    def test_interference_stats_scale(self):
        m_c = interference_count(0, self.budget, self.X)
        directo = MU * self.budget.Pt / 3 * (self.X.loc[-10, 0] + self.X.loc[10, 0])
        self.assertAlmostEqual(m_c / directo, 1.0, places=12)

    def test_converges_to_asymptotic_rate(self):
        rng = np.random.default_rng(0)
        ganancias = rng.uniform(0.1, 1.0, size=100)
        gamma = asymptotic_sir(0, self.budget.tx_set, ganancias, self.X)
        limite = asymptotic_rate(gamma)
        barrido = dbm_to_watts(np.arange(-30.0, 31.0, 10.0))
        previa = None
        for Pt in barrido:
            budget = self.budget.with_power(Pt)
            tasas = conditional_rate(ganancias, budget, interference_count(0, budget, self.X))
            if previa is not None:
                self.assertTrue(np.all(np.abs(tasas - limite) <= np.abs(previa - limite) + 1e-9))
            previa = tasas
        np.testing.assert_allclose(previa, limite, rtol=1e-3, atol=1e-3)


class AsymptoticRateTests(SimpleTestCase):
    def test_domain(self):
        with self.assertRaises(ErrorDominio):
            asymptotic_rate(0.0)
        with self.assertRaises(ErrorDominio):
            asymptotic_rate([1.0, -2.0])

    def test_small_gamma_clamped(self):
        self.assertEqual(asymptotic_rate(0.01), 0.0)

    def test_large_gamma(self):
        gamma = 1e6
        self.assertLess(abs(asymptotic_rate(gamma) - 0.5 * math.log(gamma / 2)), 2e-3)

    def test_literal_formula(self):
        g = 100.0
        literal = (0.5 * math.log(g / 2 + 2) - g / 2 - 1
                   + math.sqrt(g * (g + 4)) / 2 - math.sqrt(math.pi / (4 * g)))
        self.assertAlmostEqual(asymptotic_rate(g), literal, places=10)

    def test_monotone_where_positive(self):
        gamma = np.logspace(0, 6, 500)
        tasas = asymptotic_rate(gamma)
        positivas = tasas[tasas > 0]
        self.assertTrue(np.all(np.diff(positivas) > 0))

    def test_sir(self):
        X = mean_crosstalk(ensemble_con_fugas(max_state=10))
        tx = (0, -10, 10)
        denominador = X.loc[-10, 0] + X.loc[10, 0]
        self.assertAlmostEqual(asymptotic_sir(0, tx, denominador, X), 1.0)
        self.assertAlmostEqual(asymptotic_sir(0, tx, 0.4, X) * 2, asymptotic_sir(0, tx, 0.8, X))
        with self.assertRaises(ErrorDominio):
            asymptotic_sir(0, (0,), 0.5, X)
        with self.assertRaises(ErrorDominio):
            asymptotic_sir(3, tx, 0.5, X)


class AverageRateTests(SimpleTestCase):
    def setUp(self):
        self.ensemble = ensemble_con_fugas(seed=2)
        self.budget = LinkBudget(Pt=1e-3, tx_set=(-5, 0, 5))

    def test_single_vacuum_mode(self):
        vacio = crear_ensemble(np.eye(3)[None])
        budget = LinkBudget(Pt=1e-4, tx_set=(0,))
        tabla = average_aar(vacio, budget)
        self.assertAlmostEqual(tabla["aar_nats"].iloc[0], conditional_rate(1.0, budget, 0.0), places=12)

    def test_columns_and_monotonicity(self):
        barrido = dbm_to_watts(np.arange(-20.0, 21.0, 5.0))
        tabla = average_aar(self.ensemble, self.budget, barrido)
        columnas = ["rate_-5", "rate_+0", "rate_+5"]
        np.testing.assert_allclose(tabla[columnas].sum(axis=1), tabla["aar_nats"], rtol=1e-12)
        self.assertTrue(np.all(np.diff(tabla["aar_nats"].to_numpy()) >= -1e-12))
        np.testing.assert_allclose(tabla["Pt_dBm"], np.arange(-20.0, 21.0, 5.0), atol=1e-9)

    def test_high_power_tail_approaches_asymptote(self):
        tabla = average_aar(self.ensemble, self.budget, [10.0])
        asintotica = average_asymptotic_aar(self.ensemble, self.budget.tx_set)
        self.assertAlmostEqual(tabla["aar_nats"].iloc[0] / asintotica, 1.0, delta=1e-3)

    def test_permutation_invariance(self):
        permutado = crear_ensemble(self.ensemble.alpha[::-1])
        a = average_aar(self.ensemble, self.budget)["aar_nats"].iloc[0]
        b = average_aar(permutado, self.budget)["aar_nats"].iloc[0]
        self.assertAlmostEqual(a, b, places=10)

    def test_asymptotic_single_mode_is_unbounded(self):
        self.assertEqual(average_asymptotic_aar(self.ensemble, (0,)), math.inf)

    def test_asymptotic_concatenation(self):
        doble = concatenate_ensembles(self.ensemble, self.ensemble)
        self.assertAlmostEqual(average_asymptotic_aar(doble, (-5, 0, 5)),
                               average_asymptotic_aar(self.ensemble, (-5, 0, 5)), places=10)

    def test_additivity_of_isolated_groups(self):
        rng = np.random.default_rng(3)
        alpha = np.zeros((200, 5, 5), dtype=complex)
        for grupo in ([0, 1], [3, 4]):
            for k in grupo:
                for i in grupo:
                    escala = 1.0 if k == i else 0.05
                    alpha[:, k, i] = np.sqrt(escala * rng.uniform(0.2, 1.0, 200))
        alpha[:, 2, 2] = 1.0
        ens = crear_ensemble(alpha)
        union = average_asymptotic_aar(ens, (-2, -1, 1, 2))
        partes = average_asymptotic_aar(ens, (-2, -1)) + average_asymptotic_aar(ens, (1, 2))
        self.assertAlmostEqual(union, partes, delta=1e-9)

    def test_unknown_state(self):
        with self.assertRaises(ErrorDominio):
            average_aar(self.ensemble, LinkBudget(Pt=1e-3, tx_set=(0, 7)))


class HalfNormalTests(SimpleTestCase):
    def test_power_constraint(self):
        rng = np.random.default_rng(11)
        Pt, N = 2e-3, 4
        rho = sample_half_normal(rng, Pt, N, size=1_000_000)
        self.assertTrue(np.all(rho >= 0))
        sigma = math.sqrt(2.0 / rho.size) * Pt / N
        self.assertLess(abs(np.mean(rho ** 2) - Pt / N), 3 * sigma)

    def test_distribution(self):
        rng = np.random.default_rng(12)
        Pt, N = 1e-3, 3
        rho = sample_half_normal(rng, Pt, N, size=100_000)
        ks = stats.kstest(rho, stats.halfnorm(scale=math.sqrt(Pt / N)).cdf).statistic
        self.assertLess(ks, 0.01)

    def test_domain(self):
        with self.assertRaises(ErrorDominio):
            sample_half_normal(np.random.default_rng(0), 0.0, 3)


# ================================
# DIVERSIDAD
# ================================
def instancia_aleatoria(rng, M=5):
    g = rng.uniform(0.0, 1.0, M)
    var_s = rng.uniform(1.0, 50.0, M)
    var_0 = rng.uniform(1.0, 1e4, M)
    return g, var_s, var_0, rng.uniform(10.0, 1e4)


class BranchNoiseTests(SimpleTestCase):
    def setUp(self):
        self.X = mean_crosstalk(ensemble_con_fugas(max_state=10, seed=4))

    def test_single_mode(self):
        self.assertEqual(branch_noise(0, 1, (0,), self.X, 1e-3, 1, MU, 7.0), (0.0, 1.0, 7.0))

    def test_zero_power(self):
        m_c, _, _ = branch_noise(0, 1, (0, -10, 10), self.X, 0.0, 3, MU, 7.0)
        self.assertEqual(m_c, 0.0)

    def test_adjacent_branch_carries_more_interference(self):
        tx = (0, -10, 10)
        cerca, _, _ = branch_noise(0, 9, tx, self.X, 1e-3, 3, MU, SIGMA_TH2)
        lejos, _, _ = branch_noise(0, 4, tx, self.X, 1e-3, 3, MU, SIGMA_TH2)
        self.assertGreater(cerca, lejos)

    def test_variances(self):
        m_c, var_s, var_0 = branch_noise(0, 9, (0, -10, 10), self.X, 1e-3, 3, MU, SIGMA_TH2)
        self.assertEqual((var_s, var_0), noise_variances(m_c, SIGMA_TH2))

    def test_errors(self):
        with self.assertRaises(ErrorDominio):
            branch_noise(5, 0, (0, -10, 10), self.X, 1e-3, 3, MU, 0.0)
        with self.assertRaises(ErrorDimension):
            branch_noise(0, 0, (0, -10, 10), self.X, 1e-3, 2, MU, 0.0)


class CombinerTests(SimpleTestCase):
    def test_mrc_is_optimal(self):
        rng = np.random.default_rng(20)
        for _ in range(100):
            g, var_s, var_0, a = instancia_aleatoria(rng)
            optimo = mrc_sinr(g, var_s, var_0, a)
            betas = rng.uniform(0.0, 1.0, size=(10_000, 5))
            self.assertTrue(np.all(combiner_sinr(betas, g, var_s, var_0, a) <= optimo * (1 + 1e-9)))
            beta = mrc_coefficients(g, var_s, var_0, a)
            self.assertAlmostEqual(combiner_sinr(beta, g, var_s, var_0, a) / optimo, 1.0, places=12)

    def test_scale_invariance(self):
        g, var_s, var_0, a = instancia_aleatoria(np.random.default_rng(21))
        beta = np.random.default_rng(22).uniform(0.1, 1.0, 5)
        base = combiner_sinr(beta, g, var_s, var_0, a)
        self.assertEqual(combiner_sinr(4.0 * beta, g, var_s, var_0, a), base)
        self.assertAlmostEqual(combiner_sinr(3.7 * beta, g, var_s, var_0, a) / base, 1.0, places=13)

    def test_single_branch(self):
        g, var_s, var_0, a = 0.6, 9.0, 120.0, 500.0
        esperado = a * g ** 2 / (g * var_s + var_0 / a)
        self.assertAlmostEqual(combiner_sinr([2.5], [g], [var_s], [var_0], a) / esperado, 1.0, places=12)
        self.assertAlmostEqual(mrc_sinr([g], [var_s], [var_0], a) / esperado, 1.0, places=12)

    def test_zero_fading_branch(self):
        beta = mrc_coefficients([0.5, 0.0], [3.0, 3.0], [10.0, 10.0], 100.0)
        self.assertEqual(beta[1], 0.0)
        self.assertGreater(beta[0], 0.0)

    def test_identical_branches(self):
        uno = mrc_sinr([0.4], [5.0], [30.0], 200.0)
        self.assertAlmostEqual(mrc_sinr([0.4, 0.4], [5.0, 5.0], [30.0, 30.0], 200.0) / uno, 2.0, places=12)
        egc = [combiner_sinr(egc_coefficients([0.4] * M), [0.4] * M, [5.0] * M, [30.0] * M, 200.0)
               for M in (1, 2, 3, 4)]
        np.testing.assert_allclose(np.array(egc) / egc[0], [1, 2, 3, 4], rtol=1e-12)

    def test_superset_and_egc(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            g, var_s, var_0, a = instancia_aleatoria(rng, M=6)
            self.assertLessEqual(mrc_sinr(g[:5], var_s[:5], var_0[:5], a), mrc_sinr(g, var_s, var_0, a))
            egc = combiner_sinr(egc_coefficients(g), g, var_s, var_0, a)
            self.assertLessEqual(egc, mrc_sinr(g, var_s, var_0, a) * (1 + 1e-12))

    def test_degenerate(self):
        with self.assertRaises(ErrorDominio):
            combiner_sinr([0.0, 0.0], [0.5, 0.5], [1.0, 1.0], [1.0, 1.0], 10.0)
        with self.assertRaises(ErrorDominio):
            mrc_sinr([0.5], [1.0], [1.0], 0.0)


class AsymptoticSinrTests(SimpleTestCase):
    def setUp(self):
        self.ensemble = ensemble_con_fugas(max_state=10, seed=5)
        self.X = mean_crosstalk(self.ensemble)
        self.tx = (0, -10, 10)
        self.ramas = (-10, -9, -8, -7, -6)

    def test_limit_of_finite_power(self):
        g = branch_fadings(self.ensemble, -10, self.ramas)
        budget = LinkBudget(Pt=10.0, tx_set=self.tx)
        config = DiversityConfig(-10, self.ramas)
        finita = sinr_samples(self.ensemble, config, budget, self.X)
        limite = asymptotic_sinr(-10, self.ramas, self.tx, g, self.X)
        np.testing.assert_allclose(finita, limite, rtol=1e-3)

    def test_zero_fading_branch(self):
        con = asymptotic_sinr(-10, (-10, -9), self.tx, [0.5, 0.0], self.X)
        sin = asymptotic_sinr(-10, (-10,), self.tx, [0.5], self.X)
        self.assertEqual(con, sin)

    def test_superset_dominates(self):
        config = DiversityConfig(-10, self.ramas)
        solo = DiversityConfig(-10, (-10,))
        con = asymptotic_sinr_samples(self.ensemble, config, self.tx, self.X)
        sin = asymptotic_sinr_samples(self.ensemble, solo, self.tx, self.X)
        self.assertTrue(np.all(con >= sin))
        self.assertTrue(np.all(con > sin))

    def test_asymptotic_coefficients_maximize(self):
        g = branch_fadings(self.ensemble, -10, self.ramas)[0]
        S = np.array([self.X.loc[[0, 10], j].sum() for j in self.ramas])
        beta = asymptotic_mrc_coefficients(g, S)
        combinada = np.sum(beta * g) ** 2 / np.sum(beta ** 2 * (2 * g * S + S ** 2))
        self.assertAlmostEqual(combinada / asymptotic_sinr(-10, self.ramas, self.tx, g, self.X), 1.0, places=12)

    def test_single_mode_undefined(self):
        with self.assertRaises(ErrorDominio):
            asymptotic_sinr(0, (0, 1), (0,), [0.5, 0.1], self.X)

    def test_egc_below_mrc(self):
        mrc = asymptotic_sinr_samples(self.ensemble, DiversityConfig(-10, self.ramas), self.tx, self.X)
        egc = asymptotic_sinr_samples(self.ensemble, DiversityConfig(-10, self.ramas, CombiningRule.EGC),
                                      self.tx, self.X)
        self.assertTrue(np.all(egc <= mrc * (1 + 1e-12)))


class FadingStatisticsTests(SimpleTestCase):
    def test_eff(self):
        self.assertEqual(eff(np.full(10, 3.0)), -math.inf)
        exponencial = np.random.default_rng(30).exponential(2.0, size=100_000)
        self.assertAlmostEqual(eff(exponencial), 0.0, delta=0.1)
        with self.assertRaises(ErrorEstadistico):
            eff([1.0])
        with self.assertRaises(ErrorEstadistico):
            eff([1.0, -1.0])

    def test_outage_probability(self):
        zeta = np.random.default_rng(31).exponential(1.0, size=1000)
        self.assertEqual(outage_probability(zeta, 0.0), 0.0)
        self.assertEqual(outage_probability(zeta, math.inf), 1.0)
        umbrales = np.linspace(0, 5, 50)
        p = outage_probability(zeta, umbrales)
        self.assertTrue(np.all(np.diff(p) >= 0))
        for th in (0.1, 0.5, 2.0, zeta[17]):
            self.assertEqual(outage_probability(zeta, th), np.count_nonzero(zeta < th) / zeta.size)
        with self.assertRaises(ErrorEstadistico):
            outage_probability([], 1.0)

    def test_epsilon_outage_rate(self):
        rng = np.random.default_rng(32)
        tasas = rng.gamma(2.0, 1.5, size=2000)
        for epsilon in (0.01, 0.1, 0.5):
            v = epsilon_outage_rate(tasas, epsilon)
            self.assertLess(np.count_nonzero(tasas < v) / tasas.size, epsilon)
            siguiente = np.min(tasas[tasas > v])
            self.assertGreaterEqual(np.count_nonzero(tasas < siguiente) / tasas.size, epsilon)
        self.assertLessEqual(epsilon_outage_rate(tasas, 0.01), epsilon_outage_rate(tasas, 0.1))
        self.assertEqual(epsilon_outage_rate(tasas, 0.9999), tasas.max())
        self.assertEqual(epsilon_outage_rate(np.full(50, 2.5), 0.3), 2.5)
        impares = np.arange(1.0, 102.0)
        self.assertEqual(epsilon_outage_rate(impares, 0.5), np.median(impares))
        pares = np.arange(1.0, 101.0)
        self.assertEqual(epsilon_outage_rate(pares, 0.5), 50.0)
        self.assertLess(epsilon_outage_rate(pares, 0.5), np.median(pares))

    def test_epsilon_domain(self):
        with self.assertRaises(ErrorDominio):
            epsilon_outage_rate([1.0, 2.0], 0.0)
        with self.assertRaises(ErrorDominio):
            epsilon_outage_rate([1.0, 2.0], 1.0)


class DiversityRateTests(SimpleTestCase):
    def setUp(self):
        self.ensemble = ensemble_con_fugas(max_state=10, seed=6)
        self.X = mean_crosstalk(self.ensemble)
        self.budget = LinkBudget(Pt=float(dbm_to_watts(-4.0)), tx_set=(0, -10, 10))

    def test_single_branch_reduces_to_conditional_rate(self):
        m_c, var_s, var_0 = branch_noise(10, 10, self.budget.tx_set, self.X, self.budget.Pt, 3, MU, SIGMA_TH2)
        directa = conditional_rate(0.7, self.budget, m_c)
        combinada = diversity_conditional_rate([0.7], [1.0], self.budget, [var_s], [var_0])
        self.assertAlmostEqual(combinada / directa, 1.0, places=12)

    def test_zero_branch_leaves_rate(self):
        base = diversity_conditional_rate([0.7, 0.1], [1.0, 0.5], self.budget, [20.0, 30.0], [1e3, 2e3])
        extra = diversity_conditional_rate([0.7, 0.1, 0.0], [1.0, 0.5, 0.0], self.budget,
                                           [20.0, 30.0, 40.0], [1e3, 2e3, 3e3])
        self.assertAlmostEqual(base, extra, places=12)

    def test_degenerate(self):
        with self.assertRaises(ErrorDominio):
            diversity_conditional_rate([0.0], [1.0], self.budget, [1.0], [1.0])

    def test_rate_samples(self):
        solo = rate_samples(self.ensemble, DiversityConfig(10, (10,)), self.budget, self.X)
        g = np.abs(self.ensemble.alpha[:, self.ensemble.index_of(10), self.ensemble.index_of(10)]) ** 2
        m_c = interference_count(10, self.budget, self.X)
        np.testing.assert_allclose(solo, conditional_rate(g, self.budget, m_c), rtol=1e-12, atol=1e-12)
        con = rate_samples(self.ensemble, DiversityConfig(10, (6, 7, 8, 9, 10)), self.budget, self.X)
        self.assertEqual(con.shape, (self.ensemble.n_realizations,))
        self.assertTrue(np.all(con >= 0))

    def test_outage_curve(self):
        barrido = dbm_to_watts([-10.0, -4.0, 0.0, 5.0])
        tabla = outage_curve(self.ensemble, 10, (6, 7, 8, 9, 10), self.budget, barrido)
        self.assertEqual(list(tabla.columns),
                         ["Pt_dBm", "p_out_no_div", "p_out_div", "rate_out_no_div", "rate_out_div"])
        self.assertTrue(np.all(tabla["p_out_div"] <= tabla["p_out_no_div"]))
        mediana = outage_curve(self.ensemble, 10, (10,), self.budget, barrido[:1], epsilon=0.5)
        tasas = rate_samples(self.ensemble, DiversityConfig(10, (10,)), self.budget.with_power(barrido[0]))
        self.assertEqual(mediana["rate_out_no_div"].iloc[0], epsilon_outage_rate(tasas, 0.5))

    def test_combine_single_realization(self):
        config = DiversityConfig(10, (8, 9, 10))
        tasas = rate_samples(self.ensemble, config, self.budget, self.X)
        g = branch_fadings(self.ensemble, 10, (8, 9, 10))
        for r in (0, 17, self.ensemble.n_realizations - 1):
            salida = combine(self.ensemble, config, self.budget, r, self.X)
            self.assertIsInstance(salida, CombinerOutput)
            self.assertEqual(salida.beta.shape, (3,))
            self.assertAlmostEqual(salida.rate, tasas[r], places=10)
            var_s, var_0 = branch_noise_arrays(10, (8, 9, 10), self.budget, self.X)
            a = self.budget.mu * self.budget.Pt / self.budget.N
            self.assertLessEqual(salida.sinr, mrc_sinr(g[r], var_s, var_0, a) * (1 + 1e-12))

    def test_combine_egc_matches_sinr_samples(self):
        config = DiversityConfig(10, (9, 10), CombiningRule.EGC)
        zeta = sinr_samples(self.ensemble, config, self.budget, self.X)
        salida = combine(self.ensemble, config, self.budget, 5, self.X)
        np.testing.assert_array_equal(salida.beta, [1.0, 1.0])
        self.assertAlmostEqual(salida.sinr / zeta[5], 1.0, places=12)

    def test_combine_realization_range(self):
        with self.assertRaises(ErrorDominio):
            combine(self.ensemble, DiversityConfig(10, (10,)), self.budget, self.ensemble.n_realizations)
        with self.assertRaises(ErrorDominio):
            CombinerOutput(np.ones(2), -1.0)

    def test_config_validation(self):
        with self.assertRaises(ErrorDimension):
            DiversityConfig(0, ())
        with self.assertRaises(ErrorDimension):
            DiversityConfig(0, (0, 0))
        self.assertIs(DiversityConfig(0, (0,), "EGC").rule, CombiningRule.EGC)


# ================================
# OPTIMIZADOR
# ================================
class TransmitSetTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ensemble = ensemble_con_fugas(n_real=200, max_state=3, seed=7)

    def test_exhaustive_optimum(self):
        for N in (2, 3, 4):
            conjunto = optimal_transmit_set(self.ensemble, N)
            valores = {c: average_asymptotic_aar(self.ensemble, c)
                       for c in itertools.combinations(self.ensemble.states, N)}
            self.assertEqual(valores[conjunto], max(valores.values()))

    def test_better_than_random_subsets(self):
        rng = np.random.default_rng(8)
        conjunto = optimal_transmit_set(self.ensemble, 3)
        optimo = average_asymptotic_aar(self.ensemble, conjunto)
        for _ in range(100):
            azar = tuple(sorted(rng.choice(self.ensemble.states, size=3, replace=False)))
            self.assertGreaterEqual(optimo, average_asymptotic_aar(self.ensemble, azar))

    def test_full_set_and_range(self):
        self.assertEqual(optimal_transmit_set(self.ensemble, 7), self.ensemble.states)
        with self.assertRaises(ErrorDominio):
            optimal_transmit_set(self.ensemble, 0)
        with self.assertRaises(ErrorDominio):
            optimal_transmit_set(self.ensemble, 8)

    def test_ties_pick_smallest_set(self):
        alpha = np.full((5, 7, 7), 0.25, dtype=complex)
        alpha[:, np.arange(7), np.arange(7)] = 0.5
        uniforme = crear_ensemble(alpha)
        self.assertEqual(optimal_transmit_set(uniforme, 3), (-3, -2, -1))
        self.assertEqual(optimal_transmit_set(uniforme, 3, n_jobs=2), (-3, -2, -1))

    def test_permutation_invariance(self):
        permutado = crear_ensemble(self.ensemble.alpha[::-1])
        self.assertEqual(optimal_transmit_set(self.ensemble, 3), optimal_transmit_set(permutado, 3))

    def test_mode_count(self):
        self.assertEqual(optimal_mode_count(self.ensemble, [1]), (1, (-3,)))
        N, conjunto = optimal_mode_count(self.ensemble, range(1, 5))
        tabla = optimal_sets_by_count(self.ensemble, range(2, 5))
        self.assertEqual(N, int(tabla["objective_nats"].idxmax()))
        self.assertEqual(conjunto, tabla.loc[N, "set"])
        self.assertEqual(len(conjunto), N)


class DiversitySetTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ensemble = ensemble_con_fugas(n_real=300, max_state=10, seed=9)
        cls.tx = (0, -10, 10)

    def test_single_branch(self):
        self.assertEqual(best_diversity_set(self.ensemble, -10, self.tx, max_size=1), (-10,))

    def test_record_is_non_increasing(self):
        registro = diversity_search_record(self.ensemble, -10, self.tx, max_size=5)
        self.assertTrue(np.all(np.diff(registro["eff_db"].to_numpy()) <= 0))
        for M, fila in registro.iterrows():
            self.assertIn(-10, fila["best_set"])
            self.assertLessEqual(len(fila["best_set"]), M)
        self.assertIn(-10, best_diversity_set(self.ensemble, -10, self.tx, max_size=5))

    def test_window_against_unrestricted(self):
        ventana = diversity_search_record(self.ensemble, 0, self.tx, max_size=3)
        libre = diversity_search_record(self.ensemble, 0, self.tx, max_size=3, window=None)
        self.assertTrue(np.all(libre["eff_db"].to_numpy() <= ventana["eff_db"].to_numpy()))

    def test_saturation_rule(self):
        registro = pd.DataFrame({
            "M": [1, 2, 3, 4, 5],
            "best_set": [(0,), (0, 1), (-1, 0, 1), (-2, -1, 0, 1), (-2, -1, 0, 1, 2)],
            "eff_db": [0.0, -3.0, -5.0, -5.1, -5.2],
        }).set_index("M")
        elegido = best_diversity_set(self.ensemble, 0, self.tx, record=registro)
        self.assertEqual(elegido, (-1, 0, 1))
        self.assertEqual(best_diversity_set(self.ensemble, 0, self.tx, saturation_delta=0.05,
                                            record=registro), (-2, -1, 0, 1, 2))

    def test_channel_must_be_transmitted(self):
        with self.assertRaises(ErrorDominio):
            diversity_search_record(self.ensemble, 3, self.tx)


class OutageSlopeTests(SimpleTestCase):
    def setUp(self):
        pt = np.arange(-20.0, 1.0, 1.0)
        self.curva = pd.Series(10 ** (-(pt + 20) / 10 - 0.3), index=pt)

    def test_identical_curves(self):
        self.assertAlmostEqual(normalized_outage_slope(self.curva, self.curva, -10.0), 1.0)

    def test_squared_curve_doubles_slope(self):
        self.assertAlmostEqual(normalized_outage_slope(self.curva ** 2, self.curva, -10.0), 2.0)
        self.assertAlmostEqual(normalized_outage_slope(self.curva ** 2, self.curva, -10.5), 2.0)

    def test_zero_outage(self):
        nula = self.curva.copy()
        nula.loc[-9.0] = 0.0
        with self.assertRaises(ErrorEstadistico):
            normalized_outage_slope(nula, self.curva, -10.0)

    def test_out_of_range(self):
        with self.assertRaises(ErrorDominio):
            normalized_outage_slope(self.curva, self.curva, 0.0)


# ================================
# ENSEMBLES DE REFERENCIA (lentas)
# ================================
TX_LEJANOS = (-10, 0, 10)
TX_SIETE = (-10, -5, -2, 0, 2, 5, 10)


def _presupuesto(ensemble, Pt_dbm, tx_set):
    return LinkBudget(float(dbm_to_watts(Pt_dbm)), tx_set, ensemble.config.to_detection())


def _eff_del_conjunto(registro, conjunto):
    return next(fila["eff_db"] for _, fila in registro.iterrows() if fila["best_set"] == conjunto)


@unittest.skipUnless(SLOW, "MODEFLUX_SLOW_TESTS=1 para pruebas estadísticas largas")
class ReferenceTransmitSetTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.debil = ensemble_de_referencia(1e-15)
        cls.fuerte = ensemble_de_referencia(6e-15)
        cls.tabla_debil = optimal_sets_by_count(cls.debil, range(1, 11), n_jobs=-1)
        cls.tabla_fuerte = optimal_sets_by_count(cls.fuerte, range(1, 11), n_jobs=-1)

    def test_three_modes_take_the_far_states(self):
        self.assertEqual(self.tabla_debil.loc[3, "set"], TX_LEJANOS)
        self.assertEqual(self.tabla_fuerte.loc[3, "set"], TX_LEJANOS)

    def test_optimal_mode_count(self):
        N_debil, _ = optimal_mode_count(self.debil, range(1, 11), tabla=self.tabla_debil)
        N_fuerte, _ = optimal_mode_count(self.fuerte, range(1, 11), tabla=self.tabla_fuerte)
        self.assertLessEqual(abs(N_debil - 7), 1)
        self.assertLessEqual(abs(N_fuerte - 3), 1)

    def test_seven_mode_search_beats_reference_set(self):
        referencia = average_asymptotic_aar(self.debil, TX_SIETE)
        self.assertGreaterEqual(self.tabla_debil.loc[7, "objective_nats"], referencia - 1e-9)

    def test_asymptotic_aar_levels(self):
        tres = average_asymptotic_aar(self.debil, TX_LEJANOS)
        siete = self.tabla_debil.loc[7, "objective_nats"]
        nueve = self.tabla_debil.loc[9, "objective_nats"]
        self.assertAlmostEqual(tres, 16.6, delta=0.15 * 16.6)
        self.assertAlmostEqual(siete, 17.8, delta=0.15 * 17.8)
        self.assertGreater(siete, nueve)
        self.assertGreater(nueve, tres)

    def test_finite_power_saturates_at_asymptote(self):
        budget = _presupuesto(self.debil, 40.0, TX_LEJANOS)
        curva = average_aar(self.debil, budget, dbm_to_watts([20.0, 40.0]))
        asintotica = average_asymptotic_aar(self.debil, TX_LEJANOS)
        self.assertLessEqual(curva["aar_nats"].iloc[-1], asintotica * (1 + 1e-6))
        self.assertGreaterEqual(curva["aar_nats"].iloc[-1], curva["aar_nats"].iloc[0])


@unittest.skipUnless(SLOW, "MODEFLUX_SLOW_TESTS=1 para pruebas estadísticas largas")
class ReferenceDiversityTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.debil = ensemble_de_referencia(1e-15)
        cls.fuerte = ensemble_de_referencia(6e-15)

    def test_edge_channel_fading_figure(self):
        registro = diversity_search_record(self.fuerte, -10, TX_LEJANOS)
        self.assertAlmostEqual(registro.loc[1, "eff_db"], -1.14, delta=1.5)
        ramas = best_diversity_set(self.fuerte, -10, TX_LEJANOS, record=registro)
        saturada = _eff_del_conjunto(registro, ramas)
        self.assertAlmostEqual(saturada, -9.3, delta=1.5)
        self.assertIn(-10, ramas)
        self.assertTrue(np.all(np.diff(sorted(ramas)) == 1))
        libre = diversity_search_record(self.fuerte, -10, TX_LEJANOS, max_size=len(ramas), window=None)
        self.assertLessEqual(saturada, libre.loc[len(ramas), "eff_db"] + 0.5)

    def test_outage_strong_turbulence(self):
        for i in (-10, 10):
            with self.subTest(i=i):
                ramas = best_diversity_set(self.fuerte, i, TX_LEJANOS)
                curva = outage_curve(self.fuerte, i, ramas, _presupuesto(self.fuerte, -4.0, TX_LEJANOS),
                                     dbm_to_watts([-4.0]))
                self.assertAlmostEqual(curva.loc[0, "p_out_no_div"], 0.27, delta=0.07)
                self.assertLessEqual(curva.loc[0, "p_out_div"], 5e-3)

    def test_outage_weak_turbulence(self):
        for i in (-5, 5):
            with self.subTest(i=i):
                ramas = best_diversity_set(self.debil, i, TX_SIETE)
                curva = outage_curve(self.debil, i, ramas, _presupuesto(self.debil, -10.0, TX_SIETE),
                                     dbm_to_watts([-10.0]))
                self.assertAlmostEqual(curva.loc[0, "p_out_no_div"], 0.04, delta=0.02)
                self.assertLessEqual(curva.loc[0, "p_out_div"], 5e-3)

    def test_outage_rate_with_diversity(self):
        for i in (-10, 10):
            with self.subTest(i=i):
                ramas = best_diversity_set(self.fuerte, i, TX_LEJANOS)
                curva = outage_curve(self.fuerte, i, ramas, _presupuesto(self.fuerte, 5.0, TX_LEJANOS),
                                     dbm_to_watts([5.0]), epsilon=0.01)
                self.assertLess(curva.loc[0, "rate_out_no_div"], 0.5)
                self.assertGreater(curva.loc[0, "rate_out_div"], 3.0)
