import os
import tempfile
import unittest
from dataclasses import replace
from functools import lru_cache
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings
from django.test import SimpleTestCase
from scipy import stats

from canal.deteccion import (
    DetectionParams,
    PhotonStats,
    count_moments,
    interference_stats,
    laguerre_cf,
    laguerre_pmf,
    noise_variances,
    photon_conversion_mu,
    poisson_pmf,
    sample_detected_count,
    thermal_variance,
)
from canal.ensemble import (
    ChannelEnsemble,
    channel_matrix,
    compute_coupling_matrix,
    concatenate_ensembles,
    correlation_coefficient,
    correlation_profile,
    fading_samples,
    mean_crosstalk,
    phase_uniformity_check,
    realization_rng,
    received_powers,
    run_ensemble,
)
from canal.persistencia import (
    HEADER_DTYPE,
    cache_is_current,
    load_ensemble,
    meta_path,
    obtener_ensemble,
    save_ensemble,
)
from core.configuracion import SimulationConfig, config_hash
from core.errores import (
    ErrorArchivoTruncado,
    ErrorConfiguracion,
    ErrorDimension,
    ErrorDominio,
    ErrorEstadistico,
    ErrorHashDistinto,
    ErrorPersistencia,
    ErrorVersion,
)
from core.paths import default_cache_path
from optica.modos import make_grid, mode_states
from optica.propagacion import PathConfig
from optica.turbulencia import TurbulenceParams

SLOW = os.getenv("MODEFLUX_SLOW_TESTS") == "1"


@lru_cache(maxsize=2)
def ensemble_de_referencia(cn2: float) -> ChannelEnsemble:
    """Configuración por defecto (2000 realizaciones) con el C_n² dado; reutiliza la caché de MODEFLUX_CACHE_DIR."""
    config = replace(SimulationConfig(), cn2_m_2_3=cn2)
    ensemble, _ = obtener_ensemble(config, default_cache_path(config), n_jobs=settings.MODEFLUX_N_JOBS)
    return ensemble

PARAMS = TurbulenceParams(cn2=1e-15, l0=0.005, L0=20.0)

# Configuración liviana para pruebas: grilla 256, 200 m, |ℓ| ≤ 3
CONFIG_RAPIDA = SimulationConfig(
    z_m=200.0, grid_n_points=256, max_state=3, realizations=3, cn2_m_2_3=6e-15, base_seed=7,
)


def ensemble_sintetico(alpha, states=None, seed=0):
    alpha = np.asarray(alpha, dtype=complex)
    states = states or tuple(range(-(alpha.shape[1] // 2), alpha.shape[1] // 2 + 1))
    return ChannelEnsemble(states=states, alpha=alpha, params=PARAMS, base_seed=seed,
                           config_hash="0" * 64)


def ensemble_aleatorio(n_real=50, n_states=5, seed=0):
    rng = np.random.default_rng(seed)
    alpha = 0.1 * (rng.standard_normal((n_real, n_states, n_states))
                   + 1j * rng.standard_normal((n_real, n_states, n_states)))
    idx = np.arange(n_states)
    alpha[:, idx, idx] += 0.8
    return ensemble_sintetico(alpha, seed=seed)


# ================================
# DETECCIÓN
# ================================
class ReceiverConstantsTests(SimpleTestCase):
    def test_photon_conversion(self):
        params = DetectionParams()
        self.assertAlmostEqual(photon_conversion_mu(params) / 4.28e9, 1.0, delta=2e-3)
        mitad = replace(params, eta=0.5)
        self.assertAlmostEqual(photon_conversion_mu(mitad), photon_conversion_mu(params) / 2)
        doble = replace(params, tau=2e-9)
        self.assertAlmostEqual(photon_conversion_mu(doble) / photon_conversion_mu(params), 2.0)

    def test_thermal_variance(self):
        params = DetectionParams()
        self.assertAlmostEqual(thermal_variance(params), 6.45e6, delta=0.01e6)
        doble = replace(params, load_resistance=100.0)
        self.assertAlmostEqual(thermal_variance(doble) / thermal_variance(params), 0.5)
        self.assertLess(thermal_variance(replace(params, temperature=1e-9)), 1e-4)

    def test_invalid_params(self):
        with self.assertRaises(ErrorConfiguracion):
            DetectionParams(eta=1.5)
        with self.assertRaises(ErrorConfiguracion):
            DetectionParams(tau=0.0)


class InterferenceTests(SimpleTestCase):
    def setUp(self):
        self.X = mean_crosstalk(ensemble_aleatorio(n_states=21, seed=3))

    def test_single_mode(self):
        self.assertEqual(interference_stats(0, [0], self.X, 1e-3, 1, 4e9), (0.0, 0.0))

    def test_zero_power(self):
        self.assertEqual(interference_stats(0, [-10, 0, 10], self.X, 0.0, 3, 4e9), (0.0, 0.0))

    def test_linear_in_power(self):
        tx = [-10, 0, 10]
        sigma_c2, m_c = interference_stats(0, tx, self.X, 1e-3, 3, 4e9)
        directo = 1e-3 / 6 * (self.X.loc[-10, 0] + self.X.loc[10, 0])
        self.assertAlmostEqual(sigma_c2 / directo, 1.0, places=12)
        self.assertEqual(m_c, 2 * 4e9 * sigma_c2)
        _, m_c_doble = interference_stats(0, tx, self.X, 2e-3, 3, 4e9)
        self.assertAlmostEqual(m_c_doble / m_c, 2.0, places=12)

    def test_state_not_transmitted(self):
        with self.assertRaises(ErrorDominio):
            interference_stats(5, [-10, 0, 10], self.X, 1e-3, 3, 4e9)


class LaguerreTests(SimpleTestCase):
    def _soporte(self, m_s, m_c):
        media, var = count_moments(m_s, m_c, 0.0)
        return np.arange(int(np.ceil(media + 40 * np.sqrt(var))) + 1)

    def test_normalization_lattice(self):
        for m_s in (0.1, 1.0, 10.0, 100.0):
            for m_c in (0.1, 1.0, 10.0, 100.0):
                total = laguerre_pmf(self._soporte(m_s, m_c), m_s, m_c).sum()
                self.assertAlmostEqual(total, 1.0, delta=1e-9, msg=f"m_s={m_s}, m_c={m_c}")

    def test_geometric_reduction(self):
        n = np.arange(60)
        m_c = 2.5
        geometrica = m_c ** n / (1 + m_c) ** (n + 1)
        np.testing.assert_allclose(laguerre_pmf(n, 0.0, m_c), geometrica, rtol=1e-12, atol=1e-12)

    def test_poisson_limit(self):
        n = np.arange(40)
        np.testing.assert_allclose(laguerre_pmf(n, 5.0, 1e-9), stats.poisson.pmf(n, 5.0), atol=1e-6)
        lejos = np.max(np.abs(laguerre_pmf(n, 5.0, 1e-3) - poisson_pmf(n, 5.0)))
        cerca = np.max(np.abs(laguerre_pmf(n, 5.0, 1e-6) - poisson_pmf(n, 5.0)))
        self.assertLess(cerca, 1e-6)
        self.assertLess(cerca, lejos)

    def test_mean_by_summation(self):
        n = self._soporte(3.0, 2.0)
        self.assertAlmostEqual(np.sum(n * laguerre_pmf(n, 3.0, 2.0)), 5.0, delta=1e-6)

    def test_domain(self):
        with self.assertRaises(ErrorDominio):
            laguerre_pmf(-1, 1.0, 1.0)
        with self.assertRaises(ErrorDominio):
            laguerre_pmf(3, 1.0, 0.0)

    def test_characteristic_function(self):
        self.assertEqual(laguerre_cf(0.0, 3.0, 2.0), 1.0)
        np.testing.assert_allclose(laguerre_cf(np.linspace(-3, 3, 13), 0.0, 0.0), 1.0)
        omegas = np.linspace(-np.pi, np.pi, 101)
        self.assertTrue(np.all(np.abs(laguerre_cf(omegas, 3.0, 2.0)) <= 1.0 + 1e-12))

    def test_characteristic_function_moments(self):
        m_s, m_c = 3.0, 2.0
        h = 1e-5
        media = (-1j * (laguerre_cf(h, m_s, m_c) - laguerre_cf(-h, m_s, m_c)) / (2 * h)).real
        h2 = 1e-4
        segundo = -(laguerre_cf(h2, m_s, m_c) - 2 * laguerre_cf(0.0, m_s, m_c)
                    + laguerre_cf(-h2, m_s, m_c)).real / h2 ** 2
        esperado_media, esperado_var = count_moments(m_s, m_c, 0.0)
        self.assertAlmostEqual(media / esperado_media, 1.0, delta=1e-6)
        self.assertAlmostEqual((segundo - media ** 2) / esperado_var, 1.0, delta=1e-6)


class MomentTests(SimpleTestCase):
    def test_count_moments(self):
        self.assertEqual(count_moments(0.0, 0.0, 0.0), (0.0, 0.0))
        self.assertEqual(count_moments(4.0, 0.0, 0.0), (4.0, 4.0))
        self.assertEqual(count_moments(3.0, 2.0, 10.0), (5.0, 31.0))

    def test_noise_variances(self):
        self.assertEqual(noise_variances(0.0, 7.0), (1.0, 7.0))
        self.assertEqual(noise_variances(2.0, 0.0), (5.0, 6.0))

    def test_gaussian_channel_consistency(self):
        """m_s + √m_s·Z_s + Z_0 tiene la varianza del conteo de Laguerre más ruido térmico."""
        rng = np.random.default_rng(5)
        for m_s, m_c, sigma_th2 in rng.uniform(0, 50, size=(10, 3)):
            var_zs, var_z0 = noise_variances(m_c, sigma_th2)
            _, var = count_moments(m_s, m_c, sigma_th2)
            self.assertAlmostEqual(m_s * var_zs + var_z0, var, places=9)

    def test_photon_stats(self):
        estadistica = PhotonStats(m_s=3.0, m_c=2.0, sigma_th2=10.0)
        self.assertEqual(estadistica.moments(), (5.0, 31.0))
        with self.assertRaises(ErrorDominio):
            PhotonStats(m_s=-1.0, m_c=0.0, sigma_th2=0.0)


class SamplerTests(SimpleTestCase):
    def test_all_zero(self):
        rng = np.random.default_rng(0)
        conteos = sample_detected_count(np.zeros(1000), np.zeros((1000, 3)), [0.0, 0.0], 1e9, 0.0, rng)
        np.testing.assert_array_equal(conteos, 0.0)

    def test_poisson_mean(self):
        rng = np.random.default_rng(1)
        n = 100_000
        conteos = sample_detected_count(np.ones(n), np.ones((n, 1)), np.zeros(0), 7.0, 0.0, rng)
        self.assertLess(abs(conteos.mean() - 7.0), 3 * np.sqrt(7.0 / n))

    def test_dimension_mismatch(self):
        with self.assertRaises(ErrorDimension):
            sample_detected_count(1.0, [1.0, 0.1], [1.0, 1.0], 1.0, 0.0, np.random.default_rng(0))

    def test_coherent_sum_matches_laguerre_moments(self):
        """Interferentes gaussianos complejos con fases uniformes: momentos del modelo."""
        rng = np.random.default_rng(2024)
        n = 100_000
        for _ in range(10):
            mu = rng.uniform(200, 2000)
            sigma_th2 = rng.uniform(0, 100)
            ganancia = rng.uniform(0.3, 1.0)
            varianzas = rng.uniform(1e-4, 1e-3, size=7)
            rho = np.sqrt(rng.uniform(0.5, 2.0, size=7))
            interferentes = np.sqrt(varianzas / 2) * (rng.standard_normal((n, 7))
                                                      + 1j * rng.standard_normal((n, 7)))
            fila = np.concatenate([np.full((n, 1), np.sqrt(ganancia)), interferentes], axis=1)
            conteos = sample_detected_count(np.ones(n), fila, rho, mu, sigma_th2, rng)

            m_s = mu * ganancia
            m_c = mu * np.sum(rho ** 2 * varianzas)
            media, var = count_moments(m_s, m_c, sigma_th2)
            centrados = conteos - conteos.mean()
            error_media = np.sqrt(var / n)
            error_var = np.sqrt((np.mean(centrados ** 4) - np.var(conteos) ** 2) / n)
            self.assertLess(abs(conteos.mean() - media), 4 * error_media)
            self.assertLess(abs(np.var(conteos, ddof=1) - var), 4 * error_var)


# ================================
# ENSEMBLE
# ================================
class CouplingMatrixTests(SimpleTestCase):
    def test_vacuum_is_identity(self):
        grid = make_grid(256, 0.5)
        path = PathConfig(1000.0, 50.0, 850e-9)
        vacio = TurbulenceParams(cn2=0.0, l0=0.005, L0=20.0)
        matriz = compute_coupling_matrix(path, vacio, grid, 0.016, mode_states(10),
                                         np.random.default_rng(0))
        ganancia = np.abs(matriz.alpha) ** 2
        self.assertTrue(np.all(np.diag(ganancia) > 0.999))
        self.assertLess(np.max(ganancia - np.diag(np.diag(ganancia))), 1e-3)

    def test_turbulent_realization_is_passive(self):
        matriz = compute_coupling_matrix(
            CONFIG_RAPIDA.to_path(), CONFIG_RAPIDA.to_turbulence(), CONFIG_RAPIDA.to_grid(),
            CONFIG_RAPIDA.w0_m, CONFIG_RAPIDA.states(), realization_rng(1, 0),
        )
        self.assertTrue(matriz.is_passive())
        self.assertLess(np.abs(matriz.alpha[3, 3]) ** 2, 1.0)


class RunEnsembleTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ensemble = run_ensemble(CONFIG_RAPIDA)

    def test_shape_and_metadata(self):
        self.assertEqual(self.ensemble.n_realizations, 3)
        self.assertEqual(self.ensemble.states, (-3, -2, -1, 0, 1, 2, 3))
        self.assertEqual(self.ensemble.config_hash, config_hash(CONFIG_RAPIDA))
        self.assertEqual(len(self.ensemble.realizations), 3)

    def test_deterministic(self):
        otra = run_ensemble(CONFIG_RAPIDA)
        self.assertTrue(self.ensemble.equals(otra))

    def test_independent_of_parallelism(self):
        paralelo = run_ensemble(CONFIG_RAPIDA, n_jobs=2)
        self.assertTrue(self.ensemble.equals(paralelo))

    def test_single_realization(self):
        uno = run_ensemble(CONFIG_RAPIDA, realizations=1)
        self.assertEqual(uno.n_realizations, 1)
        np.testing.assert_array_equal(uno.alpha[0], self.ensemble.alpha[0])

    def test_passive(self):
        self.assertTrue(all(m.is_passive() for m in self.ensemble.realizations))


class StatisticsTests(SimpleTestCase):
    def test_mean_crosstalk_of_identical_matrices(self):
        rng = np.random.default_rng(4)
        base = 0.3 * (rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))
        X = mean_crosstalk(ensemble_sintetico(np.stack([base] * 4)))
        np.testing.assert_allclose(X.to_numpy(), np.abs(base) ** 2, rtol=1e-12)
        self.assertIsInstance(X, pd.DataFrame)
        self.assertEqual(list(X.index), [-2, -1, 0, 1, 2])

    def test_concatenation_weighted_mean(self):
        a = ensemble_aleatorio(n_real=30, seed=1)
        b = ensemble_aleatorio(n_real=70, seed=2)
        union = concatenate_ensembles(a, b)
        esperado = (30 * mean_crosstalk(a).to_numpy() + 70 * mean_crosstalk(b).to_numpy()) / 100
        np.testing.assert_allclose(mean_crosstalk(union).to_numpy(), esperado, rtol=1e-12)
        doble = concatenate_ensembles(a, a)
        np.testing.assert_allclose(mean_crosstalk(doble).to_numpy(), mean_crosstalk(a).to_numpy(),
                                   rtol=1e-12)

    def test_concatenation_requires_same_states(self):
        a = ensemble_aleatorio(n_states=5)
        b = ensemble_aleatorio(n_states=7)
        with self.assertRaises(ErrorDimension):
            concatenate_ensembles(a, b)

    def test_channel_matrix_and_powers(self):
        ens = ensemble_aleatorio(n_real=2)
        H = channel_matrix(ens.realizations[0], [-2, 0, 2])
        self.assertEqual(H[0, 1], ens.alpha[0, 2, 0])
        identidad = np.eye(3)
        np.testing.assert_allclose(received_powers(identidad, [1.0, 2.0, 3.0]), [1.0, 4.0, 9.0])
        self.assertEqual(channel_matrix(ens, [0, 1]).shape, (2, 2, 2))

    def test_fading_samples(self):
        ens = ensemble_aleatorio(n_real=10)
        np.testing.assert_allclose(fading_samples(ens, 0, 1), np.abs(ens.alpha[:, 2, 3]) ** 2)

    def test_self_correlation(self):
        ens = ensemble_aleatorio(n_real=100)
        self.assertAlmostEqual(correlation_coefficient(ens, 0, 0), 1.0, places=12)
        perfil = correlation_profile(ens, 0)
        self.assertAlmostEqual(perfil.loc[0], 1.0, places=12)
        self.assertTrue(np.all(np.abs(perfil.to_numpy()) <= 1.0))

    def test_correlation_errors(self):
        with self.assertRaises(ErrorEstadistico):
            correlation_coefficient(ensemble_aleatorio(n_real=1), 0, 1)
        constante = ensemble_sintetico(np.stack([np.eye(3)] * 5))
        with self.assertRaises(ErrorEstadistico):
            correlation_coefficient(constante, 0, 1)

    def test_phase_uniformity(self):
        rng = np.random.default_rng(9)
        n = 2000
        alpha = np.tile(np.eye(3, dtype=complex), (n, 1, 1))
        alpha[:, 0, 1] = 0.1 * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
        self.assertLess(phase_uniformity_check(ensemble_sintetico(alpha), -1, 0), 0.05)
        alpha[:, 0, 1] = 0.1 * np.exp(1j * 0.3)
        self.assertGreater(phase_uniformity_check(ensemble_sintetico(alpha), -1, 0), 0.9)

    def test_phase_uniformity_preconditions(self):
        ens = ensemble_aleatorio(n_real=100)
        with self.assertRaises(ErrorDominio):
            phase_uniformity_check(ens, 0, 0)
        with self.assertRaises(ErrorEstadistico):
            phase_uniformity_check(ens, 0, 1)


# ================================
# PERSISTENCIA
# ================================
class PersistenceTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        rng = np.random.default_rng(3)
        alpha = 0.2 * (rng.standard_normal((4, 7, 7)) + 1j * rng.standard_normal((4, 7, 7)))
        self.ensemble = ChannelEnsemble(
            states=CONFIG_RAPIDA.states(), alpha=alpha, params=CONFIG_RAPIDA.to_turbulence(),
            base_seed=CONFIG_RAPIDA.base_seed, config_hash=config_hash(CONFIG_RAPIDA),
            config=CONFIG_RAPIDA,
        )
        self.path = save_ensemble(self.ensemble, self.dir / "ens.bin")

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        cargado = load_ensemble(self.path)
        self.assertTrue(cargado.equals(self.ensemble))
        self.assertEqual(cargado.config, CONFIG_RAPIDA)
        self.assertTrue(meta_path(self.path).is_file())
        self.assertFalse((self.dir / "ens.bin.tmp").exists())

    def test_truncated(self):
        datos = self.path.read_bytes()
        self.path.write_bytes(datos[:-10])
        with self.assertRaises(ErrorArchivoTruncado):
            load_ensemble(self.path)
        self.path.write_bytes(datos[:20])
        with self.assertRaises(ErrorArchivoTruncado):
            load_ensemble(self.path)

    def test_altered_header_hash(self):
        datos = bytearray(self.path.read_bytes())
        inicio = HEADER_DTYPE.fields["config_hash"][1]
        datos[inicio] = ord("f") if datos[inicio] != ord("f") else ord("e")
        self.path.write_bytes(bytes(datos))
        with self.assertRaises(ErrorHashDistinto):
            load_ensemble(self.path)

    def test_altered_payload(self):
        datos = bytearray(self.path.read_bytes())
        datos[-1] ^= 0xFF
        self.path.write_bytes(bytes(datos))
        with self.assertRaises(ErrorHashDistinto):
            load_ensemble(self.path)

    def test_version_mismatch(self):
        datos = bytearray(self.path.read_bytes())
        inicio = HEADER_DTYPE.fields["version"][1]
        datos[inicio:inicio + 4] = (99).to_bytes(4, "little")
        self.path.write_bytes(bytes(datos))
        with self.assertRaises(ErrorVersion):
            load_ensemble(self.path)

    def test_expected_hash(self):
        with self.assertRaises(ErrorHashDistinto):
            load_ensemble(self.path, expected_hash="a" * 64)

    def test_missing_sidecar(self):
        meta_path(self.path).unlink()
        with self.assertRaises(ErrorPersistencia):
            load_ensemble(self.path)

    def test_cache_is_current(self):
        self.assertTrue(cache_is_current(self.path, CONFIG_RAPIDA))
        self.assertFalse(cache_is_current(self.path, CONFIG_RAPIDA.with_seed(8)))
        self.assertFalse(cache_is_current(self.dir / "otro.bin", CONFIG_RAPIDA))

    def test_obtener_ensemble_reuses_cache(self):
        config = replace(CONFIG_RAPIDA, realizations=1)
        ruta = self.dir / "rapida.ens"
        generado, reutilizada = obtener_ensemble(config, ruta)
        self.assertFalse(reutilizada)
        self.assertTrue(cache_is_current(ruta, config))
        marca = ruta.stat().st_mtime_ns
        cargado, reutilizada = obtener_ensemble(config, ruta)
        self.assertTrue(reutilizada)
        self.assertTrue(cargado.equals(generado))
        self.assertEqual(ruta.stat().st_mtime_ns, marca)
        _, reutilizada = obtener_ensemble(config, ruta, force=True)
        self.assertFalse(reutilizada)


# ================================
# ENSEMBLES DE REFERENCIA (lentas)
# ================================
@unittest.skipUnless(SLOW, "MODEFLUX_SLOW_TESTS=1 para pruebas estadísticas largas")
class ReferenceEnsembleTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.debil = ensemble_de_referencia(1e-15)
        cls.fuerte = ensemble_de_referencia(6e-15)

    def test_size(self):
        self.assertEqual(self.debil.n_realizations, 2000)
        self.assertEqual(self.debil.states, mode_states(10))

    def test_adjacent_correlation(self):
        for j in (1, -1):
            self.assertAlmostEqual(correlation_coefficient(self.debil, 0, j), -0.92, delta=0.10)
        for j in (10, -10):
            self.assertLess(abs(correlation_coefficient(self.debil, 0, j)), 0.15)

    def test_crosstalk_concentrates_in_neighbours(self):
        X = mean_crosstalk(self.debil)
        for signo in (1, -1):
            self.assertGreater(X.loc[0, signo], 10 * X.loc[0, 10 * signo])

    def test_self_coupling_drops_with_turbulence(self):
        self.assertLess(mean_crosstalk(self.fuerte).loc[0, 0], mean_crosstalk(self.debil).loc[0, 0])

    def test_mirror_symmetry(self):
        for ensemble in (self.debil, self.fuerte):
            X = mean_crosstalk(ensemble)
            R = ensemble.n_realizations
            for k, i in ((0, 1), (1, 2), (2, 5), (3, -3), (1, 0), (10, 9)):
                with self.subTest(cn2=ensemble.params.cn2, k=k, i=i):
                    a, b = fading_samples(ensemble, k, i), fading_samples(ensemble, -k, -i)
                    error = (np.std(a, ddof=1) + np.std(b, ddof=1)) / np.sqrt(R)
                    self.assertLessEqual(abs(X.loc[k, i] - X.loc[-k, -i]), 3 * error)

    def test_phase_is_uniform(self):
        self.assertLess(phase_uniformity_check(self.fuerte, 0, 1), 0.1)
