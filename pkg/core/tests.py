import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from analisis.diversidad import DiversityConfig, rate_samples
from analisis.optimizador import optimal_transmit_set
from analisis.tasas import LinkBudget, dbm_to_watts
from canal.ensemble import ChannelEnsemble
from canal.persistencia import load_ensemble, save_ensemble
from core.configuracion import (
    SimulationConfig,
    cargar_configuracion,
    config_from_mapping,
    config_hash,
    guardar_configuracion,
    serializar_configuracion,
)
from core.errores import ErrorConfiguracion, ErrorPersistencia
from core.exportadores import ExportadorCSV, ExportadorJSON
from core.management.comun import barrido_dbm, parse_estados, parse_rango
from core.paths import default_cache_path, output_path, resolve_cache_path

CONFIG_COMANDOS = SimulationConfig(
    z_m=200.0, grid_n_points=256, max_state=3, realizations=101, cn2_m_2_3=6e-15, base_seed=11,
)

TEXTO_CONFIG = """\
# Enlace corto para pruebas
z_m=200
grid_n_points=256
max_state=3
realizations=1
cn2_m_2_3=6e-15
base_seed=5
"""


def ensemble_sintetico(config=CONFIG_COMANDOS, seed=4):
    """Fuga hacia los vecinos cercanos; ligado a `config` para poder guardarse como caché."""
    rng = np.random.default_rng(seed)
    estados = config.states()
    S = len(estados)
    distancia = np.abs(np.subtract.outer(np.arange(S), np.arange(S)))
    escala = np.where(distancia == 0, 0.0, np.where(distancia <= 2, 0.05 / np.maximum(distancia, 1), 1e-5))
    R = config.realizations
    alpha = np.sqrt(escala / 2) * (rng.standard_normal((R, S, S)) + 1j * rng.standard_normal((R, S, S)))
    idx = np.arange(S)
    alpha[:, idx, idx] = np.sqrt(rng.uniform(0.3, 1.0, size=(R, S)))
    return ChannelEnsemble(states=estados, alpha=alpha, params=config.to_turbulence(),
                           base_seed=config.base_seed, config_hash=config_hash(config), config=config)


class DirectorioTemporal(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def comando(self, nombre, *args, **kwargs):
        salida = StringIO()
        call_command(nombre, *args, stdout=salida, **kwargs)
        return salida.getvalue()


# ================================
# CONFIGURACIÓN
# ================================
class ConfigurationTests(DirectorioTemporal):
    def test_defaults(self):
        config = SimulationConfig()
        self.assertEqual(config.z_m, 1000.0)
        self.assertEqual(config.wavelength_m, 850e-9)
        self.assertEqual(config.w0_m, 0.016)
        self.assertEqual(len(config.states()), 21)
        self.assertEqual(config.to_path().n_screens, 20)

    def test_from_mapping(self):
        config = config_from_mapping({"z_m": "200", "grid_n_points": "256", "max_state": "3"})
        self.assertEqual(config.grid_n_points, 256)
        self.assertIsInstance(config.grid_n_points, int)
        self.assertEqual(config.z_m, 200.0)

    def test_errors_name_the_key(self):
        casos = [
            {"w0_m": "-0.01"},
            {"clave_rara": "1"},
            {"z_m": "mil"},
            {"max_state": "2.5"},
            {"z_m": "1010"},
            {"realizations": "0"},
        ]
        for valores in casos:
            with self.subTest(valores=valores):
                with self.assertRaises(ErrorConfiguracion) as ctx:
                    config_from_mapping(valores)
                self.assertIn(next(iter(valores)).split("_")[0], str(ctx.exception))

    def test_file_round_trip(self):
        ruta = guardar_configuracion(CONFIG_COMANDOS, self.dir / "config.env")
        self.assertEqual(cargar_configuracion(ruta), CONFIG_COMANDOS)
        with self.assertRaises(ErrorPersistencia):
            cargar_configuracion(self.dir / "no_existe.env")
        self.assertEqual(cargar_configuracion(None), SimulationConfig())

    def test_hash(self):
        self.assertEqual(config_hash(CONFIG_COMANDOS), config_hash(SimulationConfig(**CONFIG_COMANDOS.as_dict())))
        self.assertNotEqual(config_hash(CONFIG_COMANDOS), config_hash(CONFIG_COMANDOS.with_seed(12)))
        self.assertEqual(len(config_hash(CONFIG_COMANDOS)), 64)
        lineas = serializar_configuracion(CONFIG_COMANDOS).splitlines()
        self.assertEqual(lineas, sorted(lineas))


# ================================
# RUTAS Y EXPORTADORES
# ================================
class PathsTests(DirectorioTemporal):
    def test_default_cache_path(self):
        with override_settings(MODEFLUX_CACHE_DIR=self.dir / "cache"):
            ruta = default_cache_path(CONFIG_COMANDOS)
            self.assertEqual(ruta.parent, self.dir / "cache")
            self.assertTrue(ruta.parent.is_dir())
            self.assertEqual(ruta.name, f"ensemble_{config_hash(CONFIG_COMANDOS)[:12]}.ens")
            self.assertEqual(resolve_cache_path(None, CONFIG_COMANDOS), ruta)
        self.assertEqual(resolve_cache_path(self.dir / "x.ens"), self.dir / "x.ens")

    def test_output_path(self):
        self.assertEqual(output_path(self.dir / "sub" / "res", ".csv"), self.dir / "sub" / "res.csv")
        self.assertEqual(output_path(self.dir / "res.csv", "_search.csv"), self.dir / "res_search.csv")
        self.assertTrue((self.dir / "sub").is_dir())


class ExporterTests(DirectorioTemporal):
    def test_csv_provenance(self):
        tabla = pd.DataFrame({"Pt_dBm": [-10.0, 0.0], "aar_nats": [1.5, 3.25]})
        ruta = ExportadorCSV.generar_csv(tabla, self.dir / "t.csv", "ab" * 32, titulo="rates",
                                         extra={"tx_set": "0 -1 1"})
        texto = ruta.read_text(encoding="utf-8")
        self.assertTrue(texto.startswith("# modeflux rates\n# config_hash=" + "ab" * 32))
        self.assertEqual(ExportadorCSV.leer_procedencia(ruta), {"config_hash": "ab" * 32, "tx_set": "0 -1 1"})
        pd.testing.assert_frame_equal(ExportadorCSV.leer_csv(ruta), tabla)
        self.assertIn("\n-10.0,1.5\n", texto)

    def test_csv_integral_floats_keep_dtype(self):
        tabla = pd.DataFrame({"M": [1, 2], "eff_db": [0.0, -3.0], "p_out": [1.0, 1e-20]})
        ruta = ExportadorCSV.generar_csv(tabla, self.dir / "e.csv", "0" * 64)
        leida = ExportadorCSV.leer_csv(ruta)
        self.assertEqual(leida["eff_db"].dtype, np.float64)
        self.assertEqual(leida["M"].dtype, np.int64)
        pd.testing.assert_frame_equal(leida, tabla)

    def test_json(self):
        ruta = ExportadorJSON.generar_json(
            {"objective": math.inf, "set": (np.int64(-1), 1), "N": np.int64(2), "valor": np.float64(0.5)},
            self.dir / "r.json", "cd" * 32,
        )
        datos = ExportadorJSON.leer_json(ruta)
        self.assertEqual(datos, {"N": 2, "config_hash": "cd" * 32, "objective": "inf",
                                 "set": [-1, 1], "valor": 0.5})
        claves = [linea.split('"')[1] for linea in ruta.read_text().splitlines() if linea.startswith('  "')]
        self.assertEqual(claves, sorted(claves))

    def test_unwritable_path(self):
        (self.dir / "archivo").write_text("x")
        with self.assertRaises(ErrorPersistencia):
            ExportadorCSV.generar_csv(pd.DataFrame({"a": [1]}), self.dir / "archivo" / "t.csv", "0" * 64)


class ParsingTests(SimpleTestCase):
    def test_states(self):
        self.assertEqual(parse_estados("0,-10,10"), (0, -10, 10))
        self.assertEqual(parse_estados("-1 1"), (-1, 1))
        self.assertEqual(parse_estados([-3, 0, 3]), (-3, 0, 3))
        for texto in ("", "0,a", "1,1"):
            with self.subTest(texto=texto):
                with self.assertRaises(CommandError) as ctx:
                    parse_estados(texto)
                self.assertEqual(ctx.exception.returncode, 2)

    def test_power_sweep(self):
        np.testing.assert_allclose(barrido_dbm(rango=[-10.0, 0.0, 5.0]), [-10.0, -5.0, 0.0])
        np.testing.assert_allclose(barrido_dbm([-4.0]), [-4.0])
        np.testing.assert_allclose(barrido_dbm(-4.0), [-4.0])
        np.testing.assert_allclose(barrido_dbm([-4.0, 5.0]), [-4.0, 5.0])
        np.testing.assert_allclose(barrido_dbm(por_defecto=(-2.0, 0.0, 1.0)), [-2.0, -1.0, 0.0])
        casos = [dict(rango=[0.0, -10.0, 1.0]), dict(rango=[0.0, 10.0, 0.0]), dict(lista=[]),
                 dict(lista=["x"]), dict(lista=[0.0], rango=[0.0, 1.0, 1.0])]
        for caso in casos:
            with self.subTest(**caso):
                with self.assertRaises(CommandError) as ctx:
                    barrido_dbm(**caso)
                self.assertEqual(ctx.exception.returncode, 2)

    def test_range(self):
        self.assertEqual(parse_rango("1:4"), [1, 2, 3, 4])
        self.assertEqual(parse_rango("3"), [3])
        with self.assertRaises(CommandError):
            parse_rango("4:1")


# ================================
# COMANDOS
# ================================
class EnsembleCommandTests(DirectorioTemporal):
    def setUp(self):
        super().setUp()
        self.config_path = self.dir / "enlace.env"
        self.config_path.write_text(TEXTO_CONFIG, encoding="utf-8")
        self.cache = self.dir / "enlace.ens"

    def test_generates_and_skips(self):
        salida = self.comando("ensemble", config=str(self.config_path), cache=str(self.cache))
        self.assertIn("Ensemble guardado", salida)
        ensemble = load_ensemble(self.cache)
        self.assertEqual(ensemble.n_realizations, 1)
        self.assertEqual(ensemble.config_hash, config_hash(cargar_configuracion(self.config_path)))

        contenido, marca = self.cache.read_bytes(), self.cache.stat().st_mtime_ns
        salida = self.comando("ensemble", config=str(self.config_path), cache=str(self.cache))
        self.assertIn("cache up to date", salida)
        self.assertEqual(self.cache.stat().st_mtime_ns, marca)

        salida = self.comando("ensemble", config=str(self.config_path), cache=str(self.cache), force=True)
        self.assertIn("Ensemble guardado", salida)
        self.assertEqual(self.cache.read_bytes(), contenido)

    def test_seed_override_changes_hash(self):
        self.comando("ensemble", config=str(self.config_path), cache=str(self.cache), seed_override=9)
        self.assertEqual(load_ensemble(self.cache).base_seed, 9)

    def test_negative_w0(self):
        self.config_path.write_text(TEXTO_CONFIG + "w0_m=-0.016\n", encoding="utf-8")
        with self.assertRaises(CommandError) as ctx:
            self.comando("ensemble", config=str(self.config_path), cache=str(self.cache))
        self.assertIn("w0_m", str(ctx.exception))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertFalse(self.cache.exists())

    def test_missing_config(self):
        with self.assertRaises(CommandError) as ctx:
            self.comando("ensemble", config=str(self.dir / "no_existe.env"), cache=str(self.cache))
        self.assertEqual(ctx.exception.returncode, 3)


class AnalysisCommandTests(DirectorioTemporal):
    def setUp(self):
        super().setUp()
        self.ensemble = ensemble_sintetico()
        self.cache = save_ensemble(self.ensemble, self.dir / "sintetico.ens")

    def test_rates_single_row(self):
        self.comando("rates", cache=str(self.cache), tx_set=[-3, 0, 3], pt_dbm=[0.0], out=str(self.dir / "r"))
        ruta = self.dir / "r.csv"
        tabla = ExportadorCSV.leer_csv(ruta)
        self.assertEqual(len(tabla), 1)
        self.assertEqual(list(tabla.columns), ["Pt_dBm", "aar_nats", "rate_-3", "rate_+0", "rate_+3"])
        self.assertAlmostEqual(tabla.loc[0, ["rate_-3", "rate_+0", "rate_+3"]].sum(),
                               tabla.loc[0, "aar_nats"], delta=1e-9)
        procedencia = ExportadorCSV.leer_procedencia(ruta)
        self.assertEqual(procedencia["config_hash"], self.ensemble.config_hash)
        self.assertIn("asymptotic_aar_nats", procedencia)

    def test_rates_sweep_and_determinism(self):
        opciones = dict(cache=str(self.cache), tx_set=[-3, 0, 3], pt_range=[-20.0, 40.0, 20.0])
        self.comando("rates", out=str(self.dir / "a"), **opciones)
        self.comando("rates", out=str(self.dir / "b"), **opciones)
        self.assertEqual((self.dir / "a.csv").read_bytes(), (self.dir / "b.csv").read_bytes())
        tabla = ExportadorCSV.leer_csv(self.dir / "a.csv")
        self.assertEqual(len(tabla), 4)
        self.assertTrue(np.all(np.diff(tabla["aar_nats"]) >= 0))
        asintotica = float(ExportadorCSV.leer_procedencia(self.dir / "a.csv")["asymptotic_aar_nats"])
        self.assertLessEqual(tabla["aar_nats"].iloc[-1], asintotica * (1 + 1e-6))

    def test_rates_command_line_negative_states(self):
        self.comando("rates", "--tx-set", "-3", "0", "3", "--pt-dbm", "-10", "0",
                     "--cache", str(self.cache), "--out", str(self.dir / "cli"))
        tabla = ExportadorCSV.leer_csv(self.dir / "cli.csv")
        self.assertEqual(list(tabla["Pt_dBm"]), [-10.0, 0.0])
        self.assertEqual(ExportadorCSV.leer_procedencia(self.dir / "cli.csv")["tx_set"], "-3 0 3")

    def test_diversity_command_line_negative_channel(self):
        self.comando("diversity", "--tx-set", "-3", "0", "3", "--channel", "-3", "--max-size", "2",
                     "--pt-range", "-30", "10", "20", "--cache", str(self.cache), "--out", str(self.dir / "cli"))
        corte = ExportadorCSV.leer_csv(self.dir / "cli_outage.csv")
        self.assertEqual(list(corte["Pt_dBm"]), [-30.0, -10.0, 10.0])
        self.assertEqual(ExportadorCSV.leer_procedencia(self.dir / "cli_search.csv")["channel"], "-3")

    def test_power_flags_are_exclusive(self):
        with self.assertRaises(CommandError):
            self.comando("rates", "--tx-set", "0", "--pt-dbm", "0", "--pt-range", "-10", "0", "5",
                         "--cache", str(self.cache), "--out", str(self.dir / "r"))

    def test_optimize_zero_threads(self):
        with self.assertRaises(CommandError) as ctx:
            self.comando("optimize", cache=str(self.cache), n=2, out=str(self.dir / "o"), threads=0)
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertFalse((self.dir / "o.json").exists())

    def test_rates_unknown_state(self):
        with self.assertRaises(CommandError) as ctx:
            self.comando("rates", cache=str(self.cache), tx_set=[0, 7], out=str(self.dir / "r"))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_corrupted_cache(self):
        datos = bytearray(self.cache.read_bytes())
        datos[-1] ^= 0xFF
        self.cache.write_bytes(bytes(datos))
        with self.assertRaises(CommandError) as ctx:
            self.comando("rates", cache=str(self.cache), tx_set=[0], out=str(self.dir / "r"))
        self.assertEqual(ctx.exception.returncode, 3)

    def test_optimize_single_n(self):
        self.comando("optimize", cache=str(self.cache), n=3, out=str(self.dir / "o"))
        datos = ExportadorJSON.leer_json(self.dir / "o.json")
        self.assertEqual(datos["N"], 3)
        self.assertEqual(tuple(datos["set"]), optimal_transmit_set(self.ensemble, 3))
        self.assertEqual(datos["config_hash"], self.ensemble.config_hash)
        self.assertTrue(math.isfinite(datos["objective"]))

    def test_optimize_range(self):
        self.comando("optimize", cache=str(self.cache), n_range="1:3", out=str(self.dir / "o"), threads=2)
        datos = ExportadorJSON.leer_json(self.dir / "o.json")
        self.assertEqual([fila["N"] for fila in datos["by_count"]], [1, 2, 3])
        self.assertEqual(datos["by_count"][0]["objective"], "inf")
        self.assertIn(datos["N"], (2, 3))
        finitos = [fila["objective"] for fila in datos["by_count"][1:]]
        self.assertEqual(datos["objective"], max(finitos))
        self.assertTrue((self.dir / "o_by_count.csv").is_file())

    def test_optimize_requires_n(self):
        with self.assertRaises(CommandError) as ctx:
            self.comando("optimize", cache=str(self.cache), out=str(self.dir / "o"))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_diversity_outputs(self):
        base = self.dir / "d"
        self.comando("diversity", cache=str(self.cache), tx_set=[-3, 0, 3], channel=-3,
                     max_size=4, pt_range=[-30.0, 10.0, 10.0], out=str(base))
        busqueda = ExportadorCSV.leer_csv(self.dir / "d_search.csv")
        self.assertEqual(list(busqueda.columns), ["M", "best_set", "eff_db"])
        self.assertTrue(np.all(np.diff(busqueda["eff_db"]) <= 1e-9))
        self.assertTrue(all("-3" in str(s).split() for s in busqueda["best_set"]))

        corte = ExportadorCSV.leer_csv(self.dir / "d_outage.csv")
        self.assertEqual(list(corte.columns),
                         ["Pt_dBm", "p_out_no_div", "p_out_div", "rate_out_no_div", "rate_out_div"])
        self.assertEqual(len(corte), 5)
        self.assertTrue(np.all(corte["p_out_div"] <= corte["p_out_no_div"]))

        correlacion = ExportadorCSV.leer_csv(self.dir / "d_correlation.csv")
        self.assertEqual(list(correlacion["received"]), list(self.ensemble.states))
        self.assertAlmostEqual(correlacion.set_index("received").loc[-3, "correlation"], 1.0, places=9)

    def test_diversity_median_rate(self):
        self.comando("diversity", cache=str(self.cache), tx_set=[-3, 0, 3], channel=0,
                     max_size=2, pt_dbm=[0.0], epsilon=0.5, out=str(self.dir / "d"))
        corte = ExportadorCSV.leer_csv(self.dir / "d_outage.csv")
        budget = LinkBudget(float(dbm_to_watts(0.0)), (-3, 0, 3), CONFIG_COMANDOS.to_detection())
        muestras = rate_samples(self.ensemble, DiversityConfig(0, (0,)), budget)
        self.assertEqual(len(muestras) % 2, 1)
        self.assertAlmostEqual(corte.loc[0, "rate_out_no_div"], float(np.median(muestras)), delta=1e-9)

    def test_diversity_channel_outside_tx_set(self):
        with self.assertRaises(CommandError) as ctx:
            self.comando("diversity", cache=str(self.cache), tx_set=[-3, 3], channel=0,
                         out=str(self.dir / "d"))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_validate(self):
        config_path = guardar_configuracion(CONFIG_COMANDOS, self.dir / "config.env")
        salida = self.comando("validate", config=str(config_path), cache=str(self.cache),
                              screens=100, out=str(self.dir / "v"))
        self.assertIn("Uniformidad de fase no evaluada", salida)
        self.assertIn("RUTAS ACTIVAS", salida)
        datos = ExportadorJSON.leer_json(self.dir / "v_diagnostics.json")
        self.assertLess(datos["gram_max_error"], 1e-2)
        self.assertIsNone(datos["phase_ks_distance"])
        self.assertEqual(datos["config_hash"], config_hash(CONFIG_COMANDOS))
        tabla = ExportadorCSV.leer_csv(self.dir / "v_structure.csv")
        self.assertEqual(list(tabla.columns),
                         ["separation_m", "simulated_rad2", "analytic_rad2", "rel_error", "in_range"])
        self.assertTrue(np.all(tabla["analytic_rad2"] > 0))
        self.assertTrue(np.all(np.diff(tabla["separation_m"]) > 0))
