import numpy as np
import pandas as pd

from canal.ensemble import phase_uniformity_check
from canal.persistencia import load_ensemble
from core.configuracion import config_hash
from core.errores import ErrorEstadistico
from core.exportadores import ExportadorCSV, ExportadorJSON
from core.management.comun import ComandoModeFlux
from core.paths import default_cache_path, output_path, paths_banner
from optica.modos import gram_matrix
from optica.turbulencia import (
    MIN_SCREENS,
    analytic_structure_function,
    generate_phase_screen,
    structure_function_profile,
)


class Command(ComandoModeFlux):
    help = "Diagnósticos: función de estructura de las pantallas, ortonormalidad modal y uniformidad de fase"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--screens", type=int, default=2 * MIN_SCREENS,
                            help="Pantallas para la función de estructura")

    def ejecutar(self, **options):
        config = self.cargar_config(options)
        self.stdout.write(paths_banner("validate"))
        huella = config_hash(config)
        grid = config.to_grid()
        base = self.salida(options, "validate")
        diagnostico = {"screens": int(options["screens"])}

        # ---- Ortonormalidad ----
        G = gram_matrix(config.states(), grid, config.w0_m, config.max_state)
        diagnostico["gram_max_error"] = float(np.max(np.abs(G - np.eye(len(G)))))
        self.stdout.write(f"🧮 Gram: error máximo {diagnostico['gram_max_error']:.2e}")

        # ---- Función de estructura ----
        if config.cn2_m_2_3 > 0:
            tabla = self._funcion_estructura(config, options["screens"])
            ExportadorCSV.generar_csv(tabla, output_path(base, "_structure.csv"), huella,
                                      titulo="structure function")
            en_rango = tabla.loc[tabla["in_range"], "rel_error"]
            diagnostico["structure_max_rel_error"] = float(en_rango.max()) if not en_rango.empty else None
            self.stdout.write(f"🌫️ Función de estructura: error relativo máximo {diagnostico['structure_max_rel_error']}")
        else:
            self.stdout.write(self.style.WARNING("⚠️ C_n² = 0: se omite la función de estructura"))

        # ---- Uniformidad de fase ----
        diagnostico["phase_ks_distance"] = self._uniformidad(options, config)

        ruta = output_path(base, "_diagnostics.json")
        ExportadorJSON.generar_json(diagnostico, ruta, huella)
        self.stdout.write(self.style.SUCCESS(f"✅ Diagnósticos en {ruta}"))

    def _funcion_estructura(self, config, n_screens: int) -> pd.DataFrame:
        grid = config.to_grid()
        params = config.to_turbulence()
        rng = np.random.default_rng(config.base_seed)
        self.stdout.write(f"🌀 Generando {n_screens} pantallas de {grid.n_points}²")
        pantallas = [
            generate_phase_screen(grid, params, config.screen_spacing_m, rng, config.wavelength_m)
            for _ in range(n_screens)
        ]
        simulada = structure_function_profile(pantallas)
        r = simulada.index.to_numpy()
        analitica = analytic_structure_function(r, params, config.screen_spacing_m, config.wavelength_m)
        return pd.DataFrame({
            "separation_m": r,
            "simulated_rad2": simulada.to_numpy(),
            "analytic_rad2": analitica,
            "rel_error": np.abs(simulada.to_numpy() - analitica) / analitica,
            "in_range": (r >= 2 * config.l0_m) & (r <= config.grid_extent_m / 4),
        })

    def _uniformidad(self, options, config):
        ruta = options.get("cache")
        if ruta is None:
            ruta = default_cache_path(config)
            if not ruta.is_file():
                self.stdout.write(self.style.WARNING("⚠️ Sin caché: se omite la uniformidad de fase"))
                return None
        ensemble = load_ensemble(ruta)
        if 1 not in ensemble.states:
            return None
        try:
            ks = phase_uniformity_check(ensemble, 1, 0)
        except ErrorEstadistico as exc:
            self.stdout.write(self.style.WARNING(f"⚠️ Uniformidad de fase no evaluada: {exc}"))
            return None
        self.stdout.write(f"🎲 Fase ∠α(1,0): distancia KS {ks:.3f}")
        return ks
