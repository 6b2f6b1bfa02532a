import math

import pandas as pd

from analisis.diversidad import (
    DEFAULT_EPSILON,
    DEFAULT_OUTAGE_THRESHOLD_DB,
    CombiningRule,
    outage_curve,
)
from analisis.optimizador import (
    DEFAULT_DIVERSITY_WINDOW,
    DEFAULT_MAX_BRANCHES,
    DEFAULT_SATURATION_DB,
    best_diversity_set,
    diversity_search_record,
    normalized_outage_slope,
)
from analisis.tasas import LinkBudget, dbm_to_watts
from canal.ensemble import correlation_profile
from core.errores import ErrorDominio, ErrorEstadistico
from core.exportadores import ExportadorCSV
from core.management.comun import ComandoModeFlux, agregar_barrido, barrido_dbm, parse_estados
from core.paths import output_path

BARRIDO_POR_DEFECTO = (-20.0, 10.0, 1.0)


def _texto_conjunto(conjunto) -> str:
    return " ".join(str(s) for s in conjunto)


class Command(ComandoModeFlux):
    help = "Conjunto de diversidad de un canal, EFF por tamaño y curvas de corte con y sin diversidad"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--tx-set", type=int, nargs="+", required=True,
                            help="Estados transmitidos, p. ej. --tx-set 0 -10 10")
        parser.add_argument("--channel", type=int, required=True, help="Canal i (debe estar en --tx-set)")
        parser.add_argument("--max-size", type=int, default=DEFAULT_MAX_BRANCHES)
        parser.add_argument("--saturation-db", type=float, default=DEFAULT_SATURATION_DB)
        parser.add_argument("--window", type=int, default=DEFAULT_DIVERSITY_WINDOW,
                            help="Busca ramas con |j − i| ≤ window")
        parser.add_argument("--unrestricted", action="store_true", help="Busca entre todos los estados")
        parser.add_argument("--rule", type=str, default=CombiningRule.MRC.value,
                            choices=[r.value for r in CombiningRule])
        agregar_barrido(parser, BARRIDO_POR_DEFECTO)
        parser.add_argument("--threshold-db", type=float, default=DEFAULT_OUTAGE_THRESHOLD_DB)
        parser.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
        parser.add_argument("--slope-at", type=float, default=None,
                            help="Pt (dBm) donde calcular la pendiente normalizada de P_out")

    def ejecutar(self, **options):
        tx_set = parse_estados(options["tx_set"])
        i = int(options["channel"])
        if i not in tx_set:
            raise ErrorDominio(f"El canal {i} no pertenece a --tx-set {list(tx_set)}")
        potencias_dbm = barrido_dbm(options.get("pt_dbm"), options.get("pt_range"), BARRIDO_POR_DEFECTO)
        ensemble, config = self.cargar_ensemble(options)
        ensemble.indices_of(tx_set)  # estados desconocidos → ErrorDominio
        ventana = None if options["unrestricted"] else options["window"]
        base = self.salida(options, "diversity")

        # ---- Búsqueda del conjunto ----
        self.stdout.write(f"🔎 Buscando ramas para el canal {i} (máx. {options['max_size']}, "
                          f"ventana {'completa' if ventana is None else f'±{ventana}'})")
        registro = diversity_search_record(ensemble, i, tx_set, options["max_size"], ventana)
        ramas = best_diversity_set(ensemble, i, tx_set, options["max_size"],
                                   options["saturation_db"], ventana, record=registro)
        tabla_busqueda = registro.reset_index()
        tabla_busqueda["best_set"] = tabla_busqueda["best_set"].map(_texto_conjunto)
        ExportadorCSV.generar_csv(
            tabla_busqueda, output_path(base, "_search.csv"), ensemble.config_hash,
            titulo="diversity search",
            extra={"channel": i, "tx_set": _texto_conjunto(tx_set), "best_set": _texto_conjunto(ramas)},
        )

        # ---- Curvas de corte ----
        budget = LinkBudget(float(dbm_to_watts(potencias_dbm[0])), tx_set, config.to_detection())
        curva = outage_curve(ensemble, i, ramas, budget, dbm_to_watts(potencias_dbm),
                             options["threshold_db"], options["epsilon"], options["rule"])
        extra = {"channel": i, "branch_set": _texto_conjunto(ramas), "rule": options["rule"],
                 "threshold_db": options["threshold_db"], "epsilon": options["epsilon"]}
        if options.get("slope_at") is not None:
            extra["normalized_outage_slope"] = self._pendiente(curva, options["slope_at"])
        ExportadorCSV.generar_csv(curva, output_path(base, "_outage.csv"), ensemble.config_hash,
                                  titulo="diversity outage", extra=extra)

        # ---- Correlación ----
        perfil = correlation_profile(ensemble, i).reset_index()
        ExportadorCSV.generar_csv(perfil, output_path(base, "_correlation.csv"), ensemble.config_hash,
                                  titulo="correlation", extra={"channel": i})

        eff_final = next(fila["eff_db"] for _, fila in registro.iterrows() if fila["best_set"] == ramas)
        self.stdout.write(self.style.SUCCESS(
            f"✅ Canal {i}: ramas {list(ramas)} (EFF {eff_final:.2f} dB) → {base}_*.csv"
        ))

    def _pendiente(self, curva: pd.DataFrame, Pt_dbm: float) -> str:
        indexada = curva.set_index("Pt_dBm")
        try:
            valor = normalized_outage_slope(indexada["p_out_div"], indexada["p_out_no_div"], Pt_dbm)
        except (ErrorEstadistico, ErrorDominio) as exc:
            self.stdout.write(self.style.WARNING(f"⚠️ Pendiente normalizada no disponible: {exc}"))
            return "nan"
        return "inf" if math.isinf(valor) else f"{valor:.12g}"
