from analisis.tasas import LinkBudget, average_aar, average_asymptotic_aar, dbm_to_watts
from core.exportadores import ExportadorCSV
from core.management.comun import ComandoModeFlux, agregar_barrido, barrido_dbm, parse_estados
from core.paths import output_path

BARRIDO_POR_DEFECTO = (-30.0, 20.0, 2.0)


class Command(ComandoModeFlux):
    help = "AAR media (y tasa media por modo) de un conjunto transmitido frente a Pt"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--tx-set", type=int, nargs="+", required=True,
                            help="Estados transmitidos, p. ej. --tx-set 0 -10 10")
        agregar_barrido(parser, BARRIDO_POR_DEFECTO)

    def ejecutar(self, **options):
        tx_set = parse_estados(options["tx_set"])
        potencias = dbm_to_watts(
            barrido_dbm(options.get("pt_dbm"), options.get("pt_range"), BARRIDO_POR_DEFECTO)
        )
        ensemble, config = self.cargar_ensemble(options)
        ensemble.indices_of(tx_set)  # estados desconocidos → ErrorDominio

        budget = LinkBudget(float(potencias[0]), tx_set, config.to_detection())
        self.stdout.write(f"📈 AAR de {list(tx_set)} en {len(potencias)} potencia(s)")
        tabla = average_aar(ensemble, budget, potencias).reset_index(drop=True)
        asintotica = average_asymptotic_aar(ensemble, tx_set)

        ruta = output_path(self.salida(options, "rates"), ".csv")
        ExportadorCSV.generar_csv(
            tabla, ruta, ensemble.config_hash, titulo="rates",
            extra={"tx_set": " ".join(str(s) for s in tx_set), "asymptotic_aar_nats": f"{asintotica:.12g}"},
        )
        self.stdout.write(self.style.SUCCESS(
            f"✅ {len(tabla)} fila(s) en {ruta} (AAR asintótica {asintotica:.4g} nats)"
        ))
