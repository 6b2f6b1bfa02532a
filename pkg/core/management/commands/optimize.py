from django.core.management.base import CommandError

from analisis.optimizador import optimal_mode_count, optimal_sets_by_count
from core.exportadores import ExportadorCSV, ExportadorJSON
from core.management.comun import CODIGO_USO, ComandoModeFlux, parse_rango
from core.paths import output_path


class Command(ComandoModeFlux):
    help = "Búsqueda exhaustiva del conjunto transmitido de mayor AAR asintótica media"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        grupo = parser.add_mutually_exclusive_group()
        grupo.add_argument("--n", type=int, default=None, help="Número de modos transmitidos")
        grupo.add_argument("--n-range", type=str, default=None,
                           help="Rango de N, p. ej. 1:10; elige el N de mayor objetivo")

    def ejecutar(self, **options):
        if options.get("n") is None and options.get("n_range") is None:
            raise CommandError("Indique --n o --n-range", returncode=CODIGO_USO)
        ensemble, _ = self.cargar_ensemble(options)
        hilos = self.hilos(options)
        base = self.salida(options, "optimize")

        if options.get("n") is not None:
            tabla = optimal_sets_by_count(ensemble, [int(options["n"])], hilos)
            N = int(options["n"])
        else:
            rango = parse_rango(options["n_range"])
            self.stdout.write(f"🔎 Buscando conjuntos óptimos para N en {rango[0]}..{rango[-1]}")
            tabla = optimal_sets_by_count(ensemble, rango, hilos)
            N, _ = optimal_mode_count(ensemble, rango, hilos, tabla=tabla)

        conjunto = tabla.loc[N, "set"]
        objetivo = tabla.loc[N, "objective_nats"]
        resultado = {"N": N, "set": list(conjunto), "objective": objetivo}
        if len(tabla) > 1:
            resultado["by_count"] = [
                {"N": int(n), "set": list(fila["set"]), "objective": fila["objective_nats"]}
                for n, fila in tabla.iterrows()
            ]
            por_n = tabla.assign(set=tabla["set"].map(lambda s: " ".join(str(x) for x in s)))
            ExportadorCSV.generar_csv(por_n.reset_index(), output_path(base, "_by_count.csv"),
                                      ensemble.config_hash, titulo="optimize by_count")

        ruta = output_path(base, ".json")
        ExportadorJSON.generar_json(resultado, ruta, ensemble.config_hash)
        self.stdout.write(self.style.SUCCESS(
            f"✅ N={N}: {list(conjunto)} ({objetivo:.4g} nats) → {ruta}"
        ))
