from dataclasses import replace

from canal.persistencia import obtener_ensemble
from core.configuracion import config_hash
from core.management.comun import ComandoModeFlux
from core.paths import resolve_cache_path


class Command(ComandoModeFlux):
    help = "Generar (o reutilizar) la caché de un ensemble de canales turbulentos"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--realizations", type=int, default=None,
                            help="Reemplaza el número de realizaciones de la configuración")

    def ejecutar(self, **options):
        config = self.cargar_config(options)
        if options.get("realizations") is not None:
            config = replace(config, realizations=options["realizations"])
        ruta = resolve_cache_path(options.get("cache") or options.get("out"), config)
        hilos = self.hilos(options)

        self.stdout.write(
            f"🌀 Ensemble de {config.realizations} realizaciones "
            f"(C_n²={config.cn2_m_2_3:.2e}, z={config.z_m:g} m, hash {config_hash(config)[:12]})"
        )
        _, reutilizada = obtener_ensemble(config, ruta, n_jobs=hilos, force=options["force"])
        if reutilizada:
            self.stdout.write(self.style.SUCCESS(f"✅ cache up to date: {ruta}"))
        else:
            self.stdout.write(self.style.SUCCESS(f"✅ Ensemble guardado en {ruta}"))
