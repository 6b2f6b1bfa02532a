"""
Piezas compartidas por los comandos de modeflux: opciones comunes, lectura de
listas de estados y barridos de potencia, carga de configuración y caché.
"""
import logging

import numpy as np
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from canal.ensemble import ChannelEnsemble
from canal.persistencia import load_ensemble
from core.configuracion import SimulationConfig, cargar_configuracion, config_hash
from core.errores import ErrorModeFlux
from core.paths import resolve_cache_path

logger = logging.getLogger(__name__)

CODIGO_USO = 2


def parse_estados(texto) -> tuple[int, ...]:
    """[0, -10, 10] o '0,-10,10' → (0, -10, 10). Sin duplicados."""
    if isinstance(texto, (list, tuple)):
        partes = [str(t) for t in texto]
    else:
        partes = [p for p in str(texto).replace(" ", ",").split(",") if p]
    try:
        estados = tuple(int(p) for p in partes)
    except ValueError:
        raise CommandError(f"Lista de estados inválida: {texto!r}", returncode=CODIGO_USO)
    if not estados:
        raise CommandError("La lista de estados está vacía", returncode=CODIGO_USO)
    if len(set(estados)) != len(estados):
        raise CommandError(f"Estados repetidos en {texto!r}", returncode=CODIGO_USO)
    return estados


def barrido_dbm(lista=None, rango=None, por_defecto=(-30.0, 20.0, 2.0)) -> np.ndarray:
    """
    Potencias en dBm a partir de --pt-dbm (lista explícita) o --pt-range INICIO FIN PASO
    (fin incluido). Sin ninguna de las dos se usa el rango por defecto.
    """
    if lista is not None and rango is not None:
        raise CommandError("--pt-dbm y --pt-range son excluyentes", returncode=CODIGO_USO)
    if lista is not None:
        try:
            valores = np.atleast_1d(np.asarray(lista, dtype=float))
        except (TypeError, ValueError):
            raise CommandError(f"Lista de potencias inválida: {lista!r}", returncode=CODIGO_USO)
        if valores.size == 0 or not np.all(np.isfinite(valores)):
            raise CommandError(f"Lista de potencias inválida: {lista!r}", returncode=CODIGO_USO)
        return valores
    try:
        inicio, fin, paso = (float(v) for v in (rango if rango is not None else por_defecto))
    except (TypeError, ValueError):
        raise CommandError(f"Rango de potencias inválido: {rango!r}", returncode=CODIGO_USO)
    if not paso > 0 or fin < inicio:
        raise CommandError(f"Rango de potencias vacío: {rango!r}", returncode=CODIGO_USO)
    n = int(round((fin - inicio) / paso)) + 1
    return inicio + paso * np.arange(n)


def agregar_barrido(parser, por_defecto: tuple[float, float, float]) -> None:
    """--pt-dbm y --pt-range, excluyentes. Ambos aceptan valores negativos separados por espacios."""
    grupo = parser.add_mutually_exclusive_group()
    grupo.add_argument("--pt-dbm", type=float, nargs="+", default=None,
                       help="Potencias en dBm, p. ej. --pt-dbm -10 0 5")
    grupo.add_argument("--pt-range", type=float, nargs=3, default=None,
                       metavar=("INICIO", "FIN", "PASO"),
                       help="Barrido en dBm con fin incluido (por defecto %s %s %s)" % por_defecto)


def parse_rango(texto) -> list[int]:
    """'1:10' → [1, ..., 10]; '3' → [3]."""
    texto = str(texto).strip()
    try:
        if ":" in texto:
            inicio, fin = (int(p) for p in texto.split(":"))
        else:
            inicio = fin = int(texto)
    except ValueError:
        raise CommandError(f"Rango inválido: {texto!r}", returncode=CODIGO_USO)
    if fin < inicio:
        raise CommandError(f"Rango vacío: {texto!r}", returncode=CODIGO_USO)
    return list(range(inicio, fin + 1))


class ComandoModeFlux(BaseCommand):
    """
    Base de los comandos: añade --config, --cache, --out, --force, --threads y
    --seed-override, y traduce los ErrorModeFlux a CommandError con su código.
    """

    def add_arguments(self, parser):
        parser.add_argument("--config", type=str, default=None,
                            help="Archivo de configuración clave=valor (.env)")
        parser.add_argument("--cache", type=str, default=None,
                            help="Caché del ensemble (por defecto en MODEFLUX_CACHE_DIR)")
        parser.add_argument("--out", type=str, default=None, help="Ruta base de salida")
        parser.add_argument("--force", action="store_true", help="Recalcular aunque exista la salida")
        parser.add_argument("--threads", type=int, default=settings.MODEFLUX_N_JOBS,
                            help="Procesos de joblib (-1 = todos)")
        parser.add_argument("--seed-override", type=int, default=None,
                            help="Reemplaza base_seed de la configuración")

    def handle(self, *args, **options):
        try:
            return self.ejecutar(**options)
        except ErrorModeFlux as exc:
            logger.error("%s: %s", type(exc).__name__, exc)
            raise CommandError(str(exc), returncode=exc.codigo_salida) from exc

    def ejecutar(self, **options):
        raise NotImplementedError

    # ================================
    # CARGA
    # ================================
    def cargar_config(self, options) -> SimulationConfig:
        config = cargar_configuracion(options.get("config"))
        if options.get("seed_override") is not None:
            config = config.with_seed(int(options["seed_override"]))
        return config

    def cargar_ensemble(self, options) -> tuple[ChannelEnsemble, SimulationConfig]:
        """
        Carga la caché indicada (o la de la configuración). Con --config se exige
        que la caché corresponda a esa configuración.
        """
        con_config = options.get("config") is not None or options.get("seed_override") is not None
        config = self.cargar_config(options)
        ruta = resolve_cache_path(options.get("cache"), config)
        ensemble = load_ensemble(ruta, expected_hash=config_hash(config) if con_config else None)
        self.stdout.write(f"📦 Caché {ruta} ({ensemble.n_realizations} realizaciones, "
                          f"hash {ensemble.config_hash[:12]})")
        return ensemble, ensemble.config or config

    def salida(self, options, por_defecto: str) -> str:
        return options.get("out") or por_defecto

    @staticmethod
    def hilos(options) -> int:
        threads = options.get("threads")
        hilos = 1 if threads is None else int(threads)
        if hilos == 0:
            raise CommandError("--threads no puede ser 0", returncode=CODIGO_USO)
        return hilos
