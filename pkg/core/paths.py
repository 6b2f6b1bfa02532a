# core/paths.py
from __future__ import annotations

import sys
from datetime import datetime, timezone
from pathlib import Path

from django.conf import settings

from core.configuracion import SimulationConfig, config_hash

# ================================
# 📂 BASES Y RUTAS PRINCIPALES
# ================================
BASE_DIR = Path(settings.BASE_DIR)

ENSEMBLE_SUFFIX = ".ens"


def cache_dir() -> Path:
    """Directorio de cachés (MODEFLUX_CACHE_DIR); se crea si no existe."""
    ruta = Path(settings.MODEFLUX_CACHE_DIR)
    ruta.mkdir(parents=True, exist_ok=True)
    return ruta


# ================================
# 🧩 RUTAS DE ARCHIVOS
# ================================
def default_cache_path(config: SimulationConfig) -> Path:
    """Caché por defecto de una configuración: ensemble_<hash12>.ens."""
    return cache_dir() / f"ensemble_{config_hash(config)[:12]}{ENSEMBLE_SUFFIX}"


def resolve_cache_path(cache: str | Path | None, config: SimulationConfig | None = None) -> Path:
    """Ruta explícita, o la caché por defecto de `config`."""
    if cache:
        return Path(cache)
    if config is None:
        config = SimulationConfig()
    return default_cache_path(config)


def output_path(out: str | Path, suffix: str) -> Path:
    """`<out><suffix>` (p. ej. resultados_correlation.csv); crea el directorio padre."""
    out = Path(out)
    ruta = out.with_name(out.stem + suffix) if out.suffix else out.with_name(out.name + suffix)
    ruta.parent.mkdir(parents=True, exist_ok=True)
    return ruta


# ================================
# 🧭 UTILIDADES Y BANNER
# ================================
def paths_banner(note: str | None = None) -> str:
    """Texto con las rutas activas, para mostrar desde un comando."""
    now = datetime.now(timezone.utc).strftime("%Y-%m-%d %H:%M:%S UTC")

    def ok(path: Path) -> str:
        return "✅" if path.exists() else "⚠️"

    cache = Path(settings.MODEFLUX_CACHE_DIR)
    lineas = [
        "=" * 75,
        f"🔧 RUTAS ACTIVAS — {now}",
        "-" * 75,
        f"Python:    {sys.executable}",
        f"CWD:       {Path.cwd()}",
        f"BASE_DIR:  {BASE_DIR} ({ok(BASE_DIR)})",
        f"CACHE_DIR: {cache} ({ok(cache)})",
        f"N_JOBS:    {settings.MODEFLUX_N_JOBS}",
    ]
    if note:
        lineas.append(f"Nota: {note}")
    lineas.append("=" * 75)
    return "\n".join(lineas)
