"""
Django settings for the modeflux project.

No hay superficie web: el proyecto se usa a través de los comandos de
`manage.py` (ensemble, rates, optimize, diversity, validate) y de las apps
`optica`, `canal` y `analisis` como librería.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()  # Cargar variables del archivo .env

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "django-insecure-modeflux-solo-desarrollo")

DEBUG = os.getenv("DJANGO_DEBUG", "").lower() in ("1", "true", "si", "yes")

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "core.apps.CoreConfig",
    "optica.apps.OpticaConfig",
    "canal.apps.CanalConfig",
    "analisis.apps.AnalisisConfig",
]

# Sin modelos: la base de datos solo existe para que Django arranque.
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "db.sqlite3",
    }
}

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# ================================
# MODEFLUX
# ================================
# Directorio por defecto de la caché de ensembles
MODEFLUX_CACHE_DIR = Path(os.getenv("MODEFLUX_CACHE_DIR", BASE_DIR / "cache"))

# Paralelismo por defecto (joblib n_jobs)
MODEFLUX_N_JOBS = int(os.getenv("MODEFLUX_N_JOBS", "1"))

MODEFLUX_LOG_LEVEL = os.getenv("MODEFLUX_LOG_LEVEL", "INFO").upper()


# Logging
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "loggers": {
        app: {"handlers": ["console"], "level": MODEFLUX_LOG_LEVEL, "propagate": False}
        for app in ("core", "optica", "canal", "analisis")
    },
}
