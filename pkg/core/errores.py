"""
Jerarquía de errores de modeflux.

Cada error lleva el código de salida que usan los comandos de manage.py:
2 uso/configuración, 3 E/S o persistencia, 4 estadística.
"""


class ErrorModeFlux(Exception):
    """Base de todos los errores del proyecto."""

    codigo_salida = 1


class ErrorConfiguracion(ErrorModeFlux, ValueError):
    """Configuración inválida: grilla, modo que no cabe, muestreo insuficiente..."""

    codigo_salida = 2


class ErrorDimension(ErrorModeFlux, ValueError):
    """Grillas distintas o longitudes incompatibles."""

    codigo_salida = 2


class ErrorDominio(ErrorModeFlux, ValueError):
    """Argumento fuera del dominio de la fórmula."""

    codigo_salida = 2


class ErrorEstadistico(ErrorModeFlux, ValueError):
    """Pocas muestras, varianza nula, media nula o pendiente indefinida."""

    codigo_salida = 4


class ErrorPersistencia(ErrorModeFlux, OSError):
    """Caché ilegible o con formato inválido."""

    codigo_salida = 3


class ErrorHashDistinto(ErrorPersistencia):
    pass


class ErrorArchivoTruncado(ErrorPersistencia):
    pass


class ErrorVersion(ErrorPersistencia):
    pass


class ErrorSimulacion(ErrorModeFlux, RuntimeError):
    """Fallo de recursos durante la generación de un ensemble."""

    codigo_salida = 3
