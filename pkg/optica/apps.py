from django.apps import AppConfig


class OpticaConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "optica"
