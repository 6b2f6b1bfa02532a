from django.apps import AppConfig


class AnalisisConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "analisis"
