from django.apps import AppConfig


class SpectralAppConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "spectral_app"
    verbose_name = "Spectral Gaussian processes"
