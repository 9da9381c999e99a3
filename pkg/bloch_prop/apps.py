from django.apps import AppConfig


class BlochPropConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'bloch_prop'
    verbose_name = 'Two-level propagators'
