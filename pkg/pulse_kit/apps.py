from django.apps import AppConfig


class PulseKitConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'pulse_kit'
    verbose_name = 'Control pulses'
