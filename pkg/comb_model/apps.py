from django.apps import AppConfig


class CombModelConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'comb_model'
    verbose_name = 'Atomic frequency comb'
