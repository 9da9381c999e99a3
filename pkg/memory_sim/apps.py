from django.apps import AppConfig


class MemorySimConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'memory_sim'
    verbose_name = 'Storage protocol'
