from django.apps import AppConfig


class ScenarioCliConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'scenario_cli'
    verbose_name = 'Scenarios and commands'
