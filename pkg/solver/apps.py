from django.apps import AppConfig


class SolverAppConfig(AppConfig):
    name = 'solver'
