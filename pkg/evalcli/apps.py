from django.apps import AppConfig


class EvalcliConfig(AppConfig):
    name = 'evalcli'
