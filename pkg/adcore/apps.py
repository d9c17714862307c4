from django.apps import AppConfig


class AdcoreConfig(AppConfig):
    name = 'adcore'
