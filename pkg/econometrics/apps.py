from django.apps import AppConfig


class EconometricsConfig(AppConfig):
    name = 'econometrics'
