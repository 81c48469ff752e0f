from django.apps import AppConfig


class StructuralConfig(AppConfig):
    name = 'structural'
