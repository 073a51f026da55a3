from django.apps import AppConfig


class DivsolveConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'divsolve'
