from django.apps import AppConfig


class MikadoConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'mikado'
