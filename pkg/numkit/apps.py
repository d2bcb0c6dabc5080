from django.apps import AppConfig


class NumkitConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'numkit'
