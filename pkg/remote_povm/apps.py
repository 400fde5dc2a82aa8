"""
App configuration for remote_povm.
"""
from django.apps import AppConfig


class RemotePovmConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'remote_povm'
    verbose_name = 'Remote POVM Lab'
