import logging

from django.apps import AppConfig


logger = logging.getLogger(__name__)


class CoreConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'lerayrom.core'
    verbose_name = 'Reduced order pipeline'

    def ready(self):
        # Register system checks that flag unusable output and preset directories.
        try:
            from . import checks  # noqa: F401
        except Exception as exc:  # pragma: no cover
            logger.warning("Failed to register system checks: %s", exc)
