"""
boltzmann/apps.py
─────────────────
Django AppConfig for the 'boltzmann' application.

ready() only reports the resolved enumeration / LP caps so that a run's log
shows which limits were in force.  Nothing is started in the background.
"""

import logging

from django.apps import AppConfig

logger = logging.getLogger(__name__)


class BoltzmannConfig(AppConfig):
    name               = 'boltzmann'
    verbose_name       = 'Layered Boltzmann machines'
    default_auto_field = 'django.db.models.BigAutoField'

    def ready(self):
        from boltzmann.conf import setting

        logger.debug(
            f'[BoltzmannConfig] caps: hidden<={setting("BM_ENUMERATION_CAP", 25)} '
            f'evals<={setting("BM_EXACT_EVAL_CAP", 2 ** 25)} '
            f'lp<={setting("BM_LP_CAP", 4096)} threads={setting("BM_THREADS", 1)}'
        )
