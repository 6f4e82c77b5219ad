import logging

from django.apps import AppConfig
from django.core.exceptions import ImproperlyConfigured

from kkweyl.core.conf import get_setting


logger = logging.getLogger(__name__)


SELF_TEST_TOLERANCE = 1e-9


class KKWeylCoreConfig(AppConfig):
    name = 'kkweyl.core'
    verbose_name = 'Kaluza-Klein Weyl checks'
    label = 'kkweyl_core'

    def ready(self):
        if not get_setting('SELF_TEST'):
            return
        from kkweyl.core.geometry import self_test

        residual = self_test()
        logger.debug('Curvature self-test residual %.3e', residual)
        if residual > SELF_TEST_TOLERANCE:
            raise ImproperlyConfigured(
                f'Curvature self-test failed: Weyl trace {residual:.3e} '
                f'exceeds {SELF_TEST_TOLERANCE}'
            )
