from unittest import mock

from django.apps import apps
from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase, override_settings


class TestReady(SimpleTestCase):
    def setUp(self):
        self.config = apps.get_app_config('kkweyl_core')

    @mock.patch('kkweyl.core.geometry.self_test', return_value=0.0)
    def test_passing_self_test(self, self_test):
        self.config.ready()
        self_test.assert_called_once()

    @mock.patch('kkweyl.core.geometry.self_test', return_value=1e-3)
    def test_failing_self_test(self, _):
        with self.assertRaisesMessage(
            ImproperlyConfigured, 'Curvature self-test failed'
        ):
            self.config.ready()

    @override_settings(KKWEYL={'SELF_TEST': False})
    @mock.patch('kkweyl.core.geometry.self_test')
    def test_disabled(self, self_test):
        self.config.ready()
        self_test.assert_not_called()
