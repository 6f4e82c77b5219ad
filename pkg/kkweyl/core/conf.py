from typing import Any, overload

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured


_NotGiven = object()


DEFAULTS = {
    'SOURCE': 'kkweyl.core.sources.BuiltinSource',
    'DIRS': [],
    'OUTPUT_DIR': None,
    'RESIDUAL_TOL': 1e-8,
    'CLASS_TOL': 1e-8,
    'POINTS': 20,
    'SEED': 0,
    'SELF_TEST': True,
}


@overload
def get_setting(path: str, default: Any) -> Any: ...
@overload
def get_setting(path: str) -> Any: ...


def get_setting(path: str, default: Any = _NotGiven):
    """
    Retrieves a kkweyl configuration setting from `settings.KKWEYL`.

    This is not for general Django settings. To get Django settings, use the
    settings object from django.conf directly.

    Args:
        path (str): The dotted path to the setting.
        default (Any, optional): A fallback value to return if the setting is
            not found. If no default is given, the value from `DEFAULTS` is
            used, and an error is raised if there is none.

    Returns:
        Any: The setting value, or `default` if not found and provided.

    Raises:
        ImproperlyConfigured: The setting is not found and no default exists.
    """
    cursor = getattr(settings, 'KKWEYL', {})
    for segment in path.split('.'):
        if isinstance(cursor, dict) and segment in cursor:
            cursor = cursor.get(segment)
        else:
            if default is not _NotGiven:
                return default
            if path in DEFAULTS:
                return DEFAULTS[path]
            raise ImproperlyConfigured(
                f'Expected setting KKWEYL.{path} not found',
            )
    return cursor


def get_float_setting(path: str) -> float:
    value = get_setting(path)
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ImproperlyConfigured(
            f'Setting KKWEYL.{path} must be a number, got {value!r}'
        ) from None
    if not value > 0:
        raise ImproperlyConfigured(f'Setting KKWEYL.{path} must be positive')
    return value


def get_int_setting(path: str, minimum: int = 0) -> int:
    value = get_setting(path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ImproperlyConfigured(
            f'Setting KKWEYL.{path} must be an integer, got {value!r}'
        )
    if value < minimum:
        raise ImproperlyConfigured(
            f'Setting KKWEYL.{path} must be at least {minimum}'
        )
    return value


__all__ = [
    'DEFAULTS',
    'get_setting',
    'get_float_setting',
    'get_int_setting',
]
