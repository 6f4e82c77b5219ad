"""
The `kkweyl` console script.

Runs the management commands of `kkweyl.core` without a Django project. When
no settings module is active, a minimal configuration is made on the fly;
inside a project the same commands are available through `manage.py`.
"""

import sys

import django
from django.conf import settings
from django.core.management import load_command_class

from kkweyl.core.conf import DEFAULTS


COMMANDS = ('list', 'verify', 'scan', 'check-file')


def setup():
    if not settings.configured:
        settings.configure(
            INSTALLED_APPS=['kkweyl.core'],
            KKWEYL=dict(DEFAULTS),
            USE_TZ=True,
            LOGGING_CONFIG=None,
        )
    django.setup()


def _usage() -> str:
    return (
        'usage: kkweyl {' + ','.join(COMMANDS) + '} [options]\n'
        'Run "kkweyl <command> --help" for the options of a command.\n'
    )


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv if argv is None else argv)
    if len(argv) < 2 or argv[1] in ('-h', '--help'):
        sys.stdout.write(_usage())
        return 0 if len(argv) >= 2 else 2
    name = argv[1]
    if name not in COMMANDS:
        sys.stderr.write(f'Unknown command {name!r}\n{_usage()}')
        return 2
    setup()
    command = load_command_class('kkweyl.core', name.replace('-', '_'))
    try:
        command.run_from_argv(['kkweyl', *argv[1:]])
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    return 0


__all__ = ['COMMANDS', 'setup', 'main']
