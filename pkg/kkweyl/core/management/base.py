"""
Shared plumbing of the kkweyl management commands.

Exit codes: 0 when everything passed, 1 when a check failed, 2 for usage,
configuration, lookup and metric-file errors.
"""

import dataclasses
import logging
import math
import os
from pathlib import Path

from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import BaseCommand, CommandError
from simpleeval import InvalidExpression, simple_eval

from kkweyl.core.catalog import (
    BoundGeometry,
    GeometryEntry,
    Kind,
    read_metric_file,
)
from kkweyl.core.conf import (
    get_float_setting,
    get_int_setting,
    get_setting,
)
from kkweyl.core.exceptions import (
    DimensionError,
    GeometryNotFound,
    MetricFileError,
    ParameterError,
    ReductionError,
    SignatureError,
)
from kkweyl.core.geometry import Signature
from kkweyl.core.sampling import sample_points
from kkweyl.core.sources import get_source


OUTPUT_DIR_ENV = 'KKWEYL_OUTPUT_DIR'

USAGE_ERRORS = (
    GeometryNotFound,
    MetricFileError,
    ParameterError,
    DimensionError,
    SignatureError,
    ReductionError,
    ImproperlyConfigured,
    OSError,
)

_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO}


def usage_error(message: str) -> CommandError:
    return CommandError(message, returncode=2)


def parse_value(text: str) -> float:
    """
    Evaluates a numeric command-line value such as `0.5` or `2*pi/3`.
    """
    try:
        value = simple_eval(text, names={'pi': math.pi, 'e': math.e})
    except (InvalidExpression, SyntaxError, TypeError, ZeroDivisionError) as e:
        raise usage_error(f'Invalid number {text!r}: {e}') from e
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise usage_error(f'{text!r} is not a number')
    return float(value)


def parse_params(items) -> dict[str, float]:
    params = {}
    for item in items or ():
        name, sep, value = item.partition('=')
        if not sep or not name.strip():
            raise usage_error(
                f'Parameters are given as name=value, got {item!r}'
            )
        params[name.strip()] = parse_value(value.strip())
    return params


def parse_point(text: str) -> tuple[float, ...]:
    return tuple(parse_value(part.strip()) for part in text.split(','))


def resolve_entry(target: str) -> GeometryEntry:
    """
    Loads a geometry by name from the configured source, or from a file when
    `target` is a path.
    """
    path = Path(target)
    if target.endswith('.metric') or path.is_file():
        return read_metric_file(path)
    return get_source().load(target)


def output_path(out: str | None, name: str, suffix: str) -> Path | None:
    """
    Where a report goes: `--out`, else a file named after the run in the
    configured output directory, else None for standard output.
    """
    if out:
        return Path(out)
    directory = get_setting('OUTPUT_DIR') or os.environ.get(OUTPUT_DIR_ENV)
    if directory:
        return Path(directory) / f'{name}.{suffix}'
    return None


class GeometryCommand(BaseCommand):
    """
    A command acting on one geometry given by name or metric-file path.
    """

    requires_system_checks = []
    sampling_options = True

    def add_arguments(self, parser):
        parser.add_argument('geometry', help='Builtin name or metric file.')
        parser.add_argument(
            '--param',
            action='append',
            default=[],
            metavar='NAME=VALUE',
            help='Override a parameter; may be repeated.',
        )
        parser.add_argument('--points', type=int, help='Number of points.')
        parser.add_argument('--seed', type=int, help='Sampling seed.')
        parser.add_argument('--out', help='Write the report to this path.')
        parser.add_argument(
            '--reproducible',
            action='store_true',
            help='Omit the timestamp from JSON reports.',
        )
        parser.add_argument(
            '--class-tol', type=float, help='Classification tolerance.'
        )

    def configure_logging(self, verbosity: int):
        logging.getLogger('kkweyl').setLevel(
            _LEVELS.get(verbosity, logging.DEBUG)
        )

    def bind(self, options, signature: str | None = None) -> BoundGeometry:
        entry = resolve_entry(options['geometry'])
        if signature:
            if entry.kind is not Kind.KK_TRIPLE:
                raise usage_error(
                    '--signature applies to kk_triple entries only; '
                    f'{entry.name} is a {entry.kind}'
                )
            try:
                entry = dataclasses.replace(
                    entry, signature=Signature(signature)
                )
            except ValueError as e:
                raise usage_error(str(e)) from e
        return entry.bind(parse_params(options['param']))

    def random_points(self, geometry: BoundGeometry, options):
        count = options['points']
        if count is None:
            count = get_int_setting('POINTS', minimum=1)
        if count < 1:
            raise usage_error('--points must be at least 1')
        seed = options['seed']
        if seed is None:
            seed = get_int_setting('SEED')
        return sample_points(geometry.domain, count, seed), seed

    def class_tol(self, options) -> float:
        if options['class_tol'] is not None:
            if not options['class_tol'] > 0:
                raise usage_error('--class-tol must be positive')
            return options['class_tol']
        return get_float_setting('CLASS_TOL')

    def emit(self, text: str, path: Path | None):
        if path is None:
            self.stdout.write(text, ending='')
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8')
        self.stderr.write(f'Report written to {path}')

    def execute(self, *args, **options):
        self.configure_logging(options.get('verbosity', 1))
        try:
            return super().execute(*args, **options)
        except USAGE_ERRORS as e:
            raise usage_error(str(e)) from e
