"""
Report assembly and rendering.

Reports are plain dictionaries so the JSON output is the canonical form;
the text and CSV renderings are derived from them. Keys are sorted and
records ordered by check id, so equal runs give byte-identical JSON once the
timestamp is dropped with `reproducible=True`.
"""

import csv
import io
import json
import math
from importlib.metadata import PackageNotFoundError, version
from typing import Sequence

from django.core.serializers.json import DjangoJSONEncoder
from django.utils import timezone
from rapidhash import rapidhash

from kkweyl.core.catalog import BoundGeometry, GeometryEntry
from kkweyl.core.checks import SCAN_COLUMNS, ScanRow, SuiteResult


SCHEMA_VERSION = 1


def tool_version() -> str:
    try:
        return version('kkweyl')
    except PackageNotFoundError:
        return '0+unknown'


class ReportEncoder(DjangoJSONEncoder):
    """
    Encodes numpy scalars and arrays on top of Django's types.
    """

    def default(self, o):
        if hasattr(o, 'tolist'):
            return o.tolist()
        return super().default(o)


def _finite(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


def dumps(report: dict) -> str:
    """
    Serializes a report as sorted, indented JSON. Non-finite floats are
    written as strings so the output stays valid JSON.
    """
    return (
        json.dumps(
            _finite(report), cls=ReportEncoder, sort_keys=True, indent=2
        )
        + '\n'
    )


def config_digest(config: dict) -> str:
    """
    The rapidhash of the canonical JSON form of a run configuration, as
    16 hex digits.
    """
    canonical = json.dumps(
        _finite(config), cls=ReportEncoder, sort_keys=True
    )
    return f'{rapidhash(canonical.encode()):016x}'


def run_config(
    geometry: BoundGeometry,
    points: Sequence[Sequence[float]],
    *,
    seed: int | None,
    residual_tol: float | None,
    class_tol: float,
    sampling: str,
) -> dict:
    """
    Echo of everything that determines a run.

    Args:
        sampling (str): How the points were chosen, e.g. `random`,
            `explicit` or a grid specification.
    """
    config = {
        'geometry': geometry.name,
        'origin': geometry.entry.origin,
        'kind': str(geometry.kind),
        'signature': str(geometry.signature),
        'params': dict(sorted(geometry.params.items())),
        'sampling': sampling,
        'seed': seed,
        'points': len(points),
        'residual_tol': residual_tol,
        'class_tol': class_tol,
    }
    config['digest'] = config_digest(config)
    return config


def _envelope(command: str, config: dict, reproducible: bool) -> dict:
    report = {
        'schema': SCHEMA_VERSION,
        'tool': {'name': 'kkweyl', 'version': tool_version()},
        'command': command,
        'config': config,
    }
    if not reproducible:
        report['timestamp'] = timezone.now().isoformat()
    return report


def verify_report(
    config: dict, result: SuiteResult, reproducible: bool = False
) -> dict:
    report = _envelope('verify', config, reproducible)
    report['checks'] = [r.as_dict() for r in result.records]
    report['facts'] = result.facts
    report['summary'] = {
        **result.counts(),
        'passed': result.passed,
    }
    return report


def scan_report(
    config: dict, rows: Sequence[ScanRow], reproducible: bool = False
) -> dict:
    report = _envelope('scan', config, reproducible)
    report['columns'] = list(SCAN_COLUMNS)
    report['rows'] = [
        dict(zip(SCAN_COLUMNS, row.as_row())) for row in rows
    ]
    return report


def scan_csv(rows: Sequence[ScanRow]) -> str:
    """
    The scan table with the fixed header `SCAN_COLUMNS`; missing values are
    empty cells.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(SCAN_COLUMNS)
    for row in rows:
        writer.writerow(
            '' if v is None else (repr(v) if isinstance(v, float) else v)
            for v in row.as_row()
        )
    return buffer.getvalue()


def _format_residual(value: float | None) -> str:
    return '-' if value is None else f'{value:.3e}'


def verify_text(report: dict) -> str:
    config = report['config']
    lines = [
        f'{config["geometry"]} ({config["kind"]}, {config["signature"]}), '
        f'{config["points"]} points',
        '',
    ]
    width = max((len(c['id']) for c in report['checks']), default=0)
    for record in report['checks']:
        line = (
            f'{record["id"]:<{width}}  {record["tag"]:<14} '
            f'{record["status"]:<15} '
            f'{_format_residual(record["max_residual"])}'
        )
        if record['reason']:
            line += f'  {record["reason"]}'
        lines.append(line)
    facts = report['facts']
    lines.append('')
    for key in sorted(facts):
        if key != 'conventions' and facts[key] is not None:
            lines.append(f'{key}: {facts[key]}')
    summary = report['summary']
    lines.append(
        f'{summary["pass"]} passed, {summary["fail"]} failed, '
        f'{summary["not_applicable"]} not applicable'
    )
    return '\n'.join(lines) + '\n'


def listing(entries: Sequence[GeometryEntry]) -> list[dict]:
    return [entry.describe() for entry in entries]


def listing_text(entries: Sequence[GeometryEntry]) -> str:
    lines = []
    for item in listing(entries):
        params = ', '.join(f'{k}={v}' for k, v in item['parameters'].items())
        domain = ', '.join(
            f'{c} in [{lo}, {hi}]' for c, (lo, hi) in item['domain'].items()
        )
        lines.append(
            f'{item["name"]:<22} {item["kind"]:<10} {item["signature"]:<11}'
            f' {params or "-"}; {domain}'
        )
    return '\n'.join(lines) + '\n'


__all__ = [
    'SCHEMA_VERSION',
    'tool_version',
    'ReportEncoder',
    'dumps',
    'config_digest',
    'run_config',
    'verify_report',
    'scan_report',
    'scan_csv',
    'verify_text',
    'listing',
    'listing_text',
]
