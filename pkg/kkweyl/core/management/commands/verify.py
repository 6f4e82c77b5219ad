from django.core.management.base import CommandError

from kkweyl.core.checks import SuiteConfig, run_suite
from kkweyl.core.conf import get_float_setting
from kkweyl.core.management.base import (
    GeometryCommand,
    output_path,
    parse_point,
    usage_error,
)
from kkweyl.core.reports import dumps, run_config, verify_report, verify_text


class Command(GeometryCommand):
    help = 'Runs the identity suite on a geometry.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--point',
            action='append',
            default=[],
            metavar='X1,X2,...',
            help='Evaluate at this point instead of sampling; repeatable.',
        )
        parser.add_argument('--tol', type=float, help='Residual tolerance.')
        parser.add_argument(
            '--signature',
            choices=('euclidean', 'lorentzian'),
            help='Reduction signature of a kk_triple entry.',
        )
        parser.add_argument(
            '--check',
            action='append',
            default=[],
            help='Only run checks with this id or id prefix; repeatable.',
        )
        parser.add_argument(
            '--format', choices=('json', 'text'), default='json'
        )

    def handle(self, *args, **options):
        geometry = self.bind(options, options['signature'])
        if options['point']:
            points = [parse_point(p) for p in options['point']]
            dim = len(geometry.domain)
            if any(len(p) != dim for p in points):
                raise usage_error(
                    f'Points of {geometry.name} need {dim} values'
                )
            seed, sampling = None, 'explicit'
        else:
            points, seed = self.random_points(geometry, options)
            sampling = 'random'
        tol = options['tol']
        if tol is None:
            tol = get_float_setting('RESIDUAL_TOL')
        elif not tol > 0:
            raise usage_error('--tol must be positive')
        config = SuiteConfig(
            residual_tol=tol, class_tol=self.class_tol(options)
        )

        result = run_suite(geometry, points, config, options['check'] or None)
        report = verify_report(
            run_config(
                geometry,
                points,
                seed=seed,
                residual_tol=config.residual_tol,
                class_tol=config.class_tol,
                sampling=sampling,
            ),
            result,
            options['reproducible'],
        )
        if options['format'] == 'json':
            text, suffix = dumps(report), 'json'
        else:
            text, suffix = verify_text(report), 'txt'
        self.emit(
            text,
            output_path(options['out'], f'{geometry.name}.verify', suffix),
        )
        if not result.passed:
            failed = ', '.join(r.id for r in result.failed)
            raise CommandError(f'Checks failed: {failed}', returncode=1)
