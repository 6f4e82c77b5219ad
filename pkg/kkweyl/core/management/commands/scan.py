from kkweyl.core.checks import scan_points
from kkweyl.core.management.base import (
    GeometryCommand,
    output_path,
    usage_error,
)
from kkweyl.core.reports import dumps, run_config, scan_csv, scan_report
from kkweyl.core.sampling import grid_points, parse_grid


class Command(GeometryCommand):
    help = 'Tabulates the Pontryagin density and point class of a geometry.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--grid', help='Grid such as "r=3:9:10;theta=0.5:2.5:3".'
        )
        parser.add_argument(
            '--format', choices=('csv', 'json'), default='csv'
        )

    def handle(self, *args, **options):
        geometry = self.bind(options)
        if options['grid']:
            if options['points'] is not None:
                raise usage_error('--grid and --points are exclusive')
            coordinates = geometry.entry.coordinates
            try:
                axes = parse_grid(
                    options['grid'], coordinates, dict(geometry.params)
                )
            except ValueError as e:
                raise usage_error(str(e)) from e
            points = grid_points(axes, coordinates, geometry.domain)
            seed, sampling = None, options['grid']
        else:
            points, seed = self.random_points(geometry, options)
            sampling = 'random'
        class_tol = self.class_tol(options)

        rows = scan_points(geometry, points, class_tol)
        if options['format'] == 'csv':
            text = scan_csv(rows)
        else:
            config = run_config(
                geometry,
                points,
                seed=seed,
                residual_tol=None,
                class_tol=class_tol,
                sampling=sampling,
            )
            text = dumps(scan_report(config, rows, options['reproducible']))
        self.emit(
            text,
            output_path(
                options['out'], f'{geometry.name}.scan', options['format']
            ),
        )
