from django.core.management.base import BaseCommand, CommandError

from kkweyl.core.catalog import read_metric_file
from kkweyl.core.exceptions import MetricFileError


class Command(BaseCommand):
    help = 'Parses a metric file and reports the first error.'
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('path')

    def handle(self, *args, **options):
        path = options['path']
        try:
            entry = read_metric_file(path)
        except MetricFileError as e:
            raise CommandError(f'{path}:{e}', returncode=2) from e
        except OSError as e:
            raise CommandError(str(e), returncode=2) from e
        self.stdout.write(
            f'{path}: ok ({entry.name}, {entry.kind}, {entry.signature})'
        )
