from django.core.management.base import BaseCommand

from kkweyl.core.reports import dumps, listing, listing_text
from kkweyl.core.sources import get_source


class Command(BaseCommand):
    help = 'Lists the available geometries.'
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument(
            '--format', choices=('text', 'json'), default='text'
        )

    def handle(self, *args, **options):
        entries = get_source().entries()
        if options['format'] == 'json':
            self.stdout.write(dumps(listing(entries)), ending='')
        else:
            self.stdout.write(listing_text(entries), ending='')
