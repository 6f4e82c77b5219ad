import tempfile
from pathlib import Path

from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase, override_settings

from kkweyl.core.exceptions import GeometryNotFound
from kkweyl.core.sources import (
    BuiltinSource,
    DirectorySource,
    get_source,
)


PLANE = """\
name: {name}
kind: metric3
signature: euclidean
coordinates: x, y, z
g[1,1] = 1
g[2,2] = 1
g[3,3] = 1
domain x = [0, 1]
domain y = [0, 1]
domain z = [0, 1]
"""


class TestBuiltinSource(SimpleTestCase):
    def test_entries_sorted(self):
        names = [entry.name for entry in BuiltinSource().entries()]
        self.assertEqual(names, sorted(names))
        self.assertIn('kerr', names)

    def test_unknown(self):
        with self.assertRaises(GeometryNotFound):
            BuiltinSource().load('nothing')


class TestDirectorySource(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name)
        (self.path / 'plane.metric').write_text(PLANE.format(name='plane'))

    def tearDown(self):
        self.directory.cleanup()

    def test_files_and_builtins(self):
        source = DirectorySource([self.path])
        self.assertIn('plane', source.names())
        self.assertIn('taub_nut', source.names())
        self.assertEqual(
            source.load('plane').origin, str(self.path / 'plane.metric')
        )

    def test_file_shadows_builtin(self):
        (self.path / 'kerr.metric').write_text(PLANE.format(name='kerr'))
        entry = DirectorySource([self.path]).load('kerr')
        self.assertEqual(entry.kind, 'metric3')

    def test_name_must_match_file(self):
        (self.path / 'other.metric').write_text(PLANE.format(name='plane2'))
        with self.assertRaisesRegex(GeometryNotFound, 'plane2'):
            DirectorySource([self.path]).load('other')

    def test_missing_directory_is_skipped(self):
        source = DirectorySource([self.path / 'missing'])
        with self.assertLogs('kkweyl.core.sources', 'WARNING'):
            self.assertIn('kerr', source.names())

    def test_dirs_must_be_a_list(self):
        with self.assertRaises(ImproperlyConfigured):
            DirectorySource(str(self.path))

    def test_configured(self):
        with override_settings(
            KKWEYL={
                'SOURCE': 'kkweyl.core.sources.DirectorySource',
                'DIRS': [str(self.path)],
            }
        ):
            source = get_source()
        self.assertIsInstance(source, DirectorySource)
        self.assertIn('plane', source.names())


class TestGetSource(SimpleTestCase):
    def test_default(self):
        self.assertIsInstance(get_source(), BuiltinSource)

    @override_settings(KKWEYL={'SOURCE': 'kkweyl.core.sources.Missing'})
    def test_bad_import(self):
        with self.assertRaises(ImportError):
            get_source()
