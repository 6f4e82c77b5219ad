import csv
import io
import json
import os
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from kkweyl import cli
from kkweyl.core.catalog import builtin_names
from kkweyl.core.checks import SCAN_COLUMNS
from kkweyl.core.management.base import OUTPUT_DIR_ENV


def run(*args, **options):
    out, err = io.StringIO(), io.StringIO()
    call_command(*args, stdout=out, stderr=err, **options)
    return out.getvalue()


def returncode(*args):
    try:
        run(*args)
    except CommandError as e:
        return e.returncode
    return 0


RATIO_METRIC = """\
name: ratio
kind: metric3
signature: euclidean
coordinates: x, y, z
parameters: b = 1
require: 1 / b > 0
require: b

g[1,1] = 1
g[2,2] = 1
g[3,3] = 1
domain x = [0, 1]
domain y = [0, 1]
domain z = [0, 1]
"""


class TestList(SimpleTestCase):
    def test_text(self):
        text = run('list')
        self.assertIn('schwarzschild', text)
        self.assertIn('taub_nut', text)

    def test_json(self):
        items = json.loads(run('list', '--format', 'json'))
        names = [item['name'] for item in items]
        self.assertEqual(names, sorted(names))
        kerr = next(item for item in items if item['name'] == 'kerr')
        self.assertEqual(kerr['parameters'], {'M': '1.0', 'a': '0.6'})
        self.assertEqual(kerr['signature'], 'lorentzian')


class TestVerify(SimpleTestCase):
    def test_json_report(self):
        report = json.loads(
            run('verify', 'flat_euclidean4', '--points', '2', '--seed', '3')
        )
        self.assertEqual(report['schema'], 1)
        self.assertEqual(report['command'], 'verify')
        self.assertEqual(report['tool']['name'], 'kkweyl')
        self.assertIn('timestamp', report)
        self.assertEqual(report['config']['seed'], 3)
        self.assertEqual(report['config']['points'], 2)
        self.assertEqual(len(report['config']['digest']), 16)
        self.assertTrue(report['summary']['passed'])
        self.assertEqual(report['summary']['fail'], 0)

    def test_reproducible_output_is_identical(self):
        args = ('verify', 'taub_nut', '--points', '2', '--reproducible')
        first, second = run(*args), run(*args)
        self.assertEqual(first, second)
        self.assertNotIn('timestamp', json.loads(first))

    def test_digest_follows_configuration(self):
        args = ('verify', 'flat_euclidean4', '--points', '1', '--reproducible')
        first = json.loads(run(*args, '--seed', '1'))['config']['digest']
        second = json.loads(run(*args, '--seed', '2'))['config']['digest']
        self.assertNotEqual(first, second)

    def test_text_format(self):
        text = run(
            'verify', 'flat_euclidean4', '--points', '1', '--format', 'text'
        )
        self.assertIn('reduction.w1', text)
        self.assertIn('0 failed', text)

    def test_explicit_point_and_check_filter(self):
        report = json.loads(
            run(
                'verify',
                'kerr',
                '--point',
                '4, pi/3, 0, 0',
                '--check',
                'pontryagin',
            )
        )
        ids = {record['id'] for record in report['checks']}
        self.assertEqual(
            ids,
            {
                'pontryagin.blocks',
                'pontryagin.reduction',
                'pontryagin.two_forms',
            },
        )
        self.assertEqual(report['config']['sampling'], 'explicit')
        self.assertIsNone(report['config']['seed'])

    def test_param_override(self):
        report = json.loads(
            run('verify', 'kerr', '--points', '1', '--param', 'a=0.3')
        )
        self.assertEqual(report['config']['params'], {'M': 1.0, 'a': 0.3})

    def test_failure_exits_with_one(self):
        with self.assertRaises(CommandError) as e:
            run('verify', 'schwarzschild', '--point', '2,1,0.5,0')
        self.assertEqual(e.exception.returncode, 1)

    def test_usage_errors_exit_with_two(self):
        cases = [
            ('verify', 'no_such_geometry'),
            ('verify', 'kerr', '--param', 'a=2'),
            ('verify', 'kerr', '--param', 'q=1'),
            ('verify', 'kerr', '--param', 'a'),
            ('verify', 'kerr', '--point', '1,2'),
            ('verify', 'kerr', '--tol', '0'),
            ('verify', 'kerr', '--signature', 'lorentzian'),
            ('verify', 'missing.metric'),
        ]
        for args in cases:
            with self.subTest(args=args):
                self.assertEqual(returncode(*args), 2)

    def test_unevaluable_requirement_exits_with_two(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'ratio.metric'
            path.write_text(RATIO_METRIC)
            for params in ('b=0', 'b=1'):
                with self.subTest(params=params):
                    code = returncode('verify', str(path), '--param', params)
                    self.assertEqual(code, 2)

    def test_every_builtin_passes_reproducibly(self):
        for name in builtin_names():
            with self.subTest(name=name):
                args = ('verify', name, '--reproducible')
                first, second = run(*args), run(*args)
                self.assertEqual(first, second)
                self.assertTrue(json.loads(first)['summary']['passed'])

    def test_signature_override(self):
        report = json.loads(
            run(
                'verify',
                'taub_nut',
                '--points',
                '1',
                '--signature',
                'lorentzian',
                '--check',
                'selfduality',
            )
        )
        self.assertEqual(report['config']['signature'], 'lorentzian')
        self.assertEqual(report['checks'][0]['status'], 'not_applicable')

    def test_out(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'nested' / 'report.json'
            stdout = run(
                'verify', 'flat_euclidean4', '--points', '1', '--out', path
            )
            self.assertEqual(stdout, '')
            self.assertTrue(json.loads(path.read_text())['summary']['passed'])

    def test_output_directory_from_environment(self):
        with tempfile.TemporaryDirectory() as tmp:
            with mock.patch.dict(os.environ, {OUTPUT_DIR_ENV: tmp}):
                run('verify', 'flat_euclidean4', '--points', '1')
            self.assertTrue(
                (Path(tmp) / 'flat_euclidean4.verify.json').is_file()
            )

    def test_output_directory_setting_wins(self):
        with tempfile.TemporaryDirectory() as tmp:
            other = Path(tmp) / 'other'
            with (
                override_settings(KKWEYL={'OUTPUT_DIR': tmp}),
                mock.patch.dict(os.environ, {OUTPUT_DIR_ENV: str(other)}),
            ):
                run('verify', 'flat_euclidean4', '--points', '1')
            self.assertTrue(
                (Path(tmp) / 'flat_euclidean4.verify.json').is_file()
            )
            self.assertFalse(other.exists())


class TestScan(SimpleTestCase):
    def test_csv(self):
        rows = list(
            csv.reader(io.StringIO(run('scan', 'kerr', '--points', '3')))
        )
        self.assertEqual(tuple(rows[0]), SCAN_COLUMNS)
        self.assertEqual(len(rows), 4)
        self.assertEqual({row[6] for row in rows[1:]}, {'nonzero_P'})

    def test_grid(self):
        rows = list(
            csv.reader(
                io.StringIO(
                    run('scan', 'schwarzschild', '--grid', 'r=3:9:4')
                )
            )
        )
        self.assertEqual(len(rows), 5)
        self.assertEqual([float(row[0]) for row in rows[1:]], [3, 5, 7, 9])

    def test_json(self):
        report = json.loads(
            run(
                'scan',
                'flat_twisted4',
                '--points',
                '2',
                '--format',
                'json',
                '--reproducible',
            )
        )
        self.assertEqual(report['command'], 'scan')
        self.assertEqual(report['columns'], list(SCAN_COLUMNS))
        self.assertEqual(len(report['rows']), 2)
        self.assertIsNone(report['config']['residual_tol'])

    def test_usage_errors(self):
        cases = [
            ('scan', 'kerr', '--grid', 'r=3:9:2', '--points', '2'),
            ('scan', 'kerr', '--grid', 'q=3:9:2'),
            ('scan', 'sphere3'),
            ('scan', 'kerr', '--class-tol', '-1'),
        ]
        for args in cases:
            with self.subTest(args=args):
                self.assertEqual(returncode(*args), 2)


INVALID_METRIC = """\
name: broken
kind: metric3
signature: euclidean
coordinates: x, y, z

g[1,1] = 1 +
"""


class TestCheckFile(SimpleTestCase):
    def test_builtin_file(self):
        path = (
            Path(cli.__file__).parent / 'core' / 'geometries' / 'kerr.metric'
        )
        self.assertIn('ok (kerr, metric4, lorentzian)', run('check_file', path))

    def test_invalid_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'broken.metric'
            path.write_text(INVALID_METRIC)
            with self.assertRaises(CommandError) as e:
                run('check_file', str(path))
        self.assertEqual(e.exception.returncode, 2)
        self.assertTrue(str(e.exception).startswith(f'{path}:6:'))

    def test_missing_file(self):
        self.assertEqual(returncode('check_file', '/no/such.metric'), 2)


class TestConsoleScript(SimpleTestCase):
    def main(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = cli.main(['kkweyl', *argv])
        return code, out.getvalue(), err.getvalue()

    def test_no_command(self):
        code, out, _ = self.main()
        self.assertEqual(code, 2)
        self.assertIn('usage: kkweyl', out)

    def test_unknown_command(self):
        code, _, err = self.main('frobnicate')
        self.assertEqual(code, 2)
        self.assertIn('frobnicate', err)

    def test_list(self):
        code, out, _ = self.main('list')
        self.assertEqual(code, 0)
        self.assertIn('conformally_flat_kk', out)

    def test_check_file_exit_code(self):
        code, _, err = self.main('check-file', '/no/such.metric')
        self.assertEqual(code, 2)
        self.assertIn('/no/such.metric', err)

    def test_verify_failure_exit_code(self):
        code, _, _ = self.main(
            'verify', 'schwarzschild', '--point', '2,1,0.5,0'
        )
        self.assertEqual(code, 1)
