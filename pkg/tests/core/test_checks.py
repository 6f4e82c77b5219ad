import math

from django.test import SimpleTestCase

from kkweyl.core.catalog import builtin
from kkweyl.core.checks import (
    CHECKS,
    Outcome,
    Status,
    SuiteConfig,
    relative,
    run_suite,
    scan_points,
)
from kkweyl.core.exceptions import DimensionError
from kkweyl.core.sampling import sample_points


def suite(name, count=3, seed=0, only=None, **params):
    geometry = builtin(name).bind(params)
    points = sample_points(geometry.domain, count, seed)
    return run_suite(geometry, points, only=only)


def by_id(result):
    return {record.id: record for record in result.records}


class TestRegistry(SimpleTestCase):
    def test_ids_and_tags(self):
        expected = {
            'bundle.riemann_symmetries': 'EW14',
            'bundle.bianchi_first': 'EW14',
            'bundle.weyl_traceless': 'EW16',
            'bundle.einstein_divergence': 'EW17',
            'pontryagin.two_forms': 'EW38',
            'pontryagin.reduction': 'EW25',
            'pontryagin.blocks': 'EW24',
            'weyl.double_dual': 'EW20',
            'weyl.footnote_square': 'EW26-footnote',
            'weyl.conformal_invariance': 'EW16',
            'reduction.w1': 'W1',
            'reduction.w3': 'W3',
            'reduction.dual_w1': 'dualW1',
            'reduction.dual_w2': 'dualW2',
            'reduction.traceless': 'W2',
            'reduction.transversality': 'EW19',
            'reduction.roundtrip': 'j1',
            'selfduality.c_pm_k': 'mainResult',
            'einstein_weyl.ew7_from_selfduality': 'EW7',
            'einstein_weyl.residual': 'EW5',
            'einstein_weyl.gauge_fixed': 'EW13',
            'einstein_weyl.ew21': 'EW21',
            'einstein_weyl.ew22': 'EW22',
            'einstein_weyl.compatibility': 'EW1',
            'einstein_weyl.two_path': 'EW6',
            'einstein_weyl.gauduchon': 'EW11',
            'currents.vector': 'EW31',
            'currents.tensor': 'EW33',
            'currents.scalar': 'EW35',
            'chern_simons.divergence': 'EW40',
        }
        self.assertEqual(
            {id: check.tag for id, check in CHECKS.items()}, expected
        )

    def test_third_derivative_checks_are_relaxed(self):
        self.assertEqual(CHECKS['bundle.einstein_divergence'].factor, 10)
        self.assertEqual(CHECKS['reduction.w1'].factor, 1)


class TestHelpers(SimpleTestCase):
    def test_relative(self):
        self.assertEqual(relative(2.0, 4.0), 0.5)
        self.assertEqual(relative(2.0, 4.0, 2), 0.125)
        self.assertEqual(relative(2.0, 0.0, 2), 2.0)

    def test_outcome(self):
        self.assertEqual(Outcome([]).max_residual, 0.0)
        self.assertEqual(Outcome([1e-9, 3e-9]).max_residual, 3e-9)


class TestSuite(SimpleTestCase):
    def test_flat_euclidean(self):
        result = suite('flat_euclidean4')
        self.assertTrue(result.passed, result.failed)
        self.assertEqual(result.facts['self_duality'], 'conformally_flat')

    def test_records_are_sorted(self):
        ids = [record.id for record in suite('flat_euclidean4').records]
        self.assertEqual(ids, sorted(ids))

    def test_taub_nut(self):
        result = suite('taub_nut')
        self.assertTrue(result.passed, result.failed)
        records = by_id(result)
        self.assertEqual(records['selfduality.c_pm_k'].status, Status.PASS)
        self.assertEqual(
            records['einstein_weyl.ew7_from_selfduality'].status, Status.PASS
        )
        self.assertEqual(
            records['einstein_weyl.ew21'].status, Status.NOT_APPLICABLE
        )
        self.assertIsNotNone(records['einstein_weyl.ew21'].max_residual)
        self.assertIn(
            result.facts['self_duality'], ('self_dual', 'anti_self_dual')
        )
        self.assertIsNotNone(result.facts['ew21']['c_estimate'])

    def test_kerr(self):
        result = suite('kerr')
        self.assertTrue(result.passed, result.failed)
        records = by_id(result)
        self.assertEqual(records['pontryagin.reduction'].status, Status.PASS)
        self.assertEqual(
            records['selfduality.c_pm_k'].status, Status.NOT_APPLICABLE
        )
        self.assertEqual(
            records['selfduality.c_pm_k'].reason, 'not applicable (lorentzian)'
        )
        self.assertEqual(
            result.facts['self_duality'], 'not applicable (lorentzian)'
        )
        self.assertEqual(result.facts['classes']['nonzero_P'], 3)
        self.assertIsNotNone(result.facts['chern_simons_ratio'])

    def test_hopf_reduction_constancy(self):
        result = suite('conformally_flat_kk')
        self.assertTrue(result.passed, result.failed)
        records = by_id(result)
        self.assertEqual(records['einstein_weyl.ew21'].status, Status.PASS)
        self.assertEqual(records['einstein_weyl.ew22'].status, Status.PASS)
        self.assertAlmostEqual(result.facts['ew21']['c_estimate'], -3.0, 8)

    def test_sphere(self):
        result = suite('sphere3')
        self.assertTrue(result.passed, result.failed)
        records = by_id(result)
        self.assertEqual(records['einstein_weyl.residual'].status, Status.PASS)
        self.assertEqual(
            records['einstein_weyl.gauge_fixed'].status, Status.PASS
        )
        self.assertEqual(
            records['pontryagin.two_forms'].status, Status.NOT_APPLICABLE
        )
        self.assertIsNone(result.facts['classes'])

    def test_singular_point_fails_with_reason(self):
        geometry = builtin('schwarzschild').bind()
        result = run_suite(geometry, [(2.0, 1.0, 0.5, 0.0)])
        self.assertFalse(result.passed)
        record = by_id(result)['bundle.riemann_symmetries']
        self.assertEqual(record.status, Status.FAIL)
        self.assertIsNone(record.max_residual)
        self.assertTrue(record.reason)

    def test_tolerance_is_applied(self):
        geometry = builtin('taub_nut').bind()
        points = sample_points(geometry.domain, 2, 0)
        result = run_suite(geometry, points, SuiteConfig(residual_tol=1e-30))
        self.assertFalse(result.passed)

    def test_only(self):
        geometry = builtin('kerr').bind()
        result = run_suite(
            geometry, [(4.0, 1.0, 0.0, 0.0)], only=['reduction']
        )
        self.assertTrue(
            all(r.id.startswith('reduction.') for r in result.records)
        )
        self.assertEqual(len(result.records), 7)

    def test_deterministic(self):
        first = suite('taub_nut', seed=5)
        second = suite('taub_nut', seed=5)
        self.assertEqual(
            [r.as_dict() for r in first.records],
            [r.as_dict() for r in second.records],
        )
        self.assertEqual(first.facts, second.facts)


class TestScan(SimpleTestCase):
    def test_schwarzschild_is_electric(self):
        geometry = builtin('schwarzschild').bind()
        rows = scan_points(
            geometry, sample_points(geometry.domain, 5, seed=1)
        )
        for row in rows:
            self.assertEqual(row.point_class, 'electric')
            self.assertAlmostEqual(row.p_full, 0.0, places=10)
            self.assertAlmostEqual(row.k_norm, 0.0, places=10)

    def test_twisted_flat_is_trivial(self):
        geometry = builtin('flat_twisted4').bind()
        rows = scan_points(geometry, sample_points(geometry.domain, 4, 2))
        self.assertEqual({row.point_class for row in rows}, {'trivial'})

    def test_kerr(self):
        geometry = builtin('kerr').bind()
        rows = scan_points(geometry, [(4.0, 0.8, 0.0, 0.0)])
        row = rows[0]
        self.assertEqual(row.point_class, 'nonzero_P')
        self.assertTrue(math.isclose(row.p_full, row.p_reduced, rel_tol=1e-7))
        self.assertEqual(len(row.as_row()), 9)

    def test_kk_triple_rows_have_four_coordinates(self):
        geometry = builtin('taub_nut').bind()
        rows = scan_points(geometry, [(1.0, 1.0, 0.5)])
        self.assertEqual(rows[0].point, (1.0, 1.0, 0.5, 0.0))

    def test_metric3(self):
        with self.assertRaises(DimensionError):
            scan_points(builtin('sphere3').bind(), [(1.0, 1.0, 1.0)])


class TestAtScale(SimpleTestCase):
    def test_reduction_equivalence(self):
        for name in ('taub_nut', 'kerr', 'schwarzschild', 'flat_twisted4'):
            result = suite(name, count=100, seed=3, only=['reduction'])
            self.assertTrue(result.passed, (name, result.failed))
            self.assertEqual(len(result.records), 7)

    def test_taub_nut_self_duality_and_einstein_weyl(self):
        result = suite(
            'taub_nut',
            count=100,
            seed=4,
            only=['selfduality', 'einstein_weyl'],
        )
        self.assertTrue(result.passed, result.failed)
        records = by_id(result)
        self.assertEqual(records['selfduality.c_pm_k'].status, Status.PASS)
        self.assertEqual(
            records['einstein_weyl.ew7_from_selfduality'].status, Status.PASS
        )
        self.assertIsNotNone(records['einstein_weyl.ew21'].max_residual)
        self.assertIn(
            result.facts['self_duality'], ('self_dual', 'anti_self_dual')
        )

    def test_kerr_is_generically_nonzero_p(self):
        geometry = builtin('kerr').bind()
        rows = scan_points(
            geometry, sample_points(geometry.domain, 100, seed=6)
        )
        classes = [row.point_class for row in rows]
        self.assertGreaterEqual(classes.count('nonzero_P'), 95, classes)
