import math
import time

import numpy as np
from django.test import SimpleTestCase

from kkweyl.core import jets
from kkweyl.core.catalog import builtin
from kkweyl.core.exceptions import (
    DimensionError,
    SignatureError,
    SingularMetricError,
)
from kkweyl.core.geometry import (
    MetricField,
    Signature,
    conformal_rescale,
    covariant_divergence,
    curvature_bundle,
    epsilon_tensor,
    pontryagin_full,
    self_test,
    weyl_squared,
)


def sphere3(x):
    chi, theta = x[0], x[1]
    s = jets.sin(chi)
    return [
        [1.0, 0.0, 0.0],
        [0.0, s * s, 0.0],
        [0.0, 0.0, s * s * jets.sin(theta) ** 2],
    ]


def random_metric(seed, signature=Signature.EUCLIDEAN):
    rng = np.random.default_rng(seed)
    diagonal = np.diag([1.0, 1.0, 1.0, -1.0])
    if signature is Signature.EUCLIDEAN:
        diagonal = np.eye(4)
    base = rng.normal(scale=0.05, size=(4, 4))
    quadratic = rng.normal(scale=0.05, size=(4, 4, 4, 4))

    def components(x):
        g = jets.constant(diagonal + base, x.dim, x.order)
        return g + jets.einsum('abmn,m,n->ab', quadratic, x, x)

    return MetricField(4, signature, components, f'random-{seed}')


# (M, r, theta, Kretschmann) for Schwarzschild, from 48 M^2 / r^6 evaluated
# outside this package.
SCHWARZSCHILD_KRETSCHMANN = (
    (1.0, 3.4593, 2.49, 2.8009920503244266e-02),
    (1.0, 6.9866, 2.632, 4.1271092001593529e-04),
    (1.0, 5.3376, 2.105, 2.0757024103994614e-03),
    (1.0, 5.3393, 1.076, 2.0717402207820804e-03),
    (1.0, 5.6954, 1.221, 1.4063578832333404e-03),
    (1.0, 9.0351, 1.813, 8.8235521194001055e-05),
    (1.0, 2.695, 1.468, 1.2528198338373636e-01),
    (1.0, 9.0727, 0.425, 8.6064080584019676e-05),
    (1.0, 7.5812, 1.369, 2.5282121479915174e-04),
    (1.0, 5.2312, 0.873, 2.3422502352820509e-03),
    (1.5, 14.7591, 2.755, 1.0448753979264793e-05),
    (1.5, 6.3065, 0.308, 1.7166958413695782e-03),
    (1.5, 4.5776, 1.973, 1.1738070476196060e-02),
    (1.5, 8.1872, 1.52, 3.5860088556570084e-04),
    (1.5, 14.9896, 0.519, 9.5210203366106126e-06),
    (0.5, 2.3899, 1.893, 6.4402521391568879e-02),
    (0.5, 3.0212, 0.311, 1.5779905203662244e-02),
    (0.5, 1.9474, 2.416, 2.2001396715273380e-01),
    (0.5, 1.5938, 2.058, 7.3211332450852118e-01),
    (0.5, 4.8794, 2.204, 8.8916572799756656e-04),
)


class TestMetricField(SimpleTestCase):
    def test_rejects_dimension(self):
        with self.assertRaises(DimensionError):
            MetricField(2, Signature.EUCLIDEAN, lambda x: np.eye(2)).validate()

    def test_singular_metric(self):
        metric = MetricField(3, Signature.EUCLIDEAN, lambda x: np.zeros((3, 3)))
        with self.assertRaises(SingularMetricError):
            metric.local([0.0, 0.0, 0.0])

    def test_signature_mismatch(self):
        metric = MetricField(
            4, Signature.EUCLIDEAN, lambda x: np.diag([1.0, 1.0, 1.0, -1.0])
        )
        with self.assertRaisesRegex(SignatureError, '1 negative'):
            metric.local([0.0] * 4)

    def test_components_are_symmetrized(self):
        metric = MetricField(
            3,
            Signature.EUCLIDEAN,
            lambda x: [[1.0, 0.2, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        )
        g = metric.local([0.0, 0.0, 0.0]).g.value
        self.assertAlmostEqual(g[0, 1], 0.1)
        self.assertAlmostEqual(g[1, 0], 0.1)


class TestCurvature(SimpleTestCase):
    def test_flat_metric_has_no_curvature(self):
        metric = MetricField(4, Signature.EUCLIDEAN, lambda x: np.eye(4))
        bundle = curvature_bundle(metric, [0.1, 0.2, 0.3, 0.4])
        self.assertEqual(bundle.scale(), 0.0)
        self.assertEqual(bundle.kretschmann(), 0.0)

    def test_round_sphere_is_maximally_symmetric(self):
        metric = MetricField(3, Signature.EUCLIDEAN, sphere3)
        bundle = curvature_bundle(metric, [1.1, 0.8, 0.3])
        g = bundle.local.g.value
        np.testing.assert_allclose(bundle.ricci.value, 2 * g, atol=1e-10)
        self.assertAlmostEqual(bundle.scalar.value, 6.0, places=10)
        self.assertLess(bundle.weyl_trace_residual(), 1e-10)

    def test_symmetries_on_random_metric(self):
        for signature in Signature:
            bundle = curvature_bundle(
                random_metric(3, signature), [0.2, -0.1, 0.3, 0.1]
            )
            scale = bundle.scale()
            self.assertLess(bundle.symmetry_residual(), 1e-10 * scale)
            self.assertLess(bundle.bianchi_residual(), 1e-10 * scale)
            self.assertLess(bundle.weyl_trace_residual(), 1e-9 * scale)
            self.assertLess(
                np.abs(bundle.einstein_divergence()).max(),
                1e-8 * scale**1.5,
            )

    def test_self_test(self):
        self.assertLess(self_test(), 1e-9)


class TestEpsilon(SimpleTestCase):
    def test_contraction_identity(self):
        metric = MetricField(
            3,
            Signature.EUCLIDEAN,
            lambda x: [
                [2.0 + x[0] * x[0], 0.3, 0.0],
                [0.3, 1.0, x[1] * 0.1],
                [0.0, x[1] * 0.1, 1.5],
            ],
        )
        point = [0.3, 0.2, 0.1]
        up = epsilon_tensor(metric, point, 'up').value
        down = epsilon_tensor(metric, point, 'down').value
        np.testing.assert_allclose(
            np.einsum('abl,abt->lt', up, down), 2 * np.eye(3), atol=1e-12
        )

    def test_lorentzian_contraction_sign(self):
        metric = random_metric(5, Signature.LORENTZIAN)
        point = [0.1, 0.1, 0.1, 0.1]
        up = epsilon_tensor(metric, point, 'up').value
        down = epsilon_tensor(metric, point, 'down').value
        self.assertAlmostEqual(np.einsum('abcd,abcd->', up, down), -24.0)


class TestInvariants(SimpleTestCase):
    def test_schwarzschild_kretschmann(self):
        for m, r, theta, expected in SCHWARZSCHILD_KRETSCHMANN:
            metric = builtin('schwarzschild').bind(M=m).metric4()
            bundle = curvature_bundle(metric, [r, theta, 0.5, 0.0])
            self.assertLess(
                abs(bundle.kretschmann() / expected - 1.0), 1e-9, (m, r)
            )

    def test_schwarzschild_is_parity_even(self):
        geometry = builtin('schwarzschild').bind()
        p_riemann, p_weyl = pontryagin_full(
            geometry.metric4(), [5.0, 1.0, 0.5, 0.0]
        )
        self.assertAlmostEqual(p_riemann, 0.0, places=10)
        self.assertAlmostEqual(p_weyl, 0.0, places=10)

    def test_kerr_kretschmann_and_pontryagin(self):
        m, a = 1.0, 0.6
        geometry = builtin('kerr').bind(M=m, a=a)
        for r, theta in [(3.0, 0.9), (6.5, 2.0)]:
            c = math.cos(theta)
            sigma = r**2 + a**2 * c**2
            kretschmann = (
                48
                * m**2
                * (
                    r**6
                    - 15 * a**2 * r**4 * c**2
                    + 15 * a**4 * r**2 * c**4
                    - a**6 * c**6
                )
                / sigma**6
            )
            pontryagin = (
                48
                * m**2
                * a
                * r
                * c
                * (3 * r**2 - a**2 * c**2)
                * (r**2 - 3 * a**2 * c**2)
                / sigma**6
            )
            bundle = curvature_bundle(geometry.metric4(), [r, theta, 0.2, 0.0])
            self.assertAlmostEqual(
                bundle.kretschmann() / kretschmann, 1.0, places=7
            )
            p_riemann, p_weyl = bundle.pontryagin()
            self.assertAlmostEqual(
                abs(p_riemann) / abs(pontryagin), 1.0, places=7
            )
            self.assertAlmostEqual(p_riemann / p_weyl, 1.0, places=8)

    def test_weyl_square_and_dual_square(self):
        metric = random_metric(11, Signature.LORENTZIAN)
        c2, dual2 = weyl_squared(metric, [0.1, 0.2, 0.0, -0.1])
        self.assertAlmostEqual(dual2 / c2, -1.0, places=8)
        metric = random_metric(11)
        c2, dual2 = weyl_squared(metric, [0.1, 0.2, 0.0, -0.1])
        self.assertAlmostEqual(dual2 / c2, 1.0, places=8)

    def test_conformal_invariance_of_mixed_weyl(self):
        metric = random_metric(13)

        def sigma(x):
            return x[0] * 0.3 + x[1] * x[2] * 0.2

        rescaled = conformal_rescale(metric, sigma)
        point = [0.2, 0.1, -0.3, 0.05]
        original = curvature_bundle(metric, point)
        other = curvature_bundle(rescaled, point)
        np.testing.assert_allclose(
            other.weyl_mixed.value,
            original.weyl_mixed.value,
            atol=1e-10 * original.scale(),
        )

    def test_chern_simons_divergence_is_proportional(self):
        geometry = builtin('kerr').bind()
        ratios = []
        for point in ([3.0, 0.9, 0.1, 0.0], [5.0, 2.1, 0.4, 0.0]):
            result = curvature_bundle(geometry.metric4(), point).chern_simons()
            ratios.append(result.ratio)
        self.assertAlmostEqual(ratios[0] / ratios[1], 1.0, places=6)

    def test_chern_simons_divergence_matches_finite_differences(self):
        metric = random_metric(23)
        point = np.array([0.2, -0.1, 0.3, 0.1])
        h = 1e-4
        bundle = curvature_bundle(metric, point)
        fd = 0.0
        for a in range(4):
            step = np.eye(4)[a] * h
            plus = curvature_bundle(metric, point + step)
            minus = curvature_bundle(metric, point - step)
            fd += (
                plus.sqrt_abs_det * plus.chern_simons().current[a]
                - minus.sqrt_abs_det * minus.chern_simons().current[a]
            ) / (2 * h)
        result = bundle.chern_simons()
        self.assertAlmostEqual(
            result.divergence,
            fd / bundle.sqrt_abs_det,
            delta=1e-6 * max(1.0, bundle.scale()) ** 2,
        )

    def test_chern_simons_is_evaluated_quickly(self):
        bundle = curvature_bundle(
            builtin('schwarzschild').bind().metric4(), [4.0, 1.0, 0.5, 0.2]
        )
        start = time.perf_counter()
        result = bundle.chern_simons()
        self.assertLess(time.perf_counter() - start, 5.0)
        self.assertAlmostEqual(result.divergence, 0.0, places=10)

    def test_divergence_of_metric_inverse_vanishes(self):
        metric = random_metric(17)
        divergence = covariant_divergence(
            metric, [0.1, 0.1, 0.2, 0.0], lambda b: b.local.g_inv
        )
        np.testing.assert_allclose(divergence, 0.0, atol=1e-10)
