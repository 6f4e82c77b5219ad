"""
Kaluza-Klein assembly and reduction of 4-metrics with a Killing direction.

The fourth chart coordinate `x4` is the reduction direction. A `KKTriple`
holds the mode functions over the remaining 3-chart; `assemble_kk` builds

    euclidean:   g4 = exp(2 sigma) [[g + a a,  a], [ a,  1]]
    lorentzian:  g4 = exp(2 sigma) [[g - a a, -a], [-a, -1]]

and `extract_kk` inverts it. Reduced quantities (f, c, k, F, the currents)
live on the 3-geometry and are collected per point in a `ReducedBundle`.
"""

import logging
from dataclasses import dataclass, replace
from enum import StrEnum
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from kkweyl.core import jets
from kkweyl.core.exceptions import (
    DimensionError,
    ReductionError,
    SignatureError,
)
from kkweyl.core.geometry import (
    CurvatureBundle,
    MetricField,
    Signature,
    covector_derivative,
    curvature_bundle,
    divergence,
    epsilon_from_local,
)
from kkweyl.core.jets import Jet
from kkweyl.core.utils import Validatable, max_abs, scaled


logger = logging.getLogger(__name__)


KILLING_TOLERANCE = 1e-10


ScalarField = Callable[[Jet], Jet | float]
CovectorField = Callable[[Jet], Jet | Sequence]


def zero_scalar(x: Jet) -> float:
    return 0.0


def zero_covector(x: Jet) -> Jet:
    return jets.constant(np.zeros(3), x.dim, x.order)


def _sign(signature: Signature) -> float:
    return 1.0 if Signature(signature) is Signature.EUCLIDEAN else -1.0


@dataclass(frozen=True, eq=False)
class KKTriple(Validatable):
    """
    Kaluza-Klein mode functions over a 3-chart.

    Attributes:
        sigma (Callable): Conformal scalar `sigma(x)`.
        a (Callable): Gauge covector `a_mu(x)`, shape (3,).
        g3 (MetricField): Euclidean 3-metric.
        reduction_signature (Signature): Selects the euclidean or lorentzian
            block form of the 4-metric.
        name (str): Label used in reports.
    """

    sigma: ScalarField
    a: CovectorField
    g3: MetricField
    reduction_signature: Signature
    name: str = ''

    def validate_g3(self):
        self.g3.validate()
        if self.g3.dim != 3:
            raise DimensionError('The reduced metric must be 3-dimensional')
        if Signature(self.g3.signature) is not Signature.EUCLIDEAN:
            raise SignatureError('The reduced 3-metric must be euclidean')

    def validate_reduction_signature(self):
        Signature(self.reduction_signature)

    @property
    def sign(self) -> float:
        return _sign(self.reduction_signature)

    def stripped(self) -> 'KKTriple':
        """
        Returns the same triple with `sigma = 0`.
        """
        return replace(self, sigma=zero_scalar, name=f'{self.name} (sigma=0)')

    def sigma_at(self, x: Jet) -> Jet:
        return jets.asjet(self.sigma(x), x.dim, x.order)

    def a_at(self, x: Jet) -> Jet:
        a = jets.array(self.a(x), x.dim, x.order)
        if a.shape != (3,):
            raise DimensionError(f'Gauge field returned shape {a.shape}')
        return a


def assemble_kk(kk: KKTriple) -> MetricField:
    """
    Builds the 4-metric of a Kaluza-Klein triple.
    """
    eta = kk.sign

    def components(x4: Jet) -> Jet:
        x = x4[:3]
        a = kk.a_at(x)
        g = kk.g3.components(x)
        top = g + jets.einsum('m,n->mn', a, a) * eta
        order = min(top.order, a.order)
        block = np.zeros((4, 4, jets.coefficient_count(x4.dim, order)))
        block[:3, :3] = top.truncate(order).coeffs
        block[:3, 3] = a.truncate(order).coeffs * eta
        block[3, :3] = a.truncate(order).coeffs * eta
        block[3, 3, 0] = eta
        factor = jets.exp(kk.sigma_at(x) * 2.0)
        return factor * Jet(block, x4.dim, order)

    return MetricField(4, kk.reduction_signature, components, kk.name)


def check_killing(metric4: MetricField, points: Sequence[Sequence[float]]):
    """
    Verifies that no component depends on `x4` at the given points.

    Raises:
        ReductionError: Some `d_4 g_MN` exceeds the tolerance.
    """
    for point in points:
        g = metric4.components(jets.variables(point))
        drift = max_abs(g.derivative(3).value)
        if drift > KILLING_TOLERANCE * max(1.0, max_abs(g.value)):
            raise ReductionError(
                f'Metric {metric4.name!r} depends on x4 at {tuple(point)} '
                f'(|d_4 g| = {drift:.3e}); not a Killing reduction'
            )


def _embed(x3: Jet) -> Jet:
    zero = jets.constant(np.zeros(1), x3.dim, x3.order)
    return jets.concatenate([x3, zero])


def extract_kk(
    metric4: MetricField,
    signature: Signature | None = None,
    points: Sequence[Sequence[float]] = (),
) -> KKTriple:
    """
    Reads the Kaluza-Klein triple off a 4-metric reduced along `x4`.

    Args:
        metric4 (MetricField): A 4-metric independent of its last coordinate.
        signature (Signature, optional): Reduction signature. Defaults to the
            metric's signature.
        points: Chart points (4 coordinates) at which independence from `x4`
            and the sign of `g_44` are verified.

    Raises:
        ReductionError: The metric depends on `x4`.
        SignatureError: `g_44` has the wrong sign for the signature.
    """
    if metric4.dim != 4:
        raise DimensionError('Only 4-metrics can be reduced')
    signature = Signature(signature or metric4.signature)
    eta = _sign(signature)
    check_killing(metric4, points)

    def g4(x3: Jet) -> Jet:
        g = metric4.components(_embed(x3))
        if eta * np.asarray(g[3, 3].value) <= 0:
            raise SignatureError(
                f'g_44 of {metric4.name!r} has the wrong sign for '
                f'{signature} reduction'
            )
        return g

    def sigma(x3: Jet) -> Jet:
        return jets.ln(g4(x3)[3, 3] * eta) * 0.5

    def a(x3: Jet) -> Jet:
        g = g4(x3)
        return g[:3, 3] / g[3, 3]

    def g3(x3: Jet) -> Jet:
        g = g4(x3)
        gauge = g[:3, 3] / g[3, 3]
        outer = jets.einsum('m,n->mn', gauge, gauge)
        return (g[:3, :3] / g[3, 3] - outer) * eta

    for point in points:
        value = float(metric4.components(jets.variables(point, 0))[3, 3].value)
        if eta * value <= 0:
            raise SignatureError(
                f'g_44 = {value:.6g} at {tuple(point)} has the wrong sign for '
                f'{signature} reduction'
            )

    return KKTriple(
        sigma=sigma,
        a=a,
        g3=MetricField(3, Signature.EUCLIDEAN, g3, f'{metric4.name} (3d)'),
        reduction_signature=signature,
        name=metric4.name,
    )


def field_strength_covector(kk: KKTriple, sign: float = 1.0) -> CovectorField:
    """
    Returns the covector field `sign * f_mu` over the 3-chart.
    """

    def f_down(x: Jet) -> Jet:
        g = kk.g3.components(x)
        da = kk.a_at(x).gradient()
        det_sign = 1.0 if np.linalg.det(np.asarray(g.value)) > 0 else -1.0
        eps = (
            jets.reciprocal(jets.sqrt_abs_det(g))
            * det_sign
            * jets.permutation_symbol(3)
        )
        f_up = jets.einsum('lmn,mn->l', eps, da)
        return jets.einsum('lk,k->l', g, f_up) * sign

    return f_down


class PointClass(StrEnum):
    TRIVIAL = 'trivial'
    ELECTRIC = 'electric'
    MAGNETIC = 'magnetic'
    NULL_GENERAL = 'null_general'
    NONZERO_P = 'nonzero_P'


@dataclass(frozen=True)
class Currents:
    """
    The three conserved-current candidates and their divergences.

    Attributes:
        j_scalar (float): `f^2`.
        j_tensor (numpy.ndarray): `g^{mn}(r -+ 2 f^2) +- 6 f^m f^n`.
        j_vector (numpy.ndarray): `r^{mn} f_n - r f^m / 2 +- f^2 f^m / 2`.
        scalar_gradient (numpy.ndarray): `d_m j`.
        tensor_divergence (numpy.ndarray): `d_m j^{mn}`.
        vector_divergence (float): `d_m j^m`.
        contraction (float): `(r^ + f^f^) . d f` with the signature sign,
            an independent evaluation of `d_m j^m`.
        geodesic_residual (numpy.ndarray): `f^n d_n f^m`.
    """

    j_scalar: float
    j_tensor: np.ndarray
    j_vector: np.ndarray
    scalar_gradient: np.ndarray
    tensor_divergence: np.ndarray
    vector_divergence: float
    contraction: float
    geodesic_residual: np.ndarray


@dataclass(frozen=True, eq=False)
class ReducedBundle:
    """
    Reduced Kaluza-Klein quantities at one point of the 3-chart.
    """

    kk: KKTriple
    point: tuple[float, ...]

    @cached_property
    def bundle(self) -> CurvatureBundle:
        return curvature_bundle(self.kk.g3, self.point)

    @property
    def local(self):
        return self.bundle.local

    @property
    def sign(self) -> float:
        return self.kk.sign

    @cached_property
    def epsilon_up(self) -> Jet:
        return epsilon_from_local(self.local, 'up')

    @cached_property
    def a(self) -> Jet:
        return self.kk.a_at(jets.variables(self.point))

    @cached_property
    def sigma(self) -> float:
        return float(self.kk.sigma_at(jets.variables(self.point, 0)).value)

    @cached_property
    def f_down(self) -> Jet:
        return field_strength_covector(self.kk)(jets.variables(self.point))

    @cached_property
    def f_up(self) -> Jet:
        return jets.einsum('lk,k->l', self.local.g_inv, self.f_down)

    @cached_property
    def f_squared(self) -> Jet:
        return jets.einsum('l,l->', self.f_up, self.f_down)

    @cached_property
    def grad_f(self) -> Jet:
        return covector_derivative(self.bundle.christoffel, self.f_down)

    @cached_property
    def k(self) -> Jet:
        return (self.grad_f + self.grad_f.T) * 0.5

    @cached_property
    def F(self) -> Jet:
        return jets.einsum('mnl,nl->m', self.epsilon_up, self.grad_f)

    def traceless(self, tensor: Jet) -> Jet:
        g = self.local.g
        trace = jets.einsum('ab,ab->', self.local.g_inv, tensor)
        return tensor - g * trace * (1.0 / 3.0)

    @cached_property
    def ff_traceless(self) -> Jet:
        return self.traceless(jets.einsum('m,n->mn', self.f_down, self.f_down))

    @cached_property
    def c(self) -> Jet:
        return (
            self.traceless(self.bundle.ricci) + self.ff_traceless * self.sign
        ) * 0.5

    def contract(self, s: np.ndarray, t: np.ndarray) -> float:
        g_inv = np.asarray(self.local.g_inv.value)
        return float(np.einsum('ma,nb,mn,ab->', g_inv, g_inv, s, t))

    @cached_property
    def c_dot_k(self) -> float:
        return self.contract(self.c.value, self.k.value)

    @cached_property
    def c_norm(self) -> float:
        return float(np.sqrt(max(self.contract(self.c.value, self.c.value), 0)))

    @cached_property
    def k_norm(self) -> float:
        return float(np.sqrt(max(self.contract(self.k.value, self.k.value), 0)))

    def transversality(self) -> float:
        """
        `d_m f^m`, which vanishes identically.
        """
        return float(divergence(self.bundle.christoffel, self.f_up).value)

    def scale(self) -> float:
        """
        Local scale of the reduced data: curvature, `|f|^2` and `|d f|`.
        """
        return max(
            self.bundle.scale(),
            max_abs(self.f_down.value) * max_abs(self.f_up.value),
            max_abs(self.grad_f.value),
        )

    def classify(self, tol: float) -> PointClass:
        """
        Classifies the point with the dimensionless tolerance `tol`.
        """
        threshold = tol * self.scale()
        c_small = self.c_norm <= threshold
        k_small = self.k_norm <= threshold
        if c_small and k_small:
            return PointClass.TRIVIAL
        if k_small:
            return PointClass.ELECTRIC
        if c_small:
            return PointClass.MAGNETIC
        if abs(self.c_dot_k) <= tol * self.c_norm * self.k_norm:
            return PointClass.NULL_GENERAL
        return PointClass.NONZERO_P

    def currents(self) -> Currents:
        eta = self.sign
        gamma = self.bundle.christoffel
        g_inv = self.local.g_inv
        r = self.bundle.scalar
        f_up, f2 = self.f_up, self.f_squared
        ff_up = jets.einsum('m,n->mn', f_up, f_up)

        j_tensor = g_inv * (r - f2 * (2.0 * eta)) + ff_up * (6.0 * eta)
        j_vector = (
            jets.einsum('mn,n->m', self.bundle.ricci_up, self.f_down)
            - f_up * r * 0.5
            + f_up * f2 * (0.5 * eta)
        )
        ricci_hat = self.traceless(self.bundle.ricci)
        shape = ricci_hat + self.ff_traceless * eta
        contraction = jets.einsum(
            'ma,nb,ab,mn->', g_inv, g_inv, shape, self.grad_f
        )
        geodesic = jets.einsum('n,mk,nk->m', f_up, g_inv, self.grad_f)
        return Currents(
            j_scalar=float(f2.value),
            j_tensor=np.asarray(j_tensor.value),
            j_vector=np.asarray(j_vector.value),
            scalar_gradient=np.asarray(f2.gradient().value),
            tensor_divergence=np.asarray(divergence(gamma, j_tensor).value),
            vector_divergence=float(divergence(gamma, j_vector).value),
            contraction=float(contraction.value),
            geodesic_residual=np.asarray(geodesic.value),
        )

    def pontryagin_reduced(self) -> float:
        from kkweyl.core.conventions import get_conventions

        coupling = get_conventions(self.kk.reduction_signature).pontryagin
        return coupling * self.c_dot_k


def reduce_point(kk: KKTriple, point: Sequence[float]) -> ReducedBundle:
    if len(point) != 3:
        raise DimensionError('Reduced quantities live on the 3-chart')
    return ReducedBundle(kk, tuple(float(x) for x in point))


def lift(point: Sequence[float]) -> tuple[float, ...]:
    """
    Embeds a 3-chart point at `x4 = 0`.
    """
    return (*(float(x) for x in point), 0.0)


def field_strength_f(kk: KKTriple, point: Sequence[float]) -> np.ndarray:
    """
    `f^l = eps^{lmn} d_m a_n` at `point`.
    """
    return np.asarray(reduce_point(kk, point).f_up.value)


def c_tensor(kk: KKTriple, point: Sequence[float]) -> np.ndarray:
    return np.asarray(reduce_point(kk, point).c.value)


def k_tensor(kk: KKTriple, point: Sequence[float]) -> np.ndarray:
    return np.asarray(reduce_point(kk, point).k.value)


def F_vector(kk: KKTriple, point: Sequence[float]) -> np.ndarray:
    """
    `F^m = eps^{mnl} d_n f_l` at `point`.
    """
    return np.asarray(reduce_point(kk, point).F.value)


@dataclass(frozen=True)
class ReductionTerms:
    """
    Direct 4-dimensional Weyl components next to the 3-dimensional
    expressions they reduce to, before any coupling constant is applied.

    Every `*_lhs` array is computed from the assembled 4-metric, every
    `*_unit` array from the reduced fields.
    """

    w1_lhs: np.ndarray
    w1_unit: np.ndarray
    w3_lhs: np.ndarray
    w3_unit: np.ndarray
    dual_w1_lhs: np.ndarray
    dual_w1_unit: np.ndarray
    dual_w2_lhs: np.ndarray
    dual_w2_unit: np.ndarray
    weyl_square: float
    c_square: float
    k_square: float
    pontryagin: float
    c_dot_k: float
    pontryagin_blocks: tuple[float, float, float]
    scale: float


def reduction_terms(kk: KKTriple, point: Sequence[float]) -> ReductionTerms:
    """
    Evaluates both sides of the reduced Weyl relations on the sigma-stripped
    metric at a 3-chart point.
    """
    reduced = reduce_point(kk, point)
    bundle = curvature_bundle(assemble_kk(kk.stripped()), lift(point))

    e3 = np.asarray(reduced.epsilon_up.value)
    g3 = np.asarray(reduced.local.g.value)
    g3_inv = np.asarray(reduced.local.g_inv.value)
    a = np.asarray(reduced.a.value)
    c = np.asarray(reduced.c.value)
    k = np.asarray(reduced.k.value)
    k_mixed = g3_inv @ k

    weyl = bundle.weyl_up
    dual = bundle.dual_weyl
    spatial = weyl[:3, :3, :3, :3]
    mixed = weyl[:3, :3, :3, 3] + np.einsum('mnlt,t->mnl', spatial, a)
    dual_spatial = dual[:3, :3, :3, :3]

    low = bundle.weyl_down.value
    blocks = (
        0.5 * np.einsum('abcd,abcd->', dual_spatial, low[:3, :3, :3, :3]),
        2.0 * np.einsum('abc,abc->', dual[:3, :3, :3, 3], low[:3, :3, :3, 3]),
        2.0 * np.einsum('ab,ab->', dual[:3, 3, :3, 3], low[:3, 3, :3, 3]),
    )

    return ReductionTerms(
        w1_lhs=spatial,
        w1_unit=-np.einsum('mna,ltb,ab->mnlt', e3, e3, c),
        w3_lhs=mixed,
        w3_unit=np.einsum('mnt,lt->mnl', e3, k_mixed),
        dual_w1_lhs=dual_spatial,
        dual_w1_unit=np.einsum('mna,ab,stb->stmn', e3, g3, mixed),
        dual_w2_lhs=dual[:3, :3, :3, 3]
        + np.einsum('stmn,n->stm', dual_spatial, a),
        dual_w2_unit=0.5
        * np.einsum('mab,ag,bd,stgd->stm', e3, g3, g3, spatial),
        weyl_square=bundle.weyl_squared()[0],
        c_square=reduced.contract(c, c),
        k_square=reduced.contract(k, k),
        pontryagin=bundle.pontryagin()[1],
        c_dot_k=reduced.c_dot_k,
        pontryagin_blocks=tuple(float(b) for b in blocks),
        scale=max(bundle.scale(), reduced.scale()),
    )


@dataclass(frozen=True)
class ReductionResiduals:
    """
    Largest deviations of the reduced Weyl relations, relative to the local
    curvature scale.
    """

    w1: float
    w3: float
    dual_w1: float
    dual_w2: float
    scale: float

    def max(self) -> float:
        return max(self.w1, self.w3, self.dual_w1, self.dual_w2)


def reduced_weyl_check(
    kk: KKTriple, point: Sequence[float]
) -> ReductionResiduals:
    """
    Compares the direct Weyl and dual-Weyl components of the sigma-stripped
    4-metric with their reduced expressions.
    """
    from kkweyl.core.conventions import get_conventions

    conventions = get_conventions(kk.reduction_signature)
    terms = reduction_terms(kk, point)
    scale = terms.scale

    def residual(lhs, unit, coupling):
        return scaled(max_abs(lhs - coupling * unit), scale)

    return ReductionResiduals(
        w1=residual(terms.w1_lhs, terms.w1_unit, conventions.w1),
        w3=residual(terms.w3_lhs, terms.w3_unit, conventions.mixed),
        dual_w1=residual(
            terms.dual_w1_lhs, terms.dual_w1_unit, conventions.dual_w1
        ),
        dual_w2=residual(
            terms.dual_w2_lhs, terms.dual_w2_unit, conventions.dual_w2
        ),
        scale=scale,
    )


def pontryagin_reduced(kk: KKTriple, point: Sequence[float]) -> float:
    """
    The reduced Chern-Pontryagin density `p c^{mn} k_{mn}` with the
    calibrated coupling `p`, before the conformal weight `exp(-4 sigma)`.
    """
    return reduce_point(kk, point).pontryagin_reduced()


def classify_point(
    kk: KKTriple, point: Sequence[float], tol: float = 1e-8
) -> PointClass:
    return reduce_point(kk, point).classify(tol)


def currents(kk: KKTriple, point: Sequence[float]) -> Currents:
    return reduce_point(kk, point).currents()


__all__ = [
    'KKTriple',
    'PointClass',
    'Currents',
    'ReducedBundle',
    'ReductionTerms',
    'ReductionResiduals',
    'assemble_kk',
    'extract_kk',
    'check_killing',
    'field_strength_covector',
    'field_strength_f',
    'c_tensor',
    'k_tensor',
    'F_vector',
    'reduced_weyl_check',
    'reduction_terms',
    'pontryagin_reduced',
    'classify_point',
    'currents',
    'reduce_point',
    'lift',
    'zero_scalar',
    'zero_covector',
]
