"""
Weyl geometry on 3-manifolds.

A `WeylStructure` is a Euclidean 3-metric together with a Weyl potential
`w_mu`. Its connection

    W^l_{mn} = Gamma^l_{mn} + w^l g_{mn} - w_m delta^l_n - w_n delta^l_m

satisfies `D_l g_{mn} = 2 w_l g_{mn}` and is unchanged by the gauge
transformation `g -> exp(2 sigma) g`, `w -> w + d sigma`.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from kkweyl.core import jets
from kkweyl.core.exceptions import DimensionError, SignatureError
from kkweyl.core.geometry import (
    CurvatureBundle,
    MetricField,
    Signature,
    conformal_rescale,
    covector_derivative,
    curvature_bundle,
    divergence,
    riemann_from_connection,
)
from kkweyl.core.jets import Jet
from kkweyl.core.kaluza_klein import (
    CovectorField,
    KKTriple,
    field_strength_covector,
    reduce_point,
)
from kkweyl.core.utils import Validatable, max_abs, max_or_zero, scaled


logger = logging.getLogger(__name__)


TWO_PATH_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class WeylStructure(Validatable):
    """
    A conformal class with Weyl potential.

    Attributes:
        g3 (MetricField): Euclidean 3-metric representing the class.
        w (Callable): Weyl potential `w_mu(x)`, shape (3,).
        name (str): Label used in reports.
    """

    g3: MetricField
    w: CovectorField
    name: str = ''

    def validate_g3(self):
        self.g3.validate()
        if self.g3.dim != 3:
            raise DimensionError('A Weyl structure needs a 3-metric')
        if Signature(self.g3.signature) is not Signature.EUCLIDEAN:
            raise SignatureError('A Weyl structure needs a euclidean metric')

    def w_at(self, x: Jet) -> Jet:
        w = jets.array(self.w(x), x.dim, x.order)
        if w.shape != (3,):
            raise DimensionError(f'Weyl potential returned shape {w.shape}')
        return w


def weyl_structure_from_kk(
    kk: KKTriple, sign: float = 1.0, name: str = ''
) -> WeylStructure:
    """
    The Weyl structure `(g3, sign * f)` of a Kaluza-Klein triple.
    """
    return WeylStructure(
        g3=kk.g3,
        w=field_strength_covector(kk, sign),
        name=name or f'{kk.name} (w = {sign:+g} f)',
    ).validate()


@dataclass(frozen=True)
class WeylCurvature:
    """
    Curvature of the Weyl connection at one point.

    Attributes:
        connection (numpy.ndarray): `W^l_{mn}`.
        curvature (numpy.ndarray): `R^k_{lmn}` of the Weyl connection.
        ricci (numpy.ndarray): `R^k_{lkn}`, not symmetric in general.
        scalar (float): `g^{ln} R_{ln}`.
        ricci_sym (numpy.ndarray): Symmetric part of `ricci`.
        antisymmetric (numpy.ndarray): Antisymmetric part of `ricci`.
        closed_form (numpy.ndarray): The symmetric part in terms of the
            Levi-Civita Ricci tensor and `w`.
        two_path_residual (float): Largest difference between the
            commutator and closed-form evaluations, relative to the scale.
        scale (float): Local scale used for the relative residuals.
    """

    connection: np.ndarray
    curvature: np.ndarray
    ricci: np.ndarray
    scalar: float
    ricci_sym: np.ndarray
    antisymmetric: np.ndarray
    closed_form: np.ndarray
    two_path_residual: float
    scale: float


@dataclass(frozen=True)
class GauduchonTerms:
    """
    Both sides of the contracted Einstein-Weyl identity at one point.

    `lhs = d^(m w^n) d_(m w_n)` and

        lhs = (Lambda - r/2 + w^2/2) d.w
              - d^m (r_{mn} w^n - w_m r/2 + w_m w^2/2) + E.d w

    where `E` is the Einstein-Weyl residual. The identity holds for every
    `(g, w)`; the last term drops out where the Einstein-Weyl equations hold.

    Attributes:
        lhs (float): The squared symmetrized gradient.
        first_term (float): `(Lambda - r/2 + w^2/2) d.w`.
        divergence_term (float): The total divergence.
        residual_contraction (float): `E^{mn} d_m w_n`.
        identity_residual (float): Failure of the full identity.
        substituted_residual (float): Failure once `E` is set to zero.
        scale (float): Local scale; residuals are quadratic in it.
    """

    lhs: float
    first_term: float
    divergence_term: float
    residual_contraction: float
    identity_residual: float
    substituted_residual: float
    scale: float


@dataclass(frozen=True)
class GaugeFixedResult:
    """
    Attributes:
        ew12_residual (float): Largest trace-free `r + w w` component.
        killing_residual (float): Largest `d_(m w_n)` component.
        divergence (float): Largest `|d.w|`, zero in the Gauduchon gauge.
        scale (float): Largest local scale over the points.
    """

    ew12_residual: float
    killing_residual: float
    divergence: float
    scale: float


@dataclass(frozen=True)
class ConstancyResult:
    """
    Attributes:
        values (tuple[float, ...]): `r - 5 f^2` per point.
        c_estimate (float): Mean of `values`.
        spread (float): Largest deviation from the mean.
        killing_F_residual (float): Largest `d_(m F_n)` component.
        scale (float): Largest local scale over the points.
    """

    values: tuple[float, ...]
    c_estimate: float
    spread: float
    killing_F_residual: float
    scale: float


def _traceless(g: Jet, g_inv: Jet, tensor: Jet) -> Jet:
    trace = jets.einsum('ab,ab->', g_inv, tensor)
    return tensor - g * trace * (1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class WeylBundle:
    """
    Weyl-geometric quantities of a structure at one point.
    """

    structure: WeylStructure
    point: tuple[float, ...]

    @cached_property
    def bundle(self) -> CurvatureBundle:
        return curvature_bundle(self.structure.g3, self.point)

    @property
    def local(self):
        return self.bundle.local

    @cached_property
    def w(self) -> Jet:
        return self.structure.w_at(jets.variables(self.point))

    @cached_property
    def w_up(self) -> Jet:
        return jets.einsum('ab,b->a', self.local.g_inv, self.w)

    @cached_property
    def w_squared(self) -> Jet:
        return jets.einsum('a,a->', self.w_up, self.w)

    @cached_property
    def grad_w(self) -> Jet:
        return covector_derivative(self.bundle.christoffel, self.w)

    @cached_property
    def sym_grad_w(self) -> Jet:
        return (self.grad_w + self.grad_w.T) * 0.5

    @cached_property
    def div_w(self) -> Jet:
        return jets.einsum('ab,ab->', self.local.g_inv, self.grad_w)

    @cached_property
    def ww(self) -> Jet:
        return jets.einsum('a,b->ab', self.w, self.w)

    @cached_property
    def connection(self) -> Jet:
        delta = np.eye(3)
        return (
            self.bundle.christoffel
            + jets.einsum('l,mn->lmn', self.w_up, self.local.g)
            - jets.einsum('m,ln->lmn', self.w, delta)
            - jets.einsum('n,lm->lmn', self.w, delta)
        )

    @cached_property
    def curvature(self) -> Jet:
        return riemann_from_connection(self.connection)

    @cached_property
    def ricci(self) -> Jet:
        return jets.einsum('klkn->ln', self.curvature)

    @cached_property
    def ricci_sym(self) -> Jet:
        return (self.ricci + self.ricci.T) * 0.5

    @cached_property
    def scalar(self) -> Jet:
        return jets.einsum('ln,ln->', self.local.g_inv, self.ricci)

    @cached_property
    def closed_form(self) -> Jet:
        """
        `r_{mn} + d_(m w_n) + w_m w_n + g_{mn} (d.w - w^2)`.
        """
        return (
            self.bundle.ricci
            + self.sym_grad_w
            + self.ww
            + self.local.g * (self.div_w - self.w_squared)
        )

    def traceless(self, tensor: Jet) -> Jet:
        return _traceless(self.local.g, self.local.g_inv, tensor)

    def scale(self) -> float:
        """
        Local scale: curvature, `|w|^2` and `|d w|`.
        """
        return max(
            self.bundle.scale(),
            max_abs(self.w.value) * max_abs(self.w_up.value),
            max_abs(self.grad_w.value),
        )

    def compatibility_residual(self) -> float:
        """
        Largest component of `D_l g_{mn} - 2 w_l g_{mn}`.
        """
        g = self.local.g
        w_conn = self.connection
        d_g = (
            g.gradient()
            - jets.einsum('rlm,rn->lmn', w_conn, g)
            - jets.einsum('rln,mr->lmn', w_conn, g)
        )
        return max_abs(
            (d_g - jets.einsum('l,mn->lmn', self.w, g) * 2.0).value
        )

    def weyl_curvature(self) -> WeylCurvature:
        ricci = np.asarray(self.ricci.value)
        antisymmetric = 0.5 * (ricci - ricci.T)
        grad_w = np.asarray(self.grad_w.value)
        expected_antisymmetric = 1.5 * (grad_w.T - grad_w)
        scale = self.scale()
        two_path = scaled(
            max_abs(
                self.ricci_sym.value - self.closed_form.value,
                antisymmetric - expected_antisymmetric,
            ),
            scale,
        )
        if two_path > TWO_PATH_TOLERANCE:
            logger.warning(
                'Weyl curvature paths disagree by %.3e at %s on %s',
                two_path,
                self.point,
                self.structure.name,
            )
        return WeylCurvature(
            connection=np.asarray(self.connection.value),
            curvature=np.asarray(self.curvature.value),
            ricci=ricci,
            scalar=float(self.scalar.value),
            ricci_sym=np.asarray(self.ricci_sym.value),
            antisymmetric=antisymmetric,
            closed_form=np.asarray(self.closed_form.value),
            two_path_residual=two_path,
            scale=scale,
        )

    @cached_property
    def residual(self) -> Jet:
        """
        `W r_(mn) - g_{mn} W r / 3` from the commutator curvature.
        """
        return self.ricci_sym - self.local.g * self.scalar * (1.0 / 3.0)

    @cached_property
    def residual_closed_form(self) -> Jet:
        """
        The trace-free combination of `r`, `d_(m w_n)` and `w w`.
        """
        return (
            self.traceless(self.bundle.ricci)
            + self.traceless(self.sym_grad_w)
            + self.traceless(self.ww)
        )

    def mixed_residual(self) -> np.ndarray:
        return np.einsum(
            'ma,an->mn', self.local.g_inv.value, self.residual.value
        )

    def gauduchon(self) -> GauduchonTerms:
        g_inv = self.local.g_inv
        r_mn = self.bundle.ricci
        r = self.bundle.scalar
        w2 = self.w_squared
        x = r_mn + self.sym_grad_w + self.ww
        lam = jets.einsum('ab,ab->', g_inv, x) * (1.0 / 3.0)
        e = x - self.local.g * lam

        current = (
            jets.einsum('mn,n->m', self.bundle.ricci_up, self.w)
            - self.w_up * r * 0.5
            + self.w_up * w2 * 0.5
        )
        divergence_term = float(
            divergence(self.bundle.christoffel, current).value
        )

        g0 = np.asarray(g_inv.value)
        sym = np.asarray(self.sym_grad_w.value)
        grad = np.asarray(self.grad_w.value)
        lhs = float(np.einsum('ma,nb,mn,ab->', g0, g0, sym, sym))
        x_dw = float(np.einsum('ma,nb,mn,ab->', g0, g0, x.value, grad))
        e_dw = float(np.einsum('ma,nb,mn,ab->', g0, g0, e.value, grad))
        div_w = float(self.div_w.value)
        r0, w20 = float(r.value), float(w2.value)
        first_term = (float(lam.value) - 0.5 * r0 + 0.5 * w20) * div_w

        identity = x_dw - 0.5 * r0 * div_w + 0.5 * w20 * div_w
        identity -= divergence_term
        return GauduchonTerms(
            lhs=lhs,
            first_term=first_term,
            divergence_term=divergence_term,
            residual_contraction=e_dw,
            identity_residual=lhs - identity,
            substituted_residual=lhs - (first_term - divergence_term),
            scale=self.scale(),
        )


def weyl_bundle(ws: WeylStructure, point: Sequence[float]) -> WeylBundle:
    if len(point) != 3:
        raise DimensionError('Weyl structures live on a 3-chart')
    return WeylBundle(ws, tuple(float(x) for x in point))


def weyl_connection(ws: WeylStructure, point: Sequence[float]) -> np.ndarray:
    """
    Returns `W^l_{mn}` at `point`.

    Raises:
        SingularMetricError: The metric is singular at `point`.
    """
    return np.asarray(weyl_bundle(ws, point).connection.value)


def compatibility_residual(ws: WeylStructure, point: Sequence[float]) -> float:
    return weyl_bundle(ws, point).compatibility_residual()


def weyl_curvature(ws: WeylStructure, point: Sequence[float]) -> WeylCurvature:
    return weyl_bundle(ws, point).weyl_curvature()


def ew_residual(
    ws: WeylStructure, point: Sequence[float], mixed: bool = False
) -> np.ndarray:
    """
    The trace-free Einstein-Weyl residual at `point`.

    Args:
        ws (WeylStructure): The structure.
        point (Sequence[float]): Chart point.
        mixed (bool): Return `E^m_n` instead of `E_{mn}`.
    """
    bundle = weyl_bundle(ws, point)
    if mixed:
        return bundle.mixed_residual()
    return np.asarray(bundle.residual.value)


def gauge_transform(
    ws: WeylStructure, sigma: Callable[[Jet], Jet | float]
) -> WeylStructure:
    """
    Returns `(exp(2 sigma) g, w + d sigma)`.
    """

    def w(x: Jet) -> Jet:
        s = jets.asjet(sigma(x), x.dim, x.order)
        return ws.w_at(x) + s.gradient()

    return WeylStructure(
        g3=conformal_rescale(ws.g3, sigma),
        w=w,
        name=f'{ws.name} (gauge transformed)',
    )


def gauduchon_identity(
    ws: WeylStructure, point: Sequence[float]
) -> GauduchonTerms:
    return weyl_bundle(ws, point).gauduchon()


def gauge_fixed_check(
    ws: WeylStructure, points: Sequence[Sequence[float]]
) -> GaugeFixedResult:
    """
    Evaluates the gauge-fixed equations: the trace-free part of
    `r_{mn} + w_m w_n` and the Killing equation `d_(m w_n) = 0`.
    """
    ew12, killing, div, scale = [], [], [], []
    for point in points:
        bundle = weyl_bundle(ws, point)
        residual = bundle.traceless(bundle.bundle.ricci) + bundle.traceless(
            bundle.ww
        )
        ew12.append(max_abs(residual.value))
        killing.append(max_abs(bundle.sym_grad_w.value))
        div.append(abs(float(bundle.div_w.value)))
        scale.append(bundle.scale())
    return GaugeFixedResult(
        ew12_residual=max_or_zero(ew12),
        killing_residual=max_or_zero(killing),
        divergence=max_or_zero(div),
        scale=max_or_zero(scale),
    )


def ew21_constancy(
    kk: KKTriple, points: Sequence[Sequence[float]]
) -> ConstancyResult:
    """
    Evaluates `r - 5 f^2` over the points together with the Killing
    residual of `F^m = eps^{mnl} d_n f_l`.
    """
    values, killing, scale = [], [], []
    for point in points:
        reduced = reduce_point(kk, point)
        r = float(reduced.bundle.scalar.value)
        values.append(r - 5.0 * reduced.sign * float(reduced.f_squared.value))
        f_down = jets.einsum('ab,b->a', reduced.local.g, reduced.F)
        grad = covector_derivative(reduced.bundle.christoffel, f_down)
        killing.append(max_abs(((grad + grad.T) * 0.5).value))
        scale.append(reduced.scale())
    mean = float(np.mean(values)) if values else 0.0
    return ConstancyResult(
        values=tuple(values),
        c_estimate=mean,
        spread=max_or_zero(abs(v - mean) for v in values),
        killing_F_residual=max_or_zero(killing),
        scale=max_or_zero(scale),
    )


__all__ = [
    'WeylStructure',
    'WeylCurvature',
    'WeylBundle',
    'GauduchonTerms',
    'GaugeFixedResult',
    'ConstancyResult',
    'weyl_structure_from_kk',
    'weyl_bundle',
    'weyl_connection',
    'compatibility_residual',
    'weyl_curvature',
    'ew_residual',
    'gauge_transform',
    'gauduchon_identity',
    'gauge_fixed_check',
    'ew21_constancy',
]
