"""
The curvature stack of a signature-tagged metric field.

All tensors are evaluated at a single chart point from one order-3 query of
the metric. Christoffel symbols come out at order 2, curvature at order 1,
so a divergence of anything built from curvature is still exact.

Index conventions:

- `christoffel[k, a, b]` is `Gamma^k_{ab}`.
- `christoffel_derivative[m, k, a, b]` is `d_m Gamma^k_{ab}`.
- `riemann[k, l, m, n]` is `R^k_{lmn}`, Ricci is the `k-m` contraction.
- Epsilon tensors follow `eps~^{0..n-1} = +1`. The upper tensor carries the
  sign of the determinant so that raising every index of the lower one
  gives the upper one in either signature.
"""

import logging
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property, partial
from typing import Callable, Sequence

import numpy as np

from kkweyl.core import jets
from kkweyl.core.exceptions import (
    DimensionError,
    SignatureError,
    SingularMetricError,
)
from kkweyl.core.jets import Jet
from kkweyl.core.utils import Validatable, max_abs


logger = logging.getLogger(__name__)


SINGULAR_THRESHOLD = 1e-12


class Signature(StrEnum):
    EUCLIDEAN = 'euclidean'
    LORENTZIAN = 'lorentzian'

    @property
    def negative_eigenvalues(self) -> int:
        return 0 if self is Signature.EUCLIDEAN else 1


ComponentFn = Callable[[Jet], Jet | Sequence]


@dataclass(frozen=True, eq=False)
class MetricField(Validatable):
    """
    A metric tensor field over a single chart.

    Attributes:
        dim (int): Chart dimension, 3 or 4.
        signature (Signature): Euclidean, or Lorentzian with one negative
            eigenvalue.
        component_fn (Callable): Maps the coordinate jets (shape `(dim,)`) to
            the `dim x dim` component matrix, as a jet or a nested sequence of
            jets and numbers.
        name (str): Label used in reports.
    """

    dim: int
    signature: Signature
    component_fn: ComponentFn
    name: str = ''

    def validate_dim(self):
        if self.dim not in jets.DIMENSIONS:
            raise DimensionError(
                f'Metric dimension must be 3 or 4, not {self.dim}'
            )

    def validate_signature(self):
        Signature(self.signature)

    def components(self, x: Jet) -> Jet:
        """
        Evaluates the symmetrized component matrix at coordinate jets `x`.
        """
        g = jets.array(self.component_fn(x), x.dim, x.order)
        if g.shape != (self.dim, self.dim):
            raise DimensionError(
                f'Metric {self.name!r} returned shape {g.shape}, expected '
                f'{(self.dim, self.dim)}'
            )
        return (g + g.T) * 0.5

    def local(self, point: Sequence[float], order: int = jets.ORDER):
        """
        Queries the metric once at `point`.

        Raises:
            SingularMetricError: The value part is (numerically) singular.
            SignatureError: The eigenvalue signs disagree with `signature`.
        """
        if len(point) != self.dim:
            raise DimensionError(
                f'Point {tuple(point)} has {len(point)} coordinates, metric '
                f'{self.name!r} has dimension {self.dim}'
            )
        g = self.components(jets.variables(point, order))
        g0 = np.asarray(g.value)
        det0 = float(np.linalg.det(g0))
        largest = max_abs(g0)
        if largest == 0 or abs(det0) < SINGULAR_THRESHOLD * largest**self.dim:
            raise SingularMetricError(point, det0)
        negative = int(np.sum(np.linalg.eigvalsh(g0) < 0))
        if negative != Signature(self.signature).negative_eigenvalues:
            raise SignatureError(
                f'Metric {self.name!r} has {negative} negative eigenvalues at '
                f'{tuple(point)}, expected {self.signature} signature'
            )
        return LocalMetric(
            point=tuple(float(x) for x in point),
            signature=Signature(self.signature),
            g=g,
            g_inv=jets.inverse(g),
            sqrt_abs_det=jets.sqrt_abs_det(g),
            det_sign=1.0 if det0 > 0 else -1.0,
        )


def conformal_rescale(
    metric: MetricField, sigma: Callable[[Jet], Jet | float], name: str = ''
) -> MetricField:
    """
    Returns the field `exp(2 sigma) g`.
    """

    def components(x: Jet):
        return jets.exp(jets.asjet(sigma(x), x.dim, x.order) * 2.0) * (
            metric.components(x)
        )

    return MetricField(
        metric.dim,
        metric.signature,
        components,
        name or f'{metric.name}*exp(2 sigma)',
    )


@dataclass(frozen=True, eq=False)
class LocalMetric:
    point: tuple[float, ...]
    signature: Signature
    g: Jet
    g_inv: Jet
    sqrt_abs_det: Jet
    det_sign: float

    @property
    def dim(self) -> int:
        return len(self.point)


def epsilon_from_local(local: LocalMetric, variance: str = 'up') -> Jet:
    symbol = jets.permutation_symbol(local.dim)
    if variance == 'up':
        return jets.reciprocal(local.sqrt_abs_det) * local.det_sign * symbol
    if variance == 'down':
        return local.sqrt_abs_det * symbol
    raise ValueError(f'Unknown variance {variance!r}, expected up or down')


def christoffel_from_local(local: LocalMetric) -> Jet:
    dg = local.g.gradient()
    lowered = (
        jets.einsum('asb->sab', dg)
        + jets.einsum('bsa->sab', dg)
        - dg
    ) * 0.5
    return jets.einsum('ks,sab->kab', local.g_inv, lowered)


def riemann_from_connection(connection: Jet) -> Jet:
    """
    `R^k_{lmn} = d_m G^k_{nl} - d_n G^k_{ml} + G^k_{mp} G^p_{nl}
    - G^k_{np} G^p_{ml}` for any torsion-free connection `G`.
    """
    d = connection.gradient()
    return (
        jets.einsum('mknl->klmn', d)
        - jets.einsum('nkml->klmn', d)
        + jets.einsum('kmp,pnl->klmn', connection, connection)
        - jets.einsum('knp,pml->klmn', connection, connection)
    )


def divergence(connection: Jet, tensor: Jet) -> Jet:
    """
    Covariant divergence on the first index of an upper-index tensor of
    rank 1 or 2.
    """
    rank = len(tensor.shape)
    d = tensor.gradient()
    if rank == 1:
        return jets.einsum('mm->', d) + jets.einsum(
            'mml,l->', connection, tensor
        )
    if rank == 2:
        return (
            jets.einsum('mmn->n', d)
            + jets.einsum('mml,ln->n', connection, tensor)
            + jets.einsum('nml,ml->n', connection, tensor)
        )
    raise DimensionError(f'Divergence needs rank 1 or 2, got rank {rank}')


def covector_derivative(connection: Jet, covector: Jet) -> Jet:
    """
    `nabla_m v_n = d_m v_n - G^l_{mn} v_l`.
    """
    return covector.gradient() - jets.einsum(
        'lmn,l->mn', connection, covector
    )


def _dual_last_pair(epsilon_up: np.ndarray, mixed: np.ndarray) -> np.ndarray:
    """
    `*T^{abmn} = 1/2 eps^{mnrs} T^{ab}_{rs}`.
    """
    return 0.5 * np.einsum('mnrs,abrs->abmn', epsilon_up, mixed)


@dataclass(frozen=True)
class ChernSimons:
    current: np.ndarray
    divergence: float
    pontryagin: float

    @property
    def ratio(self) -> float | None:
        if self.pontryagin == 0:
            return None
        return self.divergence / self.pontryagin


@dataclass(frozen=True, eq=False)
class CurvatureBundle:
    """
    Curvature of a metric at one point.

    Tensors are jets so that their derivatives remain available; scalar
    invariants are plain floats.
    """

    local: LocalMetric
    name: str = field(default='')

    @property
    def point(self) -> tuple[float, ...]:
        return self.local.point

    @property
    def dim(self) -> int:
        return self.local.dim

    @property
    def sqrt_abs_det(self) -> float:
        return float(self.local.sqrt_abs_det.value)

    @cached_property
    def christoffel(self) -> Jet:
        return christoffel_from_local(self.local)

    @cached_property
    def christoffel_derivative(self) -> Jet:
        return self.christoffel.gradient()

    @cached_property
    def riemann(self) -> Jet:
        return riemann_from_connection(self.christoffel)

    @cached_property
    def riemann_down(self) -> Jet:
        return jets.einsum('kq,qlmn->klmn', self.local.g, self.riemann)

    @cached_property
    def ricci(self) -> Jet:
        return jets.einsum('klkn->ln', self.riemann)

    @cached_property
    def scalar(self) -> Jet:
        return jets.einsum('ln,ln->', self.local.g_inv, self.ricci)

    @cached_property
    def ricci_up(self) -> Jet:
        g_inv = self.local.g_inv
        return jets.einsum('ap,bq,pq->ab', g_inv, g_inv, self.ricci)

    @cached_property
    def einstein_up(self) -> Jet:
        return self.ricci_up - self.local.g_inv * self.scalar * 0.5

    @cached_property
    def schouten(self) -> Jet:
        n = self.dim
        return self.ricci - self.local.g * self.scalar * (1.0 / (2 * (n - 1)))

    @cached_property
    def weyl_down(self) -> Jet:
        g, s = self.local.g, self.schouten
        wedge = (
            jets.einsum('ac,bd->abcd', g, s)
            - jets.einsum('ad,bc->abcd', g, s)
            - jets.einsum('bc,ad->abcd', g, s)
            + jets.einsum('bd,ac->abcd', g, s)
        )
        return self.riemann_down - wedge * (1.0 / (self.dim - 2))

    @cached_property
    def weyl_mixed(self) -> Jet:
        return jets.einsum('ap,pbcd->abcd', self.local.g_inv, self.weyl_down)

    @cached_property
    def weyl_up(self) -> np.ndarray:
        return _raise_all(self.local.g_inv.value, self.weyl_down.value)

    @cached_property
    def riemann_up(self) -> np.ndarray:
        return _raise_all(self.local.g_inv.value, self.riemann_down.value)

    @cached_property
    def epsilon_up(self) -> Jet:
        return epsilon_from_local(self.local, 'up')

    @cached_property
    def epsilon_down(self) -> Jet:
        return epsilon_from_local(self.local, 'down')

    def _require_four(self, what: str):
        if self.dim != 4:
            raise DimensionError(f'{what} is only defined in dimension 4')

    @cached_property
    def dual_weyl(self) -> np.ndarray:
        """
        `*C^{ABMN} = 1/2 eps^{MNRS} C^{AB}_{RS}` at the point.
        """
        self._require_four('The dual Weyl tensor')
        g_inv = self.local.g_inv.value
        mixed = np.einsum(
            'ap,bq,pqrs->abrs', g_inv, g_inv, self.weyl_down.value
        )
        return _dual_last_pair(self.epsilon_up.value, mixed)

    @cached_property
    def dual_riemann(self) -> np.ndarray:
        self._require_four('The dual Riemann tensor')
        g_inv = self.local.g_inv.value
        mixed = np.einsum(
            'ap,bq,pqrs->abrs', g_inv, g_inv, self.riemann_down.value
        )
        return _dual_last_pair(self.epsilon_up.value, mixed)

    def double_dual_weyl(self) -> np.ndarray:
        g = self.local.g.value
        lowered = np.einsum('rp,sq,abpq->abrs', g, g, self.dual_weyl)
        return _dual_last_pair(self.epsilon_up.value, lowered)

    def kretschmann(self) -> float:
        return float(
            np.einsum('abcd,abcd->', self.riemann_up, self.riemann_down.value)
        )

    def pontryagin(self) -> tuple[float, float]:
        """
        Returns the Chern-Pontryagin density from Riemann and from Weyl.
        """
        p_riemann = 0.5 * np.einsum(
            'abcd,abcd->', self.dual_riemann, self.riemann_down.value
        )
        p_weyl = 0.5 * np.einsum(
            'abcd,abcd->', self.dual_weyl, self.weyl_down.value
        )
        return float(p_riemann), float(p_weyl)

    def weyl_squared(self) -> tuple[float, float]:
        g = self.local.g.value
        c2 = np.einsum('abcd,abcd->', self.weyl_up, self.weyl_down.value)
        dual_down = np.einsum(
            'ap,bq,cr,ds,pqrs->abcd', g, g, g, g, self.dual_weyl
        )
        dual2 = np.einsum('abcd,abcd->', self.dual_weyl, dual_down)
        return float(c2), float(dual2)

    def chern_simons(self) -> ChernSimons:
        """
        The Chern-Simons current and the divergence of its density.

        `sqrt|g| eps^{abcd}` is the constant permutation symbol up to sign,
        so the divergence needs only the Christoffel symbols and their
        first two derivatives at the point.
        """
        self._require_four('The Chern-Simons current')
        symbol = self.local.det_sign * jets.permutation_symbol(self.dim)
        g = np.asarray(self.christoffel.value)
        dg = np.asarray(self.christoffel_derivative.value)
        ddg = np.asarray(self.christoffel_derivative.gradient().value)
        contract = partial(np.einsum, optimize=True)

        current = (
            contract('abcd,ebf,cfde->a', symbol, g, dg)
            + contract('abcd,ebf,fcg,gde->a', symbol, g, g, g) * (2.0 / 3.0)
        ) / self.sqrt_abs_det
        cubic = (
            contract('abcd,aebf,fcg,gde->', symbol, dg, g, g)
            + contract('abcd,ebf,afcg,gde->', symbol, g, dg, g)
            + contract('abcd,ebf,fcg,agde->', symbol, g, g, dg)
        )
        total = (
            contract('abcd,aebf,cfde->', symbol, dg, dg)
            + contract('abcd,ebf,acfde->', symbol, g, ddg)
            + cubic * (2.0 / 3.0)
        )
        return ChernSimons(
            current=current,
            divergence=float(total) / self.sqrt_abs_det,
            pontryagin=self.pontryagin()[0],
        )

    def scale(self) -> float:
        """
        Local curvature scale: the largest of |R^{ab}_{cd}|, |Gamma|^2 and
        |d Gamma|.
        """
        g_inv = self.local.g_inv.value
        mixed = np.einsum(
            'ap,bq,pqcd->abcd', g_inv, g_inv, self.riemann_down.value
        )
        return max(
            max_abs(mixed),
            max_abs(self.christoffel.value) ** 2,
            max_abs(self.christoffel_derivative.value),
        )

    def symmetry_residual(self) -> float:
        r = self.riemann.value
        rd = self.riemann_down.value
        return max_abs(
            r + r.transpose(0, 1, 3, 2),
            rd + rd.transpose(1, 0, 2, 3),
            rd - rd.transpose(2, 3, 0, 1),
        )

    def bianchi_residual(self) -> float:
        r = self.riemann.value
        return max_abs(
            r + r.transpose(0, 2, 3, 1) + r.transpose(0, 3, 1, 2)
        )

    def weyl_trace_residual(self) -> float:
        g_inv = self.local.g_inv.value
        c = self.weyl_down.value
        contractions = [
            np.einsum('ab,abcd->cd', g_inv, c),
            np.einsum('ac,abcd->bd', g_inv, c),
            np.einsum('ad,abcd->bc', g_inv, c),
            np.einsum('bc,abcd->ad', g_inv, c),
            np.einsum('bd,abcd->ac', g_inv, c),
            np.einsum('cd,abcd->ab', g_inv, c),
        ]
        return max_abs(*contractions)

    def einstein_divergence(self) -> np.ndarray:
        return np.asarray(divergence(self.christoffel, self.einstein_up).value)


def _raise_all(g_inv: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    return np.einsum(
        'ap,bq,cr,ds,pqrs->abcd', g_inv, g_inv, g_inv, g_inv, tensor
    )


def _bundle(metric: MetricField, point) -> CurvatureBundle:
    return CurvatureBundle(metric.local(point), name=metric.name)


def christoffel(metric: MetricField, point: Sequence[float]) -> Jet:
    """
    Returns `Gamma^k_{ab}` at `point` as an order-2 jet.

    Raises:
        SingularMetricError: The metric is singular at `point`.
    """
    return christoffel_from_local(metric.local(point))


def curvature_bundle(
    metric: MetricField, point: Sequence[float]
) -> CurvatureBundle:
    return _bundle(metric, point)


def epsilon_tensor(
    metric: MetricField, point: Sequence[float], variance: str = 'up'
) -> Jet:
    """
    Returns the totally antisymmetric tensor with the requested variance.

    Args:
        metric (MetricField): The metric.
        point (Sequence[float]): Chart point.
        variance (str): `up` or `down`.
    """
    return epsilon_from_local(metric.local(point), variance)


def pontryagin_full(
    metric: MetricField, point: Sequence[float]
) -> tuple[float, float]:
    if metric.dim != 4:
        raise DimensionError('The Pontryagin density needs a 4-metric')
    return _bundle(metric, point).pontryagin()


def weyl_squared(
    metric: MetricField, point: Sequence[float]
) -> tuple[float, float]:
    if metric.dim != 4:
        raise DimensionError('The Weyl square needs a 4-metric')
    return _bundle(metric, point).weyl_squared()


def chern_simons_current(
    metric: MetricField, point: Sequence[float]
) -> ChernSimons:
    if metric.dim != 4:
        raise DimensionError('The Chern-Simons current needs a 4-metric')
    return _bundle(metric, point).chern_simons()


def covariant_divergence(
    metric: MetricField,
    point: Sequence[float],
    tensor_field: Callable[[CurvatureBundle], Jet] | Jet,
) -> np.ndarray | float:
    """
    Covariant divergence of an upper-index tensor field on its first index.

    Args:
        metric (MetricField): The metric.
        point (Sequence[float]): Chart point.
        tensor_field: Either a jet expanded about `point`, or a callable that
            receives the point's `CurvatureBundle` and returns one.
    """
    bundle = _bundle(metric, point)
    tensor = tensor_field(bundle) if callable(tensor_field) else tensor_field
    return divergence(bundle.christoffel, tensor).value


def self_test(seed: int = 7) -> float:
    """
    Checks that the Weyl construction is traceless on a random 4-metric.

    Returns:
        float: The largest trace relative to the curvature scale.
    """
    rng = np.random.default_rng(seed)
    base = rng.normal(scale=0.1, size=(4, 4))
    linear = rng.normal(scale=0.1, size=(4, 4, 4))
    quadratic = rng.normal(scale=0.05, size=(4, 4, 4, 4))

    def components(x: Jet):
        g = jets.constant(np.eye(4) + base, x.dim, x.order)
        g = g + jets.einsum('abm,m->ab', linear, x)
        return g + jets.einsum('abmn,m,n->ab', quadratic, x, x)

    metric = MetricField(4, Signature.EUCLIDEAN, components, 'self-test')
    bundle = curvature_bundle(metric, rng.uniform(-0.3, 0.3, size=4))
    residual = bundle.weyl_trace_residual() / (bundle.scale() or 1.0)
    logger.debug('Weyl trace self-test residual %.3e', residual)
    return residual


__all__ = [
    'Signature',
    'MetricField',
    'LocalMetric',
    'CurvatureBundle',
    'ChernSimons',
    'conformal_rescale',
    'christoffel',
    'curvature_bundle',
    'epsilon_tensor',
    'pontryagin_full',
    'weyl_squared',
    'chern_simons_current',
    'covariant_divergence',
    'divergence',
    'covector_derivative',
    'riemann_from_connection',
    'self_test',
]
