"""
The identity suite run by `verify` and the per-point table of `scan`.

Every check evaluates one identity at all sample points and reports the
largest residual relative to the local scale. A check that does not apply to
a geometry (wrong kind, wrong signature, or a hypothesis such as `k = 0` that
fails) is reported as `not_applicable` with the reason, and its residual is
still recorded when it can be computed.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from kkweyl.core import jets
from kkweyl.core.catalog import BoundGeometry, Kind
from kkweyl.core.conventions import get_conventions
from kkweyl.core.einstein_weyl import (
    WeylStructure,
    gauge_fixed_check,
    ew21_constancy,
    weyl_bundle,
    weyl_structure_from_kk,
)
from kkweyl.core.exceptions import (
    DimensionError,
    JetDomainError,
    ReductionError,
    SignatureError,
    SingularMetricError,
)
from kkweyl.core.geometry import (
    CurvatureBundle,
    MetricField,
    Signature,
    curvature_bundle,
)
from kkweyl.core.kaluza_klein import (
    KKTriple,
    PointClass,
    ReducedBundle,
    assemble_kk,
    extract_kk,
    reduce_point,
    reduced_weyl_check,
    reduction_terms,
)
from kkweyl.core.utils import max_abs, max_or_zero


logger = logging.getLogger(__name__)


NUMERICAL_ERRORS = (
    SingularMetricError,
    JetDomainError,
    SignatureError,
    ReductionError,
    ArithmeticError,
)


class Status(StrEnum):
    PASS = 'pass'
    FAIL = 'fail'
    NOT_APPLICABLE = 'not_applicable'


@dataclass(frozen=True)
class CheckRecord:
    """
    Outcome of one check.

    Attributes:
        id (str): Dotted check identifier, e.g. `reduction.w1`.
        tag (str): Equation tag of the identity, e.g. `W1` or `EW25`.
        status (Status): `pass`, `fail` or `not_applicable`.
        max_residual (float | None): Largest scaled residual over the points,
            None when it could not be computed.
        tolerance (float): Threshold the residual was compared with.
        scale (float): Largest local scale over the points.
        points (int): Number of points evaluated.
        reason (str): Why the check failed or does not apply.
    """

    id: str
    tag: str
    status: Status
    max_residual: float | None
    tolerance: float
    scale: float = 0.0
    points: int = 0
    reason: str = ''

    def as_dict(self) -> dict:
        return {
            'id': self.id,
            'tag': self.tag,
            'status': str(self.status),
            'max_residual': self.max_residual,
            'tolerance': self.tolerance,
            'scale': self.scale,
            'points': self.points,
            'reason': self.reason,
        }


@dataclass(frozen=True)
class Outcome:
    """
    What a check function returns: scaled residuals, the largest scale and,
    for checks with a hypothesis, the reason the hypothesis fails.
    """

    residuals: Sequence[float]
    scale: float = 0.0
    not_applicable: str = ''

    @property
    def max_residual(self) -> float:
        return max_or_zero(self.residuals)


class NotApplicable(Exception):
    pass


@dataclass(frozen=True)
class Check:
    id: str
    tag: str
    function: Callable[['SuiteContext'], Outcome]
    factor: float = 1.0


CHECKS: dict[str, Check] = {}


def check(id: str, tag: str, factor: float = 1.0):
    """
    Registers a check function under `id`.

    Args:
        id (str): Dotted check identifier.
        tag (str): Equation tag reported with the check.
        factor (float): Multiplies the residual tolerance; third-derivative
            identities use 10.
    """

    def register(function):
        if id in CHECKS:
            raise ValueError(f'Duplicate check {id!r}')
        CHECKS[id] = Check(id, tag, function, factor)
        return function

    return register


def relative(residual: float, scale: float, power: float = 1.0) -> float:
    """
    Divides by `scale ** power`, treating a vanishing scale as unit scale.
    """
    if scale > 0:
        return residual / scale**power
    return residual


@dataclass(frozen=True)
class SuiteConfig:
    residual_tol: float = 1e-8
    class_tol: float = 1e-8


class SuiteContext:
    """
    A bound geometry with its sample points and per-point caches.

    Points are given in the entry's chart: three coordinates for
    Kaluza-Klein triples and 3-geometries, four for 4-metrics.
    """

    def __init__(
        self,
        geometry: BoundGeometry,
        points: Sequence[Sequence[float]],
        config: SuiteConfig = SuiteConfig(),
    ):
        self.geometry = geometry
        self.points = [tuple(float(x) for x in p) for p in points]
        self.config = config
        self._bundles4: dict[tuple, CurvatureBundle] = {}
        self._stripped: dict[tuple, CurvatureBundle] = {}
        self._reduced: dict[tuple, ReducedBundle] = {}

    @property
    def kind(self) -> Kind:
        return self.geometry.kind

    @property
    def signature(self) -> Signature:
        return self.geometry.signature

    @property
    def is_four_dimensional(self) -> bool:
        return self.kind is not Kind.METRIC3

    @cached_property
    def points3(self) -> list[tuple[float, ...]]:
        return [self.geometry.point3(p) for p in self.points]

    @cached_property
    def points4(self) -> list[tuple[float, ...]]:
        return [self.geometry.point4(p) for p in self.points]

    @cached_property
    def metric4(self) -> MetricField:
        return self.geometry.metric4()

    @cached_property
    def kk(self) -> KKTriple:
        if self.kind is Kind.METRIC3:
            raise NotApplicable('not applicable (3-geometry)')
        if self.kind is Kind.KK_TRIPLE:
            return self.geometry.kk_triple()
        return extract_kk(self.metric4, self.signature, points=self.points4)

    @cached_property
    def stripped_metric4(self) -> MetricField:
        return assemble_kk(self.kk.stripped())

    def bundle4(self, point4) -> CurvatureBundle:
        if point4 not in self._bundles4:
            self._bundles4[point4] = curvature_bundle(self.metric4, point4)
        return self._bundles4[point4]

    def stripped_bundle(self, point4) -> CurvatureBundle:
        if point4 not in self._stripped:
            self._stripped[point4] = curvature_bundle(
                self.stripped_metric4, point4
            )
        return self._stripped[point4]

    def reduced(self, point3) -> ReducedBundle:
        if point3 not in self._reduced:
            self._reduced[point3] = reduce_point(self.kk, point3)
        return self._reduced[point3]

    @cached_property
    def classes(self) -> list[PointClass]:
        return [
            self.reduced(p).classify(self.config.class_tol)
            for p in self.points3
        ]

    @cached_property
    def self_duality(self) -> str:
        """
        `self_dual`, `anti_self_dual`, `conformally_flat` or `none`, read off
        the 4-dimensional Weyl tensor; `not applicable (lorentzian)` for
        lorentzian geometries.
        """
        if self.signature is Signature.LORENTZIAN:
            return 'not applicable (lorentzian)'
        tol = self.config.residual_tol
        plus, minus, size = [], [], []
        for p in self.points4:
            bundle = self.stripped_bundle(p)
            scale = bundle.scale()
            weyl, dual = bundle.weyl_up, bundle.dual_weyl
            size.append(relative(max_abs(weyl), scale))
            plus.append(relative(max_abs(dual - weyl), scale))
            minus.append(relative(max_abs(dual + weyl), scale))
        if max_or_zero(size) <= tol:
            return 'conformally_flat'
        if max_or_zero(plus) <= tol:
            return 'self_dual'
        if max_or_zero(minus) <= tol:
            return 'anti_self_dual'
        return 'none'

    @cached_property
    def weyl_sign(self) -> float:
        """
        The sign `s` with `c = -s k/2`, so that `w = s f` solves the
        Einstein-Weyl equations. +1 when `k` vanishes everywhere.
        """
        total = sum(self.reduced(p).c_dot_k for p in self.points3)
        return 1.0 if total <= 0 else -1.0

    @cached_property
    def weyl_structure(self) -> WeylStructure:
        if self.kind is Kind.METRIC3:
            return self.geometry.weyl_structure()
        return weyl_structure_from_kk(self.kk, self.weyl_sign)

    def require_four(self):
        if not self.is_four_dimensional:
            raise NotApplicable('not applicable (3-geometry)')

    def require_reduction(self):
        self.require_four()
        try:
            self.kk
        except (ReductionError, SignatureError) as e:
            raise NotApplicable(f'not applicable ({e})') from e

    def require_euclidean(self):
        if self.signature is Signature.LORENTZIAN:
            raise NotApplicable('not applicable (lorentzian)')

    def bundles(self) -> list[tuple[CurvatureBundle, float]]:
        """
        Curvature bundles of the entry's own metric at every point.
        """
        if self.is_four_dimensional:
            found = [self.bundle4(p) for p in self.points4]
        else:
            g3 = self.geometry.metric3()
            found = [curvature_bundle(g3, p) for p in self.points3]
        return [(b, b.scale()) for b in found]


@check('bundle.riemann_symmetries', 'EW14')
def _riemann_symmetries(ctx: SuiteContext) -> Outcome:
    pairs = ctx.bundles()
    return Outcome(
        [relative(b.symmetry_residual(), s) for b, s in pairs],
        max_or_zero(s for _, s in pairs),
    )


@check('bundle.bianchi_first', 'EW14')
def _bianchi_first(ctx: SuiteContext) -> Outcome:
    pairs = ctx.bundles()
    return Outcome(
        [relative(b.bianchi_residual(), s) for b, s in pairs],
        max_or_zero(s for _, s in pairs),
    )


@check('bundle.weyl_traceless', 'EW16')
def _weyl_traceless(ctx: SuiteContext) -> Outcome:
    pairs = ctx.bundles()
    return Outcome(
        [relative(b.weyl_trace_residual(), s) for b, s in pairs],
        max_or_zero(s for _, s in pairs),
    )


@check('bundle.einstein_divergence', 'EW17', factor=10)
def _einstein_divergence(ctx: SuiteContext) -> Outcome:
    pairs = ctx.bundles()
    return Outcome(
        [relative(max_abs(b.einstein_divergence()), s, 1.5) for b, s in pairs],
        max_or_zero(s for _, s in pairs),
    )


@check('pontryagin.two_forms', 'EW38')
def _pontryagin_two_forms(ctx: SuiteContext) -> Outcome:
    ctx.require_four()
    residuals, scales = [], []
    for p in ctx.points4:
        bundle = ctx.bundle4(p)
        scale = bundle.scale()
        p_riemann, p_weyl = bundle.pontryagin()
        residuals.append(relative(abs(p_riemann - p_weyl), scale, 2))
        scales.append(scale)
    return Outcome(residuals, max_or_zero(scales))


@check('pontryagin.reduction', 'EW25')
def _pontryagin_reduction(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    residuals, scales = [], []
    for p3, p4 in zip(ctx.points3, ctx.points4):
        bundle = ctx.bundle4(p4)
        reduced = ctx.reduced(p3)
        scale = bundle.scale()
        full = bundle.pontryagin()[0]
        weight = math.exp(-4.0 * reduced.sigma)
        predicted = weight * reduced.pontryagin_reduced()
        residuals.append(relative(abs(full - predicted), scale, 2))
        scales.append(scale)
    return Outcome(residuals, max_or_zero(scales))


@check('pontryagin.blocks', 'EW24')
def _pontryagin_blocks(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    residuals, scales = [], []
    for p3 in ctx.points3:
        terms = reduction_terms(ctx.kk, p3)
        blocks = sum(terms.pontryagin_blocks)
        residuals.append(
            relative(abs(terms.pontryagin - blocks), terms.scale, 2)
        )
        scales.append(terms.scale)
    return Outcome(residuals, max_or_zero(scales))


@check('weyl.double_dual', 'EW20')
def _double_dual(ctx: SuiteContext) -> Outcome:
    ctx.require_four()
    residuals, scales = [], []
    for p in ctx.points4:
        bundle = ctx.bundle4(p)
        scale = bundle.scale()
        expected = bundle.local.det_sign * bundle.weyl_up
        residuals.append(
            relative(max_abs(bundle.double_dual_weyl() - expected), scale)
        )
        scales.append(scale)
    return Outcome(residuals, max_or_zero(scales))


@check('weyl.footnote_square', 'EW26-footnote')
def _footnote_square(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    conventions = get_conventions(ctx.kk.reduction_signature)
    residuals, scales = [], []
    for p3, p4 in zip(ctx.points3, ctx.points4):
        terms = reduction_terms(ctx.kk, p3)
        predicted = (
            conventions.c_square * terms.c_square
            + conventions.k_square * terms.k_square
        )
        c2, dual2 = ctx.stripped_bundle(p4).weyl_squared()
        sign = ctx.stripped_bundle(p4).local.det_sign
        residuals.append(
            relative(
                max(abs(terms.weyl_square - predicted), abs(dual2 - sign * c2)),
                terms.scale,
                2,
            )
        )
        scales.append(terms.scale)
    return Outcome(residuals, max_or_zero(scales))


@check('weyl.conformal_invariance', 'EW16')
def _conformal_invariance(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    residuals, scales = [], []
    for p in ctx.points4:
        full = ctx.bundle4(p)
        stripped = ctx.stripped_bundle(p)
        scale = stripped.scale()
        residuals.append(
            relative(
                max_abs(full.weyl_mixed.value - stripped.weyl_mixed.value),
                scale,
            )
        )
        scales.append(scale)
    return Outcome(residuals, max_or_zero(scales))


def _reduction_residual(name: str):
    def evaluate(ctx: SuiteContext) -> Outcome:
        ctx.require_reduction()
        results = [reduced_weyl_check(ctx.kk, p) for p in ctx.points3]
        return Outcome(
            [getattr(r, name) for r in results],
            max_or_zero(r.scale for r in results),
        )

    return evaluate


check('reduction.w1', 'W1')(_reduction_residual('w1'))
check('reduction.w3', 'W3')(_reduction_residual('w3'))
check('reduction.dual_w1', 'dualW1')(_reduction_residual('dual_w1'))
check('reduction.dual_w2', 'dualW2')(_reduction_residual('dual_w2'))


@check('reduction.traceless', 'W2')
def _traceless(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    residuals, scales = [], []
    for p in ctx.points3:
        reduced = ctx.reduced(p)
        g_inv = np.asarray(reduced.local.g_inv.value)
        scale = reduced.scale()
        traces = [
            abs(float(np.einsum('ab,ab->', g_inv, t.value)))
            for t in (reduced.c, reduced.k)
        ]
        residuals.append(relative(max(traces), scale))
        scales.append(scale)
    return Outcome(residuals, max_or_zero(scales))


@check('reduction.transversality', 'EW19')
def _transversality(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    residuals, scales = [], []
    for p in ctx.points3:
        reduced = ctx.reduced(p)
        scale = reduced.scale()
        residuals.append(relative(abs(reduced.transversality()), scale))
        scales.append(scale)
    return Outcome(residuals, max_or_zero(scales))


@check('reduction.roundtrip', 'j1')
def _roundtrip(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    rebuilt = assemble_kk(extract_kk(ctx.metric4, ctx.signature))
    residuals = []
    for p in ctx.points4:
        x = jets.variables(p, 0)
        original = np.asarray(ctx.metric4.components(x).value)
        again = np.asarray(rebuilt.components(x).value)
        residuals.append(
            max_abs(original - again) / max(1.0, max_abs(original))
        )
    return Outcome(residuals)


@check('selfduality.c_pm_k', 'mainResult')
def _c_pm_k(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    ctx.require_euclidean()
    s = ctx.weyl_sign
    residuals, scales = [], []
    for p in ctx.points3:
        reduced = ctx.reduced(p)
        scale = reduced.scale()
        difference = reduced.c.value + 0.5 * s * np.asarray(reduced.k.value)
        residuals.append(relative(max_abs(difference), scale))
        scales.append(scale)
    reason = ''
    if ctx.self_duality == 'none':
        reason = 'not applicable (Weyl tensor is not (anti-)self-dual)'
    return Outcome(residuals, max_or_zero(scales), reason)


def _ew_residuals(ctx: SuiteContext, structure: WeylStructure):
    residuals, scales = [], []
    for p in ctx.points3:
        bundle = weyl_bundle(structure, p)
        scale = bundle.scale()
        residuals.append(relative(max_abs(bundle.residual.value), scale))
        scales.append(scale)
    return residuals, max_or_zero(scales)


@check('einstein_weyl.ew7_from_selfduality', 'EW7')
def _ew7_from_selfduality(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    ctx.require_euclidean()
    residuals, scale = _ew_residuals(ctx, ctx.weyl_structure)
    reason = ''
    if ctx.self_duality == 'none':
        reason = 'not applicable (Weyl tensor is not (anti-)self-dual)'
    return Outcome(residuals, scale, reason)


@check('einstein_weyl.residual', 'EW5')
def _ew_residual(ctx: SuiteContext) -> Outcome:
    if ctx.is_four_dimensional:
        raise NotApplicable(
            'not applicable (4-geometry, see '
            'einstein_weyl.ew7_from_selfduality)'
        )
    residuals, scale = _ew_residuals(ctx, ctx.weyl_structure)
    return Outcome(residuals, scale)


def _trivial_everywhere(ctx: SuiteContext, allowed, what: str) -> str:
    bad = Counter(c for c in ctx.classes if c not in allowed)
    if not bad:
        return ''
    found = ', '.join(f'{c}: {n}' for c, n in sorted(bad.items()))
    return f'not applicable ({what} does not vanish; {found})'


@check('einstein_weyl.gauge_fixed', 'EW13')
def _gauge_fixed(ctx: SuiteContext) -> Outcome:
    structure = ctx.weyl_structure
    result = gauge_fixed_check(structure, ctx.points3)
    scale = result.scale
    residual = max(
        relative(result.ew12_residual, scale),
        relative(result.killing_residual, scale),
    )
    if ctx.is_four_dimensional:
        ctx.require_euclidean()
        reason = _trivial_everywhere(
            ctx, (PointClass.TRIVIAL, PointClass.ELECTRIC), 'k'
        )
    else:
        ew, _ = _ew_residuals(ctx, structure)
        reason = ''
        if max_or_zero(ew) > ctx.config.residual_tol:
            reason = 'not applicable (not an Einstein-Weyl structure)'
        elif relative(result.divergence, scale) > ctx.config.residual_tol:
            reason = 'not applicable (not in the Gauduchon gauge)'
    return Outcome([residual], scale, reason)


@check('einstein_weyl.ew21', 'EW21')
def _ew21(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    result = ew21_constancy(ctx.kk, ctx.points3)
    scale = result.scale
    residual = relative(result.spread, abs(result.c_estimate) + scale)
    reason = _trivial_everywhere(ctx, (PointClass.TRIVIAL,), 'c or k')
    return Outcome([residual], scale, reason)


@check('einstein_weyl.ew22', 'EW22', factor=10)
def _ew22(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    result = ew21_constancy(ctx.kk, ctx.points3)
    scale = result.scale
    residual = relative(result.killing_F_residual, scale, 1.5)
    reason = _trivial_everywhere(ctx, (PointClass.TRIVIAL,), 'c or k')
    return Outcome([residual], scale, reason)


@check('einstein_weyl.compatibility', 'EW1')
def _compatibility(ctx: SuiteContext) -> Outcome:
    residuals, scales = [], []
    for p in ctx.points3:
        bundle = weyl_bundle(ctx.weyl_structure, p)
        scale = bundle.scale()
        g = max(1.0, max_abs(bundle.local.g.value))
        residuals.append(
            relative(bundle.compatibility_residual() / g, scale, 0.5)
        )
        scales.append(scale)
    return Outcome(residuals, max_or_zero(scales))


@check('einstein_weyl.two_path', 'EW6')
def _two_path(ctx: SuiteContext) -> Outcome:
    results = [
        weyl_bundle(ctx.weyl_structure, p).weyl_curvature()
        for p in ctx.points3
    ]
    return Outcome(
        [r.two_path_residual for r in results],
        max_or_zero(r.scale for r in results),
    )


@check('einstein_weyl.gauduchon', 'EW11', factor=10)
def _gauduchon(ctx: SuiteContext) -> Outcome:
    results = [
        weyl_bundle(ctx.weyl_structure, p).gauduchon() for p in ctx.points3
    ]
    return Outcome(
        [relative(abs(r.identity_residual), r.scale, 2) for r in results],
        max_or_zero(r.scale for r in results),
    )


@check('currents.vector', 'EW31', factor=10)
def _vector_current(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    residuals, scales = [], []
    for p in ctx.points3:
        reduced = ctx.reduced(p)
        currents = reduced.currents()
        scale = reduced.scale()
        expected = 2.0 * reduced.c_dot_k
        residuals.append(
            relative(
                max(
                    abs(currents.vector_divergence - expected),
                    abs(currents.contraction - expected),
                ),
                scale,
                2,
            )
        )
        scales.append(scale)
    return Outcome(residuals, max_or_zero(scales))


@check('currents.tensor', 'EW33', factor=10)
def _tensor_current(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    residuals, scales = [], []
    for p in ctx.points3:
        reduced = ctx.reduced(p)
        scale = reduced.scale()
        divergence = reduced.currents().tensor_divergence
        residuals.append(relative(max_abs(divergence), scale, 1.5))
        scales.append(scale)
    reason = _trivial_everywhere(
        ctx, (PointClass.TRIVIAL, PointClass.MAGNETIC), 'c'
    )
    return Outcome(residuals, max_or_zero(scales), reason)


@check('currents.scalar', 'EW35', factor=10)
def _scalar_current(ctx: SuiteContext) -> Outcome:
    ctx.require_reduction()
    residuals, geodesic, scales = [], [], []
    for p in ctx.points3:
        reduced = ctx.reduced(p)
        scale = reduced.scale()
        currents = reduced.currents()
        gradient = max_abs(currents.scalar_gradient)
        residuals.append(relative(gradient, scale, 1.5))
        geodesic.append(
            relative(max_abs(currents.geodesic_residual), scale, 1.5)
        )
        scales.append(scale)
    reason = _trivial_everywhere(
        ctx, (PointClass.TRIVIAL, PointClass.ELECTRIC), 'k'
    )
    if not reason and max_or_zero(geodesic) > ctx.config.residual_tol:
        reason = 'not applicable (f is not geodesic)'
    return Outcome(residuals, max_or_zero(scales), reason)


def _chern_simons(ctx: SuiteContext):
    results, scales = [], []
    for p in ctx.points4:
        bundle = ctx.bundle4(p)
        results.append(bundle.chern_simons())
        scales.append(bundle.scale())
    return results, scales


@check('chern_simons.divergence', 'EW40', factor=10)
def _chern_simons_divergence(ctx: SuiteContext) -> Outcome:
    ctx.require_four()
    results, scales = _chern_simons(ctx)
    tol = ctx.config.residual_tol
    ratios = [
        r.ratio
        for r, s in zip(results, scales)
        if abs(r.pontryagin) > tol * max(s, 1e-300) ** 2
    ]
    if not ratios:
        return Outcome(
            [
                relative(abs(r.divergence), s, 2)
                for r, s in zip(results, scales)
            ],
            max_or_zero(scales),
        )
    mean = float(np.mean(ratios))
    spread = max(abs(r - mean) for r in ratios)
    return Outcome([spread / abs(mean)], max_or_zero(scales))


@dataclass(frozen=True)
class SuiteResult:
    """
    Records of one suite run plus the facts derived on the way.

    Attributes:
        records (list[CheckRecord]): One record per check, sorted by id.
        facts (dict): Self-duality, the `r - 5 f^2` estimate, the
            Chern-Simons ratio, the class histogram and the calibrated
            conventions.
    """

    records: list[CheckRecord]
    facts: dict = field(default_factory=dict)

    @property
    def failed(self) -> list[CheckRecord]:
        return [r for r in self.records if r.status is Status.FAIL]

    @property
    def passed(self) -> bool:
        return not self.failed

    def counts(self) -> dict[str, int]:
        found = Counter(str(r.status) for r in self.records)
        return {str(s): found.get(str(s), 0) for s in Status}


def _run_check(item: Check, ctx: SuiteContext) -> CheckRecord:
    tolerance = ctx.config.residual_tol * item.factor
    base = dict(
        id=item.id, tag=item.tag, tolerance=tolerance, points=len(ctx.points)
    )
    try:
        outcome = item.function(ctx)
    except NotApplicable as e:
        return CheckRecord(
            status=Status.NOT_APPLICABLE,
            max_residual=None,
            reason=str(e),
            **base,
        )
    except (DimensionError, *NUMERICAL_ERRORS) as e:
        logger.warning(
            'Check %s failed on %s: %s', item.id, ctx.geometry.name, e
        )
        return CheckRecord(
            status=Status.FAIL, max_residual=None, reason=str(e), **base
        )
    residual = outcome.max_residual
    if outcome.not_applicable:
        status, reason = Status.NOT_APPLICABLE, outcome.not_applicable
    elif math.isfinite(residual) and residual <= tolerance:
        status, reason = Status.PASS, ''
    else:
        status = Status.FAIL
        reason = f'residual {residual:.3e} exceeds {tolerance:.1e}'
    logger.debug('Check %s: %s (%.3e)', item.id, status, residual)
    return CheckRecord(
        status=status,
        max_residual=float(residual),
        scale=float(outcome.scale),
        reason=reason,
        **base,
    )


def _optional(function, *args):
    try:
        return function(*args)
    except (NotApplicable, DimensionError, *NUMERICAL_ERRORS):
        return None


def _ew21_fact(ctx: SuiteContext):
    ctx.require_reduction()
    result = ew21_constancy(ctx.kk, ctx.points3)
    return {'c_estimate': result.c_estimate, 'spread': result.spread}


def _chern_simons_fact(ctx: SuiteContext):
    ctx.require_four()
    tol = ctx.config.residual_tol
    ratios = [
        r.ratio
        for r, s in zip(*_chern_simons(ctx))
        if abs(r.pontryagin) > tol * max(s, 1e-300) ** 2
    ]
    return float(np.mean(ratios)) if ratios else None


def _class_histogram(ctx: SuiteContext):
    ctx.require_reduction()
    found = Counter(str(c) for c in ctx.classes)
    return {str(c): found.get(str(c), 0) for c in PointClass}


def _facts(ctx: SuiteContext) -> dict:
    conventions = None
    if ctx.is_four_dimensional:
        conventions = get_conventions(ctx.signature).as_dict()
    return {
        'self_duality': (
            _optional(lambda: ctx.self_duality)
            if ctx.is_four_dimensional
            else None
        ),
        'ew21': _optional(_ew21_fact, ctx),
        'chern_simons_ratio': _optional(_chern_simons_fact, ctx),
        'classes': _optional(_class_histogram, ctx),
        'conventions': conventions,
    }


def run_suite(
    geometry: BoundGeometry,
    points: Sequence[Sequence[float]],
    config: SuiteConfig = SuiteConfig(),
    only: Sequence[str] | None = None,
) -> SuiteResult:
    """
    Runs every registered check on `geometry` at `points`.

    Args:
        geometry (BoundGeometry): Entry with its parameters bound.
        points: Sample points in the entry's chart.
        config (SuiteConfig): Residual and classification tolerances.
        only: Check ids or id prefixes to restrict the run to.

    Returns:
        SuiteResult: Records sorted by id. A check that raises a numerical
            error fails with the error as its reason; it does not abort the
            suite.
    """
    ctx = SuiteContext(geometry, points, config)
    selected = [
        item
        for item in CHECKS.values()
        if not only
        or any(item.id == o or item.id.startswith(f'{o}.') for o in only)
    ]
    logger.info(
        'Running %d checks on %s at %d points',
        len(selected),
        geometry.name,
        len(ctx.points),
    )
    records = sorted(
        (_run_check(item, ctx) for item in selected), key=lambda r: r.id
    )
    return SuiteResult(records, _facts(ctx))


@dataclass(frozen=True)
class ScanRow:
    point: tuple[float, ...]
    p_full: float
    p_reduced: float | None
    point_class: str
    c_norm: float | None
    k_norm: float | None

    def as_row(self) -> list:
        coordinates = list(self.point) + [None] * (4 - len(self.point))
        return coordinates + [
            self.p_full,
            self.p_reduced,
            self.point_class,
            self.c_norm,
            self.k_norm,
        ]


SCAN_COLUMNS = (
    'x1',
    'x2',
    'x3',
    'x4',
    'p_full',
    'p_reduced',
    'class',
    'c_norm',
    'k_norm',
)


def scan_points(
    geometry: BoundGeometry,
    points: Sequence[Sequence[float]],
    class_tol: float = 1e-8,
) -> list[ScanRow]:
    """
    Evaluates the Pontryagin density and the point class at every point.

    `p_full` comes from the Riemann tensor of the entry's 4-metric and
    `p_reduced` is `exp(-4 sigma) p c.k`; the latter and the class are
    empty when the metric does not reduce.

    Raises:
        DimensionError: The entry is a 3-geometry.
    """
    if geometry.kind is Kind.METRIC3:
        raise DimensionError('scan needs a 4-dimensional geometry')
    ctx = SuiteContext(geometry, points, SuiteConfig(class_tol=class_tol))
    try:
        ctx.kk
        reducible = True
    except (ReductionError, SignatureError) as e:
        logger.warning('%s does not reduce: %s', geometry.name, e)
        reducible = False
    rows = []
    for p3, p4 in zip(ctx.points3, ctx.points4):
        p_full = ctx.bundle4(p4).pontryagin()[0]
        if not reducible:
            rows.append(ScanRow(p4, p_full, None, '', None, None))
            continue
        reduced = ctx.reduced(p3)
        rows.append(
            ScanRow(
                p4,
                p_full,
                math.exp(-4.0 * reduced.sigma) * reduced.pontryagin_reduced(),
                str(reduced.classify(class_tol)),
                reduced.c_norm,
                reduced.k_norm,
            )
        )
    return rows


__all__ = [
    'NUMERICAL_ERRORS',
    'Status',
    'CheckRecord',
    'Outcome',
    'NotApplicable',
    'Check',
    'CHECKS',
    'check',
    'relative',
    'SuiteConfig',
    'SuiteContext',
    'SuiteResult',
    'run_suite',
    'ScanRow',
    'SCAN_COLUMNS',
    'scan_points',
]
