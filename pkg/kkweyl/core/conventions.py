"""
Coupling constants of the reduced Weyl relations.

The reduced relations are linear in the 3-dimensional fields, but their
numerical prefactors depend on the orientation and duality conventions of
the 4-dimensional epsilon tensor and on the reduction signature. They are
fitted once per signature on a generic calibration triple (polynomial
3-metric and gauge field, sigma = 0, so c, k and c.k are all nonzero and
independent), snapped to the nearest admissible value and frozen for the
rest of the process. The catalog geometries then test the frozen values.
"""

import logging
from dataclasses import dataclass
from functools import cache

import numpy as np

from kkweyl.core.exceptions import CalibrationError
from kkweyl.core.geometry import MetricField, Signature
from kkweyl.core.kaluza_klein import KKTriple, reduction_terms, zero_scalar


logger = logging.getLogger(__name__)


FIT_TOLERANCE = 1e-6


CANDIDATES = {
    'w1': (1.0, -1.0),
    'mixed': (0.5, -0.5, 1.0, -1.0),
    'dual_w1': (1.0, -1.0),
    'dual_w2': (1.0, -1.0),
    'c_square': (8.0, -8.0),
    'k_square': (2.0, -2.0, 8.0, -8.0),
    'pontryagin': (4.0, -4.0, 8.0, -8.0),
}


CALIBRATION_POINTS = (
    (0.2, -0.1, 0.3),
    (-0.3, 0.25, 0.1),
    (0.1, 0.4, -0.2),
    (0.35, 0.05, -0.3),
)


def calibration_triple(signature: Signature) -> KKTriple:
    """
    A generic triple without symmetries, defined near the origin.
    """

    def g3(x):
        x1, x2, x3 = x
        return [
            [1 + 0.2 * x1 * x1, 0.1 * x1 * x2, 0.05 * x3],
            [0.1 * x1 * x2, 1 + 0.1 * x3 * x3, 0.1 * x1],
            [0.05 * x3, 0.1 * x1, 1 + 0.15 * x2 * x2],
        ]

    def a(x):
        x1, x2, x3 = x
        return [
            0.3 * x2 * x3,
            0.2 * x1 * x1 + 0.1 * x3,
            0.25 * x1 * x2 + 0.1 * x2 * x2,
        ]

    return KKTriple(
        sigma=zero_scalar,
        a=a,
        g3=MetricField(3, Signature.EUCLIDEAN, g3, 'calibration (3d)'),
        reduction_signature=signature,
        name=f'{signature} calibration',
    )


@dataclass(frozen=True)
class ReductionConventions:
    """
    Calibrated prefactors of the reduced Weyl relations for one signature.

    Attributes:
        w1: `C^{mnlt} = w1 * (-eps^{mna} eps^{ltb} c_ab)`.
        mixed: `C^{mnl4} + C^{mnlt} a_t = mixed * eps^{mnt} k^l_t`.
        dual_w1: Prefactor of the first dual-component relation.
        dual_w2: Prefactor of the second dual-component relation.
        c_square, k_square: `C.C = c_square c.c + k_square k.k`.
        pontryagin: `P = pontryagin * c.k` on the sigma-stripped metric.
        reference: Name of the geometry the values were fitted on.
    """

    signature: Signature
    w1: float
    mixed: float
    dual_w1: float
    dual_w2: float
    c_square: float
    k_square: float
    pontryagin: float
    reference: str

    def as_dict(self) -> dict:
        return {
            'signature': str(self.signature),
            'w1': self.w1,
            'mixed': self.mixed,
            'dual_w1': self.dual_w1,
            'dual_w2': self.dual_w2,
            'c_square': self.c_square,
            'k_square': self.k_square,
            'pontryagin': self.pontryagin,
            'reference': self.reference,
        }


def _snap(name: str, fitted: float) -> float:
    best = min(CANDIDATES[name], key=lambda value: abs(value - fitted))
    if abs(best - fitted) > FIT_TOLERANCE * abs(best):
        raise CalibrationError(
            f'Coupling {name!r} fitted to {fitted!r}, which is not within '
            f'{FIT_TOLERANCE} of any admissible value {CANDIDATES[name]}'
        )
    return best


def _fit(lhs: list[np.ndarray], units: list[np.ndarray]) -> np.ndarray:
    a = np.stack([np.concatenate([u.ravel() for u in unit]) for unit in units])
    b = np.concatenate([x.ravel() for x in lhs])
    solution, *_ = np.linalg.lstsq(a.T, b, rcond=None)
    return solution


def fit_conventions(
    kk: KKTriple, points, reference: str = ''
) -> ReductionConventions:
    """
    Fits every coupling on the given triple and sample points.

    Raises:
        CalibrationError: A fitted value is not close to an admissible one.
    """
    terms = [reduction_terms(kk, point) for point in points]

    def single(lhs_name, unit_name):
        lhs = [getattr(t, lhs_name) for t in terms]
        unit = [getattr(t, unit_name) for t in terms]
        return float(_fit(lhs, [unit])[0])

    squares = _fit(
        [np.array([t.weyl_square]) for t in terms],
        [
            [np.array([t.c_square]) for t in terms],
            [np.array([t.k_square]) for t in terms],
        ],
    )
    pontryagin = _fit(
        [np.array([t.pontryagin]) for t in terms],
        [[np.array([t.c_dot_k]) for t in terms]],
    )
    fitted = {
        'w1': single('w1_lhs', 'w1_unit'),
        'mixed': single('w3_lhs', 'w3_unit'),
        'dual_w1': single('dual_w1_lhs', 'dual_w1_unit'),
        'dual_w2': single('dual_w2_lhs', 'dual_w2_unit'),
        'c_square': float(squares[0]),
        'k_square': float(squares[1]),
        'pontryagin': float(pontryagin[0]),
    }
    logger.debug('Fitted reduction couplings on %s: %s', reference, fitted)
    snapped = {name: _snap(name, value) for name, value in fitted.items()}
    return ReductionConventions(
        signature=Signature(kk.reduction_signature),
        reference=reference,
        **snapped,
    )


@cache
def get_conventions(signature: Signature | str) -> ReductionConventions:
    """
    Returns the frozen conventions for a signature, calibrating on first use.
    """
    signature = Signature(signature)
    kk = calibration_triple(signature)
    conventions = fit_conventions(kk, CALIBRATION_POINTS, reference=kk.name)
    logger.info(
        'Calibrated %s reduction conventions: %s',
        signature,
        conventions.as_dict(),
    )
    return conventions


__all__ = [
    'ReductionConventions',
    'CANDIDATES',
    'fit_conventions',
    'calibration_triple',
    'get_conventions',
]
