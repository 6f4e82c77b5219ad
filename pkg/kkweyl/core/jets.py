"""
Forward-mode truncated Taylor arithmetic.

A `Jet` stores the Taylor coefficients of one or more scalar functions of
`dim` variables about a point, up to total degree `order`. Coefficients are
kept in graded order (value, then degree one, then degree two, ...), so
truncating to a lower order is a prefix slice of the last axis.

Jets may carry a leading tensor shape. `coeffs` then has shape
`(*shape, ncoef)` and all elementwise operations broadcast over the leading
axes the way numpy arrays do.
"""

import math
import string
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement, permutations
from typing import Callable, Iterable, Sequence

import numpy as np

from kkweyl.core.exceptions import JetDomainError


MAX_ORDER = 3
ORDER = 3
DIMENSIONS = (3, 4)


@lru_cache(maxsize=None)
def multi_indices(dim: int, order: int) -> tuple[tuple[int, ...], ...]:
    """
    Returns the exponent vectors of total degree <= order in graded order.
    """
    indices = []
    for degree in range(order + 1):
        for combo in combinations_with_replacement(range(dim), degree):
            alpha = [0] * dim
            for axis in combo:
                alpha[axis] += 1
            indices.append(tuple(alpha))
    return tuple(indices)


def coefficient_count(dim: int, order: int) -> int:
    return math.comb(dim + order, order)


@lru_cache(maxsize=None)
def _index_of(dim: int, order: int) -> dict[tuple[int, ...], int]:
    return {alpha: i for i, alpha in enumerate(multi_indices(dim, order))}


@lru_cache(maxsize=None)
def product_table(dim: int, order: int) -> np.ndarray:
    """
    Returns T with T[i, j, k] = 1 iff alpha_i + alpha_j = alpha_k.
    """
    indices = multi_indices(dim, order)
    lookup = _index_of(dim, order)
    n = len(indices)
    table = np.zeros((n, n, n))
    for i, alpha in enumerate(indices):
        for j, beta in enumerate(indices):
            gamma = tuple(a + b for a, b in zip(alpha, beta))
            k = lookup.get(gamma)
            if k is not None:
                table[i, j, k] = 1.0
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def _derivative_map(
    dim: int, order: int, axis: int
) -> tuple[np.ndarray, np.ndarray]:
    lookup = _index_of(dim, order)
    sources = []
    factors = []
    for beta in multi_indices(dim, order - 1):
        shifted = list(beta)
        shifted[axis] += 1
        sources.append(lookup[tuple(shifted)])
        factors.append(float(shifted[axis]))
    return np.array(sources), np.array(factors)


@dataclass(frozen=True, eq=False)
class Jet:
    """
    A truncated Taylor expansion.

    Attributes:
        coeffs (numpy.ndarray): Taylor coefficients `d^alpha f / alpha!`,
            shape `(*shape, ncoef)`.
        dim (int): Number of independent variables.
        order (int): Truncation order.
    """

    coeffs: np.ndarray
    dim: int
    order: int

    # numpy operands defer to the reflected jet operators.
    __array_ufunc__ = None

    def __post_init__(self):
        if self.coeffs.shape[-1] != coefficient_count(self.dim, self.order):
            raise ValueError(
                f'Expected {coefficient_count(self.dim, self.order)} '
                f'coefficients for dim={self.dim}, order={self.order}, '
                f'got {self.coeffs.shape[-1]}'
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def value(self) -> np.ndarray | float:
        value = self.coeffs[..., 0]
        return float(value) if value.ndim == 0 else value

    def __len__(self) -> int:
        return self.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, key) -> 'Jet':
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.coeffs[(*key, Ellipsis)], self.dim, self.order)

    def __repr__(self) -> str:
        return f'Jet(shape={self.shape}, dim={self.dim}, order={self.order})'

    def truncate(self, order: int) -> 'Jet':
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError('Cannot raise the order of a jet')
        n = coefficient_count(self.dim, order)
        return Jet(self.coeffs[..., :n], self.dim, order)

    def transpose(self, *axes: int) -> 'Jet':
        axes = axes or tuple(reversed(range(len(self.shape))))
        return Jet(
            self.coeffs.transpose(*axes, len(self.shape)), self.dim, self.order
        )

    @property
    def T(self) -> 'Jet':
        return self.transpose()

    def derivative(self, axis: int) -> 'Jet':
        """
        Differentiates with respect to one variable, lowering the order by one.
        """
        if self.order == 0:
            raise ValueError('Cannot differentiate an order-0 jet')
        if not 0 <= axis < self.dim:
            raise ValueError(f'Axis {axis} out of range for dim {self.dim}')
        sources, factors = _derivative_map(self.dim, self.order, axis)
        return Jet(
            self.coeffs[..., sources] * factors, self.dim, self.order - 1
        )

    def gradient(self) -> 'Jet':
        """
        Returns all first partials, derivative axis first.
        """
        return stack([self.derivative(m) for m in range(self.dim)])

    def partial(self, alpha: Sequence[int]) -> np.ndarray | float:
        """
        Returns the partial derivative `d^alpha f` at the expansion point.

        Args:
            alpha: Exponent vector of length `dim` with total degree <= order.
        """
        alpha = tuple(alpha)
        if len(alpha) != self.dim or sum(alpha) > self.order:
            raise ValueError(f'Multi-index {alpha} outside the jet')
        index = _index_of(self.dim, self.order)[alpha]
        factorial = math.prod(math.factorial(a) for a in alpha)
        value = self.coeffs[..., index] * factorial
        return float(value) if value.ndim == 0 else value

    def _coerce(self, other) -> 'Jet':
        if isinstance(other, Jet):
            if other.dim != self.dim:
                raise ValueError(
                    f'Jet dimensions differ: {self.dim} != {other.dim}'
                )
            return other
        return constant(other, self.dim, self.order)

    def _align(self, other) -> tuple['Jet', 'Jet']:
        other = self._coerce(other)
        order = min(self.order, other.order)
        return self.truncate(order), other.truncate(order)

    def __add__(self, other) -> 'Jet':
        a, b = self._align(other)
        return Jet(a.coeffs + b.coeffs, a.dim, a.order)

    __radd__ = __add__

    def __sub__(self, other) -> 'Jet':
        a, b = self._align(other)
        return Jet(a.coeffs - b.coeffs, a.dim, a.order)

    def __rsub__(self, other) -> 'Jet':
        a, b = self._align(other)
        return Jet(b.coeffs - a.coeffs, a.dim, a.order)

    def __neg__(self) -> 'Jet':
        return Jet(-self.coeffs, self.dim, self.order)

    def __pos__(self) -> 'Jet':
        return self

    def __mul__(self, other) -> 'Jet':
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.coeffs * other[..., None], self.dim, self.order)
        a, b = self._align(other)
        table = product_table(a.dim, a.order)
        return Jet(
            np.einsum('...i,...j,ijk->...k', a.coeffs, b.coeffs, table),
            a.dim,
            a.order,
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> 'Jet':
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            if np.any(other == 0):
                raise JetDomainError('div', 'division by zero')
            return Jet(self.coeffs / other[..., None], self.dim, self.order)
        return self * reciprocal(other)

    def __rtruediv__(self, other) -> 'Jet':
        return reciprocal(self) * other

    def __pow__(self, exponent) -> 'Jet':
        if isinstance(exponent, int) or (
            isinstance(exponent, float) and exponent.is_integer()
        ):
            return pow_int(self, int(exponent))
        return exp(ln(self) * exponent)


def variable(index: int, value: float, dim: int, order: int = ORDER) -> Jet:
    """
    Returns the jet of the coordinate function `x^index` about `value`.

    Raises:
        ValueError: If the index, dimension or order is out of range.
    """
    if dim not in DIMENSIONS:
        raise ValueError(f'Jet dimension must be 3 or 4, got {dim}')
    if not 0 <= index < dim:
        raise ValueError(f'Variable index {index} out of range for dim {dim}')
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f'Jet order must be between 0 and {MAX_ORDER}')
    coeffs = np.zeros(coefficient_count(dim, order))
    coeffs[0] = value
    if order >= 1:
        coeffs[1 + index] = 1.0
    return Jet(coeffs, dim, order)


def variables(point: Sequence[float], order: int = ORDER) -> Jet:
    """
    Returns the coordinate functions about `point` as one jet of shape (dim,).
    """
    dim = len(point)
    return stack([variable(i, x, dim, order) for i, x in enumerate(point)])


def constant(value, dim: int, order: int = ORDER) -> Jet:
    value = np.asarray(value, dtype=float)
    coeffs = np.zeros((*value.shape, coefficient_count(dim, order)))
    coeffs[..., 0] = value
    return Jet(coeffs, dim, order)


def asjet(value, dim: int, order: int = ORDER) -> Jet:
    if isinstance(value, Jet):
        return value
    return constant(value, dim, order)


def stack(items: Iterable, axis: int = 0) -> Jet:
    """
    Stacks jets (or plain numbers) along a new leading-shape axis.
    """
    items = list(items)
    jets = [item for item in items if isinstance(item, Jet)]
    if not jets:
        raise ValueError('stack() needs at least one jet')
    dim = jets[0].dim
    order = min(jet.order for jet in jets)
    lifted = [asjet(item, dim, order).truncate(order) for item in items]
    if axis < 0:
        axis += len(lifted[0].shape) + 1
    coeffs = np.stack([jet.coeffs for jet in lifted], axis=axis)
    return Jet(coeffs, dim, order)


def concatenate(items: Iterable[Jet], axis: int = 0) -> Jet:
    items = list(items)
    dim = items[0].dim
    order = min(jet.order for jet in items)
    coeffs = np.concatenate(
        [jet.truncate(order).coeffs for jet in items], axis=axis
    )
    return Jet(coeffs, dim, order)


def array(rows: Sequence, dim: int, order: int = ORDER) -> Jet:
    """
    Builds a jet from a nested sequence of scalar jets and numbers.
    """
    if isinstance(rows, (Jet, int, float)):
        return asjet(rows, dim, order)
    return stack([array(row, dim, order) for row in rows])


def einsum(subscripts: str, *operands) -> Jet | np.ndarray:
    """
    Contracts jets and constant arrays with numpy einsum notation.

    Subscripts use lowercase letters and must name the output explicitly.
    Jet operands are multiplied as truncated series; the result has the
    lowest order among the jet operands.
    """
    inputs, output = subscripts.replace(' ', '').split('->')
    terms = inputs.split(',')
    if len(terms) != len(operands):
        raise ValueError('Subscript terms do not match operand count')
    jets = [operand for operand in operands if isinstance(operand, Jet)]
    if not jets:
        return np.einsum(subscripts, *operands)
    dim = jets[0].dim
    if any(jet.dim != dim for jet in jets):
        raise ValueError('Jet dimensions differ')
    order = min(jet.order for jet in jets)
    ncoef = coefficient_count(dim, order)

    letters = iter(string.ascii_uppercase)
    new_terms = []
    arrays = []
    coefficient_letters = []
    for term, operand in zip(terms, operands):
        if isinstance(operand, Jet):
            letter = next(letters)
            coefficient_letters.append(letter)
            new_terms.append(term + letter)
            arrays.append(operand.coeffs[..., :ncoef])
        else:
            new_terms.append(term)
            arrays.append(np.asarray(operand, dtype=float))

    table = product_table(dim, order)
    current = coefficient_letters[0]
    for letter in coefficient_letters[1:]:
        merged = next(letters)
        new_terms.append(current + letter + merged)
        arrays.append(table)
        current = merged

    expression = f'{",".join(new_terms)}->{output}{current}'
    return Jet(np.einsum(expression, *arrays, optimize=True), dim, order)


def _compose(u: Jet, derivatives: Sequence) -> Jet:
    """
    Composes a univariate function with `u` given `f^(n)(u0)` for n <= order.
    """
    h = Jet(u.coeffs.copy(), u.dim, u.order)
    h.coeffs[..., 0] = 0.0
    coeffs = np.zeros_like(u.coeffs)
    coeffs[..., 0] = derivatives[0]
    power = None
    for n in range(1, u.order + 1):
        power = h if power is None else power * h
        coeffs += (np.asarray(derivatives[n]) / math.factorial(n))[
            ..., None
        ] * power.coeffs
    return Jet(coeffs, u.dim, u.order)


def _unary(
    name: str,
    numeric: Callable[[np.ndarray], np.ndarray],
    derivatives: Callable[[np.ndarray, int], list],
    domain: Callable[[np.ndarray], np.ndarray] | None = None,
):
    def function(u):
        if isinstance(u, Jet):
            u0 = u.coeffs[..., 0]
        else:
            u0 = np.asarray(u, dtype=float)
        if domain is not None and not np.all(domain(u0)):
            raise JetDomainError(name, f'{name} outside its domain')
        if not isinstance(u, Jet):
            result = numeric(u0)
            return float(result) if result.ndim == 0 else result
        return _compose(u, derivatives(u0, u.order))

    function.__name__ = name
    function.__doc__ = f'Elementwise {name} of a jet or number.'
    return function


def _exp_derivatives(u0, order):
    value = np.exp(u0)
    return [value] * (order + 1)


def _ln_derivatives(u0, order):
    return [np.log(u0), 1.0 / u0, -1.0 / u0**2, 2.0 / u0**3][: order + 1]


def _sqrt_derivatives(u0, order):
    s = np.sqrt(u0)
    return [s, 0.5 / s, -0.25 / s**3, 0.375 / s**5][: order + 1]


def _sin_derivatives(u0, order):
    s, c = np.sin(u0), np.cos(u0)
    return [s, c, -s, -c][: order + 1]


def _cos_derivatives(u0, order):
    s, c = np.sin(u0), np.cos(u0)
    return [c, -s, -c, s][: order + 1]


def _tan_derivatives(u0, order):
    t = np.tan(u0)
    sec2 = 1.0 + t**2
    return [t, sec2, 2.0 * t * sec2, sec2 * (2.0 + 6.0 * t**2)][: order + 1]


def _reciprocal_derivatives(u0, order):
    return [1.0 / u0, -1.0 / u0**2, 2.0 / u0**3, -6.0 / u0**4][: order + 1]


exp = _unary('exp', np.exp, _exp_derivatives)
ln = _unary('ln', np.log, _ln_derivatives, lambda u0: u0 > 0)
sqrt = _unary('sqrt', np.sqrt, _sqrt_derivatives, lambda u0: u0 > 0)
sin = _unary('sin', np.sin, _sin_derivatives)
cos = _unary('cos', np.cos, _cos_derivatives)
tan = _unary('tan', np.tan, _tan_derivatives, lambda u0: np.cos(u0) != 0)
reciprocal = _unary(
    'div', lambda u0: 1.0 / u0, _reciprocal_derivatives, lambda u0: u0 != 0
)


FUNCTIONS = {
    'sqrt': sqrt,
    'exp': exp,
    'ln': ln,
    'sin': sin,
    'cos': cos,
    'tan': tan,
}


def pow_int(u, n: int):
    """
    Raises a jet or number to an integer power by repeated squaring.
    """
    if n < 0:
        return reciprocal(pow_int(u, -n))
    if not isinstance(u, Jet):
        result = np.asarray(u, dtype=float) ** n
        return float(result) if result.ndim == 0 else result
    result = constant(np.ones(u.shape), u.dim, u.order)
    base = u
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def trace(m: Jet) -> Jet:
    return einsum('ii->', m)


def _series_powers(m: Jet) -> list[Jet]:
    powers = [m]
    for _ in range(1, m.order):
        powers.append(einsum('ij,jk->ik', powers[-1], m))
    return powers


def _relative(g: Jet) -> tuple[np.ndarray, Jet]:
    g0 = g.coeffs[..., 0]
    g0_inv = np.linalg.inv(g0)
    n = Jet(g.coeffs.copy(), g.dim, g.order)
    n.coeffs[..., 0] = 0.0
    return g0_inv, einsum('ij,jk->ik', g0_inv, n)


def inverse(g: Jet) -> Jet:
    """
    Inverts a square matrix jet.

    Raises:
        numpy.linalg.LinAlgError: If the value part is singular.
    """
    g0_inv, m = _relative(g)
    size = g.shape[0]
    total = constant(np.eye(size), g.dim, g.order)
    sign = 1.0
    for power in _series_powers(m):
        sign = -sign
        total = total + power * sign
    return einsum('ij,jk->ik', total, g0_inv)


def _log_det_ratio(g: Jet) -> tuple[float, Jet]:
    det0 = float(np.linalg.det(g.coeffs[..., 0]))
    _, m = _relative(g)
    log_ratio = constant(0.0, g.dim, g.order)
    for k, power in enumerate(_series_powers(m), start=1):
        log_ratio = log_ratio + trace(power) * ((-1.0) ** (k + 1) / k)
    return det0, log_ratio


def det(g: Jet) -> Jet:
    det0, log_ratio = _log_det_ratio(g)
    return exp(log_ratio) * det0


def sqrt_abs_det(g: Jet) -> Jet:
    det0, log_ratio = _log_det_ratio(g)
    return exp(log_ratio * 0.5) * math.sqrt(abs(det0))


@lru_cache(maxsize=None)
def permutation_symbol(dim: int) -> np.ndarray:
    """
    The Levi-Civita symbol with `symbol[0, 1, ..., dim-1] = +1`.
    """
    symbol = np.zeros((dim,) * dim)
    for perm in permutations(range(dim)):
        inversions = sum(
            1
            for i in range(dim)
            for j in range(i + 1, dim)
            if perm[i] > perm[j]
        )
        symbol[perm] = -1.0 if inversions % 2 else 1.0
    symbol.setflags(write=False)
    return symbol


__all__ = [
    'Jet',
    'ORDER',
    'MAX_ORDER',
    'DIMENSIONS',
    'multi_indices',
    'coefficient_count',
    'product_table',
    'variable',
    'variables',
    'constant',
    'asjet',
    'stack',
    'concatenate',
    'array',
    'einsum',
    'exp',
    'ln',
    'sqrt',
    'sin',
    'cos',
    'tan',
    'reciprocal',
    'pow_int',
    'FUNCTIONS',
    'trace',
    'inverse',
    'det',
    'sqrt_abs_det',
    'permutation_symbol',
]
