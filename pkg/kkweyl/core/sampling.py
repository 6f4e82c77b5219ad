"""
Reproducible sample points.

Points are drawn uniformly from a coordinate box with xoshiro256**, seeded
through splitmix64. The 64-bit seed of a named stream is the rapidhash of the
stream name followed by the user seed, so every check draws its own
independent, reproducible sequence.
"""

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from rapidhash import rapidhash

from kkweyl.core.expressions import evaluate, parse_expression


MASK64 = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class SplitMix64:
    def __init__(self, state: int):
        self.state = state & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


class Xoshiro256StarStar:
    """
    The xoshiro256** generator of Blackman and Vigna.
    """

    def __init__(self, seed: int):
        mixer = SplitMix64(seed)
        self.s = [mixer.next() for _ in range(4)]

    def next(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """
        A double in [0, 1) from the top 53 bits.
        """
        return (self.next() >> 11) * 2.0**-53


def stream_seed(name: str, seed: int) -> int:
    return rapidhash(f'{name}{seed}'.encode())


def generator(name: str, seed: int) -> Xoshiro256StarStar:
    return Xoshiro256StarStar(stream_seed(name, seed))


def sample_points(
    domain: Sequence[tuple[float, float]],
    count: int,
    seed: int,
    stream: str = 'points',
) -> list[tuple[float, ...]]:
    """
    Draws `count` points uniformly from the box `domain`.

    Args:
        domain: Closed interval per coordinate.
        count (int): Number of points.
        seed (int): User seed.
        stream (str): Stream name; different names give independent points.
    """
    if count < 0:
        raise ValueError('The number of points must not be negative')
    rng = generator(stream, seed)
    return [
        tuple(lo + (hi - lo) * rng.random() for lo, hi in domain)
        for _ in range(count)
    ]


@dataclass(frozen=True)
class GridAxis:
    coordinate: str
    lo: float
    hi: float
    count: int

    def values(self) -> list[float]:
        if self.count == 1:
            return [(self.lo + self.hi) / 2]
        return [float(v) for v in np.linspace(self.lo, self.hi, self.count)]


def parse_grid(
    text: str,
    coordinates: Sequence[str],
    params: dict[str, float] | None = None,
) -> list[GridAxis]:
    """
    Parses a grid specification such as `r=3:9:10;theta=0.5:2.5:3`.

    Each entry is `coordinate=lo:hi:n`; bounds may be expressions over the
    parameters and `pi`.

    Raises:
        ValueError: The specification is malformed or names an unknown
            coordinate.
    """
    axes = []
    for item in filter(None, (part.strip() for part in text.split(';'))):
        name, sep, rest = item.partition('=')
        name = name.strip()
        if not sep or name not in coordinates:
            raise ValueError(
                f'Grid entry {item!r} must be coordinate=lo:hi:n with a '
                f'coordinate from {", ".join(coordinates)}'
            )
        if any(axis.coordinate == name for axis in axes):
            raise ValueError(f'Coordinate {name!r} appears twice in the grid')
        parts = rest.split(':')
        if len(parts) != 3:
            raise ValueError(f'Grid entry {item!r} must have lo:hi:n')
        try:
            lo, hi = (
                float(evaluate(parse_expression(p), params or {}))
                for p in parts[:2]
            )
            count = int(parts[2])
        except (ValueError, ArithmeticError) as e:
            raise ValueError(f'Invalid grid entry {item!r}: {e}') from e
        if count < 1 or not lo <= hi:
            raise ValueError(f'Invalid grid entry {item!r}')
        axes.append(GridAxis(name, lo, hi, count))
    if not axes:
        raise ValueError('Empty grid specification')
    return axes


def grid_points(
    axes: Sequence[GridAxis],
    coordinates: Sequence[str],
    domain: Sequence[tuple[float, float]],
) -> list[tuple[float, ...]]:
    """
    The product grid over `axes`; other coordinates sit at the midpoint of
    their domain.
    """
    by_name = {axis.coordinate: axis for axis in axes}
    values = [
        by_name[c].values() if c in by_name else [(lo + hi) / 2]
        for c, (lo, hi) in zip(coordinates, domain)
    ]
    return [tuple(p) for p in itertools.product(*values)]


__all__ = [
    'SplitMix64',
    'Xoshiro256StarStar',
    'stream_seed',
    'generator',
    'sample_points',
    'GridAxis',
    'parse_grid',
    'grid_points',
]
