import re
from typing import Iterable, Protocol, TypeVar

import numpy as np


_name_pattern = re.compile(r'^[A-Za-z_][A-Za-z0-9_]*$', re.ASCII)


T = TypeVar('T', bound='Validatable')


class Validatable(Protocol):
    def validate(self: T) -> T:
        for name, _ in self.__dataclass_fields__.items():
            validate = getattr(self, f'validate_{name}', None)
            if validate is not None and callable(validate):
                validate()
        return self


def is_identifier(name: str) -> bool:
    return bool(_name_pattern.match(name))


def max_abs(*arrays) -> float:
    """
    Returns the largest absolute entry over all arrays, 0 for empty input.
    """
    best = 0.0
    for array in arrays:
        array = np.asarray(array, dtype=float)
        if array.size:
            best = max(best, float(np.max(np.abs(array))))
    return best


def scaled(residual: float, scale: float) -> float:
    """
    Divides by a scale, treating a vanishing scale as unit scale.
    """
    return residual / scale if scale > 0 else residual


def max_or_zero(values: Iterable[float]) -> float:
    return max(values, default=0.0)


__all__ = [
    'Validatable',
    'is_identifier',
    'max_abs',
    'scaled',
    'max_or_zero',
]
