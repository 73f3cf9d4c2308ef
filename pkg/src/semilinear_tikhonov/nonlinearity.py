"""Semilinear terms f(y) together with f' and f''."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

KINDS = ("zero", "sin", "cubic", "exp")


class NonMonotoneWarning(UserWarning):
    """The nonlinearity has f' < 0 somewhere, so the state equation need not be monotone."""


@dataclass(frozen=True)
class Nonlinearity:
    kind: str
    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    deriv2: Callable[[np.ndarray], np.ndarray]
    monotone_flag: bool

    def __repr__(self):
        return f"Nonlinearity({self.kind!r})"


def _zero(y):
    return np.zeros_like(np.asarray(y, dtype=float))


_REGISTRY = {
    "zero": (_zero, _zero, _zero, True),
    "sin": (np.sin, np.cos, lambda y: -np.sin(y), False),
    "cubic": (lambda y: y**3 - y, lambda y: 3.0 * y**2 - 1.0, lambda y: 6.0 * np.asarray(y, float), False),
    "exp": (np.exp, np.exp, np.exp, True),
}


def make_nonlinearity(kind: str, warn: bool = True) -> Nonlinearity:
    try:
        f, df, d2f, monotone = _REGISTRY[kind]
    except KeyError:
        raise ValueError(f"unknown nonlinearity {kind!r}; choose from {', '.join(KINDS)}") from None
    if warn and kind == "cubic":
        warnings.warn(
            "cubic nonlinearity -y + y^3 has f'(0) = -1 < 0; the state operator is not monotone",
            NonMonotoneWarning,
            stacklevel=2,
        )
    return Nonlinearity(kind, f, df, d2f, monotone)
