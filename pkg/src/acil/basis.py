"""Polynomial value-function bases with phi(0) = 0 and grad phi(0) = 0."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True, eq=False)
class BasisFn:
    b: int
    n: int
    phi: Callable[[np.ndarray], np.ndarray]
    grad_phi: Callable[[np.ndarray], np.ndarray]  # b x n
    name: str = "basis"


def wing_rock_basis() -> BasisFn:
    """[phi^2, p^2, phi p, phi^3 p] for the roll angle/rate state."""

    def phi(x):
        a, p = x.tolist()
        return np.array([a * a, p * p, a * p, a ** 3 * p])

    def grad_phi(x):
        a, p = x.tolist()
        return np.array([2 * a, 0.0, 0.0, 2 * p, p, a, 3 * a * a * p, a ** 3]).reshape(4, 2)

    return BasisFn(4, 2, phi, grad_phi, "wing_rock")


def quadratic_basis() -> BasisFn:
    """[x1^2, x1 x2, x2^2] for planar states."""

    def phi(x):
        a, c = x.tolist()
        return np.array([a * a, a * c, c * c])

    def grad_phi(x):
        a, c = x.tolist()
        return np.array([2 * a, 0.0, c, a, 0.0, 2 * c]).reshape(3, 2)

    return BasisFn(3, 2, phi, grad_phi, "quadratic")


def scalar_quadratic_basis() -> BasisFn:
    """[x^2] for scalar states."""
    return BasisFn(1, 1, lambda x: np.array([x[0] * x[0]]),
                   lambda x: np.array([[2.0 * x[0]]]), "scalar_quadratic")


BASES = {
    "wing_rock": wing_rock_basis,
    "quadratic": quadratic_basis,
    "scalar_quadratic": scalar_quadratic_basis,
}

DEFAULT_BASIS = {
    "delta_wing": "wing_rock",
    "minefield_robot": "quadratic",
    "scalar_linear": "scalar_quadratic",
}


def get_basis(name: str) -> BasisFn:
    try:
        return BASES[name]()
    except KeyError:
        raise ValueError(f"unknown basis {name!r}; choose from {sorted(BASES)}") from None
