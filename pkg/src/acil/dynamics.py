"""Control-affine plants with linearly parameterized drift.

A plant is described by

    x_dot = f0(x) + Y(x) theta + g(x) u

where ``f0`` is the known part of the drift (zero unless a row of the
dynamics is exactly known), ``Y`` is the regressor and ``theta`` the unknown
parameter vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Vector = np.ndarray
Matrix = np.ndarray


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Immutable description of a control-affine plant.

    ``theta_true`` is only read by the plant integrator and by oracles; the
    learner always works with its own estimate.
    """

    name: str
    n: int
    m: int
    p: int
    regressor: Callable[[Vector], Matrix]
    control_matrix: Callable[[Vector], Matrix]
    theta_true: Vector
    R: Matrix
    Q: Callable[[Vector], float]
    known_drift: Callable[[Vector], Vector] | None = None
    constant_g: bool = False
    R_inv: Matrix = field(init=False, repr=False)

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        theta = np.asarray(self.theta_true, dtype=float).reshape(-1)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "theta_true", theta)
        if R.shape != (self.m, self.m):
            raise ValueError(f"R must be {self.m}x{self.m}, got {R.shape}")
        if not np.allclose(R, R.T):
            raise ValueError("R must be symmetric")
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("R must be positive definite")
        if theta.shape != (self.p,):
            raise ValueError(f"theta_true must have length {self.p}")
        object.__setattr__(self, "R_inv", np.linalg.inv(R))

        x0 = np.zeros(self.n)
        Y0 = np.asarray(self.regressor(x0))
        g0 = np.asarray(self.control_matrix(x0))
        if Y0.shape != (self.n, self.p):
            raise ValueError(f"regressor must return {self.n}x{self.p}, got {Y0.shape}")
        if g0.shape != (self.n, self.m):
            raise ValueError(f"control_matrix must return {self.n}x{self.m}, got {g0.shape}")
        if self.known_drift is not None:
            f0 = np.asarray(self.known_drift(x0))
            if f0.shape != (self.n,):
                raise ValueError(f"known_drift must return a length-{self.n} vector")
        if abs(float(self.Q(x0))) > 1e-12:
            raise ValueError("Q(0) must be 0")

    def base_drift(self, x: Vector) -> Vector:
        if self.known_drift is None:
            return np.zeros(self.n)
        return np.asarray(self.known_drift(x), dtype=float)


def _check_state(model: SystemModel, x) -> Vector:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise ValueError(f"{model.name}: state must have shape ({model.n},), got {x.shape}")
    return x


def _check_theta(model: SystemModel, theta) -> Vector:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape != (model.p,):
        raise ValueError(f"{model.name}: theta must have length {model.p}, got {theta.size}")
    return theta


def regressor_eval(model: SystemModel, x) -> Matrix:
    """Return the n x p regressor Y(x)."""
    return np.asarray(model.regressor(_check_state(model, x)), dtype=float)


def drift_eval(model: SystemModel, x, theta) -> Vector:
    """Return the drift f0(x) + Y(x) theta."""
    x = _check_state(model, x)
    theta = _check_theta(model, theta)
    return model.base_drift(x) + regressor_eval(model, x) @ theta


def dynamics_eval(model: SystemModel, x, u, theta) -> Vector:
    """Return the state derivative for input ``u`` under parameters ``theta``."""
    x = _check_state(model, x)
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape != (model.m,):
        raise ValueError(f"{model.name}: input must have length {model.m}, got {u.size}")
    return drift_eval(model, x, theta) + np.asarray(model.control_matrix(x)) @ u


def make_system(name, n, m, p, regressor, control_matrix, theta_true, R, Q=None,
                known_drift=None, constant_g=False) -> SystemModel:
    """Build a user-defined plant from callables; dimensions are validated here.

    ``Q`` defaults to the quadratic state cost x^T x.
    """
    if Q is None:
        Q = _quadratic_cost
    return SystemModel(name=name, n=n, m=m, p=p, regressor=regressor,
                       control_matrix=control_matrix, theta_true=theta_true, R=R,
                       Q=Q, known_drift=known_drift, constant_g=constant_g)


def _quadratic_cost(x):
    return float(np.dot(x, x))


# -- built-in benchmarks ---------------------------------------------------

WING_ROCK_THETA = np.array([-0.018, 0.015, -0.062, 0.009, 0.021])
WING_ROCK_INPUT_GAIN = 0.75


def _wing_rock_regressor(x):
    phi, p = x.tolist()
    return np.array([0.0, 0.0, 0.0, 0.0, 0.0,
                     phi, p, abs(phi) * p, abs(p) * p, phi ** 3]).reshape(2, 5)


def _wing_rock_kinematics(x):
    return np.array([x[1], 0.0])


_WING_ROCK_G = np.array([[0.0], [WING_ROCK_INPUT_GAIN]])


def delta_wing() -> SystemModel:
    """Wing-rock roll dynamics; only the input gain is known a priori."""
    return make_system(
        "delta_wing", n=2, m=1, p=5,
        regressor=_wing_rock_regressor,
        control_matrix=lambda x: _WING_ROCK_G,
        theta_true=WING_ROCK_THETA.copy(),
        R=np.eye(1),
        known_drift=_wing_rock_kinematics,
        constant_g=True,
    )


_EYE2 = np.eye(2)
_EMPTY_2x0 = np.zeros((2, 0))


def minefield_robot() -> SystemModel:
    """Single-integrator planar robot, x_dot = u (no drift parameters)."""
    return make_system(
        "minefield_robot", n=2, m=2, p=0,
        regressor=lambda x: _EMPTY_2x0,
        control_matrix=lambda x: _EYE2,
        theta_true=np.zeros(0),
        R=np.eye(2),
        constant_g=True,
    )


def scalar_linear(a: float = 1.0, b: float = 1.0, q: float = 1.0, r: float = 1.0) -> SystemModel:
    """Scalar plant x_dot = a x + b u with cost q x^2 + r u^2 / 2.

    ``a`` is the (single) unknown parameter. Used as a Riccati-solvable test bed.
    """
    if b == 0:
        raise ValueError("b must be nonzero")
    G = np.array([[float(b)]])
    return make_system(
        "scalar_linear", n=1, m=1, p=1,
        regressor=lambda x: x.reshape(1, 1),
        control_matrix=lambda x: G,
        theta_true=np.array([float(a)]),
        R=np.array([[float(r)]]),
        Q=lambda x: float(q * x[0] * x[0]),
        constant_g=True,
    )


_REGISTRY: dict[str, Callable[..., SystemModel]] = {
    "delta_wing": delta_wing,
    "minefield_robot": minefield_robot,
    "scalar_linear": scalar_linear,
}


def register_system(name: str, factory: Callable[..., SystemModel]) -> None:
    """Make a user-defined plant selectable by name from scenario files."""
    model = factory()
    if not isinstance(model, SystemModel):
        raise TypeError("factory must return a SystemModel")
    _REGISTRY[name] = factory


def builtin_system(name: str, *args, **kwargs) -> SystemModel:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {sorted(_REGISTRY)}") from None
    return factory(*args, **kwargs)


def system_names() -> list[str]:
    return sorted(_REGISTRY)
