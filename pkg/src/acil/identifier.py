"""Integral concurrent-learning identifier for the drift parameters.

Over a window [t - dt_w, t] the plant satisfies

    x(t) - x(t - dt_w) = int (f0 + g u) + (int Y) theta,

which needs no state derivatives. Windows are kept in a small history stack
and theta_hat descends the summed squared window residual.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import simpson

from .dynamics import SystemModel


class HistoryEntry(NamedTuple):
    script_Y: np.ndarray  # (n, p)  integral of Y(x)
    script_G: np.ndarray  # (n,)    integral of f0(x) + g(x) u
    delta_x: np.ndarray   # (n,)


class Segment(NamedTuple):
    """Sampled trajectory slice: times (K+1,), states (K+1, n), inputs (K+1, m)."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray


def _lambda_min(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(A)[0])


@dataclass
class HistoryStack:
    p: int
    capacity: int = 20
    window: float = 0.5
    entries: list = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be at least 1")
        if self.window <= 0:
            raise ValueError("window must be positive")
        self._refresh()

    def _refresh(self):
        self.normal = np.zeros((self.p, self.p))
        self.rhs = np.zeros(self.p)
        for e in self.entries:
            self.normal += e.script_Y.T @ e.script_Y
            self.rhs += e.script_Y.T @ (e.delta_x - e.script_G)
        self.level = max(_lambda_min(self.normal), 0.0) if self.entries else 0.0

    def push(self, entry: HistoryEntry) -> "HistoryStack":
        """Append ``entry``; at capacity drop the entry whose loss hurts least.

        "Least" means removing it leaves the largest minimum eigenvalue of the
        summed normal matrix; the new entry itself may be the one dropped.
        """
        candidates = self.entries + [entry]
        if len(candidates) > self.capacity:
            grams = [e.script_Y.T @ e.script_Y for e in candidates]
            total = sum(grams)
            scores = [_lambda_min(total - G) for G in grams]
            drop = int(np.argmax(scores))
            candidates.pop(drop)
        self.entries = candidates
        self._refresh()
        return self

    def __len__(self):
        return len(self.entries)


@dataclass
class IdentifierState:
    theta_hat: np.ndarray
    gain: np.ndarray
    k_theta: float = 5.0

    def __post_init__(self):
        self.theta_hat = np.asarray(self.theta_hat, dtype=float).reshape(-1)
        self.gain = np.atleast_2d(np.asarray(self.gain, dtype=float))
        p = self.theta_hat.size
        if p and self.gain.shape != (p, p):
            raise ValueError(f"gain must be {p}x{p}")
        if p and (not np.allclose(self.gain, self.gain.T)
                  or np.linalg.eigvalsh(self.gain)[0] <= 0):
            raise ValueError("gain must be symmetric positive definite")
        if self.k_theta < 0:
            raise ValueError("k_theta must be nonnegative")


def theta_derivative(state: IdentifierState, stack: HistoryStack) -> np.ndarray:
    """k_theta * gain * sum_j Y_j^T (dx_j - G_j - Y_j theta_hat)."""
    if not stack.entries:
        return np.zeros_like(state.theta_hat)
    return state.k_theta * state.gain @ (stack.rhs - stack.normal @ state.theta_hat)


def normalized_gain(stack: HistoryStack, scale: float = 1.0, eps: float = 1e-6) -> np.ndarray:
    """scale * (sum_j Y_j^T Y_j + eps I)^-1, equalizing convergence across directions.

    With this gain every excited direction of theta_tilde decays at a rate
    close to k_theta, regardless of how small the regressor integrals are.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    return scale * np.linalg.inv(stack.normal + eps * np.eye(stack.p))


def excitation_level(stack: HistoryStack) -> float:
    """Minimum eigenvalue of sum_j Y_j^T Y_j (0 for an empty stack)."""
    return stack.level


def window_entry(segment: Segment, model: SystemModel) -> HistoryEntry:
    """Integrate one sampled window with composite Simpson quadrature."""
    t = np.asarray(segment.t, dtype=float)
    xs = np.asarray(segment.x, dtype=float)
    us = np.asarray(segment.u, dtype=float).reshape(len(t), -1)
    Ys = np.array([model.regressor(x) for x in xs]).reshape(len(t), model.n, model.p)
    Gs = np.array([model.base_drift(x) + model.control_matrix(x) @ u for x, u in zip(xs, us)])
    script_Y = simpson(Ys, x=t, axis=0) if model.p else np.zeros((model.n, 0))
    script_G = simpson(Gs, x=t, axis=0)
    return HistoryEntry(script_Y, script_G, xs[-1] - xs[0])


def push_window(stack: HistoryStack, segment: Segment, model: SystemModel) -> HistoryStack:
    """Turn a trajectory slice spanning one window into a stack entry."""
    t = np.asarray(segment.t, dtype=float)
    if len(t) < 2 or t[-1] - t[0] < stack.window * (1 - 1e-9):
        span = t[-1] - t[0] if len(t) else 0.0
        raise ValueError(f"segment spans {span:g} s, shorter than the {stack.window:g} s window")
    return stack.push(window_entry(segment, model))
