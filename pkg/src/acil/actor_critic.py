"""Value and policy approximation, Bellman errors, and the critic/Gamma/actor laws.

Shapes: ``b`` basis size, ``n`` state size, ``N`` extrapolation points.
Evaluations at the trajectory point and at the extrapolation points share
one vectorized pass (:func:`evaluate`), row 0 being the trajectory point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .barrier import BarrierFn
from .basis import BasisFn
from .dynamics import SystemModel
from .features import PointFeatures, point_features
from .lagrange import SOFTPLUS, MultiplierRule, SoftplusParams, c_s_batch, multiplier_batch


@dataclass(frozen=True)
class Gains:
    eta_c1: float = 0.1
    eta_c2: float = 1.0
    eta_a1: float = 0.1
    eta_a2: float = 1.0
    nu: float = 5.0
    beta: float = 0.01

    def __post_init__(self):
        for k, v in vars(self).items():
            if v < 0:
                raise ValueError(f"{k} must be nonnegative, got {v}")


@dataclass
class CriticState:
    W_c_hat: np.ndarray
    Gamma: np.ndarray


@dataclass
class ActorState:
    W_a_hat: np.ndarray
    W_a_bar: float


@dataclass
class ExtrapolationSet:
    points: np.ndarray
    policy: Literal["fixed", "resample_each_step"] = "fixed"


class Evaluation(NamedTuple):
    """Learner quantities on each row of a feature stack."""

    u: np.ndarray      # (k, m)
    lam: np.ndarray    # (k,)
    cs: np.ndarray     # (k,)
    r: np.ndarray      # (k,) instantaneous cost
    delta: np.ndarray  # (k,)
    omega: np.ndarray  # (k, b)
    rho: np.ndarray    # (k,)


def evaluate(feat: PointFeatures, W_c, W_a, theta, Gamma, sp: SoftplusParams, nu: float,
             model: SystemModel, rule: MultiplierRule = SOFTPLUS) -> Evaluation:
    """Control, multiplier and Bellman error on every row of ``feat``."""
    p = len(theta)
    v = np.concatenate(([1.0], theta, [0.0], -W_a))
    z = feat.H @ v  # rows: [C_s, dphi (f_hat - R_g dphi^T W_a)]
    cs = z[:, 0]
    lam = multiplier_batch(cs, feat, rule, sp)
    # the lambda column of H carries [R_bf, dphi R_g dB]
    z -= lam[:, None] * feat.H[:, :, 1 + p]
    bdot, omega = z[:, 0], z[:, 1:]
    u = -(feat.U_W @ W_a) - lam[:, None] * feat.U_B
    r = feat.Q + 0.5 * ((u @ model.R) * u).sum(axis=1)
    delta = r + omega @ W_c + lam * bdot
    rho = np.sqrt(1.0 + nu * ((omega @ Gamma) * omega).sum(axis=1))
    return Evaluation(u, lam, cs, r, delta, omega, rho)


def _single(x, model, b, basis):
    return point_features(np.asarray(x, dtype=float).reshape(1, -1), model, b, basis)


def value_hat(x, critic: CriticState, basis: BasisFn) -> float:
    return float(np.asarray(critic.W_c_hat) @ basis.phi(np.asarray(x, dtype=float)))


def control_hat(x, actor: ActorState, theta_hat, sp: SoftplusParams, model: SystemModel,
                b: BarrierFn, basis: BasisFn, rule: MultiplierRule = SOFTPLUS) -> np.ndarray:
    """u = -R^-1 g^T (dphi^T W_a + lambda dB)."""
    feat = _single(x, model, b, basis)
    W_a = np.asarray(actor.W_a_hat, float)
    cs = c_s_batch(feat, W_a, np.asarray(theta_hat, float))
    lam = multiplier_batch(cs, feat, rule, sp)
    grad = feat.dphi[0].T @ W_a + lam[0] * feat.dB[0]
    return -feat.RinvgT[0] @ grad


def bellman_error(x_eval, critic: CriticState, actor: ActorState, theta_hat,
                  sp: SoftplusParams, model: SystemModel, b: BarrierFn, basis: BasisFn,
                  nu: float = 5.0, rule: MultiplierRule = SOFTPLUS) -> tuple[float, np.ndarray, float]:
    """Return (delta, omega, rho) at one state."""
    feat = _single(x_eval, model, b, basis)
    ev = evaluate(feat, np.asarray(critic.W_c_hat, float), np.asarray(actor.W_a_hat, float),
                  np.asarray(theta_hat, float), np.asarray(critic.Gamma, float), sp, nu,
                  model, rule)
    return float(ev.delta[0]), ev.omega[0], float(ev.rho[0])


def sample_extrapolation(b: BarrierFn, N: int, seed, bounding_box,
                         policy: str = "fixed", rng=None) -> ExtrapolationSet:
    """Draw ``N`` interior points uniformly from ``bounding_box`` by rejection."""
    if N < 1:
        raise ValueError("N must be at least 1")
    low, high = (np.asarray(v, dtype=float) for v in bounding_box)
    rng = np.random.default_rng(seed) if rng is None else rng
    pts = []
    for _ in range(100_000 * N):
        x = rng.uniform(low, high)
        if b.contains(x):
            pts.append(x)
            if len(pts) == N:
                return ExtrapolationSet(np.array(pts), policy)
    raise RuntimeError(f"rejection sampling found only {len(pts)} of {N} interior points")


def _split(deltas):
    deltas = list(deltas)
    if not deltas:
        raise ValueError("need at least the on-trajectory term")
    on, extra = deltas[0], deltas[1:]
    return on, extra


def critic_derivative(critic: CriticState, deltas: Sequence[tuple], gains: Gains) -> np.ndarray:
    """RLS critic law; ``deltas`` holds (delta, omega, rho), trajectory term first."""
    (d0, w0, r0), extra = _split(deltas)
    N = len(extra)
    if N == 0 and gains.eta_c2 > 0:
        raise ValueError("eta_c2 > 0 needs at least one extrapolation point")
    acc = gains.eta_c1 * np.asarray(w0, float) * d0 / r0 ** 2
    if N:
        acc = acc + gains.eta_c2 / N * sum(np.asarray(w, float) * d / r ** 2 for d, w, r in extra)
    return -np.asarray(critic.Gamma) @ acc


def gamma_derivative(critic: CriticState, omegas: Sequence[tuple], beta: float,
                     gains: Gains) -> np.ndarray:
    """Least-squares gain law with forgetting; ``omegas`` holds (omega, rho)."""
    omegas = list(omegas)
    (w0, r0), extra = omegas[0], omegas[1:]
    w0 = np.asarray(w0, float)
    psi = gains.eta_c1 * np.outer(w0, w0) / r0 ** 2
    if extra:
        psi = psi + gains.eta_c2 / len(extra) * sum(
            np.outer(w, w) / r ** 2 for w, r in ((np.asarray(w, float), r) for w, r in extra))
    G = np.asarray(critic.Gamma)
    out = beta * G - G @ psi @ G
    return 0.5 * (out + out.T)


def project_derivative(W_a, raw, W_a_bar: float) -> np.ndarray:
    """Drop the outward radial part of ``raw`` when ``W_a`` sits on the ball boundary."""
    nrm2 = W_a @ W_a
    if nrm2 >= W_a_bar ** 2:
        out = raw @ W_a
        if out > 0:
            return raw - (out / nrm2) * W_a
    return raw


def project_onto_ball(W_a, W_a_bar: float) -> np.ndarray:
    nrm = np.linalg.norm(W_a)
    if nrm > W_a_bar:
        return W_a * (W_a_bar / nrm)
    return W_a


def actor_raw(W_a, W_c, omega, rho, Rs, gains: Gains, weights=None) -> np.ndarray:
    """Unprojected actor law from stacked (omega, rho, R_s), trajectory row first.

    ``weights`` (eta_c1 then eta_c2 / N per extrapolation row) may be passed
    precomputed.
    """
    if weights is None:
        N = len(rho) - 1
        weights = np.concatenate([[gains.eta_c1], np.full(N, gains.eta_c2 / N if N else 0.0)])
    coef = weights * (omega @ W_c) / (4.0 * rho)
    # sum_k coef_k R_s,k^T W_a
    return gains.eta_a1 * W_c - (gains.eta_a1 + gains.eta_a2) * W_a + coef @ (W_a @ Rs)


def actor_derivative(actor: ActorState, critic: CriticState, data: Sequence[tuple],
                     gains: Gains) -> np.ndarray:
    """Projected actor law; ``data`` holds (omega, rho, R_s), trajectory term first."""
    data = list(data)
    omega = np.array([np.asarray(d[0], float) for d in data])
    rho = np.array([float(d[1]) for d in data])
    Rs = np.array([np.asarray(d[2], float) for d in data])
    W_a = np.asarray(actor.W_a_hat, float)
    raw = actor_raw(W_a, np.asarray(critic.W_c_hat, float), omega, rho, Rs, gains)
    return project_derivative(W_a, raw, actor.W_a_bar)


def psi(omega, rho) -> np.ndarray:
    """Stack of omega omega^T / rho^2."""
    omega = np.atleast_2d(omega)
    rho = np.atleast_1d(rho)
    return omega[:, :, None] * omega[:, None, :] / (rho ** 2)[:, None, None]


@dataclass
class ExcitationTracker:
    """Running record of the quantities behind the excitation conditions."""

    b: int
    int_psi: np.ndarray = field(init=False)
    int_psi_mean: np.ndarray = field(init=False)
    inf_eig_mean: float = np.inf
    duration: float = 0.0

    def __post_init__(self):
        self.int_psi = np.zeros((self.b, self.b))
        self.int_psi_mean = np.zeros((self.b, self.b))

    def add(self, psi_on, psi_mean, dt: float):
        self.int_psi += psi_on * dt
        self.int_psi_mean += psi_mean * dt
        self.duration += dt
        self.inf_eig_mean = min(self.inf_eig_mean, float(np.linalg.eigvalsh(psi_mean)[0]))

    def extend(self, psi_on, psi_mean, dt: float):
        """Add a stack of samples at once; equivalent to repeated :meth:`add`."""
        if len(psi_on) == 0:
            return
        self.int_psi += psi_on.sum(axis=0) * dt
        self.int_psi_mean += psi_mean.sum(axis=0) * dt
        self.duration += len(psi_on) * dt
        self.inf_eig_mean = min(self.inf_eig_mean, float(np.linalg.eigvalsh(psi_mean)[:, 0].min()))

    def metrics(self) -> tuple[float, float, float]:
        if self.duration == 0:
            return 0.0, 0.0, 0.0
        c1 = float(np.linalg.eigvalsh(self.int_psi)[0])
        c3 = float(np.linalg.eigvalsh(self.int_psi_mean)[0])
        return max(c1, 0.0), max(self.inf_eig_mean, 0.0), max(c3, 0.0)


def excitation_metrics(history: Sequence[tuple], dt: float) -> tuple[float, float, float]:
    """(c1_hat, c2_hat, c3_hat) from a history of samples taken every ``dt``.

    Each sample is ``(omega, rho, omegas, rhos)``: the trajectory pair plus
    the stacked extrapolation pairs.
    """
    history = list(history)
    if not history:
        raise ValueError("empty history")
    b = np.asarray(history[0][0]).size
    tr = ExcitationTracker(b)
    for omega, rho, omegas, rhos in history:
        on = psi(np.asarray(omega, float), rho)[0]
        mean = psi(np.asarray(omegas, float), np.asarray(rhos, float)).mean(axis=0) \
            if len(np.atleast_1d(rhos)) else np.zeros((b, b))
        tr.add(on, mean, dt)
    return tr.metrics()
