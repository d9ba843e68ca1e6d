"""Softplus machinery and the Lagrange multiplier estimates.

Three multipliers are provided:

* ``lambda_hat``   smooth estimate sigma(C_s / (R_bf + k_sb)) + k * varsigma,
                   strictly positive everywhere;
* ``lambda_naive`` max(C_s / R_bf, 0) with the learner's estimates plugged in;
* ``lambda_star_oracle`` the same expression with the true drift and the true
                   value-function gradient (only available on test systems).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import expit

from .barrier import BarrierFn
from .basis import BasisFn
from .dynamics import SystemModel, drift_eval
from .features import GRAD_ZERO_TOL, PointFeatures, point_features

LN2 = np.log(2.0)


def softplus(z, k: float):
    """Return (sigma, sigma', sigma'') of k*ln(1 + exp(z/k)).

    Works on scalars and arrays; ``logaddexp`` keeps large z/k from overflowing.
    """
    if k <= 0:
        raise ValueError("softplus gain k must be positive")
    s = np.asarray(z, dtype=float) / k
    sigma = k * np.logaddexp(0.0, s)
    d1 = expit(s)
    d2 = d1 * (1.0 - d1) / k
    if np.ndim(sigma) == 0:
        return float(sigma), float(d1), float(d2)
    return sigma, d1, d2


def input_metric_bounds(model: SystemModel, barrier: BarrierFn | None = None,
                        box=None, grid: int = 41, margin: float = 0.1) -> tuple[float, float]:
    """Bounds (l_g, Rg_bar) on the nonzero spectrum of R_g(x) = g R^-1 g^T.

    For a constant g the bounds are exact. Otherwise R_g is sampled on a grid
    over ``box`` restricted to the safe set, and the bounds are widened by
    ``margin``. Only nonzero eigenvalues count: when m < n, R_g is singular
    and its null directions cannot be acted on by any input.
    """

    def spectrum(x):
        g = model.control_matrix(x)
        ev = np.linalg.eigvalsh(g @ model.R_inv @ g.T)
        return ev[ev > 1e-12 * max(ev.max(), 1e-300)]

    if model.constant_g:
        ev = spectrum(np.zeros(model.n))
        return float(ev.min()), float(ev.max())
    if box is None:
        raise ValueError("a bounding box is needed to sample a state-dependent g(x)")
    low, high = (np.asarray(v, dtype=float) for v in box)
    axes = [np.linspace(lo, hi, grid) for lo, hi in zip(low, high)]
    lo_ev, hi_ev = np.inf, 0.0
    for pt in np.stack(np.meshgrid(*axes), axis=-1).reshape(-1, model.n):
        if barrier is not None and not barrier.contains(pt):
            continue
        ev = spectrum(pt)
        lo_ev, hi_ev = min(lo_ev, ev.min()), max(hi_ev, ev.max())
    if not np.isfinite(lo_ev):
        raise RuntimeError("no safe grid points to bound R_g")
    return float(lo_ev * (1 - margin)), float(hi_ev * (1 + margin))


@dataclass(frozen=True)
class SoftplusParams:
    k: float = 0.02
    k_sb: float = 0.2
    l_g: float = 1.0
    Rg_bar: float = 1.0

    def __post_init__(self):
        for name in ("k", "k_sb", "l_g", "Rg_bar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.l_g > self.Rg_bar:
            raise ValueError("l_g cannot exceed Rg_bar")

    @property
    def varsigma(self) -> float:
        return 2.0 * LN2 * self.Rg_bar / self.l_g + 1.0

    @property
    def floor(self) -> float:
        """Asymptotic lower value k * varsigma of the smooth multiplier."""
        return self.k * self.varsigma

    @classmethod
    def for_model(cls, model: SystemModel, k: float = 0.02, k_sb: float = 0.2,
                  barrier: BarrierFn | None = None, box=None) -> "SoftplusParams":
        l_g, Rg_bar = input_metric_bounds(model, barrier, box)
        return cls(k=k, k_sb=k_sb, l_g=l_g, Rg_bar=Rg_bar)


@dataclass(frozen=True)
class LagrangeDiagnostics:
    c_s_hat: float
    r_bf: float
    lam: float
    mode: str


@dataclass(frozen=True)
class MultiplierRule:
    """Which multiplier the controller and the Bellman error use.

    ``softplus`` is the smooth estimate, ``naive`` the max-based one,
    ``constant`` a fixed value (also used to switch the safeguard off).
    """

    mode: Literal["softplus", "naive", "constant"] = "softplus"
    value: float = 0.0

    def __post_init__(self):
        if self.mode not in ("softplus", "naive", "constant"):
            raise ValueError(f"unknown multiplier mode {self.mode!r}")
        if self.mode == "constant" and self.value < 0:
            raise ValueError("a constant multiplier must be nonnegative")


SOFTPLUS = MultiplierRule("softplus")


def c_s_batch(feat: PointFeatures, W_a, theta):
    """C_s estimate on every row: dB^T f_hat - dB^T R_g dphi^T W_a."""
    return feat.a_f0 + feat.a_Y @ theta - feat.a_W @ W_a


def multiplier_batch(cs, feat: PointFeatures, rule: MultiplierRule, sp: SoftplusParams):
    if rule.mode == "softplus":
        return sp.k * np.logaddexp(0.0, cs / ((feat.Rbf + sp.k_sb) * sp.k)) + sp.floor
    if rule.mode == "naive":
        ok = feat.dB_norm >= GRAD_ZERO_TOL
        ratio = np.divide(cs, feat.Rbf, out=np.zeros_like(cs), where=ok & (feat.Rbf > 0))
        return np.where(ok, np.maximum(ratio, 0.0), 0.0)
    return np.full_like(cs, rule.value)


def _single(x, model, barrier, basis) -> PointFeatures:
    return point_features(np.asarray(x, dtype=float).reshape(1, -1), model, barrier, basis)


def r_bf(x, model: SystemModel, b: BarrierFn) -> float:
    """dB^T g R^-1 g^T dB at ``x``."""
    x = np.asarray(x, dtype=float)
    dB = b.gradient(x)
    g = model.control_matrix(x)
    return float(dB @ g @ model.R_inv @ g.T @ dB)


def c_s_hat(x, W_a_hat, theta_hat, model: SystemModel, b: BarrierFn, basis: BasisFn) -> float:
    feat = _single(x, model, b, basis)
    return float(c_s_batch(feat, np.asarray(W_a_hat, float), np.asarray(theta_hat, float))[0])


def lambda_hat(x, W_a_hat, theta_hat, sp: SoftplusParams, model: SystemModel,
               b: BarrierFn, basis: BasisFn) -> tuple[float, LagrangeDiagnostics]:
    """Smooth multiplier estimate and its diagnostics."""
    feat = _single(x, model, b, basis)
    cs = c_s_batch(feat, np.asarray(W_a_hat, float), np.asarray(theta_hat, float))
    lam = float(multiplier_batch(cs, feat, SOFTPLUS, sp)[0])
    return lam, LagrangeDiagnostics(float(cs[0]), float(feat.Rbf[0]), lam, "softplus")


def lambda_naive(x, W_a_hat, theta_hat, model: SystemModel, b: BarrierFn,
                 basis: BasisFn) -> float:
    feat = _single(x, model, b, basis)
    cs = c_s_batch(feat, np.asarray(W_a_hat, float), np.asarray(theta_hat, float))
    return float(multiplier_batch(cs, feat, MultiplierRule("naive"), None)[0])


def c_s_star(x, grad_L_star, theta_true, model: SystemModel, b: BarrierFn) -> float:
    """dB^T f(x, theta) - dB^T R_g grad L*, using the true quantities."""
    x = np.asarray(x, dtype=float)
    dB = b.gradient(x)
    g = model.control_matrix(x)
    Rg = g @ model.R_inv @ g.T
    return float(dB @ drift_eval(model, x, theta_true) - dB @ Rg @ np.asarray(grad_L_star, float))


def lambda_star_oracle(x, grad_L_star, theta_true, model: SystemModel, b: BarrierFn) -> float:
    """Optimal multiplier given the true value-function gradient."""
    x = np.asarray(x, dtype=float)
    dB = b.gradient(x)
    if np.linalg.norm(dB) < GRAD_ZERO_TOL:
        return 0.0
    rbf = r_bf(x, model, b)
    if rbf <= 0:
        return 0.0
    return max(c_s_star(x, grad_L_star, theta_true, model, b) / rbf, 0.0)


def optimal_control(x, grad_L_star, lam, model: SystemModel, b: BarrierFn) -> np.ndarray:
    """u* = -R^-1 g^T (grad L* + lambda dB)."""
    x = np.asarray(x, dtype=float)
    g = model.control_matrix(x)
    return -model.R_inv @ g.T @ (np.asarray(grad_L_star, float) + lam * b.gradient(x))
