"""Fixed-step closed-loop simulation of plant plus learner.

Plant state, critic/actor weights, the least-squares gain, the parameter
estimate, the running cost and the identifier window integrals form one
augmented ODE integrated with classical RK4. Control and multiplier are
recomputed at every RK4 stage. Actor projection, Gamma symmetrization and
history-stack pushes happen between steps.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .actor_critic import Gains, actor_raw, evaluate, project_derivative, project_onto_ball, \
    sample_extrapolation, ExcitationTracker
from .barrier import BarrierFn
from .basis import BasisFn
from .dynamics import SystemModel, drift_eval
from .features import PointFeatures
from .identifier import HistoryEntry, HistoryStack, IdentifierState, excitation_level, \
    normalized_gain, theta_derivative
from .lagrange import SOFTPLUS, MultiplierRule, SoftplusParams

CONTROLLERS = ("acil", "constant_lambda", "naive_lambda", "safe_feasible")
BLF_ABORT = 1e9


class IntegrationError(RuntimeError):
    """Raised when the closed loop produces non-finite values."""


class FeasibilityError(ValueError):
    """Raised when dB^T g vanishes, so no safe input exists at the state."""


class _LeftSafeSet(Exception):
    pass


@dataclass(frozen=True)
class Hyperparams:
    eta_c1: float = 0.1
    eta_c2: float = 1.0
    eta_a1: float = 0.1
    eta_a2: float = 1.0
    nu: float = 5.0
    beta: float = 0.01
    actor_rho_power: int = 1
    k: float = 0.02
    k_sb: float = 0.2
    gamma0: float = 10.0
    wa_bar: float | None = None
    n_points: int = 20
    extrapolation: str = "fixed"
    k_theta: float = 5.0
    id_gain: float = 1.0
    id_gain_mode: str = "normalized"
    id_eps: float = 1e-6
    window: float = 0.5
    capacity: int = 20

    def __post_init__(self):
        if self.actor_rho_power not in (1, 2):
            raise ValueError("actor_rho_power must be 1 or 2")
        if self.n_points < 1:
            raise ValueError("n_points must be at least 1")
        if self.extrapolation not in ("fixed", "resample_each_step"):
            raise ValueError(f"unknown extrapolation policy {self.extrapolation!r}")
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if self.wa_bar is not None and self.wa_bar <= 0:
            raise ValueError("wa_bar must be positive")
        if self.id_gain <= 0:
            raise ValueError("id_gain must be positive")
        if self.id_gain_mode not in ("normalized", "constant"):
            raise ValueError(f"unknown id_gain_mode {self.id_gain_mode!r}")
        if self.id_eps <= 0:
            raise ValueError("id_eps must be positive")

    @property
    def gains(self) -> Gains:
        return Gains(self.eta_c1, self.eta_c2, self.eta_a1, self.eta_a2, self.nu, self.beta)


@dataclass(frozen=True, eq=False)
class Scenario:
    model: SystemModel
    barrier: BarrierFn
    basis: BasisFn
    x0: np.ndarray
    W_a0: np.ndarray
    W_c0: np.ndarray
    box: tuple
    theta0: np.ndarray | None = None
    controller: str = "acil"
    c_b: float = 0.075
    known_theta: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ValueError(f"unknown controller {self.controller!r}; choose from {CONTROLLERS}")
        for name in ("x0", "W_a0", "W_c0"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        if self.x0.size != self.model.n:
            raise ValueError(f"x0 must have {self.model.n} entries")
        for name in ("W_a0", "W_c0"):
            if getattr(self, name).size != self.basis.b:
                raise ValueError(f"{name} must have {self.basis.b} entries")
        th = np.zeros(self.model.p) if self.theta0 is None else np.asarray(self.theta0, float)
        if th.size != self.model.p:
            raise ValueError(f"theta0 must have {self.model.p} entries")
        object.__setattr__(self, "theta0", th.reshape(-1))
        if self.c_b < 0:
            raise ValueError("c_b must be nonnegative")
        if self.basis.n != self.model.n:
            raise ValueError("basis and model state dimensions differ")


@dataclass(frozen=True, eq=False)
class SimConfig:
    scenario: Scenario
    hyperparams: Hyperparams = Hyperparams()
    dt: float = 1e-3
    horizon: float = 20.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.horizon >= self.dt:
            raise ValueError(f"horizon must be at least dt, got {self.horizon}")
        if not self.scenario.barrier.contains(self.scenario.x0):
            raise ValueError(f"x0={self.scenario.x0.tolist()} is not strictly inside the safe set")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class EpisodeLog:
    """Per-step records plus a terminal summary."""

    n: int
    m: int
    b: int
    p: int
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    lam: np.ndarray
    B: np.ndarray
    J: np.ndarray
    cs: np.ndarray
    rbf: np.ndarray
    W_a: np.ndarray
    W_c: np.ndarray
    theta: np.ndarray
    gamma_min: np.ndarray
    id_excitation: np.ndarray
    safe: bool = True
    reason: str = "completed"
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def columns(self) -> list[str]:
        return (["t"] + [f"x{i + 1}" for i in range(self.n)] + [f"u{i + 1}" for i in range(self.m)]
                + ["lambda_hat", "B_f", "J"]
                + [f"Wa{i + 1}" for i in range(self.b)] + [f"Wc{i + 1}" for i in range(self.b)]
                + [f"theta{i + 1}" for i in range(self.p)]
                + ["C_s_hat", "R_bf", "gamma_min", "id_excitation"])

    def table(self) -> np.ndarray:
        return np.column_stack([self.t, self.x, self.u, self.lam, self.B, self.J, self.W_a,
                                self.W_c, self.theta, self.cs, self.rbf, self.gamma_min,
                                self.id_excitation])

    def rows(self, decimation: int = 1) -> np.ndarray:
        """Table rows every ``decimation`` steps; the final row is always kept."""
        if decimation < 1:
            raise ValueError("decimation must be at least 1")
        idx = list(range(0, len(self), decimation))
        if idx[-1] != len(self) - 1:
            idx.append(len(self) - 1)
        return self.table()[idx]

    def to_csv(self, path, decimation: int = 1) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for row in self.rows(decimation):
                w.writerow([repr(float(v)) for v in row])

    def summary(self) -> dict:
        norms = np.linalg.norm(self.x, axis=1)
        B = self.B[np.isfinite(self.B)]
        out = {
            "total_cost": float(self.J[-1]),
            "safe": self.safe,
            "reason": self.reason,
            "final_time": float(self.t[-1]),
            "max_B_f": float(B.max()) if B.size else math.inf,
            "max_norm_x": float(norms.max()),
            "final_norm_x": float(norms[-1]),
            "max_norm_Wa": float(np.linalg.norm(self.W_a, axis=1).max()),
            "min_gamma_eig": float(np.nanmin(self.gamma_min)),
        }
        out.update(self.meta)
        return out


def cost_of(log: EpisodeLog) -> float:
    """Terminal accumulated cost."""
    return float(log.J[-1])


def rk4_step(field: Callable, state: np.ndarray, t: float, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of ``state' = field(t, state)``."""
    k1 = field(t, state)
    k2 = field(t + 0.5 * dt, state + 0.5 * dt * k1)
    k3 = field(t + 0.5 * dt, state + 0.5 * dt * k2)
    k4 = field(t + dt, state + dt * k3)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(out).all():
        raise IntegrationError(f"non-finite state after the step from t={t:.6g}")
    return out


def safe_feasible_control(x, model: SystemModel, b: BarrierFn, theta) -> np.ndarray:
    """u = -[dB^T g]^+ dB^T f(x, theta), which keeps B_f constant."""
    x = np.asarray(x, dtype=float)
    dB = b.gradient(x)
    a = dB @ model.control_matrix(x)
    a2 = a @ a
    if np.sqrt(a2) < 1e-12:
        raise FeasibilityError(f"dB^T g vanishes at x={x.tolist()}")
    return -(a / a2) * (dB @ drift_eval(model, x, theta))


def constant_multiplier(model: SystemModel, c_b: float) -> float:
    """Multiplier matching a constant safeguarding gain c_b = R^-1 lambda."""
    return c_b * float(np.trace(model.R)) / model.m


def _rule_for(sc: Scenario) -> MultiplierRule:
    if sc.controller == "naive_lambda":
        return MultiplierRule("naive")
    if sc.controller == "constant_lambda":
        return MultiplierRule("constant", constant_multiplier(sc.model, sc.c_b))
    return SOFTPLUS


class _Layout:
    def __init__(self, n, b, p):
        sizes = [("x", n), ("Wc", b), ("Wa", b), ("G", b * b), ("th", p), ("J", 1),
                 ("wY", n * p), ("wG", n)]
        off = 0
        for name, size in sizes:
            setattr(self, name, slice(off, off + size))
            off += size
        self.size = off


def run_episode(config: SimConfig) -> EpisodeLog:
    """Integrate the closed loop over the horizon and return the episode log."""
    sc, hp = config.scenario, config.hyperparams
    model, barrier, basis = sc.model, sc.barrier, sc.basis
    n, m, p, b = model.n, model.m, model.p, basis.b
    dt, steps = config.dt, config.steps
    gains = hp.gains
    sp = SoftplusParams.for_model(model, hp.k, hp.k_sb, barrier, sc.box)
    rule = _rule_for(sc)
    N = hp.n_points
    rng = np.random.default_rng(sc.seed)
    extrap = sample_extrapolation(barrier, N, None, sc.box, hp.extrapolation, rng=rng)

    feat = PointFeatures(N + 1, model, basis)
    for i, xi in enumerate(extrap.points, 1):
        feat.set_row(i, xi, model, barrier, basis)
    weights = np.concatenate([[gains.eta_c1], np.full(N, gains.eta_c2 / N)])

    learn_theta = p > 0 and not sc.known_theta
    theta_true = model.theta_true
    ident = IdentifierState(sc.theta0 if not sc.known_theta else theta_true,
                            hp.id_gain * np.eye(p), hp.k_theta)
    stack = HistoryStack(p, hp.capacity, hp.window)
    window_steps = max(int(round(hp.window / dt)), 1)
    wa_bar = hp.wa_bar if hp.wa_bar is not None else 10.0 * (np.linalg.norm(sc.W_a0) or 1.0)

    L = _Layout(n, b, p)
    s = np.zeros(L.size)
    s[L.x] = sc.x0
    s[L.Wc] = sc.W_c0
    s[L.Wa] = project_onto_ball(sc.W_a0, wa_bar)
    s[L.G] = (hp.gamma0 * np.eye(b)).ravel()
    s[L.th] = ident.theta_hat
    R = model.R
    stage = []

    beta, nu = gains.beta, gains.nu
    safe_mode = sc.controller == "safe_feasible"
    rho_first = hp.actor_rho_power == 1
    zeros_p = np.zeros(p)

    def rhs(t, st):
        x = st[L.x]
        if not barrier.contains(x):
            raise _LeftSafeSet
        feat.set_row(0, x, model, barrier, basis, lean=True)
        Wc, Wa, th = st[L.Wc], st[L.Wa], st[L.th]
        G = st[L.G].reshape(b, b)
        ev = evaluate(feat, Wc, Wa, th, G, sp, nu, model, rule)
        u = safe_feasible_control(x, model, barrier, th) if safe_mode else ev.u[0]
        Y0 = feat.Y[0]
        known = feat.f0[0] + feat.g[0] @ u
        rho2 = ev.rho * ev.rho
        c = weights / rho2
        GM = G @ ((ev.omega * c[:, None]).T @ ev.omega)
        out = np.empty_like(st)
        out[L.x] = known + Y0 @ theta_true
        out[L.Wc] = -(G @ ((c * ev.delta) @ ev.omega))
        raw = actor_raw(Wa, Wc, ev.omega, ev.rho if rho_first else rho2, feat.Rs, gains, weights)
        out[L.Wa] = project_derivative(Wa, raw, wa_bar)
        out[L.G] = (beta * G - GM @ G).ravel()
        if learn_theta and stack.entries:
            out[L.th] = ident.k_theta * (ident.gain @ (stack.rhs - stack.normal @ th))
        else:
            out[L.th] = zeros_p
        out[L.J] = feat.Q[0] + 0.5 * (u @ R @ u)
        out[L.wY] = Y0.ravel()
        out[L.wG] = known
        stage.append((ev, u, rho2))
        return out

    K = steps
    log = EpisodeLog(
        n, m, b, p,
        t=np.zeros(K + 1), x=np.zeros((K + 1, n)), u=np.full((K + 1, m), np.nan),
        lam=np.full(K + 1, np.nan), B=np.full(K + 1, np.nan), J=np.zeros(K + 1),
        cs=np.full(K + 1, np.nan), rbf=np.full(K + 1, np.nan), W_a=np.zeros((K + 1, b)),
        W_c=np.zeros((K + 1, b)), theta=np.zeros((K + 1, p)), gamma_min=np.full(K + 1, np.nan),
        id_excitation=np.zeros(K + 1))
    tracker = ExcitationTracker(b)
    gammas = np.zeros((K + 1, b, b))
    psi_on = np.zeros((K, b, b))
    psi_mean = np.zeros((K, b, b))
    theta_err0 = float(np.linalg.norm(theta_true - s[L.th]))

    def record(k, t, st, ev=None, u=None):
        log.t[k] = t
        log.x[k] = st[L.x]
        log.J[k] = st[L.J][0]
        log.W_a[k] = st[L.Wa]
        log.W_c[k] = st[L.Wc]
        log.theta[k] = st[L.th]
        gammas[k] = st[L.G].reshape(b, b)
        log.id_excitation[k] = excitation_level(stack) if p else 0.0
        if ev is not None:
            log.u[k] = u
            log.lam[k] = ev.lam[0]
            log.B[k] = feat.B[0]
            log.cs[k] = ev.cs[0]
            log.rbf[k] = feat.Rbf[0]
        else:
            log.B[k] = barrier.value(st[L.x])

    def track(k, ev, rho2):
        w = ev.omega / np.sqrt(rho2)[:, None]
        psi_on[k] = np.outer(w[0], w[0])
        psi_mean[k] = w[1:].T @ w[1:] / N

    t = 0.0
    window_start = s[L.x].copy()
    last = K
    for k in range(K):
        stage.clear()
        if hp.extrapolation == "resample_each_step" and k > 0:
            pts = sample_extrapolation(barrier, N, None, sc.box, rng=rng).points
            for i, xi in enumerate(pts, 1):
                feat.set_row(i, xi, model, barrier, basis)
        try:
            s_new = rk4_step(rhs, s, t, dt)
        except _LeftSafeSet:
            if stage:
                ev, u, rho2 = stage[0]
                record(k, t, s, ev, u)
            else:
                record(k, t, s)
            log.safe, log.reason, last = False, f"left safe set during step at t={t:.6g}", k
            break
        except IntegrationError as exc:
            raise IntegrationError(f"step {k}: {exc}") from None
        ev, u, rho2 = stage[0]
        record(k, t, s, ev, u)
        track(k, ev, rho2)

        s_new[L.Wa] = project_onto_ball(s_new[L.Wa], wa_bar)
        G = s_new[L.G].reshape(b, b)
        s_new[L.G] = (0.5 * (G + G.T)).ravel()
        s = s_new
        t = (k + 1) * dt

        if (k + 1) % window_steps == 0:
            if learn_theta:
                stack.push(HistoryEntry(s[L.wY].reshape(n, p).copy(), s[L.wG].copy(),
                                        s[L.x] - window_start))
                if hp.id_gain_mode == "normalized":
                    ident.gain = normalized_gain(stack, hp.id_gain, hp.id_eps)
            s[L.wY] = 0.0
            s[L.wG] = 0.0
            window_start = s[L.x].copy()

        x = s[L.x]
        Bv = barrier.value(x) if barrier.contains(x) else math.inf
        if not (Bv < BLF_ABORT):
            record(k + 1, t, s)
            log.safe, last = False, k + 1
            log.reason = f"B_f={Bv:.3g} at t={t:.6g}" if np.isfinite(Bv) else \
                f"left safe set at t={t:.6g}"
            break
    else:
        stage.clear()
        rhs(t, s)
        ev, u, _ = stage[0]
        record(K, t, s, ev, u)

    if last < K:
        for name in ("t", "x", "u", "lam", "B", "J", "cs", "rbf", "W_a", "W_c", "theta",
                     "gamma_min", "id_excitation"):
            setattr(log, name, getattr(log, name)[:last + 1])
    log.gamma_min = np.linalg.eigvalsh(gammas[:last + 1])[:, 0]
    done = min(last, K)
    tracker.extend(psi_on[:done], psi_mean[:done], dt)
    c1, c2, c3 = tracker.metrics()
    log.meta.update({
        "system": model.name,
        "controller": sc.controller,
        "known_theta": sc.known_theta,
        "dt": dt,
        "horizon": config.horizon,
        "W_a_bar": float(wa_bar),
        "varsigma": sp.varsigma,
        "lambda_floor": sp.floor,
        "c1_hat": c1,
        "c2_hat": c2,
        "c3_hat": c3,
        "theta_err_initial": theta_err0,
        "theta_err_final": float(np.linalg.norm(theta_true - log.theta[-1])) if p else 0.0,
        "id_excitation_final": float(log.id_excitation[-1]),
        "extrapolation_points": N,
    })
    return log


def with_overrides(config: SimConfig, **changes) -> SimConfig:
    """Copy of ``config`` with scenario/hyperparameter/SimConfig fields replaced."""
    sc_fields = {k: v for k, v in changes.items() if k in Scenario.__dataclass_fields__}
    hp_fields = {k: v for k, v in changes.items() if k in Hyperparams.__dataclass_fields__}
    top = {k: v for k, v in changes.items() if k in ("dt", "horizon")}
    unknown = set(changes) - set(sc_fields) - set(hp_fields) - set(top)
    if unknown:
        raise KeyError(f"unknown fields {sorted(unknown)}")
    return replace(config, scenario=replace(config.scenario, **sc_fields),
                   hyperparams=replace(config.hyperparams, **hp_fields), **top)
