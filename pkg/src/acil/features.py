"""State-dependent quantities evaluated once per point and reused by the learner.

Everything here depends only on the state, the plant structure, the BLF and
the basis. The learner-dependent algebra (multiplier, control, Bellman error)
operates on stacks of these rows so that the trajectory point and all
extrapolation points are handled in one vectorized pass.
"""
from __future__ import annotations

import math

import numpy as np

from .barrier import BarrierFn
from .basis import BasisFn
from .dynamics import SystemModel

GRAD_ZERO_TOL = 1e-12


class PointFeatures:
    """Row-stacked per-point quantities for ``k`` states.

    Raw fields have shapes ``x (k,n)``, ``f0 (k,n)``, ``Y (k,n,p)``,
    ``g (k,n,m)``, ``RinvgT (k,m,n)``, ``Rg (k,n,n)``, ``phi (k,b)``,
    ``B (k,)``, ``dB_norm (k,)`` and ``Q (k,)``.

    With ``D = [dB; dphi]`` of shape ``(1+b, n)`` the learner algebra reduces
    to two cached products per row:

    * ``H = D [f0 | Y | R_g D^T]`` of shape ``(1+b, 2+p+b)``;
    * ``E = R^-1 g^T D^T`` of shape ``(m, 1+b)``.

    Named views into ``D``, ``H`` and ``E`` give ``dB``, ``dphi``,
    ``a_f0 = dB.f0``, ``a_Y = Y^T dB``, ``Rbf = dB^T R_g dB``,
    ``a_W = dphi R_g dB``, ``P_f0 = dphi f0``, ``P_Y = dphi Y``,
    ``Rs = dphi R_g dphi^T``, ``U_B = R^-1 g^T dB`` and ``U_W = R^-1 g^T dphi^T``.
    """

    __slots__ = ("x", "f0", "Y", "g", "RinvgT", "Rg", "phi", "B", "dB_norm", "Q",
                 "D", "H", "E", "dB", "dphi", "a_f0", "a_Y", "Rbf", "a_W", "P_f0", "P_Y",
                 "Rs", "U_B", "U_W", "_p")

    def __init__(self, k: int, model: SystemModel, basis: BasisFn):
        n, m, p, b = model.n, model.m, model.p, basis.b
        self._p = p
        self.x = np.zeros((k, n))
        self.f0 = np.zeros((k, n))
        self.Y = np.zeros((k, n, p))
        self.g = np.zeros((k, n, m))
        self.RinvgT = np.zeros((k, m, n))
        self.Rg = np.zeros((k, n, n))
        self.phi = np.zeros((k, b))
        self.B = np.zeros(k)
        self.dB_norm = np.zeros(k)
        self.Q = np.zeros(k)
        self.D = np.zeros((k, 1 + b, n))
        self.H = np.zeros((k, 1 + b, 2 + p + b))
        self.E = np.zeros((k, m, 1 + b))
        self.dB = self.D[:, 0]
        self.dphi = self.D[:, 1:]
        self.a_f0 = self.H[:, 0, 0]
        self.a_Y = self.H[:, 0, 1:1 + p]
        self.Rbf = self.H[:, 0, 1 + p]
        self.a_W = self.H[:, 0, 2 + p:]
        self.P_f0 = self.H[:, 1:, 0]
        self.P_Y = self.H[:, 1:, 1:1 + p]
        self.Rs = self.H[:, 1:, 2 + p:]
        self.U_B = self.E[:, :, 0]
        self.U_W = self.E[:, :, 1:]

    def __len__(self):
        return self.x.shape[0]

    def set_row(self, i: int, x, model: SystemModel, barrier: BarrierFn, basis: BasisFn,
                lean: bool = False):
        """Fill row ``i`` for state ``x``.

        ``lean`` skips ``x``, ``RinvgT``, ``Rg`` and ``phi``, which the
        integrator never reads.
        """
        x = np.asarray(x, dtype=float)
        if model.constant_g:
            g, RinvgT, Rg = _const_g(model)
        else:
            g = model.control_matrix(x)
            RinvgT = model.R_inv @ g.T
            Rg = g @ RinvgT
        D = self.D[i]
        D[0] = dB = barrier.gradient(x)
        D[1:] = basis.grad_phi(x)
        Y = model.regressor(x)
        f0 = self.f0[i]
        if model.known_drift is not None:
            f0[:] = model.known_drift(x)
        p = self._p
        H = self.H[i]
        H[:, 0] = D @ f0
        H[:, 1:1 + p] = D @ Y
        H[:, 1 + p:] = D @ (Rg @ D.T)
        self.E[i] = RinvgT @ D.T
        self.Y[i] = Y
        self.g[i] = g
        self.B[i] = barrier.value(x)
        self.dB_norm[i] = math.sqrt(dB @ dB)
        self.Q[i] = model.Q(x)
        if not lean:
            self.x[i] = x
            self.RinvgT[i] = RinvgT
            self.Rg[i] = Rg
            self.phi[i] = basis.phi(x)
        return self


def _const_g(model):
    cache = getattr(model, "_g_cache", None)
    if cache is None:
        g = np.asarray(model.control_matrix(np.zeros(model.n)), dtype=float)
        RinvgT = model.R_inv @ g.T
        cache = (g, RinvgT, g @ RinvgT)
        object.__setattr__(model, "_g_cache", cache)
    return cache


def point_features(points, model: SystemModel, barrier: BarrierFn, basis: BasisFn) -> PointFeatures:
    """Evaluate features at each row of ``points`` (shape ``(k, n)`` or ``(n,)``)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != model.n:
        raise ValueError(f"points must have {model.n} columns, got {pts.shape[1]}")
    feat = PointFeatures(len(pts), model, basis)
    for i, x in enumerate(pts):
        feat.set_row(i, x, model, barrier, basis)
    return feat
