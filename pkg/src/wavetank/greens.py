"""Green's-function operators and a Picard fixed-point solver for the regularized system.

On (-L, L) the operators

    L_N f = (I - b d_xx)^{-1}(-f_x)   with w_x(+-L) = 0,
    L_D f = (I - d d_xx)^{-1}(-f_x)   with w(+-L) = 0,

are realized as integrals against the xi-derivative of the Green's function.
Sampled data are interpolated by a cubic spline and the integrals are done
with Gauss-Legendre nodes on every grid cell, so the kink of the kernel at
xi = x always falls on a cell boundary.

The evolution is recast as

    eta = eta0 + int_0^t [L_N((a + b)/b u + eta u) + (a/b) u_x] dtau
    u   = u0   + int_0^t  L_D(eta + u^2/2) dtau

and iterated to a fixed point on a space-time grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .errors import InvalidParameterError, MaxIterExceededError, NoContractionError
from .params import SystemParams

NEUMANN = "neumann"
DIRICHLET = "dirichlet"


def _ch(z):
    # cosh(z) = e^z * _ch(z) / 2
    return 1.0 + np.exp(-2.0 * z)


def _sh(z):
    # sinh(z) = e^z * _sh(z) / 2
    return -np.expm1(-2.0 * z)


@dataclass(frozen=True)
class GreensKernel:
    kind: str
    coefficient: float
    L: float

    def __post_init__(self):
        if self.kind not in (NEUMANN, DIRICHLET):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.coefficient <= 0:
            raise InvalidParameterError("the integral formulation needs a positive coefficient")
        if self.L <= 0:
            raise InvalidParameterError("L must be positive")

    @property
    def s(self) -> float:
        return 1.0 / np.sqrt(self.coefficient)

    @property
    def wronskian(self) -> float:
        return -self.s * np.sinh(2 * self.L * self.s)

    def omega1(self, x):
        z = self.s * (self.L + np.asarray(x, dtype=float))
        return np.cosh(z) if self.kind == NEUMANN else np.sinh(z)

    def omega2(self, x):
        z = self.s * (self.L - np.asarray(x, dtype=float))
        return np.cosh(z) if self.kind == NEUMANN else np.sinh(z)

    def green(self, x, xi):
        """G(x, xi) = -1/(c W) * omega1(min) omega2(max), evaluated without overflow."""
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        s, L = self.s, self.L
        lo, hi = np.minimum(x, xi), np.maximum(x, xi)
        A, B, C = s * (L + lo), s * (L - hi), 2 * s * L
        f = _ch if self.kind == NEUMANN else _sh
        return s * np.exp(A + B - C) * f(A) * f(B) / (2.0 * _sh(C))

    def green_xi(self, x, xi):
        """Partial derivative of the Green's function with respect to ``xi``."""
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        s, L = self.s, self.L
        C = 2 * s * L
        below = xi <= x
        A = np.where(below, s * (L + xi), s * (L + x))
        B = np.where(below, s * (L - x), s * (L - xi))
        pre = s * s * np.exp(A + B - C) / (2.0 * _sh(C))
        if self.kind == NEUMANN:
            val = np.where(below, _sh(A) * _ch(B), -_ch(A) * _sh(B))
        else:
            val = np.where(below, _ch(A) * _sh(B), -_sh(A) * _ch(B))
        return pre * val


class GridOperators:
    """Dense matrices for L_N, L_D and d/dx acting on samples at ``M`` uniform points."""

    def __init__(self, L: float, M: int, b: float, d: float, gauss_nodes: int = 8):
        if M < 4:
            raise ValueError("need at least 4 grid points")
        self.L, self.M = float(L), int(M)
        self.x = np.linspace(-L, L, M)
        self.kernel_N = GreensKernel(NEUMANN, b, L)
        self.kernel_D = GreensKernel(DIRICHLET, d, L)
        spline = CubicSpline(self.x, np.eye(M))
        gx, gw = np.polynomial.legendre.leggauss(gauss_nodes)
        left, hcell = self.x[:-1], np.diff(self.x)
        xi = (left[:, None] + 0.5 * hcell[:, None] * (gx[None, :] + 1)).ravel()
        wq = (0.5 * hcell[:, None] * gw[None, :]).ravel()
        basis = spline(xi)  # (nq, M): cardinal splines at the quadrature nodes
        self.LN = self._operator(self.kernel_N, xi, wq, basis)
        self.LD = self._operator(self.kernel_D, xi, wq, basis)
        self.DX = spline.derivative()(self.x)

    def _operator(self, kernel, xi, wq, basis):
        K = kernel.green_xi(self.x[:, None], xi[None, :]) * wq[None, :]
        return K @ basis

    def apply_LN(self, f):
        return self.LN @ np.asarray(f, dtype=float)

    def apply_LD(self, f):
        return self.LD @ np.asarray(f, dtype=float)

    def dx(self, f):
        return self.DX @ np.asarray(f, dtype=float)


def apply_LN(f, kernel: GreensKernel, M: int | None = None):
    """L_N applied to samples ``f`` at ``len(f)`` uniform points on [-L, L]."""
    f = np.asarray(f, dtype=float)
    ops = GridOperators(kernel.L, M or f.size, kernel.coefficient, 1.0)
    return ops.apply_LN(f)


def apply_LD(f, kernel: GreensKernel, M: int | None = None):
    f = np.asarray(f, dtype=float)
    ops = GridOperators(kernel.L, M or f.size, 1.0, kernel.coefficient)
    return ops.apply_LD(f)


@dataclass
class PicardResult:
    x: np.ndarray
    times: np.ndarray
    eta: np.ndarray
    u: np.ndarray
    T: float
    iterations: int
    differences: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    halvings: int = 0


def _gamma(ops: GridOperators, params: SystemParams, eta0, u0, times, eta, u):
    a, b = params.a, params.b
    coef = (a + b) / b
    f_eta = (ops.LN @ (coef * u + eta * u).T).T + (a / b) * (ops.DX @ u.T).T
    f_u = (ops.LD @ (eta + 0.5 * u**2).T).T
    new_eta = eta0 + cumulative_trapezoid(f_eta, times, axis=0, initial=0.0)
    new_u = u0 + cumulative_trapezoid(f_u, times, axis=0, initial=0.0)
    return new_eta, new_u


def _iterate(ops, params, eta0, u0, T, time_steps, max_iter, tol, eta_init=None, u_init=None):
    times = np.linspace(0.0, T, time_steps + 1)
    eta = np.tile(eta0, (times.size, 1)) if eta_init is None else np.array(eta_init, dtype=float)
    u = np.tile(u0, (times.size, 1)) if u_init is None else np.array(u_init, dtype=float)
    diffs, ratios = [], []
    scale = 1.0 + max(np.max(np.abs(eta0)), np.max(np.abs(u0)))
    rises = 0
    for it in range(1, max_iter + 1):
        new_eta, new_u = _gamma(ops, params, eta0, u0, times, eta, u)
        diff = max(np.max(np.abs(new_eta - eta)), np.max(np.abs(new_u - u)))
        eta, u = new_eta, new_u
        if diffs and diffs[-1] > 1e3 * np.finfo(float).eps * scale:
            ratios.append(diff / diffs[-1])
            rises = rises + 1 if diff >= diffs[-1] else 0
            if rises >= 3:
                raise NoContractionError(f"successive differences grew for 3 iterations at T={T}")
        diffs.append(diff)
        if diff <= tol:
            return PicardResult(ops.x, times, eta, u, T, it, diffs, ratios)
    raise MaxIterExceededError(f"no fixed point within {max_iter} iterations (last difference {diffs[-1]:.3e})")


def picard_solve(eta0, u0, T: float, time_steps: int, params: SystemParams, L: float,
                 max_iter: int = 200, tol: float = 1e-12, auto_halve: bool = True,
                 target_ratio: float = 0.8, max_halvings: int = 20, ops: GridOperators | None = None,
                 eta_init=None, u_init=None) -> PicardResult:
    """Fixed point of the discretized map on ``len(eta0)`` uniform points of [-L, L].

    With ``auto_halve`` the horizon ``T`` is halved until the observed contraction
    ratio stays at or below ``target_ratio``; ``time_steps`` is kept, so the time
    grid refines with every halving.
    """
    if params.b <= 0:
        raise InvalidParameterError("the integral formulation requires b > 0")
    eta0 = np.asarray(eta0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    if max(abs(u0[0]), abs(u0[-1])) > 1e-12:
        raise InvalidParameterError("u0 must vanish at both ends")
    if ops is None:
        ops = GridOperators(L, eta0.size, params.b, params.d)
    halvings = 0
    while True:
        try:
            res = _iterate(ops, params, eta0, u0, T, time_steps, max_iter, tol, eta_init, u_init)
            ok = not res.ratios or max(res.ratios) <= target_ratio
        except (NoContractionError, MaxIterExceededError):
            if not auto_halve or halvings >= max_halvings:
                raise
            ok, res = False, None
        if ok or not auto_halve:
            if res is None:
                raise NoContractionError("no contraction")
            res.halvings = halvings
            return res
        if halvings >= max_halvings:
            raise NoContractionError(f"contraction ratio above {target_ratio} after {halvings} halvings")
        T *= 0.5
        halvings += 1
        eta_init = u_init = None
