"""Manufactured solution on (0, 1) with closed-form source terms.

Exact fields: eta = e^{2t} cos(pi x), u = e^t x^2 (x - 1)^2 sin(pi x).
They satisfy u = u_xx = eta_x = 0 at both ends, so the wall conditions hold.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np

from .params import SystemParams

PI = np.pi
MMS_PARAMS = SystemParams(-1.0, 1.0, 1.0)


@dataclass(frozen=True)
class Forcing:
    """Source terms ``s_eta(x, t)`` and ``s_u(x, t)``; ``None`` means zero.

    When a source separates as ``sum_k T_k(t) X_k(x)`` the pairs ``(T_k, X_k)``
    may be supplied in ``eta_terms``/``u_terms`` so that solvers can precompute
    the spatial load vectors once.
    """

    s_eta: Callable | None = None
    s_u: Callable | None = None
    eta_terms: tuple = ()
    u_terms: tuple = ()

    @property
    def is_zero(self) -> bool:
        return self.s_eta is None and self.s_u is None


NO_FORCING = Forcing()


def _poly_derivs(x):
    # P = x^4 - 2x^3 + x^2 and its derivatives
    return [
        x**4 - 2 * x**3 + x**2,
        4 * x**3 - 6 * x**2 + 2 * x,
        12 * x**2 - 12 * x + 2,
        24 * x - 12,
        np.full_like(x, 24.0),
    ]


def _u_derivative(x, t, m):
    x = np.asarray(x, dtype=float)
    P = _poly_derivs(x)
    total = np.zeros_like(x)
    for j in range(min(m, 4) + 1):
        total += comb(m, j) * P[j] * PI ** (m - j) * np.sin(PI * x + (m - j) * PI / 2)
    return np.exp(t) * total


@dataclass(frozen=True)
class ManufacturedSolution:
    params: SystemParams
    x_min: float = 0.0
    x_max: float = 1.0

    def eta(self, x, t):
        return np.exp(2 * t) * np.cos(PI * np.asarray(x, dtype=float))

    def eta_x(self, x, t):
        return -PI * np.exp(2 * t) * np.sin(PI * np.asarray(x, dtype=float))

    def u(self, x, t):
        return _u_derivative(x, t, 0)

    def u_x(self, x, t):
        return _u_derivative(x, t, 1)

    def u_xx(self, x, t):
        return _u_derivative(x, t, 2)

    def s_eta(self, x, t):
        p = self.params
        eta, eta_x = self.eta(x, t), self.eta_x(x, t)
        u, u_x, u_xxx = self.u(x, t), self.u_x(x, t), _u_derivative(x, t, 3)
        # eta_t = 2 eta, eta_xxt = -2 pi^2 eta
        return 2 * eta + u_x + eta_x * u + eta * u_x + p.a * u_xxx + 2 * p.b * PI**2 * eta

    def s_u(self, x, t):
        p = self.params
        u, u_x = self.u(x, t), self.u_x(x, t)
        # u_t = u, u_xxt = u_xx
        return u + self.eta_x(x, t) + u * u_x - p.d * self.u_xx(x, t)

    @property
    def forcing(self) -> Forcing:
        p = self.params
        e1, e2, e3 = (lambda t: np.exp(t)), (lambda t: np.exp(2 * t)), (lambda t: np.exp(3 * t))

        def eta_e1(x):
            return _u_derivative(x, 0, 1) + p.a * _u_derivative(x, 0, 3)

        def eta_e2(x):
            return (2 + 2 * p.b * PI**2) * np.cos(PI * x)

        def eta_e3(x):
            return -PI * np.sin(PI * x) * _u_derivative(x, 0, 0) + np.cos(PI * x) * _u_derivative(x, 0, 1)

        def u_e1(x):
            return _u_derivative(x, 0, 0) - p.d * _u_derivative(x, 0, 2)

        def u_e2(x):
            return -PI * np.sin(PI * x) + _u_derivative(x, 0, 0) * _u_derivative(x, 0, 1)

        return Forcing(
            self.s_eta, self.s_u,
            eta_terms=((e1, eta_e1), (e2, eta_e2), (e3, eta_e3)),
            u_terms=((e1, u_e1), (e2, u_e2)),
        )


def mms_exact_and_forcing(kind: str = "default", params: SystemParams | None = None):
    """Return ``(eta, u, forcing)``; ``eta`` and ``u`` are callables of ``(x, t)``.

    The full object (with derivatives) is available via :func:`manufactured`.
    """
    sol = manufactured(kind, params)
    return sol.eta, sol.u, sol.forcing


def manufactured(kind: str = "default", params: SystemParams | None = None) -> ManufacturedSolution:
    if kind != "default":
        raise ValueError(f"unknown manufactured solution {kind!r}")
    return ManufacturedSolution(params or MMS_PARAMS)
