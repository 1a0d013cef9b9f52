"""Modified Galerkin semidiscretization with classical RK4 time stepping.

The semidiscrete system is

    eta_t = f_h[u + eta u + a d2_h u] + A_b^{-1}(s_eta, .)
    u_t   = g_h[eta + u^2 / 2]       + A_d^{-1}(s_u, .)

with ``eta`` in ``S_h`` and ``u`` in ``S_h^0``; ``d2_h`` is the discrete
Laplacian on ``S_h^0``.  Nonlinear products are formed pointwise at the
quadrature nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .assembly import Coefficients, cached_Aq, elliptic_project, l2_project
from .basis import DIRICHLET, FREE, FemSpace, Family, make_grid, make_space
from .errors import NonFiniteStateError, SpaceMismatchError
from .manufactured import NO_FORCING, Forcing
from .params import SystemParams


@dataclass
class State:
    eta: Coefficients
    u: Coefficients
    t: float = 0.0

    def __post_init__(self):
        if not self.eta.space.compatible(self.u.space):
            raise SpaceMismatchError("eta and u must share one grid")
        if self.u.space.bc != DIRICHLET:
            raise SpaceMismatchError("u must live in the Dirichlet space")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.eta.values, self.u.values])

    def with_vector(self, y: np.ndarray, t: float) -> "State":
        n = self.eta.space.dof_count
        return State(Coefficients(self.eta.space, y[:n]), Coefficients(self.u.space, y[n:]), t)


def make_spaces(x_min: float, x_max: float, N: int, family) -> tuple[FemSpace, FemSpace]:
    grid = make_grid(x_min, x_max, N)
    fam = Family.parse(family)
    return make_space(grid, fam, FREE), make_space(grid, fam, DIRICHLET)


def zero_state(space_eta: FemSpace, space_u: FemSpace, t: float = 0.0) -> State:
    return State(
        Coefficients(space_eta, np.zeros(space_eta.dof_count)),
        Coefficients(space_u, np.zeros(space_u.dof_count)),
        t,
    )


def initial_state(space_eta, space_u, params: SystemParams, eta0, eta0_x, u0, u0_x, t0: float = 0.0) -> State:
    """Initial data through the elliptic projections ``R_h`` (form ``A_b``) and ``R_h^0`` (form ``A_d``)."""
    if params.b > 0:
        eta = elliptic_project(space_eta, params.b, eta0, eta0_x)
    else:
        eta = l2_project(space_eta, eta0)
    u = elliptic_project(space_u, params.d, u0, u0_x)
    return State(eta, u, t0)


class GalerkinSystem:
    """Right-hand side of the semidiscrete system on a fixed pair of spaces."""

    def __init__(self, space_eta: FemSpace, space_u: FemSpace, params: SystemParams,
                 forcing: Forcing = NO_FORCING, linear: bool = False):
        if not space_eta.compatible(space_u) or space_eta.family != space_u.family:
            raise SpaceMismatchError("eta and u spaces must share grid and family")
        self.space_eta = space_eta
        self.space_u = space_u
        self.params = params
        self.forcing = forcing
        self.linear = linear
        self.Ab = cached_Aq(space_eta, params.b)
        self.Ad = cached_Aq(space_u, params.d)
        self.M0 = cached_Aq(space_u, 0.0)
        self.n_eta = space_eta.dof_count
        Ve, De = space_eta.value_matrix, space_eta.derivative_matrix
        Vu, Du = space_u.value_matrix, space_u.derivative_matrix
        w = space_eta.weights_flat
        self._Ve, self._Vu, self._Du = Ve, Vu, Du
        self._DeTW = (De.T.multiply(w)).tocsr()
        self._DuTW = (Du.T.multiply(w)).tocsr()
        self._VeTW = (Ve.T.multiply(w)).tocsr()
        self._VuTW = (Vu.T.multiply(w)).tocsr()
        self._x = space_eta.qp_x.ravel()
        x = self._x
        self._eta_loads = [(T, self._VeTW @ X(x)) for T, X in forcing.eta_terms]
        self._u_loads = [(T, self._VuTW @ X(x)) for T, X in forcing.u_terms]

    def check_state(self, state: State) -> None:
        if state.eta.space is not self.space_eta and not (
            state.eta.space.compatible(self.space_eta) and state.eta.space.family == self.space_eta.family
            and state.eta.space.bc == self.space_eta.bc
        ):
            raise SpaceMismatchError("state does not live on the system's spaces")

    def laplacian(self, u_vals: np.ndarray) -> np.ndarray:
        return self.M0.solve(-(self._DuTW @ (self._Du @ u_vals)))

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        n = self.n_eta
        eta_c, u_c = y[:n], y[n:]
        eta_q = self._Ve @ eta_c
        u_q = self._Vu @ u_c
        lap_q = self._Vu @ self.laplacian(u_c)
        if self.linear:
            w_eta = u_q + self.params.a * lap_q
            w_u = eta_q
        else:
            w_eta = u_q + eta_q * u_q + self.params.a * lap_q
            w_u = eta_q + 0.5 * u_q**2
        rhs_eta = self._DeTW @ w_eta
        rhs_u = self._DuTW @ w_u
        f = self.forcing
        if self._eta_loads:
            rhs_eta = rhs_eta + sum(T(t) * v for T, v in self._eta_loads)
        elif f.s_eta is not None:
            rhs_eta = rhs_eta + self._VeTW @ f.s_eta(self._x, t)
        if self._u_loads:
            rhs_u = rhs_u + sum(T(t) * v for T, v in self._u_loads)
        elif f.s_u is not None:
            rhs_u = rhs_u + self._VuTW @ f.s_u(self._x, t)
        return np.concatenate([self.Ab.solve(rhs_eta), self.Ad.solve(rhs_u)])

    def rhs(self, state: State) -> tuple[np.ndarray, np.ndarray]:
        self.check_state(state)
        dy = self(state.t, state.vector)
        return dy[: self.n_eta], dy[self.n_eta:]


def semidiscrete_rhs(state: State, params: SystemParams, forcing: Forcing = NO_FORCING,
                     linear: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives of the eta and u coefficient vectors."""
    system = GalerkinSystem(state.eta.space, state.u.space, params, forcing, linear)
    return system.rhs(state)


def rk4_array(f: Callable, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    y_new = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(y_new)):
        raise NonFiniteStateError(f"non-finite coefficients at t={t + dt}")
    return y_new


def rk4_step(state, dt: float, rhs: Callable):
    """One classical RK4 step.

    ``state`` is a :class:`State` (``rhs(t, y)`` acts on the stacked coefficient
    vector) or a plain array paired with time zero.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if isinstance(state, State):
        return state.with_vector(rk4_array(rhs, state.t, state.vector, dt), state.t + dt)
    return rk4_array(rhs, 0.0, np.asarray(state, dtype=float), dt)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    samples: dict = field(default_factory=dict)


def evolve(state0: State, T: float, dt: float, system: GalerkinSystem,
           observers: dict | None = None, sample_times: Iterable[float] | None = None,
           on_step: Callable | None = None) -> tuple[State, Trajectory]:
    """March from ``state0.t`` to ``T`` with fixed steps of ``dt``; the last step
    before each sample time (and ``T``) is shortened to land on it exactly.

    ``observers`` maps names to callables of a :class:`State`; they are recorded at
    the start, at every sample time and at ``T``.  ``on_step(t, y)`` sees every step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    observers = observers or {}
    traj = Trajectory(samples={k: [] for k in observers})

    def record(st):
        traj.times.append(st.t)
        for name, obs in observers.items():
            traj.samples[name].append(obs(st))

    record(state0)
    if T <= state0.t:
        return state0, traj
    stops = sorted({float(s) for s in (() if sample_times is None else sample_times) if state0.t < s < T} | {float(T)})
    t, y = state0.t, state0.vector
    for stop in stops:
        while t < stop:
            h = stop - t if stop - t <= dt * (1 + 1e-9) else dt
            y = rk4_array(system, t, y, h)
            t = stop if h == stop - t else t + h
            if on_step is not None:
                on_step(t, y)
        record(state0.with_vector(y, t))
    return state0.with_vector(y, t), traj


def mass(state: State) -> tuple[float, float]:
    """Integrals of eta and u."""
    w = state.eta.space.weights_flat
    return float(w @ state.eta.at_quadrature()), float(w @ state.u.at_quadrature())


def energy(state: State, params: SystemParams) -> float:
    """E = 1/2 int [eta^2 + (1 + eps eta) u^2 - eps a u_x^2] dx."""
    w = state.eta.space.weights_flat
    eta = state.eta.at_quadrature()
    u = state.u.at_quadrature()
    ux = state.u.derivative_at_quadrature()
    eps = params.epsilon
    return 0.5 * float(w @ (eta**2 + (1 + eps * eta) * u**2 - eps * params.a * ux**2))


def eval_solution(state: State, points, derivative: int = 0) -> tuple[np.ndarray, np.ndarray]:
    if derivative not in (0, 1):
        raise ValueError("derivative order must be 0 or 1")
    return state.eta(points, derivative), state.u(points, derivative)


def save_state(path, state: State, params: SystemParams | None = None) -> None:
    g = state.eta.space.grid
    doc = {
        "grid": {"x_min": g.x_min, "x_max": g.x_max, "N": g.N},
        "family": state.eta.space.family.label,
        "bc": {"eta": state.eta.space.bc, "u": state.u.space.bc},
        "t": state.t,
        "params": params.to_dict() if params else None,
        "eta": [float(v) for v in state.eta.values],
        "u": [float(v) for v in state.u.values],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_state(path) -> tuple[State, SystemParams | None]:
    with open(path) as fh:
        doc = json.load(fh)
    g = doc["grid"]
    se, su = make_spaces(g["x_min"], g["x_max"], g["N"], doc["family"])
    params = SystemParams(**doc["params"]) if doc.get("params") else None
    st = State(Coefficients(se, np.array(doc["eta"])), Coefficients(su, np.array(doc["u"])), doc["t"])
    return st, params
