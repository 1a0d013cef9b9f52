"""Solitary-wave profiles on a periodic box [-l, l] by pseudo-spectral collocation.

Travelling waves eta(x - c t), u(x - c t) of the Nwogu-type system satisfy,
after one integration with decay at infinity,

    -c eta + u + eta u + a u'' + b c eta'' = 0
    -c u + eta + u^2 / 2 + c d u'' = 0.

Nwogu-family waves are computed by Levenberg-Marquardt on these residuals with
the amplitude fixed by eta(0) = A and the speed as an extra unknown.  For the
BBM-BBM system (a = 0) the Petviashvili iteration is used at a given speed.
Profiles are even, so the unknowns are the values on [0, l].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .errors import InvalidParameterError, NoConvergenceError, SupportOverflowError
from .params import SystemParams


@dataclass
class SolitaryWave:
    c_s: float
    A: float
    ell: float
    M: int
    eta: np.ndarray
    u: np.ndarray
    params: SystemParams
    residual_norm: float = np.inf
    iterations: int = 0
    history: list = field(default_factory=list)

    @property
    def x(self) -> np.ndarray:
        return periodic_grid(self.ell, self.M)

    @property
    def fourier_eta(self) -> np.ndarray:
        return np.fft.fft(self.eta)

    @property
    def fourier_u(self) -> np.ndarray:
        return np.fft.fft(self.u)

    def evaluate(self, x, shift: float = 0.0, derivative: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Trigonometric interpolant of (eta, u) at ``x - shift``; zero outside the box."""
        x = np.asarray(x, dtype=float) - shift
        inside = np.abs(x) <= self.ell
        xi = wavenumbers(self.ell, self.M)
        out = []
        for coef in (self.fourier_eta, self.fourier_u):
            c = coef * (1j * xi) ** derivative
            if self.M % 2 == 0:
                c = c.copy()
                c[self.M // 2] = 0.0 if derivative else c[self.M // 2]
            vals = np.empty(x.shape)
            flat, vflat = (x + self.ell).ravel(), vals.reshape(-1)
            for s in range(0, flat.size, 2048):
                vflat[s:s + 2048] = (np.exp(1j * np.outer(flat[s:s + 2048], xi)) @ c).real / self.M
            out.append(np.where(inside, vals, 0.0))
        return out[0], out[1]

    def to_dict(self) -> dict:
        return {
            "c_s": self.c_s, "A": self.A, "ell": self.ell, "M": self.M,
            "params": self.params.to_dict(), "residual_norm": self.residual_norm,
            "eta": [float(v) for v in self.eta], "u": [float(v) for v in self.u],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SolitaryWave":
        return cls(doc["c_s"], doc["A"], doc["ell"], doc["M"], np.array(doc["eta"]), np.array(doc["u"]),
                   SystemParams(**doc["params"]), doc.get("residual_norm", np.inf))


def save_wave(path, wave: SolitaryWave) -> None:
    with open(path, "w") as fh:
        json.dump(wave.to_dict(), fh)


def load_wave(path) -> SolitaryWave:
    with open(path) as fh:
        return SolitaryWave.from_dict(json.load(fh))


def periodic_grid(ell: float, M: int) -> np.ndarray:
    return -ell + 2 * ell * np.arange(M) / M


def wavenumbers(ell: float, M: int) -> np.ndarray:
    return np.pi / ell * np.fft.fftfreq(M, 1.0 / M)


def spectral_d2(v: np.ndarray, ell: float) -> np.ndarray:
    xi = wavenumbers(ell, v.size)
    return np.fft.ifft(-(xi**2) * np.fft.fft(v)).real


def d2_matrix(ell: float, M: int) -> np.ndarray:
    """Dense Fourier second-derivative matrix on the periodic grid."""
    return np.column_stack([spectral_d2(e, ell) for e in np.eye(M)])


def traveling_residual(wave: SolitaryWave, params: SystemParams | None = None) -> np.ndarray:
    """Stacked residuals of both travelling-wave equations at the collocation points."""
    p = params or wave.params
    eta, u, c = wave.eta, wave.u, wave.c_s
    r1 = -c * eta + u + eta * u + p.a * spectral_d2(u, wave.ell) + p.b * c * spectral_d2(eta, wave.ell)
    r2 = -c * u + eta + 0.5 * u**2 + c * p.d * spectral_d2(u, wave.ell)
    return np.concatenate([r1, r2])


def residual_jacobian(eta, u, c, params: SystemParams, D2: np.ndarray) -> np.ndarray:
    """Jacobian of the stacked residual with respect to (eta, u, c)."""
    M = eta.size
    I = np.eye(M)
    J = np.zeros((2 * M, 2 * M + 1))
    J[:M, :M] = np.diag(u - c) + params.b * c * D2
    J[:M, M:2 * M] = I + np.diag(eta) + params.a * D2
    J[:M, 2 * M] = -eta + params.b * (D2 @ eta)
    J[M:, :M] = I
    J[M:, M:2 * M] = np.diag(u - c) + c * params.d * D2
    J[M:, 2 * M] = -u + params.d * (D2 @ u)
    return J


class _Mirror:
    """Even extension from the values on [0, l] to the full periodic grid."""

    def __init__(self, M: int):
        if M % 2:
            raise ValueError("M must be even")
        half = np.r_[np.arange(M // 2, M), 0]
        self.half = half
        pos = {j: i for i, j in enumerate(half)}
        self.index = np.array([pos.get(j, pos.get((M - j) % M)) for j in range(M)])
        self.S = np.zeros((M, half.size))
        self.S[np.arange(M), self.index] = 1.0

    def full(self, v):
        return v[self.index]


def _initial_guess(A: float, params: SystemParams, x: np.ndarray):
    disp = 0.5 * (params.a + params.b + params.d)
    kappa = np.sqrt(A / (8 * max(disp, 1e-3)))
    c = 1 + A / 2
    eta = A / np.cosh(kappa * x) ** 2
    u = c * eta / (1 + eta)
    return eta, u, c


def solve_solitary_nwogu(A: float, params: SystemParams, ell: float = 50.0, M: int = 1024,
                         tol: float = 1e-12, max_iter: int = 100, initial: SolitaryWave | None = None) -> SolitaryWave:
    """Levenberg-Marquardt solution of the collocated travelling-wave equations with eta(0) = A."""
    if not 0 < A <= 0.8:
        raise InvalidParameterError(f"amplitude must lie in (0, 0.8], got {A}")
    if params.b < 0 or params.d <= 0 or params.a > 0:
        raise InvalidParameterError("parameters outside the Nwogu family")
    x = periodic_grid(ell, M)
    mirror = _Mirror(M)
    D2 = d2_matrix(ell, M)
    S = mirror.S
    nh = S.shape[1]
    centre = 0  # x = 0 is the first entry of the half grid
    if initial is not None and initial.M == M and initial.ell == ell:
        scale = A / initial.A
        eta, u, c = initial.eta * scale, initial.u * scale, 1 + (initial.c_s - 1) * scale
    else:
        eta, u, c = _initial_guess(A, params, x)
    z = np.r_[eta[mirror.half], u[mirror.half], c]

    def unpack(z):
        return mirror.full(z[:nh]), mirror.full(z[nh:2 * nh]), z[-1]

    def residual(z):
        eta, u, c = unpack(z)
        r = traveling_residual(SolitaryWave(c, A, ell, M, eta, u, params))
        r1, r2 = r[:M][mirror.half], r[M:][mirror.half]
        return np.r_[r1, r2, z[centre] - A]

    def jacobian(z):
        eta, u, c = unpack(z)
        Jf = residual_jacobian(eta, u, c, params, D2)
        rows = np.r_[mirror.half, M + mirror.half]
        Jr = Jf[rows]
        J = np.zeros((2 * nh + 1, 2 * nh + 1))
        J[:2 * nh, :nh] = Jr[:, :M] @ S
        J[:2 * nh, nh:2 * nh] = Jr[:, M:2 * M] @ S
        J[:2 * nh, -1] = Jr[:, -1]
        J[-1, centre] = 1.0
        return J

    lam = 1e-3
    r = residual(z)
    cost = r @ r
    history = [float(np.max(np.abs(r)))]
    for it in range(1, max_iter + 1):
        J = jacobian(z)
        JTJ = J.T @ J
        g = J.T @ r
        diag = np.diag(JTJ).copy()
        accepted = False
        for _ in range(30):
            try:
                step = -sla.solve(JTJ + lam * np.diag(diag), g, assume_a="pos")
            except (sla.LinAlgError, np.linalg.LinAlgError):
                lam *= 10
                continue
            z_new = z + step
            r_new = residual(z_new)
            cost_new = r_new @ r_new
            if np.isfinite(cost_new) and cost_new < cost:
                z, r, cost = z_new, r_new, cost_new
                lam = max(lam / 10, 1e-15)
                accepted = True
                break
            lam *= 10
        history.append(float(np.max(np.abs(r))))
        if history[-1] <= tol or not accepted:
            break
    eta, u, c = unpack(z)
    wave = SolitaryWave(float(c), A, ell, M, eta, u, params, iterations=it, history=history)
    wave.residual_norm = float(np.max(np.abs(traveling_residual(wave))))
    if wave.residual_norm > max(1e-10, 10 * tol) or not c > 1:
        raise NoConvergenceError(
            f"Levenberg-Marquardt stalled at residual {wave.residual_norm:.3e} for A={A}"
        )
    return wave


def solitary_sweep(amplitudes, params: SystemParams, ell: float = 50.0, M: int = 1024, **kw) -> list[SolitaryWave]:
    """Solve for increasing amplitudes, each seeded by the previous wave."""
    waves, prev = [], None
    for A in sorted(amplitudes):
        prev = solve_solitary_nwogu(A, params, ell, M, initial=prev, **kw)
        waves.append(prev)
    return waves


def _petviashvili(c: float, params: SystemParams, ell: float, M: int, tol: float, max_iter: int,
                  eta0=None, u0=None):
    x = periodic_grid(ell, M)
    xi = wavenumbers(ell, M)
    s11 = c * (1 + params.b * xi**2)
    s22 = c * (1 + params.d * xi**2)
    det = s11 * s22 - 1.0
    if eta0 is None:
        A_guess = 2 * (c - 1)
        eta0, u0, _ = _initial_guess(A_guess, params, x)
    eh, uh = np.fft.fft(eta0), np.fft.fft(u0)
    factor = np.nan
    for it in range(1, max_iter + 1):
        eta, u = np.fft.ifft(eh).real, np.fft.ifft(uh).real
        n1, n2 = np.fft.fft(eta * u), np.fft.fft(0.5 * u**2)
        lhs = np.vdot(eh, s11 * eh - uh) + np.vdot(uh, -eh + s22 * uh)
        rhs = np.vdot(eh, n1) + np.vdot(uh, n2)
        factor = (lhs / rhs).real
        new_eh = factor**2 * (s22 * n1 + n2) / det
        new_uh = factor**2 * (n1 + s11 * n2) / det
        change = max(np.max(np.abs(new_eh - eh)), np.max(np.abs(new_uh - uh))) / M
        eh, uh = new_eh, new_uh
        if change <= tol and abs(factor - 1) <= 1e-10:
            break
    eta, u = np.fft.ifft(eh).real, np.fft.ifft(uh).real
    return eta, u, factor, it


def solve_solitary_bbm_petviashvili(c_s: float, params: SystemParams, ell: float = 50.0, M: int = 1024,
                                    tol: float = 1e-13, max_iter: int = 2000, eta0=None, u0=None) -> SolitaryWave:
    """Petviashvili iteration (exponent 2) for the BBM-BBM travelling-wave system at speed ``c_s``."""
    if params.a != 0 or params.b <= 0 or params.d <= 0:
        raise InvalidParameterError("Petviashvili solver expects a = 0 and b, d > 0")
    if c_s <= 1:
        raise InvalidParameterError("speed must exceed 1")
    eta, u, factor, it = _petviashvili(c_s, params, ell, M, tol, max_iter, eta0, u0)
    mid = M // 2
    wave = SolitaryWave(float(c_s), float(eta[mid]), ell, M, eta, u, params, iterations=it)
    wave.residual_norm = float(np.max(np.abs(traveling_residual(wave))))
    wave.history = [float(factor)]
    if not np.isfinite(wave.residual_norm) or wave.residual_norm > 1e-10 or wave.A <= 0:
        raise NoConvergenceError(f"Petviashvili iteration stalled at residual {wave.residual_norm:.3e}")
    return wave


def petviashvili_factor(wave: SolitaryWave) -> float:
    """Stabilizing factor of the Petviashvili map evaluated at ``wave``."""
    p = wave.params
    xi = wavenumbers(wave.ell, wave.M)
    c = wave.c_s
    eh, uh = wave.fourier_eta, wave.fourier_u
    n1, n2 = np.fft.fft(wave.eta * wave.u), np.fft.fft(0.5 * wave.u**2)
    lhs = np.vdot(eh, c * (1 + p.b * xi**2) * eh - uh) + np.vdot(uh, -eh + c * (1 + p.d * xi**2) * uh)
    rhs = np.vdot(eh, n1) + np.vdot(uh, n2)
    return float((lhs / rhs).real)


def solve_solitary_bbm_amplitude(A: float, params: SystemParams, ell: float = 50.0, M: int = 1024,
                                 tol: float = 1e-13) -> SolitaryWave:
    """BBM-BBM wave with amplitude ``A``: the speed is found by root bracketing."""
    def gap(c):
        return solve_solitary_bbm_petviashvili(c, params, ell, M, tol=tol).A - A

    lo, hi = 1.0 + 0.2 * A, 1.0 + 1.0 * A
    while gap(hi) < 0:
        hi = 1 + 2 * (hi - 1)
    while gap(lo) > 0:
        lo = 1 + 0.5 * (lo - 1)
    c = brentq(gap, lo, hi, xtol=1e-13)
    return solve_solitary_bbm_petviashvili(c, params, ell, M, tol=tol)


def solve_solitary(A: float, params: SystemParams, ell: float = 50.0, M: int = 1024,
                   initial: SolitaryWave | None = None) -> SolitaryWave:
    """Dispatch on the system: Petviashvili for BBM-BBM, Levenberg-Marquardt otherwise."""
    if params.a == 0:
        return solve_solitary_bbm_amplitude(A, params, ell, M)
    return solve_solitary_nwogu(A, params, ell, M, initial=initial)


def sample_to_fem(wave: SolitaryWave, shift: float, space_eta, space_u, params: SystemParams | None = None):
    """Initial FEM state from a spectral profile centred at ``shift``.

    The elliptic projections used for the scheme's initial data are applied to the
    trigonometric interpolant; values outside the periodic box count as zero.
    """
    from .galerkin import initial_state

    p = params or wave.params
    g = space_eta.grid
    tails = np.abs(np.r_[wave.evaluate([g.x_min, g.x_max], shift)[0], wave.eta[0]])
    if np.max(tails) > 1e-8:
        raise SupportOverflowError(f"profile tails {np.max(tails):.2e} exceed 1e-8 at the domain ends")

    def fields(x, derivative):
        return wave.evaluate(x, shift, derivative)

    def ends_zero(v, x):
        return np.where((x <= g.x_min) | (x >= g.x_max), 0.0, v)

    return initial_state(
        space_eta, space_u, p,
        lambda x: fields(x, 0)[0], lambda x: fields(x, 1)[0],
        lambda x: ends_zero(fields(x, 0)[1], x), lambda x: fields(x, 1)[1],
    )
