"""Unified-transform solution of the linear system on (-L, L).

    eta_t + u_x - alpha u_xxx - beta eta_xxt = 0
    u_t + eta_x - delta u_xxt = 0

with data ``u(-L) = g0``, ``u(L) = h0``, ``u_xx(-L) = g2``, ``u_xx(L) = h2``.

The solution is a sum of a real-line integral and integrals along the contours
L+ and L-, which follow the real axis but detour around the points
k_n = n pi / (2L) on semicircles of radius pi / (6L) (upper half-plane for L+,
lower for L-).  The dispersion relation

    omega(k) = k mu_alpha / (mu_delta mu_beta),   mu_c(k) = (1 + c k^2)^{1/2},

is made single-valued with cuts on i[-1/sqrt(c), 1/sqrt(c)] for alpha and delta
and on the outer rays |Im k| >= 1/sqrt(beta) for beta.  Every quantity in the
formulas depends on mu_alpha and mu_delta only through their product or ratio,
which is analytic away from the combined cut, so the detour around k = 0 is
legitimate as long as its radius stays below 1/sqrt(max(alpha, delta)).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidParameterError, OnBranchCutError, TruncationUnconvergedError
from .params import SystemParams

INNER = "inner"
OUTER = "outer"
PLUS = "plus"
MINUS = "minus"

_GL16 = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class DispersionSpec:
    alpha: float
    beta: float
    delta: float
    L: float

    def __post_init__(self):
        if self.alpha <= 0 or self.delta <= 0:
            raise InvalidParameterError("alpha and delta must be positive")
        if self.beta < 0:
            raise InvalidParameterError("beta must be nonnegative")
        if self.beta > max(self.alpha, self.delta):
            raise InvalidParameterError("beta > max(alpha, delta) is not supported")
        if self.L <= 0:
            raise InvalidParameterError("L must be positive")
        r = np.pi / (6 * self.L)
        if r * np.sqrt(max(self.alpha, self.delta)) >= 1:
            raise OnBranchCutError(
                "detour radius pi/(6L) reaches the branch cut; use a larger L or smaller alpha, delta"
            )

    @classmethod
    def from_params(cls, params: SystemParams, L: float) -> "DispersionSpec":
        return cls(params.alpha, params.beta, params.delta, L)

    @property
    def nondispersive(self) -> bool:
        return self.beta == 0 and self.alpha == self.delta


def mu(k, coeff: float, cut_kind: str = INNER):
    """Branch of (1 + coeff k^2)^{1/2}.

    ``inner``: cut on i[-1/sqrt(coeff), 1/sqrt(coeff)], odd in k, positive for k > 0.
    ``outer``: cut on the rays |Im k| >= 1/sqrt(coeff), even in k.
    """
    k = np.asarray(k, dtype=complex)
    if coeff == 0:
        return np.ones_like(k)
    edge = 1.0 / np.sqrt(coeff)
    on_axis = np.abs(k.real) <= 1e-14 * (1 + np.abs(k.imag))
    if cut_kind == INNER:
        if np.any(on_axis & (np.abs(k.imag) <= edge)):
            raise OnBranchCutError("k lies on the inner branch cut")
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.sqrt(coeff) * k * np.sqrt(1.0 + 1.0 / (coeff * k * k))
    if cut_kind == OUTER:
        if np.any(on_axis & (np.abs(k.imag) >= edge)):
            raise OnBranchCutError("k lies on the outer branch cut")
        return np.sqrt(1.0 + coeff * k * k)
    raise ValueError(f"unknown cut kind {cut_kind!r}")


def _mu_parts(k, spec: DispersionSpec):
    """(mu_alpha / mu_delta, mu_alpha * mu_delta, mu_beta) on nodes off the cuts."""
    if spec.nondispersive:
        ones = np.ones_like(np.asarray(k, dtype=complex))
        return ones, 1.0 + spec.alpha * np.asarray(k, dtype=complex) ** 2, ones
    ma, md = mu(k, spec.alpha, INNER), mu(k, spec.delta, INNER)
    mb = mu(k, spec.beta, OUTER)
    return ma / md, ma * md, mb


def omega(k, spec: DispersionSpec):
    """omega(k) = k mu_alpha / (mu_delta mu_beta), with omega(0) = 0."""
    k = np.asarray(k, dtype=complex)
    scalar = k.ndim == 0
    k = np.atleast_1d(k)
    out = np.zeros_like(k)
    nz = k != 0
    if np.any(nz):
        ratio, _, mb = _mu_parts(k[nz], spec)
        out[nz] = k[nz] * ratio / mb
    return out[0] if scalar else out


@dataclass(frozen=True)
class ContourSpec:
    """Truncated quadrature for L+ or L-; truncation falls mid-way along a straight piece."""

    L: float
    K_max: float | None = None
    side: str = PLUS
    points_per_unit: float = 8.0
    arc_nodes: int = 16

    @property
    def detour_radius(self) -> float:
        return np.pi / (6 * self.L)

    @property
    def kmax(self) -> float:
        return self.K_max if self.K_max is not None else 40.0 / self.L

    def with_K(self, K: float) -> "ContourSpec":
        return ContourSpec(self.L, K, self.side, self.points_per_unit, self.arc_nodes)

    def with_side(self, side: str) -> "ContourSpec":
        return ContourSpec(self.L, self.K_max, side, self.points_per_unit, self.arc_nodes)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Complex nodes and weights (including dk) ordered left to right."""
        if self.side not in (PLUS, MINUS):
            raise ValueError(f"unknown side {self.side!r}")
        spacing = np.pi / (2 * self.L)
        r = self.detour_radius
        n_max = max(1, int(np.ceil(self.kmax / spacing - 0.5)))
        end = (n_max + 0.5) * spacing
        # arc nodes: even count keeps the n = 0 arc off the imaginary axis
        m = self.arc_nodes + (self.arc_nodes % 2)
        tx, tw = np.polynomial.legendre.leggauss(m)
        seg_len = spacing - 2 * r
        ns = max(4, int(np.ceil(self.points_per_unit * seg_len)))
        sx, sw = np.polynomial.legendre.leggauss(ns)
        half_ns = max(4, int(np.ceil(self.points_per_unit * (seg_len / 2 + r) / 2)))
        hx, hw = np.polynomial.legendre.leggauss(half_ns)
        ks, ws = [], []

        def segment(a, b, x, w):
            ks.append(0.5 * (a + b) + 0.5 * (b - a) * x)
            ws.append(0.5 * (b - a) * w)

        segment(-end, -n_max * spacing - r, hx, hw)
        for n in range(-n_max, n_max + 1):
            kn = n * spacing
            if self.side == PLUS:
                theta = 0.5 * np.pi * (1 - tx)  # pi -> 0 (clockwise, upper)
                dtheta = -0.5 * np.pi * tw
            else:
                theta = np.pi + 0.5 * np.pi * (tx + 1)  # pi -> 2pi (lower)
                dtheta = 0.5 * np.pi * tw
            z = r * np.exp(1j * theta)
            ks.append(kn + z)
            ws.append(1j * z * dtheta)
            if n < n_max:
                segment(kn + r, kn + spacing - r, sx, sw)
        segment(n_max * spacing + r, end, hx, hw)
        return np.concatenate(ks).astype(complex), np.concatenate(ws).astype(complex)


def _panel_rule(a: float, b: float, max_freq: float, per_panel_phase: float = 6.0):
    n_panels = max(4, int(np.ceil(abs(max_freq) * (b - a) / per_panel_phase)))
    gx, gw = _GL16
    edges = np.linspace(a, b, n_panels + 1)
    h = np.diff(edges)
    x = (edges[:-1, None] + 0.5 * h[:, None] * (gx[None, :] + 1)).ravel()
    w = (0.5 * h[:, None] * gw[None, :]).ravel()
    return x, w


def hat_transform(f: Callable, k, L: float):
    """int_{-L}^{L} e^{-ikx} f(x) dx by composite Gauss-Legendre quadrature."""
    k = np.asarray(k, dtype=complex)
    kk = np.atleast_1d(k)
    x, w = _panel_rule(-L, L, np.max(np.abs(kk)) + 1.0)
    fw = np.asarray(f(x), dtype=complex) * w
    out = _transform_matrix_apply(kk, x, fw)
    return out[0] if k.ndim == 0 else out


def _transform_matrix_apply(k, x, fw, chunk: int = 512):
    out = np.empty(k.shape, dtype=complex)
    for s in range(0, k.size, chunk):
        out[s:s + chunk] = np.exp(-1j * np.outer(k[s:s + chunk], x)) @ fw
    return out


def _time_rule(t: float, max_freq: float):
    return _panel_rule(0.0, t, max_freq, 4.0)


def B_pm(f: Callable, om, t: float, sign: str):
    """e^{i om t} int_0^t e^{-i om tau} f dtau (+ or -) e^{-i om t} int_0^t e^{i om tau} f dtau."""
    om = np.asarray(om, dtype=complex)
    oo = np.atleast_1d(om)
    if t == 0:
        out = np.zeros_like(oo)
    else:
        tau, w = _time_rule(t, np.max(np.abs(oo.real)) + 1.0)
        fw = np.asarray(f(tau), dtype=complex) * w
        phase = np.outer(oo, t - tau)
        if sign in ("+", PLUS):
            out = 2.0 * (np.cos(phase) @ fw)
        elif sign in ("-", MINUS):
            out = 2j * (np.sin(phase) @ fw)
        else:
            raise ValueError("sign must be '+' or '-'")
    return out[0] if om.ndim == 0 else out


class BoundarySeries:
    """Time-dependent boundary datum with first and second derivatives."""

    def __init__(self, f: Callable, df: Callable | None = None, d2f: Callable | None = None, T: float | None = None,
                 samples: int = 2001):
        if df is None or d2f is None:
            if T is None:
                raise ValueError("derivatives or a horizon T are required")
            tt = np.linspace(0.0, T, samples)
            spline = CubicSpline(tt, f(tt))
            df = df or spline.derivative()
            d2f = d2f or spline.derivative(2)
        self.f, self.df, self.d2f = f, df, d2f

    @classmethod
    def from_samples(cls, times, values) -> "BoundarySeries":
        spline = CubicSpline(np.asarray(times, float), np.asarray(values, float))
        return cls(spline, spline.derivative(), spline.derivative(2))

    def transforms(self, om, t):
        """B+ and B- of f, f' and f'' at the frequencies ``om``."""
        bp = B_pm(self.f, om, t, "+")
        bm = B_pm(self.f, om, t, "-")
        f0, ft = self.f(0.0), self.f(t)
        d0, dt_ = self.df(0.0), self.df(t)
        c, s = np.cos(om * t), np.sin(om * t)
        # integration by parts in tau
        bp1 = 2 * ft - 2 * c * f0 + 1j * om * bm
        bm1 = -2j * s * f0 + 1j * om * bp
        bp2 = 2 * dt_ - 2 * c * d0 + 1j * om * bm1
        bm2 = -2j * s * d0 + 1j * om * bp1
        return {"+": (bp, bp1, bp2), "-": (bm, bm1, bm2)}


@dataclass
class LinearData:
    eta0: Callable
    u0: Callable
    g0: BoundarySeries | None = None
    h0: BoundarySeries | None = None
    g2: BoundarySeries | None = None
    h2: BoundarySeries | None = None

    @property
    def homogeneous(self) -> bool:
        return all(s is None for s in (self.g0, self.h0, self.g2, self.h2))

    def check_compatibility(self, L: float, tol: float = 1e-8) -> bool:
        ok = True
        for series, xb in ((self.g0, -L), (self.h0, L)):
            val = series.f(0.0) if series is not None else 0.0
            if abs(val - float(self.u0(np.array([xb]))[0])) > tol:
                ok = False
        if not ok:
            warnings.warn("boundary data are not compatible with the initial data at the corners", stacklevel=2)
        return ok


@dataclass
class UTValue:
    value: float
    imag: float
    K_max: float


class UnifiedTransformSolver:
    """Evaluates the explicit solution formulas for fixed data and dispersion."""

    def __init__(self, data: LinearData, spec: DispersionSpec, contour: ContourSpec | None = None,
                 tol: float = 1e-8, max_doublings: int = 4):
        self.data = data
        self.spec = spec
        self.contour = contour or ContourSpec(spec.L)
        self.tol = tol
        self.max_doublings = max_doublings
        self._cache = {}
        data.check_compatibility(spec.L)

    def _nodes(self, K: float):
        if K not in self._cache:
            L = self.spec.L
            base = self.contour.with_K(K)
            kp, wp = base.with_side(PLUS).nodes()
            km, wm = base.with_side(MINUS).nodes()
            node = {}
            for name, k, w in (("plus", kp, wp), ("minus", km, wm)):
                allk = np.concatenate([k, -k])
                x, qw = _panel_rule(-L, L, np.max(np.abs(allk)) + 1.0)
                e_vals = np.asarray(self.data.eta0(x), dtype=complex) * qw
                u_vals = np.asarray(self.data.u0(x), dtype=complex) * qw
                eh = _transform_matrix_apply(allk, x, e_vals)
                uh = _transform_matrix_apply(allk, x, u_vals)
                n = k.size
                ratio, prod, mb = _mu_parts(k, self.spec)
                node[name] = {
                    "k": k, "w": w, "om": k * ratio / mb,
                    "ratio": ratio, "prod": prod, "mb": mb,
                    "eta_p": eh[:n], "eta_m": eh[n:], "u_p": uh[:n], "u_m": uh[n:],
                }
            self._cache[K] = node
        return self._cache[K]

    def _assemble(self, x: float, t: float, K: float, component: str) -> complex:
        spec, L = self.spec, self.spec.L
        a, b, dlt = spec.alpha, spec.beta, spec.delta
        nodes = self._nodes(K)
        total = 0.0 + 0.0j
        for side in ("plus", "minus"):
            nd = nodes[side]
            k, w, om = nd["k"], nd["w"], nd["om"]
            m = nd["prod"] / nd["mb"]  # mu_alpha mu_delta / mu_beta
            Ep, Em = 2 * np.cos(om * t), 2j * np.sin(om * t)
            if component == "eta":
                cf = lambda e_k, e_mk, u_k, u_mk, s1, s2: Ep * (s1 * e_k + s2 * e_mk) - m * Em * (s1 * u_k - s2 * u_mk)
            else:
                cf = lambda e_k, e_mk, u_k, u_mk, s1, s2: -Em * (s1 * e_k + s2 * e_mk) / m + Ep * (s1 * u_k - s2 * u_mk)
            args = (nd["eta_p"], nd["eta_m"], nd["u_p"], nd["u_m"])
            if side == "plus":
                # real-line term, moved onto L+ where its integrand is analytic
                integrand = 0.5 * np.exp(1j * k * x) * cf(*args, 1.0, 0.0)
                integrand = integrand + np.exp(1j * k * (x + L)) / (2 * (1 - np.exp(4j * k * L))) * cf(
                    *args, np.exp(3j * k * L), np.exp(1j * k * L))
            else:
                integrand = np.exp(1j * k * (x - L)) / (2 * (1 - np.exp(-4j * k * L))) * cf(
                    *args, np.exp(-3j * k * L), np.exp(-1j * k * L))
            if not self.data.homogeneous:
                jg, jh = self._boundary_brackets(nd, t, component)
                sg = 1.0 if side == "plus" else -1.0
                integrand = integrand + sg * np.exp(1j * k * (x + L)) / (1 - np.exp(4j * k * L)) * jg
                integrand = integrand - sg * np.exp(1j * k * (x - L)) / (1 - np.exp(-4j * k * L)) * jh
            total += np.sum(w * integrand)
        return total / (2 * np.pi)

    def _boundary_brackets(self, nd, t, component):
        spec = self.spec
        a, b, dlt = spec.alpha, spec.beta, spec.delta
        k, om = nd["k"], nd["om"]
        zero = {"+": (0, 0, 0), "-": (0, 0, 0)}
        d = self.data
        G0 = d.g0.transforms(om, t) if d.g0 else zero
        G2 = d.g2.transforms(om, t) if d.g2 else zero
        H0 = d.h0.transforms(om, t) if d.h0 else zero
        H2 = d.h2.transforms(om, t) if d.h2 else zero
        if component == "eta":
            P = (1 + a * k * k) / (1 + b * k * k)
            Q = a / (1 + b * k * k)
            R = b * dlt / (1 + b * k * k)
            S = b / (1 + b * k * k)
            Tm = 1j * dlt * k * nd["ratio"] / nd["mb"]
            # L+ bracket of the g-terms; the L- bracket is its negative
            jg = P * G0["+"][0] - Q * G2["+"][0] - R * G2["+"][2] + S * G0["+"][2] + Tm * G0["-"][1]
            # L- bracket of the h-terms
            jh = -P * H0["+"][0] + Q * H2["+"][0] + R * H2["+"][2] - S * H0["+"][2] - Tm * H0["-"][1]
            return jg, jh
        U1 = nd["ratio"] / nd["mb"]
        U2 = 1j * dlt * k / (1 + dlt * k * k)
        den = nd["prod"] * nd["mb"]
        U3, U4, U5 = b / den, a / den, b * dlt / den
        jg = -U1 * G0["-"][0] - U2 * G0["+"][1] - U3 * G0["-"][2] + U4 * G2["-"][0] + U5 * G2["-"][2]
        jh = U1 * H0["-"][0] + U2 * H0["+"][1] + U3 * H0["-"][2] - U4 * H2["-"][0] - U5 * H2["-"][2]
        return jg, jh

    def evaluate(self, x: float, t: float, component: str = "eta", K: float | None = None) -> UTValue:
        """Value at (x, t), doubling K_max until successive results agree to ``tol``."""
        L = self.spec.L
        if not -L < x < L:
            raise ValueError("x must lie strictly inside (-L, L)")
        K = K or self.contour.kmax
        prev = self._assemble(x, t, K, component)
        for _ in range(self.max_doublings):
            K *= 2
            cur = self._assemble(x, t, K, component)
            change = abs(cur - prev)
            if change <= self.tol:
                return UTValue(float(cur.real), float(cur.imag), K)
            prev = cur
        raise TruncationUnconvergedError(
            f"results at K_max={K / 2:.3g} and {K:.3g} differ by {change:.3e}"
        )

    def eta(self, x: float, t: float) -> float:
        return self.evaluate(x, t, "eta").value

    def u(self, x: float, t: float) -> float:
        return self.evaluate(x, t, "u").value


def eval_eta(x: float, t: float, data: LinearData, spec: DispersionSpec, contour: ContourSpec | None = None,
             tol: float = 1e-8) -> float:
    return UnifiedTransformSolver(data, spec, contour, tol).eta(x, t)


def eval_u(x: float, t: float, data: LinearData, spec: DispersionSpec, contour: ContourSpec | None = None,
           tol: float = 1e-8) -> float:
    return UnifiedTransformSolver(data, spec, contour, tol).u(x, t)


def jordan_check(f: Callable, x: float, side: str, contour: ContourSpec, reflected: bool = False) -> float:
    """|integral| of e^{ik(x+-L)} f^(+-k) / Delta over L+ or L-; the exact value is zero.

    With ``reflected`` the transform is taken at -k and multiplied by e^{+-2ikL}.
    """
    L = contour.L
    if not -L < x < L:
        raise ValueError("x must lie strictly inside (-L, L)")
    k, w = contour.with_side(side).nodes()
    fh = hat_transform(f, -k if reflected else k, L)
    if side == PLUS:
        delta = np.exp(1j * k * L) - np.exp(-3j * k * L)
        integrand = np.exp(1j * k * (x + L)) / delta * fh
        if reflected:
            integrand = integrand * np.exp(2j * k * L)
    else:
        delta = np.exp(-1j * k * L) - np.exp(3j * k * L)
        integrand = np.exp(1j * k * (x - L)) / delta * fh
        if reflected:
            integrand = integrand * np.exp(-2j * k * L)
    return float(abs(np.sum(w * integrand)))


def denominator_margin(contour: ContourSpec) -> float:
    """Smallest |1 - e^{-+4ikL}| over the contour nodes."""
    k, _ = contour.nodes()
    L = contour.L
    if contour.side == PLUS:
        return float(np.min(np.abs(1 - np.exp(4j * k * L))))
    return float(np.min(np.abs(1 - np.exp(-4j * k * L))))
