"""Uniform grids, piecewise-polynomial finite element spaces and Gauss-Legendre rules.

Two families are supported on a uniform grid of ``N`` elements:

* Lagrange elements ``S_h(0, r)`` with equispaced local nodes, ``r in {2, 3, 4}``
  (continuous piecewise polynomials of degree ``r - 1``);
* cubic splines ``S_h(2, 4)`` in the clamped B-spline basis.

Each family comes with a ``free`` variant and a ``dirichlet`` variant whose
members vanish at both ends of the interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import (
    ElementIndexError,
    InvalidIntervalError,
    PointOutsideDomainError,
    TooFewElementsError,
    UnsupportedFamilyError,
    UnsupportedOrderError,
)

FREE = "free"
DIRICHLET = "dirichlet"
DEFAULT_QUADRATURE = 5


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    N: int

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.N

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def nodes(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.N + 1)


def make_grid(x_min: float, x_max: float, N: int) -> Grid:
    if not x_min < x_max:
        raise InvalidIntervalError(f"need x_min < x_max, got [{x_min}, {x_max}]")
    if int(N) != N or N < 2:
        raise TooFewElementsError(f"need at least 2 elements, got N={N}")
    return Grid(float(x_min), float(x_max), int(N))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.nodes)


def gauss_legendre(n: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``n`` nodes on [-1, 1]."""
    if int(n) != n or not 1 <= n <= 16:
        raise UnsupportedOrderError(f"supported orders are 1..16, got {n}")
    x, w = np.polynomial.legendre.leggauss(int(n))
    return QuadratureRule(x, w)


@dataclass(frozen=True)
class Family:
    """Element family: ``kind`` is ``"lagrange"`` or ``"spline"``; ``r`` is the order."""

    kind: str
    r: int

    @property
    def mu(self) -> int:
        return 2 if self.kind == "spline" else 0

    @property
    def degree(self) -> int:
        return self.r - 1

    @property
    def label(self) -> str:
        if self.kind == "spline":
            return "spline"
        return {2: "linear", 3: "quadratic", 4: "cubic"}[self.r]

    @classmethod
    def lagrange(cls, r: int) -> "Family":
        if r not in (2, 3, 4):
            raise UnsupportedFamilyError(f"Lagrange order r must be 2, 3 or 4, got {r}")
        return cls("lagrange", r)

    @classmethod
    def cubic_spline(cls) -> "Family":
        return cls("spline", 4)

    @classmethod
    def parse(cls, name: "str | Family") -> "Family":
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower()
        table = {
            "linear": 2, "p1": 2, "lagrange2": 2,
            "quadratic": 3, "p2": 3, "lagrange3": 3,
            "cubic": 4, "p3": 4, "lagrange4": 4,
        }
        if key in table:
            return cls.lagrange(table[key])
        if key in ("spline", "cubic-spline", "cubic_spline", "splines"):
            return cls.cubic_spline()
        raise UnsupportedFamilyError(f"unknown element family {name!r}")


def _lagrange_coefficients(r: int) -> np.ndarray:
    # row j: power-basis coefficients (increasing) of the j-th nodal polynomial on [0, 1]
    nodes = np.linspace(0.0, 1.0, r)
    vander = np.vander(nodes, r, increasing=True)
    return np.linalg.inv(vander).T


def _bspline_derivatives(knots, span, p, x, n):
    """Nonzero B-spline values and derivatives up to order ``n`` at points ``x``.

    Returns an array of shape ``(n + 1, len(x), p + 1)``; column ``j`` belongs to
    the B-spline with index ``span - p + j``.
    """
    x = np.asarray(x, dtype=float)
    left = [None] + [x - knots[span + 1 - j] for j in range(1, p + 1)]
    right = [None] + [knots[span + j] - x for j in range(1, p + 1)]
    ndu = [[None] * (p + 1) for _ in range(p + 1)]
    ndu[0][0] = np.ones_like(x)
    for j in range(1, p + 1):
        saved = np.zeros_like(x)
        for r in range(j):
            ndu[j][r] = right[r + 1] + left[j - r]
            temp = ndu[r][j - 1] / ndu[j][r]
            ndu[r][j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j][j] = saved

    ders = np.zeros((n + 1, x.size, p + 1))
    for j in range(p + 1):
        ders[0, :, j] = ndu[j][p]
    for r in range(p + 1):
        a = [[np.zeros_like(x) for _ in range(p + 1)] for _ in range(2)]
        s1, s2 = 0, 1
        a[0][0] = np.ones_like(x)
        for k in range(1, n + 1):
            d = np.zeros_like(x)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk]
                d = a[s2][0] * ndu[rk][pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j]
                d = d + a[s2][j] * ndu[rk + j][pk]
            if r <= pk:
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r]
                d = d + a[s2][k] * ndu[r][pk]
            ders[k, :, r] = d
            s1, s2 = s2, s1
    factor = p
    for k in range(1, n + 1):
        ders[k] *= factor
        factor *= p - k
    return ders


class FemSpace:
    """Finite element space ``S_h(mu, r)`` (``bc="free"``) or ``S_h^0`` (``bc="dirichlet"``).

    Quadrature tables (``qp_x``, ``qp_w``, ``phi``, ``dphi``, ``dofs``) are built
    lazily for the element-wise Gauss-Legendre rule and reused by assembly.
    """

    def __init__(self, grid: Grid, family: Family, bc: str = FREE, quad_order: int = DEFAULT_QUADRATURE):
        if bc not in (FREE, DIRICHLET):
            raise UnsupportedFamilyError(f"unknown boundary condition {bc!r}")
        self.grid = grid
        self.family = family
        self.bc = bc
        self.quadrature = gauss_legendre(quad_order)
        N, r = grid.N, family.r
        if family.kind == "lagrange":
            n_free = N * (r - 1) + 1
            self.nloc = r
            self._coef = _lagrange_coefficients(r)
        elif family.kind == "spline":
            n_free = N + 3
            self.nloc = 4
            x = grid.nodes
            self._knots = np.concatenate([[x[0]] * 3, x, [x[-1]] * 3])
        else:
            raise UnsupportedFamilyError(f"unsupported family {family}")
        self.n_free = n_free
        self.dof_count = n_free if bc == FREE else n_free - 2

    def __repr__(self):
        return f"FemSpace(N={self.grid.N}, family={self.family.label}, bc={self.bc}, dofs={self.dof_count})"

    def compatible(self, other: "FemSpace") -> bool:
        return self.grid == other.grid

    # -- local numbering -------------------------------------------------
    def local_dofs(self, e: int) -> np.ndarray:
        """Global indices of the basis functions supported on element ``e`` (-1 = removed)."""
        if self.family.kind == "lagrange":
            g = e * (self.family.r - 1) + np.arange(self.nloc)
        else:
            g = e + np.arange(4)
        if self.bc == DIRICHLET:
            g = g - 1
            g[(g < 0) | (g >= self.dof_count)] = -1
        return g

    def local_basis(self, e: int, t, nder: int = 1) -> np.ndarray:
        """Derivatives ``0..nder`` (w.r.t. x) of the local basis at local points ``t`` in [0, 1].

        Shape ``(nder + 1, len(t), nloc)``.  For Dirichlet spaces the removed
        boundary functions are still returned; their dof index is -1.
        """
        if not 0 <= e < self.grid.N:
            raise ElementIndexError(f"element index {e} outside 0..{self.grid.N - 1}")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        h = self.grid.h
        if self.family.kind == "lagrange":
            out = np.empty((nder + 1, t.size, self.nloc))
            for k in range(nder + 1):
                coef = self._coef
                for _ in range(k):
                    coef = coef[:, 1:] * np.arange(1, coef.shape[1])
                if coef.shape[1] == 0:
                    out[k] = 0.0
                else:
                    powers = t[:, None] ** np.arange(coef.shape[1])
                    out[k] = powers @ coef.T / h**k
            return out
        x = self.grid.x_min + (e + t) * h
        return _bspline_derivatives(self._knots, e + 3, 3, x, nder)

    # -- quadrature tables ---------------------------------------------
    @cached_property
    def _tables(self):
        N, h = self.grid.N, self.grid.h
        rule = self.quadrature
        t = 0.5 * (rule.nodes + 1.0)
        qp_x = self.grid.x_min + h * (np.arange(N)[:, None] + t[None, :])
        qp_w = np.broadcast_to(0.5 * h * rule.weights, (N, rule.n)).copy()
        phi = np.empty((N, rule.n, self.nloc))
        dphi = np.empty((N, rule.n, self.nloc))
        dofs = np.empty((N, self.nloc), dtype=int)
        if self.family.kind == "lagrange":
            ref = self.local_basis(0, t, 1)
            phi[:] = ref[0]
            dphi[:] = ref[1]
        for e in range(N):
            if self.family.kind == "spline":
                vals = self.local_basis(e, t, 1)
                phi[e] = vals[0]
                dphi[e] = vals[1]
            dofs[e] = self.local_dofs(e)
        return qp_x, qp_w, phi, dphi, dofs

    @property
    def qp_x(self) -> np.ndarray:
        return self._tables[0]

    @property
    def qp_w(self) -> np.ndarray:
        return self._tables[1]

    @property
    def phi(self) -> np.ndarray:
        return self._tables[2]

    @property
    def dphi(self) -> np.ndarray:
        return self._tables[3]

    @property
    def dofs(self) -> np.ndarray:
        return self._tables[4]

    def _sparse_from_local(self, local: np.ndarray) -> sp.csr_matrix:
        N, nq, nloc = local.shape
        rows = np.repeat(np.arange(N * nq).reshape(N, nq, 1), nloc, axis=2)
        cols = np.broadcast_to(self.dofs[:, None, :], (N, nq, nloc))
        keep = cols >= 0
        return sp.csr_matrix(
            (local[keep], (rows[keep], cols[keep])), shape=(N * nq, self.dof_count)
        )

    @cached_property
    def value_matrix(self) -> sp.csr_matrix:
        """Maps coefficients to values at all quadrature points (flattened ``(N*nq,)``)."""
        return self._sparse_from_local(self.phi)

    @cached_property
    def derivative_matrix(self) -> sp.csr_matrix:
        return self._sparse_from_local(self.dphi)

    @property
    def weights_flat(self) -> np.ndarray:
        return self.qp_w.ravel()

    def locate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Element indices and local coordinates of physical points."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        g = self.grid
        tol = 1e-12 * max(1.0, g.length)
        if np.any(x < g.x_min - tol) or np.any(x > g.x_max + tol):
            raise PointOutsideDomainError(f"points outside [{g.x_min}, {g.x_max}]")
        s = (np.clip(x, g.x_min, g.x_max) - g.x_min) / g.h
        e = np.minimum(np.floor(s).astype(int), g.N - 1)
        return e, s - e

    def evaluation_matrix(self, x, derivative: int = 0) -> sp.csr_matrix:
        """Sparse matrix mapping coefficients to values (or derivatives) at ``x``."""
        e, t = self.locate(x)
        rows, cols, vals = [], [], []
        for elem in np.unique(e):
            idx = np.nonzero(e == elem)[0]
            b = self.local_basis(int(elem), t[idx], derivative)[derivative]
            g = self.local_dofs(int(elem))
            for j in range(self.nloc):
                if g[j] < 0:
                    continue
                rows.append(idx)
                cols.append(np.full(idx.size, g[j]))
                vals.append(b[:, j])
        if rows:
            rows, cols, vals = map(np.concatenate, (rows, cols, vals))
        return sp.csr_matrix((vals, (rows, cols)), shape=(e.size, self.dof_count))

    def interpolation_points(self) -> np.ndarray:
        """Points at which nodal interpolation is unisolvent (used for reproduction checks)."""
        g = self.grid
        if self.family.kind == "lagrange":
            pts = np.linspace(g.x_min, g.x_max, self.n_free)
        else:
            # Greville abscissae of the clamped cubic knot vector
            k = self._knots
            pts = np.array([k[i + 1:i + 4].mean() for i in range(self.n_free)])
        if self.bc == DIRICHLET:
            pts = pts[1:-1]
        return pts


def make_space(grid: Grid, family, bc: str = FREE, quad_order: int = DEFAULT_QUADRATURE) -> FemSpace:
    return FemSpace(grid, Family.parse(family), bc, quad_order)


def eval_basis(space: FemSpace, element_index: int, local_point: float):
    """Values and x-derivatives of the basis functions supported on one element.

    Returns ``(values, derivatives, dofs)`` where ``dofs`` holds the global index of
    each local function (-1 when it was removed by the Dirichlet condition).
    """
    b = space.local_basis(element_index, [local_point], 1)
    dofs = space.local_dofs(element_index)
    return b[0, 0], b[1, 0], dofs
