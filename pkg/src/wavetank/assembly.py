"""Bilinear forms, banded symmetric solves, projections and the operators f_h, g_h.

For ``q >= 0`` the form ``A_q(u, v) = (u, v) + q (u_x, v_x)`` is assembled with
the element-wise Gauss-Legendre rule of the space.  Matrices are stored in
upper banded form and factored once with a banded Cholesky decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .basis import DIRICHLET, FemSpace
from .errors import BoundaryMismatchError, NotPositiveDefiniteError, SpaceMismatchError


@dataclass
class Coefficients:
    space: FemSpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.space.dof_count,):
            raise SpaceMismatchError(
                f"expected {self.space.dof_count} coefficients, got shape {self.values.shape}"
            )

    def at_quadrature(self) -> np.ndarray:
        return self.space.value_matrix @ self.values

    def derivative_at_quadrature(self) -> np.ndarray:
        return self.space.derivative_matrix @ self.values

    def __call__(self, x, derivative: int = 0) -> np.ndarray:
        return self.space.evaluation_matrix(x, derivative) @ self.values


Source = Union[Callable, Coefficients, np.ndarray, float, int]


class BandedSymMatrix:
    """Symmetric banded matrix with a lazily computed banded Cholesky factor."""

    def __init__(self, matrix: sp.spmatrix, bandwidth: int, space: FemSpace | None = None, q: float | None = None):
        self.sparse = sp.csr_matrix(matrix)
        self.dof_count = self.sparse.shape[0]
        self.bandwidth = int(bandwidth)
        self.space = space
        self.q = q
        n, u = self.dof_count, self.bandwidth
        dia = self.sparse.todia()
        entries = np.zeros((u + 1, n))
        for offset, row in zip(dia.offsets, dia.data):
            if 0 <= offset <= u:
                # dia storage: data[k, j] = A[j - offset, j]
                entries[u - offset, offset:] = row[offset:]
            elif offset > u and np.any(row):
                raise ValueError("matrix bandwidth exceeds the declared value")
        self.entries = entries
        self._factor = None

    def toarray(self) -> np.ndarray:
        return self.sparse.toarray()

    def __matmul__(self, x):
        return self.sparse @ x

    @property
    def factor(self) -> np.ndarray:
        if self._factor is None:
            try:
                self._factor = sla.cholesky_banded(self.entries, lower=False, check_finite=True)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefiniteError(str(exc)) from exc
        return self._factor

    def solve(self, rhs) -> np.ndarray:
        return sla.cho_solve_banded((self.factor, False), np.asarray(rhs, dtype=float), check_finite=False)


def assemble_Aq(space: FemSpace, q: float) -> BandedSymMatrix:
    """Matrix of ``A_q(phi_j, phi_i)`` over the basis of ``space``."""
    V, D, w = space.value_matrix, space.derivative_matrix, space.weights_flat
    W = sp.diags(w)
    A = V.T @ W @ V
    if q != 0.0:
        A = A + q * (D.T @ W @ D)
    return BandedSymMatrix(A, space.nloc - 1, space, q)


def solve(matrix: BandedSymMatrix, rhs) -> np.ndarray:
    return matrix.solve(rhs)


_CACHE: dict = {}


def cached_Aq(space: FemSpace, q: float) -> BandedSymMatrix:
    """Assemble-and-factor once per (space, q)."""
    key = (id(space), float(q))
    hit = _CACHE.get(key)
    if hit is None or hit[0] is not space:
        hit = (space, assemble_Aq(space, q))
        _CACHE[key] = hit
    return hit[1]


def _values_at_quadrature(space: FemSpace, f: Source) -> np.ndarray:
    if isinstance(f, Coefficients):
        if not f.space.compatible(space):
            raise SpaceMismatchError("source lives on a different grid")
        return f.at_quadrature()
    if callable(f):
        return np.asarray(f(space.qp_x.ravel()), dtype=float) * np.ones(space.qp_x.size)
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full(space.qp_x.size, float(arr))
    if arr.size != space.qp_x.size:
        raise SpaceMismatchError("sampled source does not match the quadrature layout")
    return arr.ravel()


def _derivative_at_quadrature(space: FemSpace, f: Source) -> np.ndarray:
    if isinstance(f, Coefficients):
        return f.derivative_at_quadrature()
    return _values_at_quadrature(space, f)


def load_vector(space: FemSpace, f: Source) -> np.ndarray:
    """``(f, phi_i)`` for every basis function."""
    return space.value_matrix.T @ (space.weights_flat * _values_at_quadrature(space, f))


def derivative_load_vector(space: FemSpace, f: Source) -> np.ndarray:
    """``(f, phi_i')`` for every basis function."""
    return space.derivative_matrix.T @ (space.weights_flat * _values_at_quadrature(space, f))


def l2_project(space: FemSpace, f: Source) -> Coefficients:
    """L2 projection onto ``space`` (``P_h`` or ``P_h^0`` depending on its bc)."""
    M = cached_Aq(space, 0.0)
    return Coefficients(space, M.solve(load_vector(space, f)))


def elliptic_project(space: FemSpace, q: float, f: Source, fprime: Source | None = None) -> Coefficients:
    """Projection ``R`` with ``A_q(R f, phi) = A_q(f, phi)`` for all ``phi`` in ``space``.

    ``fprime`` is required when ``f`` is a plain callable; FEM functions carry
    their own derivative.
    """
    if isinstance(f, Coefficients):
        fprime = f
    elif fprime is None and q != 0.0:
        raise ValueError("elliptic projection of a function needs its derivative")
    if space.bc == DIRICHLET and callable(f) and not isinstance(f, Coefficients):
        g = space.grid
        ends = np.asarray(f(np.array([g.x_min, g.x_max])), dtype=float)
        if np.max(np.abs(ends)) > 1e-10:
            raise BoundaryMismatchError(f"function does not vanish at the ends: {ends}")
    rhs = load_vector(space, f)
    if q != 0.0:
        dvals = _derivative_at_quadrature(space, fprime)
        rhs = rhs + q * (space.derivative_matrix.T @ (space.weights_flat * dvals))
    return Coefficients(space, cached_Aq(space, q).solve(rhs))


def discrete_laplacian(u: Coefficients, mass0: BandedSymMatrix) -> Coefficients:
    """``d2`` in ``S_h^0`` with ``(d2, phi) = -(u_x, phi_x)`` for all ``phi`` in ``S_h^0``."""
    space0 = mass0.space
    if not u.space.compatible(space0):
        raise SpaceMismatchError("discrete Laplacian needs spaces on the same grid")
    rhs = -derivative_load_vector(space0, u.derivative_at_quadrature())
    return Coefficients(space0, mass0.solve(rhs))


def apply_fh(w: Source, Ab: BandedSymMatrix) -> Coefficients:
    """``f_h[w]`` in ``S_h``: ``A_b(f_h[w], chi) = (w, chi_x)``."""
    space = Ab.space
    return Coefficients(space, Ab.solve(derivative_load_vector(space, w)))


def apply_gh(w: Source, Ad: BandedSymMatrix) -> Coefficients:
    """``g_h[w]`` in ``S_h^0``: ``A_d(g_h[w], phi) = (w, phi_x)``."""
    space = Ad.space
    return Coefficients(space, Ad.solve(derivative_load_vector(space, w)))


def norms(c: Coefficients, exact: Callable | None = None, exact_dx: Callable | None = None) -> tuple[float, float]:
    """L2 and full H1 norms of ``c - exact`` (or of ``c`` alone)."""
    space = c.space
    w = space.weights_flat
    x = space.qp_x.ravel()
    v = c.at_quadrature()
    dv = c.derivative_at_quadrature()
    if exact is not None:
        v = v - exact(x)
    if exact_dx is not None:
        dv = dv - exact_dx(x)
    l2 = float(np.sqrt(np.sum(w * v**2)))
    h1 = float(np.sqrt(np.sum(w * (v**2 + dv**2))))
    return l2, h1


def function_norms(space: FemSpace, f: Callable, fx: Callable) -> tuple[float, float]:
    """L2 and H1 norms of a smooth function, with the quadrature of ``space``."""
    w = space.weights_flat
    x = space.qp_x.ravel()
    v, dv = f(x), fx(x)
    return float(np.sqrt(np.sum(w * v**2))), float(np.sqrt(np.sum(w * (v**2 + dv**2))))
