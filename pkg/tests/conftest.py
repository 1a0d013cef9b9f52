"""Shared brute-force oracles built independently of the package's basis code."""

import numpy as np
import pytest
from scipy.interpolate import BSpline

from wavetank.basis import DIRICHLET

FAMILIES = ["linear", "quadratic", "cubic", "spline"]


def oracle_basis(space, x, derivative=0):
    """Dense matrix of all global basis functions (or derivatives) at ``x``."""
    g = space.grid
    x = np.asarray(x, dtype=float)
    nodes = g.nodes
    if space.family.kind == "spline":
        knots = np.r_[[nodes[0]] * 3, nodes, [nodes[-1]] * 3]
        cols = []
        for i in range(space.n_free):
            c = np.zeros(space.n_free)
            c[i] = 1.0
            spl = BSpline(knots, c, 3, extrapolate=False)
            if derivative:
                spl = spl.derivative(derivative)
            v = spl(np.clip(x, nodes[0], nodes[-1] - 1e-14))
            cols.append(np.nan_to_num(v))
        B = np.column_stack(cols)
    else:
        r = space.family.r
        B = np.zeros((x.size, space.n_free))
        elem = np.minimum(((x - g.x_min) / g.h).astype(int), g.N - 1)
        for e in range(g.N):
            idx = elem == e
            if not idx.any():
                continue
            loc = np.linspace(nodes[e], nodes[e + 1], r)
            for j in range(r):
                unit = np.zeros(r)
                unit[j] = 1.0
                poly = np.polynomial.Polynomial.fit(loc, unit, r - 1)
                if derivative:
                    poly = poly.deriv(derivative)
                B[idx, e * (r - 1) + j] = poly(x[idx])
    if space.bc == DIRICHLET:
        B = B[:, 1:-1]
    return B


def oracle_quadrature(space, n=12):
    g = space.grid
    t, w = np.polynomial.legendre.leggauss(n)
    x = (g.nodes[:-1, None] + 0.5 * g.h * (t[None, :] + 1)).ravel()
    wq = np.tile(0.5 * g.h * w, g.N)
    return x, wq


def oracle_Aq(space, q):
    x, w = oracle_quadrature(space)
    V, D = oracle_basis(space, x), oracle_basis(space, x, 1)
    return V.T @ (w[:, None] * V) + q * D.T @ (w[:, None] * D)


@pytest.fixture(params=FAMILIES)
def family(request):
    return request.param


ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    """Store and print one pass/fail line for an acceptance criterion."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
