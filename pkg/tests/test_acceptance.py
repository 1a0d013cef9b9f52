"""Acceptance suite: one pass/fail line per criterion, repeated in the terminal summary."""

import time

import numpy as np
import pytest

from wavetank.assembly import (
    apply_fh, apply_gh, assemble_Aq, cached_Aq, discrete_laplacian, elliptic_project, l2_project,
)
from wavetank.basis import DIRICHLET, FREE, make_grid, make_space
from wavetank.config import RunConfig
from wavetank.experiments import (
    check_convergence, check_linear, check_picard, generate_waves, propagation_case, reflection_case,
    run_convergence, run_linear_compare, run_picard_compare, run_reflection,
)
from wavetank.params import SYSTEMS, regularized_nwogu
from wavetank.transform import MINUS, PLUS, ContourSpec, jordan_check

from conftest import FAMILIES, oracle_Aq, oracle_basis, oracle_quadrature, record_criterion

AMPLITUDES = [round(0.1 + 0.05 * i, 2) for i in range(13)]


def convergence_criterion(number, family, limit=None):
    cfg = RunConfig(experiment="converge", family=family)
    start = time.perf_counter()
    summary = run_convergence(cfg)
    elapsed = time.perf_counter() - start
    problems = check_convergence(summary)
    if limit is not None and elapsed > limit:
        problems.append(f"runtime {elapsed:.0f}s above {limit}s")
    last = summary["rows"][-1]
    rates = [r for r in (summary["rows"][-1]["rate0_eta"], summary["rows"][-2]["rate0_eta"]) if r is not None]
    detail = (f"{family}: E0(eta,N=10)={summary['rows'][0]['E0_eta']:.4e}, finest N={last['N']}, "
              f"rate0(eta)={rates[0]:.4f}, rate1(eta)={last['rate1_eta']:.4f}, {elapsed:.1f}s")
    if problems:
        detail += " | " + "; ".join(problems)
    assert record_criterion(number, not problems, detail), detail


def test_criterion_01_linear_lagrange_table():
    convergence_criterion(1, "linear", limit=120)


def test_criterion_02_quadratic_lagrange_table():
    convergence_criterion(2, "quadratic")


def test_criterion_03_cubic_lagrange_table():
    convergence_criterion(3, "cubic")


def test_criterion_04_cubic_spline_table():
    convergence_criterion(4, "spline")


@pytest.fixture(scope="module")
def reflection_summary():
    cfg = RunConfig(experiment="reflect", amplitudes=AMPLITUDES, timeseries_stride=100)
    return run_reflection(cfg)


def test_criterion_05_conservation(reflection_summary):
    mass = max(c["mass_drift"] for c in reflection_summary["cases"])
    params = regularized_nwogu()
    wave = generate_waves(["nwogu-regularized"], [0.3])["nwogu-regularized"][0]
    coarse = reflection_case(wave, params, "spline", 100)
    fine = reflection_case(wave, params, "spline", 400)
    mass = max(mass, coarse["mass_drift"], fine["mass_drift"])
    ratio = coarse["energy_drift"] / fine["energy_drift"]
    ok = mass <= 1e-12 and ratio >= 8
    detail = (f"max relative mass drift {mass:.2e} over {len(reflection_summary['cases']) + 2} wall runs; "
              f"energy drift {coarse['energy_drift']:.2e} (N=100) -> {fine['energy_drift']:.2e} (N=400), "
              f"reduction {ratio:.0f}x")
    assert record_criterion(5, ok, detail), detail


def test_criterion_06_discrete_laplacian_identity():
    d = 0.375
    g = lambda x: np.sin(np.pi * x) * (1 + x)
    gx = lambda x: np.pi * np.cos(np.pi * x) * (1 + x) + np.sin(np.pi * x)
    gxx = lambda x: -np.pi**2 * np.sin(np.pi * x) * (1 + x) + 2 * np.pi * np.cos(np.pi * x)
    worst = 0.0
    for name in FAMILIES:
        for N in (10, 40):
            zero = make_space(make_grid(0, 1, N), name, DIRICHLET)
            R = elliptic_project(zero, d, g, gx)
            lhs = discrete_laplacian(R, cached_Aq(zero, 0.0)).values - l2_project(zero, gxx).values
            rhs = (R.values - l2_project(zero, g).values) / d
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    detail = f"max coefficient residual {worst:.2e} over 4 families x N in {{10, 40}}"
    assert record_criterion(6, worst <= 1e-9, detail), detail


def test_criterion_07_unified_transform():
    f = lambda x: np.exp(-(np.asarray(x) / 0.15) ** 2)
    L = 1.0
    jordan = max(jordan_check(f, x, side, ContourSpec(L, K_max=160 / L), reflected=refl)
                 for side in (PLUS, MINUS) for refl in (False, True) for x in (-0.5, 0.2, 0.7))
    summary = run_linear_compare(RunConfig(experiment="linear"))
    problems = check_linear(summary)
    d = [max(l["discrepancy_eta"], l["discrepancy_u"]) for l in summary["levels"]]
    ok = jordan <= 1e-6 and not problems and summary["t0_error"] <= 1e-8
    detail = (f"Jordan integrals max {jordan:.1e}; UT vs FEM " + ", ".join(f"{v:.2e}" for v in d)
              + f" for N={[l['N'] for l in summary['levels']]}; t=0 error {summary['t0_error']:.1e}")
    assert record_criterion(7, ok, detail), detail


def test_criterion_08_picard_oracle():
    summary = run_picard_compare(RunConfig(experiment="picard"))
    problems = check_picard(summary)
    lev = summary["levels"]
    detail = (f"T={lev[0]['T']} after {lev[0]['halvings']} halvings; max ratio "
              f"{max(l['max_ratio'] for l in lev):.3f}; discrepancy " + ", ".join(f"{l['discrepancy']:.2e}" for l in lev))
    assert record_criterion(8, not problems, detail), detail


def test_criterion_09_solitary_suite(reflection_summary):
    problems = []
    residual = max(w["residual_norm"] for ws in reflection_summary["waves"].values() for w in ws)
    n_waves = sum(len(ws) for ws in reflection_summary["waves"].values())
    if residual > 1e-10 or n_waves != 3 * len(AMPLITUDES):
        problems.append(f"residual {residual:.1e} over {n_waves} waves")
    prop_amp = prop_speed = 0.0
    waves = generate_waves(list(SYSTEMS), [0.1, 0.4, 0.7])
    for name, ws in waves.items():
        for w in ws:
            res = propagation_case(w, SYSTEMS[name](), "spline", 400)
            prop_amp = max(prop_amp, res["amplitude_error"])
            prop_speed = max(prop_speed, res["speed_error"])
    if prop_amp > 0.01 or prop_speed > 0.01:
        problems.append("propagation drift above 1%")
    spread = {}
    for name in reflection_summary["waves"]:
        cases = sorted((c for c in reflection_summary["cases"] if c["system"] == name), key=lambda c: c["A"])
        runups = [c["runup"] for c in cases]
        if any(b <= a for a, b in zip(runups, runups[1:])):
            problems.append(f"{name} runup not monotone")
        spread[name] = runups[0]
    small = list(spread.values())
    agreement = (max(small) - min(small)) / min(small)
    if agreement > 0.05:
        problems.append("A=0.1 runups differ by more than 5%")
    detail = (f"{n_waves} waves, max residual {residual:.1e}; propagation amplitude error {prop_amp:.1e}, "
              f"speed error {prop_speed:.1e}; A=0.1 runups "
              + ", ".join(f"{k}={v:.4f}" for k, v in spread.items()) + f" (spread {agreement:.2%})")
    if problems:
        detail += " | " + "; ".join(problems)
    assert record_criterion(9, not problems, detail), detail


def test_criterion_10_small_instance_oracles():
    f = lambda x: np.cos(np.pi * x) + 0.3 * x
    fx = lambda x: -np.pi * np.sin(np.pi * x) + 0.3
    g = lambda x: np.sin(np.pi * x) * (1 + x)
    gx = lambda x: np.pi * np.cos(np.pi * x) * (1 + x) + np.sin(np.pi * x)
    worst, count = 0.0, 0
    for name in FAMILIES:
        for N in range(2, 9):
            grid = make_grid(0, 1, N)
            free, zero = make_space(grid, name, FREE), make_space(grid, name, DIRICHLET)
            x, w = oracle_quadrature(free, 5)
            Vf, Df = oracle_basis(free, x), oracle_basis(free, x, 1)
            Vz, Dz = oracle_basis(zero, x), oracle_basis(zero, x, 1)
            checks = []
            for space, q in ((free, 0.0), (free, 0.375), (zero, 0.0), (zero, 1.0)):
                checks.append((assemble_Aq(space, q).toarray(), oracle_Aq(space, q)))
            Af, Az = oracle_Aq(free, 0.5), oracle_Aq(zero, 0.25)
            checks.append((l2_project(free, f).values, np.linalg.solve(oracle_Aq(free, 0), Vf.T @ (w * f(x)))))
            checks.append((elliptic_project(free, 0.5, f, fx).values,
                           np.linalg.solve(Af, Vf.T @ (w * f(x)) + 0.5 * Df.T @ (w * fx(x)))))
            checks.append((elliptic_project(zero, 0.25, g, gx).values,
                           np.linalg.solve(Az, Vz.T @ (w * g(x)) + 0.25 * Dz.T @ (w * gx(x)))))
            checks.append((apply_fh(f, cached_Aq(free, 0.5)).values, np.linalg.solve(Af, Df.T @ (w * f(x)))))
            checks.append((apply_gh(f, cached_Aq(zero, 0.25)).values, np.linalg.solve(Az, Dz.T @ (w * f(x)))))
            u = elliptic_project(zero, 1.0, g, gx)
            K = Dz.T @ (w[:, None] * Dz)
            checks.append((discrete_laplacian(u, cached_Aq(zero, 0.0)).values,
                           np.linalg.solve(oracle_Aq(zero, 0), -K @ u.values)))
            for got, want in checks:
                worst = max(worst, float(np.max(np.abs(got - want))))
                count += 1
    detail = f"{count} comparisons (A_q, projections, f_h, g_h, discrete Laplacian), max deviation {worst:.1e}"
    assert record_criterion(10, worst <= 1e-10, detail), detail
