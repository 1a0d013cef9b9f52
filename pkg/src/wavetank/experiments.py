"""Experiment drivers: manufactured-solution convergence, solitary-wave reflection,
and cross-checks of the FEM solver against the transform and Picard solvers.

Every driver returns a plain dict summary; the ``write_*`` helpers emit CSV
(header row, ``%.16e`` floats) and JSON files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .assembly import function_norms, norms
from .basis import Family
from .config import RunConfig
from .galerkin import GalerkinSystem, energy, evolve, initial_state, make_spaces, mass
from .greens import GridOperators, picard_solve
from .manufactured import manufactured
from .params import SYSTEMS, SystemParams
from .solitary import SolitaryWave, sample_to_fem, solitary_sweep, solve_solitary
from .transform import ContourSpec, DispersionSpec, LinearData, UnifiedTransformSolver

ERROR_FLOOR = 1e-10

# Reference errors E_0(eta) of the manufactured-solution study, keyed by (family, N).
REFERENCE_E0_ETA = {
    ("linear", 10): 7.4985e-3,
    ("linear", 640): 1.8267e-6,
    ("quadratic", 10): 1.7877e-4,
    ("spline", 10): 3.2731e-4,
}


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("WAVETANK_THREADS")
    limit = int(cap) if cap and cap.strip().isdigit() and int(cap) > 0 else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def parallel_map(func, items: list) -> list:
    """``[func(i) for i in items]`` on a process pool capped by WAVETANK_THREADS; order is preserved."""
    workers = worker_count(len(items))
    if workers == 1:
        return [func(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def convergence_rate(e1: float, e2: float, h1: float, h2: float) -> float:
    """Observed order log(e1/e2) / log(h1/h2)."""
    return math.log(e1 / e2) / math.log(h1 / h2)


def quadratic_peak(xs, vs) -> tuple[float, float]:
    """Location and value of the maximum of ``vs`` refined by a parabola through three samples."""
    xs, vs = np.asarray(xs, float), np.asarray(vs, float)
    i = int(np.argmax(vs))
    if i == 0 or i == vs.size - 1:
        return float(xs[i]), float(vs[i])
    c2, c1, c0 = np.polyfit(xs[i - 1:i + 2] - xs[i], vs[i - 1:i + 2], 2)
    if c2 >= 0:
        return float(xs[i]), float(vs[i])
    s = -c1 / (2 * c2)
    return float(xs[i] + s), float(c0 + c1 * s + c2 * s * s)


# Convergence study -------------------------------------------------------------

COLUMNS = ("N", "E0_eta", "rate0_eta", "E0_u", "rate0_u", "E1_eta", "rate1_eta", "E1_u", "rate1_u")


@dataclass
class ConvergenceRow:
    N: int
    E0_eta: float
    rate0_eta: float | None
    E0_u: float
    rate0_u: float | None
    E1_eta: float
    rate1_eta: float | None
    E1_u: float
    rate1_u: float | None


CONVERGENCE_N = {
    "linear": [10, 20, 40, 80, 160, 320, 640],
    "quadratic": [10, 20, 40, 80, 160, 320, 640],
    "cubic": [10, 20, 40, 80, 160],
    "spline": [10, 20, 40, 80, 160, 320],
}


def convergence_defaults(family: str) -> tuple[float, bool]:
    """Final time and error normalization: (1, relative) for Lagrange elements, (2, absolute) for splines."""
    return (2.0, False) if Family.parse(family).kind == "spline" else (1.0, True)


def mms_errors(family: str, N: int, T: float, dt: float, normalize: bool) -> tuple[float, float, float, float]:
    """(E0 eta, E0 u, E1 eta, E1 u) of the manufactured solution on (0, 1) at time ``T``."""
    sol = manufactured()
    p = sol.params
    se, su = make_spaces(0.0, 1.0, N, family)
    st = initial_state(se, su, p, lambda x: sol.eta(x, 0), lambda x: sol.eta_x(x, 0),
                       lambda x: sol.u(x, 0), lambda x: sol.u_x(x, 0))
    fin, _ = evolve(st, T, dt, GalerkinSystem(se, su, p, sol.forcing))
    ex = (lambda x: sol.eta(x, T), lambda x: sol.eta_x(x, T))
    ux = (lambda x: sol.u(x, T), lambda x: sol.u_x(x, T))
    e0, e1 = norms(fin.eta, *ex)
    u0, u1 = norms(fin.u, *ux)
    if normalize:
        ne0, ne1 = function_norms(se, *ex)
        nu0, nu1 = function_norms(se, *ux)
        e0, e1, u0, u1 = e0 / ne0, e1 / ne1, u0 / nu0, u1 / nu1
    return e0, u0, e1, u1


def _mms_task(args):
    return mms_errors(*args)


def convergence_rows(Ns, errors) -> list[ConvergenceRow]:
    rows = []
    for i, (N, err) in enumerate(zip(Ns, errors)):
        rates = [None] * 4
        if i:
            prev = errors[i - 1]
            for j in range(4):
                if min(prev[j], err[j]) > ERROR_FLOOR:
                    rates[j] = convergence_rate(prev[j], err[j], 1.0 / Ns[i - 1], 1.0 / N)
        rows.append(ConvergenceRow(N, err[0], rates[0], err[1], rates[1], err[2], rates[2], err[3], rates[3]))
    return rows


def run_convergence(cfg: RunConfig) -> dict:
    family = Family.parse(cfg.resolved("family")).label
    Ns = cfg.N or CONVERGENCE_N.get(family, CONVERGENCE_N["linear"])
    T_default, norm_default = convergence_defaults(family)
    T = cfg.T if cfg.T is not None else T_default
    normalize = cfg.normalize if cfg.normalize is not None else norm_default
    cap = cfg.dt_cap if cfg.dt_cap is not None else 1e-3
    dts = [cfg.dt if cfg.dt is not None else min(cfg.dt_factor / N, cap) for N in Ns]
    start = time.perf_counter()
    errors = parallel_map(_mms_task, [(family, N, T, dt, normalize) for N, dt in zip(Ns, dts)])
    rows = convergence_rows(Ns, errors)
    return {
        "experiment": "converge", "family": family, "T": T, "normalized": normalize,
        "dt": dts, "rows": [asdict(r) for r in rows], "wall_clock": time.perf_counter() - start,
    }


def check_convergence(summary: dict) -> list[str]:
    """Threshold violations of a convergence summary."""
    family = summary["family"]
    fam = Family.parse(family)
    rows = summary["rows"]
    problems = []
    for row in rows:
        ref = REFERENCE_E0_ETA.get((family, row["N"]))
        if ref is not None and summary["normalized"] == (fam.kind != "spline"):
            if abs(row["E0_eta"] - ref) > 0.05 * ref:
                problems.append(f"E0(eta) at N={row['N']} is {row['E0_eta']:.4e}, reference {ref:.4e}")
    expected = {"rate0_eta": fam.degree + 1, "rate0_u": fam.degree + 1, "rate1_eta": fam.degree, "rate1_u": fam.degree}
    tolerance = {"rate0_eta": 0.02, "rate0_u": 0.02, "rate1_eta": 0.02, "rate1_u": 0.02}
    if fam.kind == "lagrange" and fam.degree == 3:
        tolerance.update(rate0_eta=0.05, rate0_u=0.05)
    for key, target in expected.items():
        rates = [r[key] for r in rows if r[key] is not None]
        if not rates:
            problems.append(f"no {key} available")
            continue
        last = rates[-1]
        if fam.kind == "spline":
            lo, hi = target - (0.02 if key.startswith("rate0") else 0.03), target + 0.02
        else:
            lo, hi = target - tolerance[key], target + tolerance[key]
        if not lo <= last <= hi:
            problems.append(f"{key} at the finest pair is {last:.4f}, expected [{lo:.2f}, {hi:.2f}]")
    return problems


# Solitary waves and reflection -------------------------------------------------

def peak_tracker(space, h: float):
    """Callable returning the (position, value) of the eta maximum on a grid of spacing ``h``."""
    g = space.grid
    xs = np.arange(g.x_min, g.x_max + 0.5 * h, h)
    E = space.evaluation_matrix(xs)

    def peak(state):
        return quadratic_peak(xs, E @ state.eta.values)

    return peak


def reflection_case(wave: SolitaryWave, params: SystemParams, family: str, N: int, domain: float = 50.0,
                    dt: float | None = None, dt_factor: float = 0.1, T: float | None = None,
                    stride: int = 1, sample_every: float = 1.0, extra_time: float = 20.0) -> dict:
    """Wave centred at 0 on [-domain, domain] running into the wall at ``domain`` and back."""
    se, su = make_spaces(-domain, domain, N, family)
    h = 2 * domain / N
    dt = dt if dt is not None else dt_factor * h
    T = T if T is not None else 2 * domain / wave.c_s + extra_time
    t_pre = 0.5 * domain / wave.c_s
    state = sample_to_fem(wave, 0.0, se, su, params)
    system = GalerkinSystem(se, su, params)
    wall = se.evaluation_matrix(np.array([domain]))
    n = se.dof_count
    times, values = [state.t], [float((wall @ state.eta.values)[0])]

    def on_step(t, y):
        times.append(t)
        values.append(float((wall @ y[:n])[0]))

    samples = sorted(set(np.arange(sample_every, T, sample_every).tolist()) | {t_pre})
    peak = peak_tracker(se, h / 4)
    observers = {"mass": lambda s: mass(s)[0], "energy": lambda s: energy(s, params),
                 "peak": lambda s: peak(s)[1]}
    start = time.perf_counter()
    final, traj = evolve(state, T, dt, system, observers=observers, sample_times=samples, on_step=on_step)
    wall_clock = time.perf_counter() - start
    i_pre = int(np.argmin(np.abs(np.array(traj.times) - t_pre)))
    m = np.array(traj.samples["mass"])
    e = np.array(traj.samples["energy"])
    t_runup, runup = quadratic_peak(times, values)
    x_post, a_post = peak(final)
    return {
        "A": wave.A, "c_s": wave.c_s, "N": N, "dt": dt, "T": T,
        "runup": runup, "runup_time": t_runup,
        "pre_amplitude": traj.samples["peak"][i_pre],
        "post_amplitude": a_post, "post_position": x_post,
        "mass_drift": float(np.max(np.abs(m - m[0])) / abs(m[0])),
        "energy_drift": float(np.max(np.abs(e - e[0])) / abs(e[0])),
        "wall_clock": wall_clock,
        "wall_series": (np.asarray(times)[::stride].tolist(), np.asarray(values)[::stride].tolist()),
    }


def propagation_case(wave: SolitaryWave, params: SystemParams, family: str, N: int, domain: float = 50.0,
                     T: float = 10.0, dt_factor: float = 0.1) -> dict:
    """Peak amplitude and mean peak speed of a wave evolved for ``T`` time units."""
    se, su = make_spaces(-domain, domain, N, family)
    h = 2 * domain / N
    state = sample_to_fem(wave, 0.0, se, su, params)
    system = GalerkinSystem(se, su, params)
    peak = peak_tracker(se, h / 4)
    x0, a0 = peak(state)
    final, _ = evolve(state, T, dt_factor * h, system)
    x1, a1 = peak(final)
    return {"A": wave.A, "c_s": wave.c_s, "initial_amplitude": a0, "amplitude": a1,
            "speed": (x1 - x0) / T, "amplitude_error": abs(a1 - wave.A) / wave.A,
            "speed_error": abs((x1 - x0) / T - wave.c_s) / wave.c_s}


def _reflection_task(args):
    system, wave_doc, family, N, domain, dt, dt_factor, stride = args
    wave = SolitaryWave.from_dict(wave_doc)
    out = reflection_case(wave, SYSTEMS[system](), family, N, domain, dt, dt_factor, stride=stride)
    out["system"] = system
    return out


def generate_waves(systems, amplitudes, ell: float = 50.0, M: int = 1024) -> dict:
    """Solitary waves per system, solved with amplitude continuation."""
    waves = {}
    for name in systems:
        params = SYSTEMS[name]()
        if params.a == 0:
            waves[name] = [solve_solitary(A, params, ell, M) for A in sorted(amplitudes)]
        else:
            waves[name] = solitary_sweep(amplitudes, params, ell, M)
    return waves


def run_reflection(cfg: RunConfig) -> dict:
    family = Family.parse(cfg.resolved("family")).label
    N = cfg.resolved("N")[-1]
    start = time.perf_counter()
    waves = generate_waves(cfg.systems, cfg.amplitudes, cfg.ell, cfg.modes)
    tasks = [(name, w.to_dict(), family, N, cfg.domain, cfg.dt, cfg.dt_factor, cfg.timeseries_stride)
             for name in cfg.systems for w in waves[name]]
    cases = parallel_map(_reflection_task, tasks)
    cases.sort(key=lambda c: (cfg.systems.index(c["system"]), c["A"]))
    return {
        "experiment": "reflect", "family": family, "N": N, "domain": cfg.domain,
        "waves": {name: [{"A": w.A, "c_s": w.c_s, "residual_norm": w.residual_norm} for w in ws]
                  for name, ws in waves.items()},
        "cases": cases, "wall_clock": time.perf_counter() - start,
    }


def check_reflection(summary: dict) -> list[str]:
    problems = []
    by_system = {}
    for case in summary["cases"]:
        by_system.setdefault(case["system"], []).append(case)
        if case["mass_drift"] > 1e-12:
            problems.append(f"{case['system']} A={case['A']}: mass drift {case['mass_drift']:.2e}")
    for name, waves in summary["waves"].items():
        for w in waves:
            if w["residual_norm"] > 1e-10:
                problems.append(f"{name} A={w['A']}: residual {w['residual_norm']:.2e}")
    for name, cases in by_system.items():
        runups = [c["runup"] for c in sorted(cases, key=lambda c: c["A"])]
        if any(b <= a for a, b in zip(runups, runups[1:])):
            problems.append(f"{name}: runup is not increasing in amplitude")
    small = [c["runup"] for c in summary["cases"] if abs(c["A"] - 0.1) < 1e-12]
    if len(small) > 1 and (max(small) - min(small)) > 0.05 * min(small):
        problems.append("runups at A=0.1 differ by more than 5%")
    return problems


# Cross-checks ---------------------------------------------------------------------

def gaussian(amplitude: float, width: float):
    def f(x):
        x = np.asarray(x, dtype=float)
        return amplitude * np.exp(-(x / width) ** 2)

    def fx(x):
        x = np.asarray(x, dtype=float)
        return -2 * x / width**2 * amplitude * np.exp(-(x / width) ** 2)

    return f, fx


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _fem_linear_task(args):
    params, L, N, family, T, dt_factor, xs, times, amplitude, width = args
    f, fx = gaussian(amplitude, width)
    se, su = make_spaces(-L, L, N, family)
    st = initial_state(se, su, params, f, fx, _zero, _zero)
    system = GalerkinSystem(se, su, params, linear=True)
    h = 2 * L / N
    _, traj = evolve(st, T, dt_factor * h, system, observers={"eta": lambda s: s.eta(xs), "u": lambda s: s.u(xs)},
                     sample_times=times)
    keep = [i for i, t in enumerate(traj.times) if any(abs(t - s) < 1e-12 for s in times)]
    return np.array([traj.samples["eta"][i] for i in keep]), np.array([traj.samples["u"][i] for i in keep])


def run_linear_compare(cfg: RunConfig) -> dict:
    """Sup discrepancy between the transform solution and linearized FEM runs."""
    params = cfg.params()
    L = cfg.L
    T = cfg.resolved("T")
    Ns = cfg.resolved("N")
    family = Family.parse(cfg.resolved("family")).label
    f, _ = gaussian(cfg.amplitude, cfg.width)
    xs = np.linspace(-0.9 * L, 0.9 * L, cfg.points)
    times = [0.5 * T, T]
    start = time.perf_counter()
    spec = DispersionSpec.from_params(params, L)
    solver = UnifiedTransformSolver(LinearData(f, _zero), spec, ContourSpec(L, K_max=cfg.K_max), tol=cfg.ut_tol)
    ut_eta, ut_u, imag = np.zeros((2, xs.size)), np.zeros((2, xs.size)), 0.0
    for i, t in enumerate(times):
        for j, x in enumerate(xs):
            ve, vu = solver.evaluate(x, t, "eta"), solver.evaluate(x, t, "u")
            ut_eta[i, j], ut_u[i, j] = ve.value, vu.value
            imag = max(imag, abs(ve.imag), abs(vu.imag))
    t0_error = max(abs(solver.evaluate(x, 0.0, "eta").value - float(f(x))) for x in xs)
    fem = parallel_map(_fem_linear_task, [(params, L, N, family, T, cfg.dt_factor, xs, times, cfg.amplitude,
                                           cfg.width) for N in Ns])
    levels = []
    for N, (fe, fu) in zip(Ns, fem):
        levels.append({"N": N, "discrepancy_eta": float(np.max(np.abs(fe - ut_eta))),
                       "discrepancy_u": float(np.max(np.abs(fu - ut_u)))})
    return {"experiment": "linear", "params": params.to_dict(), "L": L, "T": T, "family": family,
            "points": xs.tolist(), "times": times, "levels": levels, "t0_error": t0_error,
            "max_imaginary": imag, "wall_clock": time.perf_counter() - start}


def check_linear(summary: dict) -> list[str]:
    problems = []
    d = [max(l["discrepancy_eta"], l["discrepancy_u"]) for l in summary["levels"]]
    if any(b >= a for a, b in zip(d, d[1:])):
        problems.append("transform vs FEM discrepancy is not decreasing under refinement")
    if d and d[-1] > 1e-4:
        problems.append(f"finest discrepancy {d[-1]:.2e} exceeds 1e-4")
    return problems


def run_picard_compare(cfg: RunConfig) -> dict:
    """Picard fixed point against nonlinear FEM runs under joint refinement."""
    params = cfg.params()
    L = cfg.L
    Ns = cfg.resolved("N")
    family = Family.parse(cfg.resolved("family")).label
    if not len(Ns) == len(cfg.M):
        raise ValueError("N, M and time_steps must have equal length for joint refinement")
    f, fx = gaussian(cfg.amplitude, cfg.width)
    start = time.perf_counter()
    T = cfg.resolved("T")
    levels = []
    for i, (N, M, steps) in enumerate(zip(Ns, cfg.M, cfg.time_steps)):
        ops = GridOperators(L, M, params.b, params.d)
        res = picard_solve(f(ops.x), np.zeros(M), T, steps, params, L, ops=ops, auto_halve=(i == 0))
        T = res.T
        se, su = make_spaces(-L, L, N, family)
        st = initial_state(se, su, params, f, fx, _zero, _zero)
        h = 2 * L / N
        fin, _ = evolve(st, T, min(cfg.dt_factor * h, T / steps), GalerkinSystem(se, su, params))
        levels.append({
            "N": N, "M": M, "time_steps": steps, "T": T, "iterations": res.iterations,
            "halvings": res.halvings, "max_ratio": max(res.ratios) if res.ratios else 0.0,
            "ratios": res.ratios,
            "discrepancy": float(max(np.max(np.abs(fin.eta(ops.x) - res.eta[-1])),
                                     np.max(np.abs(fin.u(ops.x) - res.u[-1])))),
        })
    return {"experiment": "picard", "params": params.to_dict(), "L": L, "family": family,
            "levels": levels, "wall_clock": time.perf_counter() - start}


def check_picard(summary: dict) -> list[str]:
    problems = []
    for lev in summary["levels"]:
        if lev["max_ratio"] > 0.95:
            problems.append(f"contraction ratio {lev['max_ratio']:.3f} above 0.95 at M={lev['M']}")
    d = [lev["discrepancy"] for lev in summary["levels"]]
    if any(b >= a for a, b in zip(d, d[1:])):
        problems.append("Picard vs FEM discrepancy is not decreasing under joint refinement")
    return problems


# Output --------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "%.16e" % v
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=float)


def write_outputs(summary: dict, cfg: RunConfig, out: Path, problems: list[str]) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    kind = summary["experiment"]
    written = []
    doc = dict(summary)
    if kind == "converge":
        path = out / f"convergence_{summary['family']}.csv"
        write_csv(path, COLUMNS, [[row[c] for c in COLUMNS] for row in summary["rows"]])
        written.append(path)
    elif kind == "reflect":
        path = out / "runup.csv"
        cols = ("system", "A", "c_s", "runup", "runup_time", "post_amplitude", "mass_drift", "energy_drift")
        write_csv(path, cols, [[c[k] for k in cols] for c in summary["cases"]])
        series = out / "wall_timeseries.csv"
        rows = [[c["system"], c["A"], t, v] for c in summary["cases"] for t, v in zip(*c["wall_series"])]
        write_csv(series, ("system", "A", "t", "eta_wall"), rows)
        written += [path, series]
        doc["cases"] = [{k: v for k, v in c.items() if k != "wall_series"} for c in summary["cases"]]
    elif kind == "linear":
        path = out / "linear_compare.csv"
        write_csv(path, ("N", "discrepancy_eta", "discrepancy_u"),
                  [[l["N"], l["discrepancy_eta"], l["discrepancy_u"]] for l in summary["levels"]])
        written.append(path)
    elif kind == "picard":
        path = out / "picard_compare.csv"
        write_csv(path, ("N", "M", "time_steps", "T", "iterations", "max_ratio", "discrepancy"),
                  [[l["N"], l["M"], l["time_steps"], l["T"], l["iterations"], l["max_ratio"], l["discrepancy"]]
                   for l in summary["levels"]])
        written.append(path)
    doc["config"] = cfg.to_dict()
    doc["violations"] = problems
    summary_path = out / f"{kind}_summary.json"
    write_json(summary_path, doc)
    written.append(summary_path)
    return written


RUNNERS = {
    "converge": (run_convergence, check_convergence),
    "reflect": (run_reflection, check_reflection),
    "linear": (run_linear_compare, check_linear),
    "picard": (run_picard_compare, check_picard),
}
