import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavetank.assembly import Coefficients
from wavetank.basis import FREE, make_grid, make_space
from wavetank.errors import NonFiniteStateError, SpaceMismatchError
from wavetank.galerkin import (
    GalerkinSystem, State, energy, eval_solution, evolve, initial_state, load_state, make_spaces, mass,
    rk4_step, save_state, semidiscrete_rhs, zero_state,
)
from wavetank.manufactured import manufactured
from wavetank.params import SystemParams, bbm_bbm, original_nwogu, regularized_nwogu


def gaussian(x):
    return 0.1 * np.exp(-np.asarray(x) ** 2)


def gaussian_x(x):
    return -0.2 * np.asarray(x) * np.exp(-np.asarray(x) ** 2)


def zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def test_params_presets():
    p = regularized_nwogu()
    assert (p.a, p.b, p.d) == pytest.approx((-5 / 12, 3 / 8, 3 / 8))
    q = original_nwogu()
    assert (q.a, q.b, q.d) == pytest.approx((-1 / 24, 0.0, 3 / 8))
    assert bbm_bbm().kind == "bbm-bbm"
    with pytest.raises(ValueError):
        SystemParams(0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        SystemParams(-1.0, 1.0, 0.0)


def test_state_requires_matching_spaces():
    g1, g2 = make_grid(0, 1, 4), make_grid(0, 1, 5)
    eta = Coefficients(make_space(g1, "linear"), np.zeros(5))
    u_bad_grid = Coefficients(make_space(g2, "linear", "dirichlet"), np.zeros(4))
    with pytest.raises(SpaceMismatchError):
        State(eta, u_bad_grid)
    u_free = Coefficients(make_space(g1, "linear", FREE), np.zeros(5))
    with pytest.raises(SpaceMismatchError):
        State(eta, u_free)


def test_zero_state_is_steady(family):
    se, su = make_spaces(-5, 5, 10, family)
    de, du = semidiscrete_rhs(zero_state(se, su), regularized_nwogu())
    assert np.all(de == 0) and np.all(du == 0)


def test_rk4_is_fourth_order():
    def f(t, y):
        return -y

    errs = []
    for n in (10, 20):
        y = np.array([1.0])
        for _ in range(n):
            y = rk4_step(y, 1.0 / n, f)
        errs.append(abs(y[0] - np.exp(-1)))
    assert 15 < errs[0] / errs[1] < 17


def test_rk4_rejects_non_finite():
    with pytest.raises(NonFiniteStateError):
        rk4_step(np.array([1.0]), 0.1, lambda t, y: np.array([np.inf]))


def test_evolve_lands_on_final_time_and_samples():
    se, su = make_spaces(-5, 5, 20, "linear")
    p = bbm_bbm()
    st0 = initial_state(se, su, p, gaussian, gaussian_x, zero, zero)
    final, traj = evolve(st0, 0.35, 0.1, GalerkinSystem(se, su, p), observers={"m": lambda s: mass(s)[0]},
                         sample_times=[0.15])
    assert final.t == 0.35
    assert traj.times == pytest.approx([0.0, 0.15, 0.35])


@pytest.mark.parametrize("params", [regularized_nwogu(), original_nwogu(), bbm_bbm()], ids=["reg", "nwogu", "bbm"])
def test_mass_is_conserved(params, family):
    se, su = make_spaces(-10, 10, 20, family)
    st0 = initial_state(se, su, params, gaussian, gaussian_x, zero, zero)
    final, _ = evolve(st0, 2.0, 0.1, GalerkinSystem(se, su, params))
    m0, m1 = mass(st0)[0], mass(final)[0]
    assert abs(m1 - m0) <= 1e-12 * abs(m0)


def test_energy_drift_shrinks_under_refinement_for_b_equal_d():
    p = regularized_nwogu()
    drifts = []
    for N in (60, 120):
        se, su = make_spaces(-15, 15, N, "cubic")
        st0 = initial_state(se, su, p, gaussian, gaussian_x, zero, zero)
        final, _ = evolve(st0, 3.0, 3.0 / N, GalerkinSystem(se, su, p))
        e0 = energy(st0, p)
        drifts.append(abs(energy(final, p) - e0) / e0)
    assert drifts[0] < 1e-5
    assert drifts[1] < drifts[0] / 8


def test_symmetric_data_stay_symmetric():
    p = regularized_nwogu()
    se, su = make_spaces(-5, 5, 20, "quadratic")
    st0 = initial_state(se, su, p, gaussian, gaussian_x, zero, zero)
    final, _ = evolve(st0, 1.0, 0.05, GalerkinSystem(se, su, p))
    x = np.linspace(0, 5, 11)
    eta, u = eval_solution(final, x)
    eta_m, u_m = eval_solution(final, -x)
    np.testing.assert_allclose(eta, eta_m, atol=1e-13)
    np.testing.assert_allclose(u, -u_m, atol=1e-13)


def test_linear_flag_drops_nonlinear_terms():
    p = regularized_nwogu()
    se, su = make_spaces(-5, 5, 10, "linear")
    st0 = initial_state(se, su, p, gaussian, gaussian_x, zero, zero)
    lin = GalerkinSystem(se, su, p, linear=True)
    full = GalerkinSystem(se, su, p)
    y = st0.vector
    # with u = 0 the nonlinear terms of the eta equation vanish but u_t differs by eta-independent 0.5 u^2 = 0
    np.testing.assert_allclose(lin(0, y), full(0, y), atol=1e-15)
    y2 = y + 0.05
    y2[: se.dof_count] = y[: se.dof_count]
    assert np.max(np.abs(lin(0, y2) - full(0, y2))) > 1e-6


def test_save_load_round_trip(tmp_path, family):
    p = bbm_bbm()
    se, su = make_spaces(-2, 3, 6, family)
    st0 = initial_state(se, su, p, gaussian, gaussian_x, zero, zero, t0=0.25)
    path = tmp_path / "state.json"
    save_state(path, st0, p)
    back, params = load_state(path)
    assert params == p and back.t == 0.25
    np.testing.assert_array_equal(back.vector, st0.vector)


def test_manufactured_forcing_separates():
    sol = manufactured()
    f = sol.forcing
    x = np.linspace(0, 1, 7)
    for t in (0.0, 0.7):
        np.testing.assert_allclose(sum(T(t) * X(x) for T, X in f.eta_terms), sol.s_eta(x, t), atol=1e-11)
        np.testing.assert_allclose(sum(T(t) * X(x) for T, X in f.u_terms), sol.s_u(x, t), atol=1e-11)


@settings(max_examples=20, deadline=None)
@given(x=st.floats(0.05, 0.95), t=st.floats(0.0, 1.0))
def test_manufactured_derivatives_match_finite_differences(x, t):
    sol = manufactured()
    h = 1e-5
    assert sol.u_x(x, t) == pytest.approx((sol.u(x + h, t) - sol.u(x - h, t)) / (2 * h), abs=1e-7)
    assert sol.u_xx(x, t) == pytest.approx((sol.u_x(x + h, t) - sol.u_x(x - h, t)) / (2 * h), abs=1e-6)
    assert sol.eta_x(x, t) == pytest.approx((sol.eta(x + h, t) - sol.eta(x - h, t)) / (2 * h), abs=1e-6)


def test_manufactured_fields_satisfy_wall_conditions():
    sol = manufactured()
    ends = np.array([0.0, 1.0])
    for t in (0.0, 1.3):
        assert np.abs(sol.u(ends, t)).max() < 1e-14
        assert np.abs(sol.u_xx(ends, t)).max() < 1e-12
        assert np.abs(sol.eta_x(ends, t)).max() < 1e-12
