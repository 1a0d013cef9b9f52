import math

import pytest

from wavetank.experiments import (
    ConvergenceRow, check_convergence, convergence_defaults, convergence_rate, convergence_rows, mms_errors,
)


def test_rate_formula():
    assert convergence_rate(4e-2, 1e-2, 0.1, 0.05) == pytest.approx(2.0)
    assert convergence_rate(1.0, 1.0 / 16, 1.0, 0.5) == pytest.approx(4.0)


def test_rows_leave_first_rate_empty_and_skip_floor():
    rows = convergence_rows([10, 20], [(1e-2, 1e-2, 1e-1, 1e-1), (2.5e-3, 1e-11, 5e-2, 5e-2)])
    assert isinstance(rows[0], ConvergenceRow)
    assert rows[0].rate0_eta is None
    assert rows[1].rate0_eta == pytest.approx(2.0)
    assert rows[1].rate0_u is None
    assert rows[1].rate1_u == pytest.approx(1.0)


def test_defaults_per_family():
    assert convergence_defaults("linear") == (1.0, True)
    assert convergence_defaults("spline") == (2.0, False)


def test_first_row_of_linear_table():
    e = mms_errors("linear", 10, 1.0, 1e-3, True)
    assert e[0] == pytest.approx(7.4985e-3, rel=1e-3)
    assert e[1] == pytest.approx(5.7528e-2, rel=1e-3)


def test_short_linear_study_has_expected_rates():
    errs = [mms_errors("quadratic", N, 0.2, 1e-3, True) for N in (10, 20, 40)]
    rows = convergence_rows([10, 20, 40], errs)
    assert rows[-1].rate0_eta == pytest.approx(3.0, abs=0.05)
    assert rows[-1].rate1_eta == pytest.approx(2.0, abs=0.05)


def test_check_flags_wrong_rates():
    summary = {"family": "linear", "normalized": True, "rows": [
        {"N": 10, "E0_eta": 7.4985e-3, "rate0_eta": None, "E0_u": 1, "rate0_u": None, "E1_eta": 1,
         "rate1_eta": None, "E1_u": 1, "rate1_u": None},
        {"N": 20, "E0_eta": 1e-3, "rate0_eta": 1.5, "E0_u": 1, "rate0_u": 2.0, "E1_eta": 1, "rate1_eta": 1.0,
         "E1_u": 1, "rate1_u": 1.0},
    ]}
    problems = check_convergence(summary)
    assert len(problems) == 1 and "rate0_eta" in problems[0]
    assert math.isfinite(summary["rows"][0]["E0_eta"])
