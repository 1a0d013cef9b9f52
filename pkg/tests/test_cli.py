import json
import subprocess
import sys

import pytest

from wavetank.cli import EXIT_ERROR, EXIT_OK, EXIT_THRESHOLD, main
from wavetank.config import RunConfig, parse_config
from wavetank.errors import ConfigError
from wavetank.experiments import COLUMNS, quadratic_peak, worker_count


def test_parse_config_values():
    cfg = parse_config("""
        # comment line
        family = cubic
        N = 10, 20 ,40
        T = 0.5   # trailing comment
        normalize = false
        amplitudes = 0.1, 0.2
        dt = auto
    """, "converge")
    assert cfg.family == "cubic" and cfg.N == [10, 20, 40]
    assert cfg.T == 0.5 and cfg.normalize is False and cfg.dt is None
    assert cfg.amplitudes == [0.1, 0.2]


@pytest.mark.parametrize("text", ["bogus = 1", "N = 20, 10", "T = -1", "amplitudes = 0.9", "N =", "family"])
def test_parse_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text, "converge")


def test_resolved_defaults():
    cfg = RunConfig(experiment="linear")
    assert cfg.resolved("family") == "cubic" and cfg.resolved("N") == [40, 80, 160]


def test_worker_count_respects_env(monkeypatch):
    monkeypatch.setenv("WAVETANK_THREADS", "3")
    assert worker_count(10) == 3 and worker_count(2) == 2
    monkeypatch.setenv("WAVETANK_THREADS", "1")
    assert worker_count(10) == 1


def test_quadratic_peak():
    xs = [0.0, 1.0, 2.0, 3.0]
    vs = [0.0, 0.75, 0.75, 0.0]
    x, v = quadratic_peak(xs, [1 - (x - 1.5) ** 2 for x in xs])
    assert x == pytest.approx(1.5) and v == pytest.approx(1.0)
    assert quadratic_peak(xs, vs)[0] == pytest.approx(1.5)


def run_cli(tmp_path, text, experiment="converge", check=True, name="run"):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text(text)
    out = tmp_path / name
    args = [experiment, "--config", str(cfg), "--out", str(out)]
    return main(args + (["--check"] if check else [])), out


def test_converge_outputs_and_determinism(tmp_path):
    text = "family = quadratic\nN = 10, 20\nT = 0.2\n"
    code, out = run_cli(tmp_path, text, check=False, name="a")
    assert code == EXIT_OK
    csv_a = (out / "convergence_quadratic.csv").read_text()
    assert csv_a.splitlines()[0] == ",".join(COLUMNS)
    assert csv_a.splitlines()[1].split(",")[2] == ""
    summary = json.loads((out / "converge_summary.json").read_text())
    assert summary["config"]["family"] == "quadratic" and "wall_clock" in summary
    _, out_b = run_cli(tmp_path, text, check=False, name="b")
    assert (out_b / "convergence_quadratic.csv").read_text() == csv_a


def test_check_mode_exit_code(tmp_path):
    text = "family = linear\nN = 2, 3\nT = 0.1\ndt = 0.05\n"
    code, _ = run_cli(tmp_path, text, check=True, name="bad")
    assert code == EXIT_THRESHOLD
    code, _ = run_cli(tmp_path, text, check=False, name="bad2")
    assert code == EXIT_OK


def test_bad_config_is_an_error(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "nonsense = 1\n")
    assert code == EXIT_ERROR
    assert "unknown key" in capsys.readouterr().err


def test_linear_and_picard_small(tmp_path):
    code, out = run_cli(tmp_path, "N = 20, 40\npoints = 3\nK_max = 8\n", "linear", name="lin")
    assert code == EXIT_OK
    doc = json.loads((out / "linear_summary.json").read_text())
    assert doc["levels"][1]["discrepancy_eta"] < doc["levels"][0]["discrepancy_eta"]
    code, out = run_cli(tmp_path, "N = 20, 40\nM = 60, 120\ntime_steps = 10, 20\n", "picard", name="pic")
    assert code == EXIT_OK
    assert (out / "picard_compare.csv").exists()


def test_reflect_small(tmp_path):
    text = "systems = bbm-bbm\namplitudes = 0.2, 0.3\nN = 200\ntimeseries_stride = 50\n"
    code, out = run_cli(tmp_path, text, "reflect", name="ref")
    assert code == EXIT_OK
    rows = (out / "runup.csv").read_text().splitlines()
    assert len(rows) == 3
    assert (out / "wall_timeseries.csv").exists()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "wavetank", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "converge" in res.stdout
