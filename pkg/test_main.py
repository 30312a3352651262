import json
import math
import os

import pytest

from main import EXIT_INVALID, EXIT_OK, main

TINY = """\
N: 32
T: 0.005
dt: 0.0000078125
snapshots: 8
u0: parabola
xi: [1.0]
paths: 2
seed: 4
"""


def write_config(tmp_path, text):
    path = tmp_path / "experiment.yaml"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_check_weight_passes_for_heat_preset(capsys):
    assert main(["check-weight", "--preset", "heat"]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["generator"]["status"] == "pass"
    assert result["coefficients"]["all"]


def test_invalid_config_exits_with_validation_code(tmp_path, capsys):
    config = write_config(tmp_path, "lam: 0.25\nkappa: 0.2\n")
    assert main(["run", "--config", config, "--out", str(tmp_path)]) == EXIT_INVALID
    assert "kappa <= lambda" in capsys.readouterr().err


def test_parse_error_exits_with_validation_code(tmp_path, capsys):
    config = write_config(tmp_path, "lam: 0.1\n kappa: 0.3\n")
    assert main(["simulate", "--config", config]) == EXIT_INVALID
    assert "line 2" in capsys.readouterr().err


def test_tiny_run_writes_report_and_plot_data(tmp_path):
    config = write_config(tmp_path, TINY)
    out = str(tmp_path / "run")
    assert main(["run", "--config", config, "--out", out, "--workers", "1"]) == EXIT_OK
    with open(os.path.join(out, "report.json"), encoding="utf-8") as f:
        report = json.load(f)
    assert report["schema_version"] == 1
    assert report["aggregate"]["paths"] == 2
    assert os.path.exists(os.path.join(out, "run_meta.json"))
    assert os.path.exists(os.path.join(out, "paths", "path_1.csv"))
    for name in ("space_increments", "time_increments", "boundary_decay", "exponent_histograms"):
        assert os.path.exists(os.path.join(out, "plots", f"{name}.csv"))


def test_simulate_then_estimate_then_norm(tmp_path, capsys):
    config = write_config(tmp_path, TINY)
    out = str(tmp_path / "split")
    common = ["--config", config, "--out", out, "--workers", "1"]
    assert main(["simulate"] + common) == EXIT_OK
    assert main(["estimate"] + common) == EXIT_OK
    capsys.readouterr()
    assert main(["norm", "--skip-negative"] + common) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["integer_rho"]["0"] > 0.0
    assert result["dyadic"] > 0.0


def test_emit_plots_renders_png(tmp_path):
    config = write_config(tmp_path, TINY)
    out = str(tmp_path / "plots_run")
    assert main(["run", "--config", config, "--out", out, "--workers", "1"]) == EXIT_OK
    assert main(["emit-plots", "--out", out, "--png"]) == EXIT_OK
    assert os.path.exists(os.path.join(out, "plots", "boundary_decay.png"))


def test_check_weight_takes_weight_flags(capsys):
    assert main(["check-weight", "--K", "3", "--delta0", "1", "--grid", "2000"]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["K1"] == pytest.approx(4.5)
    assert 0.0 < result["c_lo"] <= result["c_hi"]
    assert result["worst"] <= 0.0


def test_check_weight_flags_a_bound_below_the_coefficients(capsys):
    assert main(["check-weight", "--K", "1", "--delta0", "1", "--grid", "2000"]) == EXIT_INVALID
    result = json.loads(capsys.readouterr().out)
    assert not result["coefficients"]["c2_bound"]


def write_parabola(tmp_path, N=128):
    path = tmp_path / "u.csv"
    lines = ["x,u"] + [f"{i / N!r},{(i / N) * (1.0 - i / N)!r}" for i in range(N + 1)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def test_norm_of_a_sampled_function(tmp_path, capsys):
    source = write_parabola(tmp_path)
    assert main(["norm", "--order", "0", "--p", "2", "--theta", "1", "--input", source]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["norm"] == pytest.approx(math.sqrt(1.0 / 30.0), rel=1e-3)
    assert main(["norm", "--order", "-0.75", "--p", "2", "--theta", "1", "--kappa", "0.25", "--input", source]) == EXIT_OK
    assert 0.0 < json.loads(capsys.readouterr().out)["norm"] < math.inf


def test_norm_rejects_order_kappa_mismatch(tmp_path):
    source = write_parabola(tmp_path)
    assert main(["norm", "--order", "-0.75", "--p", "2", "--theta", "1", "--kappa", "0.3", "--input", source]) == EXIT_INVALID


def test_norm_rejects_uneven_samples(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,u\n0.0,0.0\n0.1,0.1\n0.5,0.2\n0.7,0.1\n1.0,0.0\n", encoding="utf-8")
    assert main(["norm", "--order", "0", "--input", str(path)]) == EXIT_INVALID


def test_estimate_takes_target_flags(tmp_path):
    config = write_config(tmp_path, TINY)
    out = str(tmp_path / "sim")
    assert main(["simulate", "--config", config, "--out", out, "--workers", "1"]) == EXIT_OK
    report_file = str(tmp_path / "reports" / "report.json")
    args = ["estimate", "--config", config, "--traj-dir", os.path.join(out, "paths"), "--kappa", "0.3",
            "--lambda", "0.25", "--p", "32", "--theta", "1", "--out", report_file, "--workers", "1"]
    assert main(args) == EXIT_OK
    with open(report_file, encoding="utf-8") as f:
        report = json.load(f)
    assert report["config"]["kappa"] == 0.3
    assert report["config"]["lam"] == 0.25
    assert report["aggregate"]["paths"] == 2
