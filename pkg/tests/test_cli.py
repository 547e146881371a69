import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from l1seg import io as lio
from l1seg.cli import main
from l1seg.core import InputError
from l1seg.synth import generate, scenario
from l1seg.tvdenoise import lambda_max_mean


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def csv_file(tmp_path, rng):
    def make(values, name="data.csv", header=None):
        path = tmp_path / name
        text = lio.emit_csv(values)
        if header:
            text = header + "\n" + text
        path.write_text(text)
        return str(path)
    return make


def test_synth_is_deterministic(capsys):
    _, a, _ = run(["synth", "--scenario", "paper4", "--seed", "1"], capsys)
    _, b, _ = run(["synth", "--scenario", "paper4", "--seed", "1"], capsys)
    assert a == b
    assert len(a.strip().splitlines()) == 1000


def test_synth_via_subprocess_is_byte_identical():
    cmd = [sys.executable, "-m", "l1seg", "synth", "--scenario", "paper4", "--seed", "7"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and a.count(b"\n") == 1000


def test_unknown_scenario_exit_2(capsys):
    code, _, err = run(["synth", "--scenario", "nope"], capsys)
    assert code == 2 and "unknown scenario" in err


def test_paper4_segment_variances_monte_carlo():
    # 250-sample variance estimates: sd = s2 * sqrt(2/250) ~ 0.09 s2, so 25% is ~2.8 sd
    sc = scenario("paper4")
    ok = 0
    for seed in range(200):
        y = generate("paper4", seed, sc)
        est = [np.mean(y[a:a + 250] ** 2) for a in (0, 250, 500, 750)]
        ok += all(abs(e - t) <= 0.25 * t for e, t in zip(est, (2, 1, 3, 1)))
    assert ok >= 0.95 * 200


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 4)),
              elements=st.floats(-1e12, 1e12)))
def test_csv_round_trip(a):
    np.testing.assert_array_equal(lio.parse_csv(lio.emit_csv(a)), a)


def test_generated_file_round_trip(capsys):
    _, text, _ = run(["synth", "--scenario", "joint-steps", "--seed", "3"], capsys)
    np.testing.assert_array_equal(lio.parse_csv(text)[:, 0], generate("joint-steps", 3))


def test_header_detection_and_errors():
    np.testing.assert_array_equal(lio.parse_csv("y\n1\n2\n")[:, 0], [1.0, 2.0])
    with pytest.raises(InputError, match="row 3, column 2"):
        lio.parse_csv("a,b\n1,2\n3,x\n")
    with pytest.raises(InputError, match="row 2"):
        lio.parse_csv("1,2\n3\n")


def test_malformed_input_exit_2(csv_file, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("y\n1.0\nfoo\n")
    code, _, err = run(["mean", str(bad), "--lambda", "1"], capsys)
    assert code == 2 and "row 3, column 1" in err
    code, _, _ = run(["mean", str(tmp_path / "missing.csv"), "--lambda", "1"], capsys)
    assert code == 2


def test_mean_above_threshold_is_constant(csv_file, rng, capsys):
    y = rng.standard_normal(120)
    code, out, _ = run(["mean", csv_file(y), "--lambda-rel", "2.0"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["lambda"] == pytest.approx(2 * lambda_max_mean(y))
    np.testing.assert_allclose(doc["levels"], y.mean(), atol=1e-12)
    assert doc["changepoints"] == [] and len(doc["segments"]) == 1
    for key in ("n", "lambda", "lambda_max", "levels", "changepoints", "segments", "objective",
                "iterations", "kkt_residual", "solver_name"):
        assert key in doc


def test_var_zero_penalty_returns_squares(csv_file, rng, capsys):
    y = rng.standard_normal(50)
    code, out, _ = run(["var", csv_file(y, header="y"), "--lambda-rel", "0"], capsys)
    assert code == 0
    np.testing.assert_array_equal(json.loads(out)["levels"], y**2)


def test_segments_carry_refit_levels(csv_file, capsys):
    code, out, _ = run(["mean", csv_file(np.array([0.0, 0, 4, 4])), "--lambda", "1"], capsys)
    doc = json.loads(out)
    assert doc["changepoints"] == [2]
    assert doc["segments"] == [
        {"start": 1, "end": 2, "level": pytest.approx(0.5), "refit_level": 0.0},
        {"start": 3, "end": 4, "level": pytest.approx(3.5), "refit_level": 4.0},
    ]


@pytest.mark.parametrize("cmd", ["mean", "var"])
def test_oracle_solver_agrees_with_default(cmd, csv_file, rng, capsys):
    for _ in range(5):
        y = rng.standard_normal(int(rng.integers(10, 200)))
        path = csv_file(y)
        _, a, _ = run([cmd, path, "--lambda-rel", "0.2"], capsys)
        _, b, _ = run([cmd, path, "--lambda-rel", "0.2", "--solver", "oracle"], capsys)
        np.testing.assert_allclose(json.loads(a)["levels"], json.loads(b)["levels"], atol=1e-5)


def test_synth_input_records_seed(capsys):
    code, out, _ = run(["var", "--synth", "paper4", "--seed", "5", "--lambda-rel", "0.3"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["seed"] == 5 and doc["n"] == 1000


def test_emit_plot_and_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("L1SEG_OUTPUT_DIR", str(tmp_path / "outdir"))
    code, _, _ = run(["var", "--synth", "paper4", "--seed", "2", "--lambda-rel", "0.3",
                      "-o", "res.json", "--emit-plot", "fig.csv"], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "outdir" / "res.json").read_text())
    table = lio.parse_csv((tmp_path / "outdir" / "fig.csv").read_text())
    assert table.shape == (1000, 4)
    np.testing.assert_array_equal(table[:, 0], np.arange(1, 1001))
    np.testing.assert_array_equal(table[:, 2], doc["levels"])
    np.testing.assert_array_equal(table[:, 3], scenario("paper4").variance)


def test_var_centering_and_winsorizing(csv_file, rng, capsys):
    y = rng.standard_normal(100) + 5.0
    _, a, _ = run(["var", csv_file(y), "--lambda-rel", "0", "--center", "mean"], capsys)
    np.testing.assert_allclose(json.loads(a)["levels"], (y - y.mean()) ** 2, atol=1e-12)
    _, b, _ = run(["var", csv_file(y), "--lambda-rel", "0", "--center", "mean", "--winsorize", "0.9"], capsys)
    cap = np.quantile(np.abs(y - y.mean()), 0.9)
    assert max(json.loads(b)["levels"]) <= cap**2 + 1e-12


def test_path_single_and_zero(csv_file, rng, capsys):
    y = rng.standard_normal(60)
    path = csv_file(y)
    _, out, _ = run(["path", "mean", path, "--grid-rel", "1.0"], capsys)
    doc = json.loads(out)
    assert len(doc["results"]) == 1 and doc["summary"][0]["n_changepoints"] == 0
    _, out, _ = run(["path", "mean", path, "--grid", "0"], capsys)
    doc = json.loads(out)
    assert doc["summary"][0]["n_changepoints"] <= len(np.unique(y)) - 1
    np.testing.assert_array_equal(doc["results"][0]["levels"], y)


def test_path_default_grid_and_empty_grid(csv_file, rng, capsys):
    path = csv_file(rng.standard_normal(80))
    code, out, _ = run(["path", "var", path], capsys)
    doc = json.loads(out)
    assert code == 0 and len(doc["summary"]) == 20 and "changepoints_monotone" in doc
    code, _, err = run(["path", "var", path, "--grid", ""], capsys)
    assert code == 2 and "empty" in err


def test_joint_command(capsys):
    code, out, _ = run(["joint", "--synth", "joint-steps", "--seed", "1",
                        "--lambda1-rel", "0.2", "--lambda2-rel", "0.2"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert set(doc["levels"]) == {"mean", "variance", "mu", "eta"}
    assert min(doc["levels"]["variance"]) > 0


def test_joint_zero_penalty_exit_2(csv_file, rng, capsys):
    code, _, err = run(["joint", csv_file(rng.standard_normal(20)), "--lambda1", "0", "--lambda2", "1"], capsys)
    assert code == 2 and "zero penalty" in err


def test_joint_threshold_command(csv_file, rng, capsys):
    y = rng.normal(0, 1, 40)
    code, out, _ = run(["joint-threshold", csv_file(y), "--which", "mu", "--other", "1e4",
                        "--rel-tol", "1e-2"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["method"] == "numerical bisection"
    assert doc["threshold"] == pytest.approx(lambda_max_mean(y), rel=2e-2)


def test_cov_command(capsys):
    code, out, _ = run(["cov", "--synth", "cov-steps", "--seed", "0", "--lambda", "20"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["dim"] == 3
    mats = np.array(doc["levels"])
    assert mats.shape == (200, 3, 3)
    code, _, _ = run(["cov", "--synth", "cov-steps", "--lambda-rel", "0.5"], capsys)
    assert code == 2


def test_nonconvergence_exit_3(csv_file, rng, capsys):
    y = np.concatenate([rng.normal(0, 1, 40), rng.normal(2, 3, 40)])
    code, out, _ = run(["joint", csv_file(y), "--lambda1", "1", "--lambda2", "1", "--max-iter", "3"], capsys)
    doc = json.loads(out)
    assert code == 3 and doc["converged"] is False and doc["kkt_residual"] > 0
