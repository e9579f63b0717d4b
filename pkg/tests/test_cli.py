import csv
import json
import pathlib
import subprocess
import sys

import numpy as np
import pytest

from netident.cli import run, validate_config

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"

EXPECTED = {
    "logistic.json": ("recover", 0, ["f_hat.csv", "labels.csv", "w_hat.csv", "diagnostics.json"]),
    "parametric.json": ("recover-parametric", 0, ["beta_hat.json"]),
    "cubic.json": ("recover-cubic", 0, ["theta_scan.csv", "theta_hat.json"]),
    "nonseparable.json": ("recover-nonseparable", 0, ["phi_hat.csv"]),
    "sparse.json": ("sparse-study", 0, ["sparse_fit.json"]),
    "bounded.json": ("bounded-recover", 0, ["bounded_trace.json"]),
    "equivalence.json": ("equivalence-check", 0, ["equivalence_report.json"]),
    "lambda_witness.json": ("equivalence-check", 0, ["equivalence_report.json"]),
    "simulate.json": ("simulate", 0, ["edges.csv", "nodes.csv"]),
    "bounded_infeasible.json": ("bounded-recover", 3, []),
    "bad_anchors.json": ("recover", 2, []),
}


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_every_shipped_config(name, tmp_path):
    pipeline, code, files = EXPECTED[name]
    out = tmp_path / "out"
    assert run([pipeline, "--config", str(CONFIGS / name), "--out", str(out)]) == code
    for f in files:
        assert (out / f).exists(), f
    if code == 0:
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert set(files) <= set(manifest["outputs"])
        assert len(manifest["config_sha256"]) == 64


def test_recover_outputs_and_reference(tmp_path):
    out = tmp_path / "o"
    assert run(["recover", "--config", str(CONFIGS / "logistic.json"), "--out", str(out),
                "--depth-L", "6", "--depth-M", "2"]) == 0
    f = read_csv(out / "f_hat.csv")
    assert len(f) == 8 * 64 + 1
    plot = read_csv(out / "plot_f.csv")
    assert max(float(r["abs_err"]) for r in plot) < 1e-10
    w = {(r["x1"], r["x2"]): float(r["w_hat"]) for r in read_csv(out / "w_hat.csv")}
    assert w[("0", "2")] == pytest.approx(-1 / np.log(3), abs=1e-10)
    labels = read_csv(out / "labels.csv")
    assert "a_hidden" not in labels[0]


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["recover", "--config", str(CONFIGS / "logistic.json"), "--out", str(d),
                    "--depth-L", "4", "--depth-M", "1", "--threads", "3"]) == 0
    for name in ("f_hat.csv", "labels.csv", "w_hat.csv", "diagnostics.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_reveal_latents_adds_column(tmp_path):
    out = tmp_path / "r"
    assert run(["recover", "--config", str(CONFIGS / "logistic.json"), "--out", str(out),
                "--depth-L", "3", "--depth-M", "1", "--reveal-latents"]) == 0
    rows = read_csv(out / "labels.csv")
    ln3 = np.log(3)
    for r in rows:
        assert float(r["a_hidden"]) == pytest.approx(float(r["label"]) * 2 * ln3 - ln3 / 2, abs=1e-9)


def test_alpha_override(tmp_path):
    out = tmp_path / "a"
    assert run(["recover", "--config", str(CONFIGS / "logistic.json"), "--out", str(out),
                "--depth-L", "3", "--depth-M", "1", "--alpha", "0.1"]) == 0
    f = {float(r["t"]): float(r["F_hat"]) for r in read_csv(out / "f_hat.csv")}
    assert f[0.0] == pytest.approx(0.1) and f[1.0] == pytest.approx(0.9)


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dgp": {"covariates": [0, 1]}, "unknown": 1}))
    assert run(["recover", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    bad.write_text("{not json")
    assert run(["recover", "--config", str(bad)]) == 2
    assert run(["recover", "--config", str(tmp_path / "missing.json")]) == 2
    assert run(["no-such-pipeline", "--config", str(bad)]) == 2
    mismatch = tmp_path / "mm.json"
    mismatch.write_text(json.dumps({"pipeline": "simulate", "dgp": {"covariates": [0, 1]}}))
    assert run(["recover", "--config", str(mismatch), "--out", str(tmp_path / "y")]) == 2


def test_validate_config_cross_field_rules():
    from netident.errors import UsageError
    with pytest.raises(UsageError):
        validate_config({"dgp": {"covariates": [0]}, "anchors": {"alpha": 0.4, "beta": 0.3}})
    with pytest.raises(UsageError):
        validate_config({"dgp": {"covariates": [0]}, "params": {"n_ladder": [10, 10, 100]}})


def test_identification_exit_code(tmp_path):
    cfg = json.loads((CONFIGS / "logistic.json").read_text())
    cfg["dgp"]["fixed_effects"] = {"family": "UniformLaw", "lo": -1.0, "hi": 1.0}
    path = tmp_path / "u.json"
    path.write_text(json.dumps(cfg))
    assert run(["recover", "--config", str(path), "--out", str(tmp_path / "o"),
                "--depth-L", "4", "--depth-M", "3"]) == 3


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "netident.cli", "recover", "--config",
                           str(CONFIGS / "logistic.json"), "--out", str(tmp_path / "s"),
                           "--depth-L", "3", "--depth-M", "1"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "[" in proc.stdout
