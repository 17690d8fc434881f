"""Smoke tests for the rbnlab CLI and the Python module."""

import csv
import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[2]
CLI = os.environ.get("RBN_CLI") or shutil.which("rbnlab")
PYDIR = os.environ.get("RBN_PYMODULE_DIR")

needs_cli = pytest.mark.skipif(not CLI, reason="rbnlab executable not available")


def run(*args):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, timeout=600)


def header_lines(path):
    comments, rows = [], []
    with open(path, newline="") as f:
        for line in f:
            if line.startswith("#"):
                comments.append(line)
            else:
                rows.append(line)
    return comments, next(csv.reader(rows[:1]))


@needs_cli
def test_regime_table_run(tmp_path):
    res = run("regime_table", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["config_hash"]) == 64
    assert report["seed"] == 1
    assert report["version"]
    _, header = header_lines(tmp_path / "regime_table.csv")
    assert header[:2] == ["d", "h_num"] and header[-1] == "verdict"


@needs_cli
def test_counterexample_csv_headers(tmp_path):
    res = run("counterexample_sweep", "--out", tmp_path, "--paths", 4, "--steps", 1024, "--seed", 3)
    assert res.returncode == 0, res.stderr
    comments, header = header_lines(tmp_path / "excursions_alpha1.csv")
    assert header == ["eps", "t_prime", "t_doubleprime", "K_hat", "verdict"]
    assert any("kind=ExcursionReport" in c for c in comments)
    assert json.loads((tmp_path / "report.json").read_text())["seed"] == 3


@needs_cli
def test_fbm_path_csv_header(tmp_path):
    res = run("fbm_validate", "--out", tmp_path, "--paths", 16, "--steps", 64)
    assert res.returncode == 0, res.stderr
    comments, header = header_lines(tmp_path / "path_h0.2.csv")
    meta = " ".join(comments)
    assert header[0] == "t" and header[1] == "x_1"
    for key in ("h=", "seed=", "n_steps="):
        assert key in meta


@needs_cli
def test_regime_refusal_exit_code(tmp_path):
    cfg = json.loads((ROOT / "configs" / "variation_scaling.json").read_text())
    cfg["params"]["h"] = 0.6
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    res = run("variation_scaling", "--config", path, "--out", tmp_path / "out")
    assert res.returncode == 2
    err = json.loads(res.stderr.strip().splitlines()[-1])
    assert err["status"] == "refused" and err["reason"] == "regime"


@needs_cli
def test_empty_ensemble_is_refused(tmp_path):
    res = run("counterexample_sweep", "--paths", 0, "--out", tmp_path)
    assert res.returncode == 2
    assert json.loads(res.stderr.strip().splitlines()[-1])["reason"] == "empty_ensemble"


@needs_cli
def test_invalid_config_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"kind": "sewing_rates", "seed": "not a number"}))
    assert run("sewing_rates", "--config", path).returncode == 1
    assert run("no_such_kind").returncode == 1


@needs_cli
def test_committed_configs_resolve_to_themselves():
    for cfg in sorted((ROOT / "configs").glob("*.json")):
        committed = json.loads(cfg.read_text())
        res = run(committed["kind"], "--config", cfg, "--print-config")
        assert res.returncode == 0, res.stderr
        assert json.loads(res.stdout) == committed


@pytest.fixture(scope="module")
def rbnlab():
    if not PYDIR or not Path(PYDIR, "rbnlab").is_dir():
        pytest.skip("python module not built")
    sys.path.insert(0, PYDIR)
    import rbnlab as module

    return module


def test_module_basics(rbnlab):
    assert len(rbnlab.kinds()) == 7
    verdict, margin = rbnlab.classify_regime(0.25, 1, 1.0)
    assert verdict == "weak_existence" and margin == pytest.approx(2.0)
    assert rbnlab.classify_regime(0.5, 1, 1.0)[0] == "boundary"
    assert rbnlab.fbm_covariance(0.5, 0.3, 0.7) == pytest.approx(0.3)


def test_module_sampling_is_deterministic(rbnlab):
    a = rbnlab.sample_fbm(0.3, 64, n_paths=3, dim=2, seed=11)
    rbnlab.set_thread_count(1)
    b = rbnlab.sample_fbm(0.3, 64, n_paths=3, dim=2, seed=11)
    rbnlab.set_thread_count(0)
    assert a.shape == (3, 65, 2)
    assert (a[:, 0, :] == 0).all()
    assert (a == b).all()


def test_module_run_and_refusal(rbnlab, tmp_path):
    cfg = rbnlab.default_config("regime_table")
    report = rbnlab.run_experiment(cfg, str(tmp_path))
    assert report["config_hash"] == rbnlab.config_hash(cfg)
    assert (tmp_path / "regime_table.csv").exists()
    cfg = rbnlab.default_config("counterexample_sweep")
    cfg["params"]["n_paths"] = 0
    with pytest.raises(rbnlab.RegimeRefusal) as info:
        rbnlab.run_experiment(cfg, str(tmp_path / "x"))
    assert info.value.reason == "empty_ensemble"
    with pytest.raises(rbnlab.DomainError):
        rbnlab.default_config("nope")
