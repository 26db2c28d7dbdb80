import csv
import math

import numpy as np
import pytest

from smanakov.cli import main
from smanakov.config import load_config, preset
from smanakov.experiments import strong_convergence

STRONG = """experiment = "strong"
problem.gamma = 1.0
problem.num_points = 64
time.T = 0.5
time.N = [8, 16, 32]
time.N_ref = 64
sampling.samples = 2
solver.schemes = ["LT", "CN"]
"""


def read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_single_trajectory_zero_steps(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('experiment = "single-trajectory"\nproblem.gamma = 0.0\ntime.T = 1.0\ntime.N = [0]\n')
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read(tmp_path / "o" / "observables.csv")
    assert len(rows) == 1 and float(rows[0]["t"]) == 0.0
    assert float(rows[0]["l2"]) == pytest.approx(math.sqrt(2), abs=1e-6)


def test_strong_end_to_end(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(STRONG)
    out = tmp_path / "o"
    assert main(["--config", str(cfg), "--out", str(out), "--seed", "5"]) == 0
    rows = read(out / "errors.csv")
    assert {"N", "h", "mean_sq_err", "slope"} <= set(rows[0])
    resolved = load_config(out / "manifest.toml")
    assert resolved.sampling.seed == 5
    tables = strong_convergence(resolved)
    got = [float(r["mean_sq_err"]) for r in rows if r["scheme"] == "CN"]
    np.testing.assert_array_equal(got, tables["CN"].mean_sq_err)
    assert float(rows[0]["slope"]) == tables["LT"].slope
    assert (out / "errors.csv").read_bytes().count(b"\r") == 0


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(STRONG)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", str(cfg), "--out", str(a), "--dump-increments"]) == 0
    assert main(["--config", str(a / "manifest.toml"), "--out", str(b), "--workers", "2"]) == 0
    for name in ("errors.csv", "slopes.csv", "samples.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    raw = (a / "increments" / "sample_00001.bin").read_bytes()
    assert len(raw) == 64 * 3 * 8
    assert "code_version" in (a / "manifest.toml").read_text()


def test_scale_is_recorded(tmp_path, monkeypatch):
    import smanakov.cli as cli

    captured = {}
    monkeypatch.setattr(cli, "run_experiment", lambda c: captured.setdefault("cfg", c) and _empty())
    assert main(["--preset", "strong-fig1", "--scale", "64", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "manifest.toml").read_text()
    assert "scale = 64" in text
    assert captured["cfg"].time.N_ref == 2**18 // 64
    assert captured["cfg"].sampling.samples == math.ceil(300 / 64)
    assert preset("strong-fig1").time.N_ref == 2**18


def _empty():
    from smanakov.experiments import ExperimentReport

    return ExperimentReport("strong")


def test_errors_give_nonzero_exit(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('experiment = "strong"\ntime.T = 1.0\ntime.N = [3]\ntime.N_ref = 8\n')
    assert main(["--config", str(bad), "--out", str(tmp_path / "o")]) != 0
    assert main(["--config", str(tmp_path / "missing.toml")]) != 0
    assert main(["--preset", "nope"]) != 0
    assert main([]) != 0
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["--preset", "single", "--out", str(blocker / "sub")]) != 0
    assert "error" in capsys.readouterr().err


def test_list_presets(capsys):
    assert main(["--list-presets"]) == 0
    assert "strong-desk" in capsys.readouterr().out
