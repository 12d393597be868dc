import json
import subprocess
import sys

import numpy as np
import pytest

from eluniq import io
from eluniq.cli import main


@pytest.fixture
def small(tmp_path):
    assert main(["simgen", "--out", str(tmp_path), "--n", "10", "--factor", "2"]) == 0
    return tmp_path


def test_simgen_default_shape(tmp_path):
    assert main(["simgen", "--out", str(tmp_path)]) == 0
    assert io.read_matrix(tmp_path / "A.csv").shape == (50, 100)
    assert io.load_manifest(tmp_path / "problem.json")["prior"] == {"type": "nonneg"}


def test_simgen_small_and_invalid(small, tmp_path):
    assert io.read_matrix(small / "A.csv").shape == (5, 10)
    assert main(["simgen", "--out", str(tmp_path / "x"), "--n", "9", "--factor", "2"]) == 2


def test_unique_all_and_single(small):
    assert main(["unique", "--problem", str(small / "problem.json"), "--out", str(small / "u.csv"), "--jobs", "1"]) == 0
    assert len(io.read_csv_columns(small / "u.csv")["k"]) == 10
    assert main(["unique", "--problem", str(small / "problem.json"), "--k", "4", "--out", str(small / "u1.csv")]) == 0
    cols = io.read_csv_columns(small / "u1.csv")
    assert list(cols["k"]) == [4]


def test_missing_problem_exits_2(tmp_path):
    assert main(["unique", "--problem", str(tmp_path / "none.json"), "--out", str(tmp_path / "u.csv")]) == 2


def test_infeasible_problem_exits_3(tmp_path):
    io.write_matrix(tmp_path / "A.csv", [[1.0, 1.0]])
    io.write_vector(tmp_path / "b.csv", [-1.0])
    io.write_manifest(tmp_path / "p.json", {"type": "nonneg"})
    assert main(["unique", "--problem", str(tmp_path / "p.json"), "--out", str(tmp_path / "u.csv")]) == 3


def test_tolerance_from_environment(small, monkeypatch):
    monkeypatch.setenv("ELUNIQ_TOL", "10")
    assert main(["unique", "--problem", str(small / "problem.json"), "--out", str(small / "u.csv")]) == 0
    assert io.read_csv_columns(small / "u.csv")["unique"].all()
    monkeypatch.setenv("ELUNIQ_TOL", "abc")
    assert main(["unique", "--problem", str(small / "problem.json"), "--out", str(small / "u.csv")]) == 2


def test_resolution_full_and_stride(tmp_path):
    main(["simgen", "--out", str(tmp_path), "--n", "20", "--factor", "2", "--prior", "none"])
    out = tmp_path / "r.csv"
    assert main(["resolution", "--problem", str(tmp_path / "problem.json"), "--out", str(out), "--svg",
                 str(tmp_path / "r.svg"), "--jobs", "1"]) == 0
    cols = io.read_csv_columns(out)
    assert len(cols["k"]) == 20 and np.all(cols["resolution_samples"] >= 1)
    assert (tmp_path / "r.svg").read_text().startswith("<?xml")
    first = out.read_bytes()
    main(["resolution", "--problem", str(tmp_path / "problem.json"), "--out", str(out), "--jobs", "2"])
    assert out.read_bytes() == first
    assert main(["resolution", "--problem", str(tmp_path / "problem.json"), "--strategy", "stride",
                 "--out", str(tmp_path / "s.csv")]) == 0
    assert len(io.read_csv_columns(tmp_path / "s.csv")["k"]) < 20


def test_estimate_methods(tmp_path):
    io.write_matrix(tmp_path / "A.csv", np.eye(3))
    io.write_vector(tmp_path / "b.csv", [0.1, 0.0, 0.2])
    io.write_manifest(tmp_path / "p.json", {"type": "box", "dmin": 0, "dmax": 1})
    for method in ("l1", "nnls", "boxls"):
        assert main(["estimate", "--problem", str(tmp_path / "p.json"), "--method", method,
                     "--out", str(tmp_path / f"{method}.csv")]) == 0
        assert np.allclose(io.read_csv_columns(tmp_path / f"{method}.csv")["estimate"], [0.1, 0.0, 0.2], atol=1e-7)
    assert main(["estimate", "--problem", str(tmp_path / "p.json"), "--method", "ridge", "--out", "x.csv"]) == 2


def test_certify_and_tamper(small):
    problem = str(small / "problem.json")
    assert main(["unique", "--problem", problem, "--k", "3", "--out", str(small / "u.csv")]) == 0
    gap = io.read_csv_columns(small / "u.csv")["gap"][0]
    cert_path = small / "c.json"
    assert main(["certify", "--problem", problem, "--k", "3", "--out", str(cert_path)]) == 0
    body = json.loads(cert_path.read_text())
    assert body["verified"] is True and body["unique"] is False
    assert body["ub"] - body["lb"] == pytest.approx(gap, abs=1e-6)
    assert main(["certify", "--problem", problem, "--verify", str(cert_path)]) == 0
    body["y_plus"][0] += 1e-3
    (small / "t.json").write_text(json.dumps(body))
    assert main(["certify", "--problem", problem, "--verify", str(small / "t.json"), "--out", str(small / "v.json")]) == 1
    assert json.loads((small / "v.json").read_text())["verified"] is False


def test_certify_unique_element(tmp_path):
    io.write_matrix(tmp_path / "A.csv", [[1.0, 1.0], [1.0, -1.0]])
    io.write_vector(tmp_path / "b.csv", [1.0, 0.0])
    io.write_manifest(tmp_path / "p.json", {"type": "nonneg"})
    assert main(["certify", "--problem", str(tmp_path / "p.json"), "--k", "1", "--out", str(tmp_path / "c.json")]) == 0
    body = json.loads((tmp_path / "c.json").read_text())
    assert body["verified"] and body["unique"] and abs(body["ub"] - body["lb"]) <= 1e-6


def test_console_script_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "eluniq.cli", "simgen", "--out", str(tmp_path), "--n", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "problem.json").exists()
