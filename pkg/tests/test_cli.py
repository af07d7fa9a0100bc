import csv
import io
import json

import numpy as np
import pytest

from ciq import sqrt_apply
from ciq.cli import EXIT_NONCONVERGED, EXIT_OK, EXIT_USAGE, main
from ciq.io import read_pgm, write_matrix_market, write_vector
from ciq.linop import KernelOperator
from ciq.msminres import SolverConfig


def _floats(text):
    return np.array(text.split(), dtype=float)


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def diag_files(tmp_path):
    mtx, vec = tmp_path / "k.mtx", tmp_path / "b.txt"
    write_matrix_market(mtx, np.diag([4.0, 9.0]))
    write_vector(vec, [2.0, 3.0])
    return str(mtx), str(vec)


def test_apply_identity_returns_b(tmp_path, capsys):
    write_matrix_market(tmp_path / "i.mtx", np.eye(4))
    b = np.array([1.0, -2.0, 0.5, 3.0])
    write_vector(tmp_path / "b.txt", b)
    code = main(["apply", "--matrix", str(tmp_path / "i.mtx"), "--vector", str(tmp_path / "b.txt")])
    out = capsys.readouterr()
    assert code == EXIT_OK
    np.testing.assert_allclose(_floats(out.out), b, rtol=1e-10)
    assert "J=" in out.err and "mvms=" in out.err


def test_apply_diag_invsqrt(diag_files, capsys):
    mtx, vec = diag_files
    assert main(["apply", "--matrix", mtx, "--vector", vec, "--power", "invsqrt"]) == EXIT_OK
    np.testing.assert_allclose(_floats(capsys.readouterr().out), [1.0, 1.0], atol=1e-4)


def test_apply_writes_out_file_and_verifies(diag_files, tmp_path, capsys):
    mtx, vec = diag_files
    out = tmp_path / "r.txt"
    code = main(["apply", "--matrix", mtx, "--vector", vec, "--out", str(out), "--verify"])
    captured = capsys.readouterr()
    assert code == EXIT_OK
    assert captured.out == ""
    assert "relative error vs dense oracle" in captured.err
    np.testing.assert_allclose(_floats(out.read_text()), [4.0, 9.0], rtol=1e-4)


def test_apply_kernel_matches_library_bitwise(tmp_path, rng, capsys):
    pts = rng.uniform(size=(100, 2))
    b = rng.standard_normal(100)
    np.savetxt(tmp_path / "p.csv", pts, delimiter=",", header="x,y", comments="", fmt="%.17g")
    write_vector(tmp_path / "b.txt", b)
    code = main(["apply", "--kernel", "matern52", "--points", str(tmp_path / "p.csv"),
                 "--lengthscale", "0.4", "--vector", str(tmp_path / "b.txt"), "--Q", "8"])
    assert code == EXIT_OK
    op = KernelOperator(pts, "matern52", 0.4, 1.0)
    ref = sqrt_apply(op, b, 8, SolverConfig(), lanczos_iters=10, seed=0).result
    np.testing.assert_array_equal(_floats(capsys.readouterr().out), ref)


def test_apply_preconditioned_is_a_rotated_root(tmp_path, rng, capsys):
    A = rng.standard_normal((12, 12))
    K = A @ A.T + 12 * np.eye(12)
    write_matrix_market(tmp_path / "k.mtx", K)
    b = rng.standard_normal(12)
    write_vector(tmp_path / "b.txt", b)
    code = main(["apply", "--matrix", str(tmp_path / "k.mtx"), "--vector", str(tmp_path / "b.txt"),
                 "--precond-rank", "3", "--tol", "1e-10", "--Q", "16"])
    assert code == EXIT_OK
    out = capsys.readouterr()
    assert "rotated" in out.err
    assert _floats(out.out).shape == (12,)


def test_apply_nonconvergence_exit(diag_files, capsys):
    mtx, vec = diag_files
    write_matrix_market(mtx, np.diag(np.geomspace(1.0, 1e4, 2)))
    code = main(["apply", "--matrix", mtx, "--vector", vec, "--max-iters", "1", "--tol", "1e-12"])
    assert code == EXIT_NONCONVERGED
    assert _floats(capsys.readouterr().out).shape == (2,)


@pytest.mark.parametrize("argv", [
    ["apply"],
    ["apply", "--kernel", "rbf"],
    ["apply", "--matrix", "missing.mtx", "--vector", "missing.txt"],
    ["bench-accuracy", "--N", "5000"],
    ["rule", "--lambda-min", "2", "--lambda-max", "1"],
    ["gibbs", "--sweeps", "5", "--burn-in", "5"],
    ["nonsense"],
    ["apply", "--power", "cube"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert capsys.readouterr().out == ""


def test_dimension_mismatch_is_usage_error(diag_files, tmp_path, capsys):
    mtx, _ = diag_files
    write_vector(tmp_path / "b3.txt", [1.0, 2.0, 3.0])
    assert main(["apply", "--matrix", mtx, "--vector", str(tmp_path / "b3.txt")]) == EXIT_USAGE


def test_bench_accuracy_sweep(capsys):
    argv = ["bench-accuracy", "--decay", "inv_square", "--N", "128", "--Q-range", "1:16",
            "--tols", "1e-2,1e-4,1e-6", "--lanczos-iters", "50"]
    assert main(argv) == EXIT_OK
    text = capsys.readouterr().out
    rows = _csv(text)
    assert len(rows) == 48
    assert set(rows[0]) == {"N", "decay", "Q", "tol", "relative_error", "iterations", "mvms"}
    err = {}
    for r in rows:
        err.setdefault(float(r["tol"]), []).append(float(r["relative_error"]))
        # J solver MVMs plus the final product with K for the forward root
        assert int(r["mvms"]) == int(r["iterations"]) + 1
    # decreasing in Q until the solver floor is reached
    e = np.array(err[1e-6])
    floor = e[-4:].max()
    head = e[e > 10 * floor]
    assert np.all(np.diff(head) <= 0)
    assert e[7] < 1e-4
    floors = [np.min(err[t]) for t in (1e-2, 1e-4, 1e-6)]
    assert floors[0] > floors[1] > floors[2]
    for t, f in zip((1e-2, 1e-4, 1e-6), floors):
        assert t / 100 < f < 10 * t
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out == text


def test_bench_kernel_to_file(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert main(["bench-accuracy", "--kernel", "rbf", "--N", "64", "--Q-range", "4,8",
                 "--out", str(out)]) == EXIT_OK
    rows = _csv(out.read_text())
    assert [r["decay"] for r in rows] == ["rbf", "rbf"]
    assert capsys.readouterr().out == ""


def test_sample_csv(capsys):
    assert main(["sample", "--N", "64", "--n-samples", "2000"]) == EXIT_OK
    rows = _csv(capsys.readouterr().out)
    assert [r["method"] for r in rows] == ["ciq", "dense_oracle"]
    errs = [float(r["relative_covariance_error"]) for r in rows]
    assert errs[0] <= 1.5 * errs[1]


def test_gibbs_smoke(tmp_path, capsys):
    mean, log = tmp_path / "m.pgm", tmp_path / "log.jsonl"
    code = main(["gibbs", "--sweeps", "6", "--burn-in", "2", "--out", str(mean), "--log", str(log)])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["finite"] and summary["sweeps"] == 6
    assert read_pgm(mean).shape == (32, 32)
    records = [json.loads(ln) for ln in log.read_text().splitlines()]
    assert len(records) == 6
    assert all(r["gamma_obs"] > 0 and r["gamma_prior"] > 0 for r in records)


def test_thompson_toy_is_deterministic(capsys):
    argv = ["thompson", "--n-samples", "20", "--seed", "3"]
    assert main(argv) == EXIT_OK
    first = capsys.readouterr().out
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out == first
    idx = np.array(first.split(), dtype=int)
    assert idx.shape == (20,) and idx.min() >= 0 and idx.max() < 200


def test_thompson_from_files(tmp_path, capsys):
    (tmp_path / "train.csv").write_text("x,y\n0.1,1.0\n0.5,-1.0\n0.9,0.5\n")
    np.savetxt(tmp_path / "cand.csv", np.linspace(0, 1, 30)[:, None], delimiter=",")
    code = main(["thompson", "--train", str(tmp_path / "train.csv"), "--candidates",
                 str(tmp_path / "cand.csv"), "--n-samples", "10"])
    assert code == EXIT_OK
    assert len(capsys.readouterr().out.split()) == 10
    assert main(["thompson", "--train", str(tmp_path / "train.csv")]) == EXIT_USAGE


def test_rule_table(capsys):
    assert main(["rule", "--lambda-min", "1", "--lambda-max", "100", "--Q", "4"]) == EXIT_OK
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln and not ln.startswith("#")]
    assert len(lines) == 4
