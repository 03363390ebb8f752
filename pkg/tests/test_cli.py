import json
from pathlib import Path

import numpy as np
import pytest

from curveops.cli import (RunConfig, block_bandwidths, fit_slope, main, read_matrix_market,
                          run_pipeline, write_dense_mm)
from curveops.curvebasis import curve_nodes

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, *argv):
    return main([argv[0], str(CONFIGS / argv[1]), "--out", str(tmp_path), *argv[2:]])


# --------------------------------------------------------------------------- config

def test_config_round_trip():
    cfg = RunConfig(m=2, phi=[2, 0, -1], weight="jacobi", weight_a=0.5, N=7, nquad=30,
                    tol_span=1e-7, oracle=True, secondary="xy", Ns=[10, 20])
    back = RunConfig.from_json(cfg.to_json())
    assert back == cfg
    assert back.to_json() == cfg.to_json()


@pytest.mark.parametrize("bad", [{"tol_recurrence": 0}, {"tol_zero": -1e-3}, {"N": -1},
                                 {"secondary": "x"}, {"colour": "red"}])
def test_config_rejects(bad):
    with pytest.raises(ValueError):
        RunConfig.from_dict(bad)


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = RunConfig.load(path)
    assert cfg.curve().d == len(cfg.phi) - 1
    assert cfg.tolerances().span > 0


# --------------------------------------------------------------------------- build

def test_build_writes_files_that_reparse_exactly(tmp_path):
    assert run(tmp_path, "build", "bench_m2_quartic.json", "--N", "8") == 0
    cfg = RunConfig.load(CONFIGS / "bench_m2_quartic.json")
    cfg.N = 8
    res = run_pipeline(cfg)
    C = read_matrix_market(tmp_path / "C.mtx")
    np.testing.assert_array_equal(C, res.C.to_dense())
    np.testing.assert_array_equal(read_matrix_market(tmp_path / "Jx.mtx"), res.pair.to_dense("x"))
    np.testing.assert_array_equal(read_matrix_market(tmp_path / "Jy.mtx"), res.pair.to_dense("y"))
    head = (tmp_path / "C.mtx").read_text().splitlines()
    assert head[0] == "%%MatrixMarket matrix coordinate real general"
    assert min(int(line.split()[0]) for line in head[2:]) == 1
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["ncols"] == C.shape[1]
    assert len(summary["ell_map"]) == C.shape[1]
    assert len(summary["bandwidths"]) == 9


def test_build_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "build", "bench_m2_phi7.json") == 0
    assert run(b, "build", "bench_m2_phi7.json") == 0
    for f in ("C.mtx", "Jx.mtx", "Jy.mtx", "sparsity.txt"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_phi7_bandwidth(tmp_path):
    assert run(tmp_path, "build", "bench_m2_phi7.json") == 0
    bw = json.loads((tmp_path / "summary.json").read_text())["bandwidths"]
    sat = [(lo, up) for n, lo, up in bw if n >= 7]
    assert max(lo for lo, _ in sat) == max(up for _, up in sat) == 14


def test_even_sextic_has_half_the_nonzeros(tmp_path):
    counts = {}
    for name in ("bench_m1_sextic", "bench_m1_even_sextic"):
        assert run(tmp_path / name, "build", f"{name}.json") == 0
        lines = (tmp_path / name / "sparsity.txt").read_text().splitlines()
        assert lines[0].startswith("# row col log10")
        counts[name] = len(lines) - 1
    ratio = counts["bench_m1_even_sextic"] / counts["bench_m1_sextic"]
    assert 0.4 < ratio < 0.6


def test_explicit_m2_d2_is_identity(tmp_path):
    assert run(tmp_path, "build", "explicit_m2_d2.json") == 0
    C = read_matrix_market(tmp_path / "C.mtx")
    np.testing.assert_array_equal(C, np.eye(C.shape[0]))
    assert json.loads((tmp_path / "summary.json").read_text())["explicit"]


def test_trivial_N1_run(tmp_path):
    assert run(tmp_path, "build", "bench_m1_cubic.json", "--N", "1", "--no-explicit") == 0
    assert read_matrix_market(tmp_path / "C.mtx").shape[1] == 3


def test_build_with_cross_check(tmp_path):
    assert run(tmp_path, "build", "bench_m1_sextic.json", "--cross-check") == 0
    cc = json.loads((tmp_path / "summary.json").read_text())["cross_check"]
    assert cc["N"] >= 3 and cc["max_abs_diff"] < 1e-9


# --------------------------------------------------------------------------- verify

def test_verify_parabola(tmp_path, capsys):
    assert run(tmp_path, "verify", "explicit_parabola.json", "--cross-check", "--oracle") == 0
    out = capsys.readouterr().out
    assert "PASS orthonormality" in out and "FAIL" not in out
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["ok"]


def test_verify_fig_curve_with_oracle(tmp_path):
    assert run(tmp_path, "verify", "bench_m1_cubic.json", "--oracle", "--nquad", "80") == 0


def test_verify_corrupted_c_file(tmp_path, capsys):
    assert run(tmp_path / "b", "build", "bench_m1_quartic.json", "--N", "10") == 0
    C = read_matrix_market(tmp_path / "b" / "C.mtx")
    C[7, 9] += 1e-5
    write_dense_mm(tmp_path / "bad.mtx", C)
    code = run(tmp_path / "v", "verify", "bench_m1_quartic.json", "--N", "10",
               "--c-file", str(tmp_path / "bad.mtx"))
    assert code == 1
    captured = capsys.readouterr()
    assert "FAIL orthonormality" in captured.out
    assert "orthonormality" in captured.err


def test_verify_intact_c_file(tmp_path):
    assert run(tmp_path / "b", "build", "bench_m1_quartic.json", "--N", "10") == 0
    assert run(tmp_path / "v", "verify", "bench_m1_quartic.json", "--N", "10",
               "--c-file", str(tmp_path / "b" / "C.mtx")) == 0


def test_verify_no_reorth_fails(tmp_path, capsys):
    assert run(tmp_path, "verify", "stability_d6.json", "--no-reorth") == 1
    assert "FAIL orthonormality" in capsys.readouterr().out


def test_invalid_curve_exit_code(tmp_path, capsys):
    cfg = RunConfig(m=2, phi=[-0.5, 0, 1], out=str(tmp_path))
    path = tmp_path / "bad.json"
    path.write_text(cfg.to_json())
    assert main(["build", str(path)]) == 2
    assert "CurveInvalid" in capsys.readouterr().err


# --------------------------------------------------------------------------- eval

def test_eval_gram_and_off_curve_points(tmp_path, caplog):
    cfg = RunConfig.load(CONFIGS / "bench_m2_quartic.json")
    cfg.N = 6
    c = cfg.curve()
    x, y, wt = curve_nodes(c, 30)
    pts = np.column_stack([x, y])
    pts = np.vstack([pts, [[0.1, 7.0]]])
    np.savetxt(tmp_path / "pts.csv", pts, delimiter=",", fmt="%.17g")
    code = run(tmp_path, "eval", "bench_m2_quartic.json", "--N", "6", str(tmp_path / "pts.csv"))
    assert code == 0
    assert "skipping point off the curve" in caplog.text
    data = np.loadtxt(tmp_path / "eval.csv", delimiter=",", skiprows=1)
    assert data.shape[0] == len(x)
    Y = data[:, 2:]
    np.testing.assert_allclose(Y[:, 0], Y[0, 0])
    np.testing.assert_allclose((Y * wt[:, None]).T @ Y, np.eye(Y.shape[1]), atol=1e-10)
    header = (tmp_path / "eval.csv").read_text().splitlines()[0].split(",")
    assert header[:4] == ["x", "y", "Y_0_1", "Y_1_1"]


# --------------------------------------------------------------------------- scaling

def test_scaling_small(tmp_path, capsys):
    code = run(tmp_path, "scaling", "scaling_d4.json", "--Ns", "10,20,40", "--repeats", "1")
    assert code == 0
    data = json.loads((tmp_path / "scaling.json").read_text())
    assert data["N"] == [10, 20, 40] and len(data["seconds"]) == 3
    assert "slope" in capsys.readouterr().out


def test_fit_slope():
    xs = np.array([50, 100, 200, 400])
    assert fit_slope(xs, 3e-4 * xs ** 1.1) == pytest.approx(1.1)


def test_block_bandwidths_of_identity():
    cfg = RunConfig(m=2, phi=[1, 1], N=4)
    assert all(lo == up == 0 for _, lo, up in block_bandwidths(run_pipeline(cfg).C))
