"""Command-line front end: ``curveops {build,verify,eval,scaling} CONFIG``.

The configuration is a flat JSON document (see :class:`RunConfig`); every key
can be overridden by a flag.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .connection import (ConnectionMatrix, ConnectionResult, build_connection,
                         entrywise_connection, eval_Y, explicit_basis)
from .curvebasis import CurveSpec, block_offset, build_mult_ops, validate_curve
from .errors import CurveInvalid, CurveOpsError, LanczosBreakdown, OracleInfeasible, PointOffCurve
from .polycore import Poly
from .univar import WeightSpec
from .verify import Tolerances, audit, audit_result

log = logging.getLogger("curveops")

SPARSITY_THRESHOLD = 1e-13
CROSS_CHECK_MAX_N = 6
CROSS_CHECK_ORTHO = 1e-10


@dataclass
class RunConfig:
    """Flat run configuration.

    Keys: ``m``, ``phi`` (coefficients, lowest degree first), ``weight``
    (family), ``weight_a``, ``weight_b``, ``N``, ``nquad`` (``null`` for
    automatic), ``tol_*`` (see :class:`~curveops.verify.Tolerances`),
    ``reorth``, ``cross_check``, ``oracle``, ``oracle_N``, ``explicit``,
    ``secondary`` (``"y"`` or ``"xy"``), ``out``, ``Ns`` (scaling).
    """

    m: int = 1
    phi: list = field(default_factory=lambda: [1.0, 1.0, -1.0, 1.0])
    weight: str = "legendre"
    weight_a: float = 0.0
    weight_b: float = 0.0
    N: int = 20
    nquad: int | None = None
    tol_orthonormality: float = 1e-11
    tol_quadrature_gram: float = 1e-10
    tol_recurrence: float = 1e-10
    tol_commutator: float = 1e-10
    tol_symmetry: float = 1e-12
    tol_zero: float = 1e-12
    tol_span: float = 1e-8
    tol_leakage: float = 1e-9
    tol_cross_check: float = 1e-9
    reorth: bool = True
    cross_check: bool = False
    oracle: bool = False
    oracle_N: int = 8
    explicit: bool = True
    secondary: str = "y"
    out: str = "out"
    Ns: list = field(default_factory=lambda: [50, 100, 200, 400])

    def __post_init__(self):
        self.phi = [float(v) for v in self.phi]
        self.Ns = [int(v) for v in self.Ns]
        for f in fields(self):
            if f.name.startswith("tol_") and not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be positive")
        if self.N < 0:
            raise ValueError("N must be non-negative")
        if self.secondary not in ("y", "xy"):
            raise ValueError("secondary must be 'y' or 'xy'")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def curve(self) -> CurveSpec:
        w = WeightSpec(self.weight, self.weight_a, self.weight_b)
        return CurveSpec(self.m, Poly(tuple(self.phi)), w)

    def tolerances(self) -> Tolerances:
        kw = {f.name: getattr(self, "tol_" + f.name) for f in fields(Tolerances)}
        return Tolerances(**kw)


# --------------------------------------------------------------------------- files

def write_matrix_market(path, rows, cols, vals, shape) -> None:
    """Write coordinate entries (0-based input) as 1-based Matrix Market, column-major order."""
    rows, cols, vals = np.asarray(rows), np.asarray(cols), np.asarray(vals, dtype=float)
    order = np.lexsort((rows, cols))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{shape[0]} {shape[1]} {len(vals)}\n")
        for i in order:
            fh.write(f"{rows[i] + 1} {cols[i] + 1} {vals[i]:.17g}\n")


def write_dense_mm(path, A: np.ndarray) -> None:
    r, c = np.nonzero(A)
    write_matrix_market(path, r, c, A[r, c], A.shape)


def read_matrix_market(path) -> np.ndarray:
    from scipy.io import mmread
    return np.asarray(mmread(str(path)).toarray(), dtype=float)


def connection_entries(C: ConnectionMatrix):
    rows, cols, vals = [], [], []
    for col in C.columns:
        nz = np.flatnonzero(col.vec.values)
        rows.append(col.vec.start + nz)
        cols.append(np.full(nz.size, col.ell))
        vals.append(col.vec.values[nz])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def write_sparsity(path, C: ConnectionMatrix, threshold=SPARSITY_THRESHOLD) -> int:
    """Write ``row col log10|value|`` (0-based) for entries at or above ``threshold``.

    Returns the number of stored entries that were omitted.
    """
    r, c, v = connection_entries(C)
    keep = np.abs(v) >= threshold
    order = np.lexsort((r[keep], c[keep]))
    rk, ck, vk = r[keep][order], c[keep][order], v[keep][order]
    omitted = int((~keep).sum())
    with open(path, "w") as fh:
        fh.write(f"# row col log10|C[row,col]| (0-based); {omitted} entries below "
                 f"{threshold:g} omitted\n")
        for i in range(len(vk)):
            fh.write(f"{rk[i]} {ck[i]} {np.log10(abs(vk[i])):.6f}\n")
    return omitted


def block_bandwidths(C: ConnectionMatrix, tol: float = 0.0) -> list:
    """Per block: ``[n, lower, upper]`` with lower = max(row - col), upper = max(col - row)."""
    out = []
    for blk in C.blocks:
        lo = up = 0
        for col in blk:
            nz = np.flatnonzero(np.abs(col.vec.values) > tol)
            if nz.size:
                lo = max(lo, int(col.vec.start + nz[-1] - col.ell))
                up = max(up, int(col.ell - col.vec.start - nz[0]))
        out.append([blk[0].n, lo, up])
    return out


# --------------------------------------------------------------------------- pipeline

def run_pipeline(cfg: RunConfig, N: int | None = None) -> ConnectionResult:
    N = cfg.N if N is None else N
    c = validate_curve(cfg.curve())
    if cfg.explicit:
        res = explicit_basis(c, N)
        if res is not None:
            return res
    return build_connection(c, N, reorth=cfg.reorth, secondary=cfg.secondary)


def cross_check(cfg: RunConfig) -> dict:
    """Entrywise recursion vs the column engine without re-orthogonalization.

    Neither recursion is re-orthogonalized, so the comparison covers the leading
    blocks (degree at most 6) on which the entrywise columns are still
    orthonormal to ``CROSS_CHECK_ORTHO``.
    """
    c = validate_curve(cfg.curve())
    N = min(cfg.N, CROSS_CHECK_MAX_N)
    res = build_connection(c, N, reorth=False, secondary=cfg.secondary)
    E = entrywise_connection(c, N, res.ops, secondary=cfg.secondary)
    D = res.C.to_dense(E.shape[0])
    n_ok = 0
    for n in range(N + 1):
        k = block_offset(n + 1, c.m, c.d)
        if np.max(np.abs(E[:, :k].T @ E[:, :k] - np.eye(k))) > CROSS_CHECK_ORTHO:
            break
        n_ok = n
    k = block_offset(n_ok + 1, c.m, c.d)
    diff = float(np.max(np.abs(E[:, :k] - D[:, :k])))
    return {"N": n_ok, "max_abs_diff": diff}


def cmd_build(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    res = run_pipeline(cfg)
    total = time.perf_counter() - t0
    C, pair = res.C, res.pair
    r, c, v = connection_entries(C)
    write_matrix_market(out / "C.mtx", r, c, v, (C.nrows, C.ncols))
    write_dense_mm(out / "Jx.mtx", pair.to_dense("x"))
    write_dense_mm(out / "Jy.mtx", pair.to_dense("y"))
    omitted = write_sparsity(out / "sparsity.txt", C)
    summary = {
        "config": cfg.to_dict(),
        "m": res.curve.m, "d": res.curve.d, "N": C.N,
        "nrows": C.nrows, "ncols": C.ncols,
        "explicit": bool(res.options.get("explicit", False)),
        "bandwidths": block_bandwidths(C, cfg.tol_zero),
        "ell_map": [[col.ell, col.n, col.k] for col in C.columns],
        "seconds_total": total,
        "seconds_per_degree": res.diag.block_seconds,
        "max_dropped": res.diag.max_dropped,
        "a_asymmetry": res.diag.a_asymmetry,
        "sparsity_omitted": omitted,
    }
    if cfg.cross_check:
        summary["cross_check"] = cross_check(cfg)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {out}/C.mtx, Jx.mtx, Jy.mtx, sparsity.txt, summary.json "
          f"({C.ncols} columns, {total:.3f} s)")
    return 0


def cmd_verify(cfg: RunConfig, c_file: str | None = None) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    tol = cfg.tolerances()
    if c_file is None:
        res = run_pipeline(cfg)
        rep = audit_result(res, tol=tol, nquad=cfg.nquad, oracle=cfg.oracle,
                           oracle_N=cfg.oracle_N)
    else:
        c = validate_curve(cfg.curve())
        dense = read_matrix_market(c_file)
        C = ConnectionMatrix.from_dense(dense, c.m, c.d, cfg.N)
        ops = build_mult_ops(c, cfg.N)
        rep = audit(C, None, ops, c, tol=tol, nquad=cfg.nquad, oracle=cfg.oracle,
                    oracle_N=cfg.oracle_N)
    if cfg.cross_check:
        cc = cross_check(cfg)
        rep.passed["cross_check"] = cc["max_abs_diff"] < cfg.tol_cross_check
    (out / "report.json").write_text(rep.to_json() + "\n")
    for name, ok in rep.passed.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if not rep.ok:
        print("failed checks: " + ", ".join(rep.failures), file=sys.stderr)
        return 1
    return 0


def cmd_eval(cfg: RunConfig, points: str) -> int:
    res = run_pipeline(cfg)
    pts = np.atleast_2d(np.loadtxt(points, delimiter=",", comments="#", ndmin=2))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    names = [f"Y_{col.n}_{col.k}" for col in res.C.columns]
    skipped = 0
    with open(out / "eval.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y"] + names)
        for x, y in pts[:, :2]:
            try:
                vals = eval_Y(res.C, res.curve, res.ops, x, y)[0]
            except PointOffCurve as e:
                log.warning("skipping point off the curve: %s", e)
                skipped += 1
                continue
            wr.writerow([f"{x:.17g}", f"{y:.17g}"] + [f"{v:.17g}" for v in vals])
    print(f"wrote {out}/eval.csv ({len(pts) - skipped} points, {skipped} skipped)")
    return 0


def time_build(c: CurveSpec, N: int, repeats: int = 3, **kw) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        build_connection(c, N, **kw)
        best = min(best, time.perf_counter() - t0)
    return best


def fit_slope(xs, ts) -> float:
    """Least-squares slope of ``log t`` against ``log x``."""
    return float(np.polyfit(np.log(xs), np.log(ts), 1)[0])


def cmd_scaling(cfg: RunConfig, repeats: int = 3) -> int:
    c = validate_curve(cfg.curve())
    times = [time_build(c, N, repeats, reorth=cfg.reorth) for N in cfg.Ns]
    slope = fit_slope(cfg.Ns, times)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    print(f"{'N':>6} {'seconds':>10}")
    for N, t in zip(cfg.Ns, times):
        print(f"{N:>6} {t:>10.4f}")
    print(f"slope {slope:.3f}")
    (out / "scaling.json").write_text(json.dumps(
        {"m": c.m, "d": c.d, "N": cfg.Ns, "seconds": times, "slope": slope}, indent=2) + "\n")
    return 0


# --------------------------------------------------------------------------- argparse

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", help="JSON run configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--N", type=int, help="highest polynomial degree")
    p.add_argument("--nquad", type=int, help="quadrature points for Gram checks")
    p.add_argument("--no-reorth", dest="reorth", action="store_false", default=None,
                   help="disable re-orthogonalization (instability study)")
    p.add_argument("--secondary", choices=["y", "xy"])
    p.add_argument("--explicit", dest="explicit", action="store_true", default=None,
                   help="use closed-form bases where available")
    p.add_argument("--no-explicit", dest="explicit", action="store_false")
    p.add_argument("--cross-check", dest="cross_check", action="store_true", default=None,
                   help="compare against the entrywise recursion on small N")
    p.add_argument("--oracle", dest="oracle", action="store_true", default=None,
                   help="compare against the graded monomial oracle")
    p.add_argument("--oracle-N", dest="oracle_N", type=int)
    for f in fields(Tolerances):
        p.add_argument(f"--tol-{f.name.replace('_', '-')}", dest=f"tol_{f.name}", type=float)
    p.add_argument("--tol-cross-check", dest="tol_cross_check", type=float)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="curveops",
                                 description="Orthonormal polynomials on curves y^m = phi(x).")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    b = sub.add_parser("build", help="compute C, J_x, J_y and write them")
    _add_common(b)
    v = sub.add_parser("verify", help="audit the pipeline; exit 1 on any failed check")
    _add_common(v)
    v.add_argument("--c-file", help="audit this Matrix Market C instead of recomputing")
    e = sub.add_parser("eval", help="evaluate all Y_{n,k} at points from a CSV (x,y)")
    _add_common(e)
    e.add_argument("points", help="CSV file with columns x,y")
    s = sub.add_parser("scaling", help="time the engine against N and fit the slope")
    _add_common(s)
    s.add_argument("--Ns", type=lambda t: [int(v) for v in t.split(",")],
                   help="comma-separated degrees")
    s.add_argument("--repeats", type=int, default=3)
    return ap


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config).to_dict()
    for key in list(cfg):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return RunConfig.from_dict(cfg)


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "build":
            return cmd_build(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.c_file)
        if args.command == "eval":
            return cmd_eval(cfg, args.points)
        return cmd_scaling(cfg, args.repeats)
    except (CurveInvalid, LanczosBreakdown, OracleInfeasible) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except (CurveOpsError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
