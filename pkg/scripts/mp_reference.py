"""Extended-precision reference connection matrix for m = 1 with the Legendre weight.

Runs plain Gram-Schmidt (twice, against every earlier column) on the same
multiplication sequence as the engine, in ``mpmath`` arithmetic, and reports
the column-wise error of the double-precision engine, with and without a
widened allocation.

    python3 scripts/mp_reference.py --d 6 --N 20
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import mpmath as mp
import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from curveops import CurveSpec, Poly  # noqa: E402
from curveops.connection import build_connection, sequence  # noqa: E402
from curveops.curvebasis import block_offset, dim_Vn  # noqa: E402


def mp_connection(coeffs, N: int, dps: int = 50) -> np.ndarray:
    """Columns of ``C`` for ``y = phi(x)``, Legendre weight, degrees ``0..N``."""
    mp.mp.dps = dps
    d = len(coeffs) - 1
    rows = (N + 3) * d + 4
    beta = [mp.mpf(n) / mp.sqrt(4 * mp.mpf(n) ** 2 - 1) for n in range(1, rows + 1)]
    c = [mp.mpf(a) for a in coeffs]

    def X(v):
        out = [mp.mpf(0)] * rows
        for j in range(rows):
            if j > 0:
                out[j] += beta[j - 1] * v[j - 1]
            if j + 1 < rows:
                out[j] += beta[j] * v[j + 1]
        return out

    def Y(v):
        u = [c[d] * t for t in v]
        for a in reversed(c[:-1]):
            u = [s + a * t for s, t in zip(X(u), v)]
        return u

    def dot(a, b):
        return mp.fsum(s * t for s, t in zip(a, b))

    cols = [[mp.mpf(1)] + [mp.mpf(0)] * (rows - 1)]
    for n in range(N):
        src = block_offset(n, 1, d)
        for op, ks in sequence(n, 1, d):
            v = (X if op == "x" else Y)(cols[src + ks - 1])
            for _ in range(2):
                for q in cols:
                    h = dot(q, v)
                    v = [s - h * t for s, t in zip(v, q)]
            nv = mp.sqrt(dot(v, v))
            cols.append([t / nv for t in v])
    return np.array([[float(t) for t in col] for col in cols]).T


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=6)
    ap.add_argument("--N", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dps", type=int, default=50)
    args = ap.parse_args(argv)
    from conftest import general_curve
    c = general_curve(1, args.d, args.seed)
    ref = mp_connection(c.phi.coeffs, args.N, args.dps)
    runs = {"default": build_connection(c, args.N),
            "pad=2d": build_connection(c, args.N, pad=2 * args.d),
            "full_reorth": build_connection(c, args.N, full_reorth=True),
            "secondary=xy": build_connection(c, args.N, secondary="xy")}
    m, d = 1, args.d
    print(f"m=1 d={d} N={args.N} min normalizer "
          f"{min(b for *_, b in runs['default'].diag.normalizers):.2e}")
    for name, res in runs.items():
        D = res.C.to_dense(ref.shape[0])
        errs = [np.max(np.abs(D[:, block_offset(n, m, d):block_offset(n, m, d) + dim_Vn(n, m, d)]
                              - ref[:, block_offset(n, m, d):block_offset(n, m, d)
                                    + dim_Vn(n, m, d)]))
                for n in range(args.N + 1)]
        print(f"{name:>13}: max error {max(errs):.1e}; by block "
              + " ".join(f"{e:.0e}" for e in errs))


if __name__ == "__main__":
    main()
