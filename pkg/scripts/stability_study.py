"""Loss of orthogonality with and without re-orthogonalization.

Prints ``max |C^T C - I|`` over blocks ``0..n`` for each ``n`` up to ``N``.

    python3 scripts/stability_study.py --d 6 --N 40
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from conftest import general_curve  # noqa: E402
from curveops.connection import build_connection  # noqa: E402
from curveops.curvebasis import block_offset  # noqa: E402
from curveops.errors import LanczosBreakdown  # noqa: E402


def residual_by_degree(C, m, d, N):
    D = C.to_dense()
    out = []
    for n in range(N + 1):
        k = block_offset(n + 1, m, d)
        out.append(float(np.max(np.abs(D[:, :k].T @ D[:, :k] - np.eye(k)))))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=1)
    ap.add_argument("--d", type=int, default=6)
    ap.add_argument("--N", type=int, default=40)
    args = ap.parse_args(argv)
    c = general_curve(args.m, args.d)
    good = residual_by_degree(build_connection(c, args.N).C, args.m, args.d, args.N)
    try:
        res = build_connection(c, args.N, reorth=False)
        bad = residual_by_degree(res.C, args.m, args.d, args.N)
    except LanczosBreakdown as e:
        print(f"no-reorth run broke down: {e}")
        bad = [np.nan] * (args.N + 1)
    print(f"{'n':>3} {'reorth':>10} {'no reorth':>10}")
    for n in range(args.N + 1):
        print(f"{n:>3} {good[n]:>10.1e} {bad[n]:>10.1e}")
    print(f"ratio at N: {bad[-1] / good[-1]:.1e}")


if __name__ == "__main__":
    main()
