"""Runtime of the engine against N (fixed d) and against d (fixed N).

    python3 scripts/scaling.py --Ns 50,100,200,400 --ds 3,4,5,6
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from conftest import general_curve  # noqa: E402
from curveops.cli import fit_slope, time_build  # noqa: E402


def ints(t):
    return [int(v) for v in t.split(",")]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--Ns", type=ints, default=[50, 100, 200, 400])
    ap.add_argument("--ds", type=ints, default=[3, 4, 5, 6])
    ap.add_argument("--d", type=int, default=4)
    ap.add_argument("--N", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    for m in (1, 2):
        c = general_curve(m, args.d)
        ts = [time_build(c, N, args.repeats) for N in args.Ns]
        print(f"m={m} d={args.d}: " + ", ".join(f"N={N} {t:.3f}s" for N, t in zip(args.Ns, ts))
              + f"; slope in N {fit_slope(args.Ns, ts):.2f}")
        ts = [time_build(general_curve(m, d), args.N, args.repeats) for d in args.ds]
        print(f"m={m} N={args.N}: " + ", ".join(f"d={d} {t:.3f}s" for d, t in zip(args.ds, ts))
              + f"; slope in d {fit_slope(args.ds, ts):.2f}")


if __name__ == "__main__":
    main()
