"""Build every benchmark configuration and print its bandwidths and nonzero counts.

Writes the usual build outputs, including ``sparsity.txt`` with the magnitude of
every entry, under ``out/<config>``.

    python3 scripts/benchmark_sparsity.py
"""
import json
from pathlib import Path

from curveops.cli import main
from curveops.verify import expected_bandwidth

ROOT = Path(__file__).resolve().parents[1]


def run():
    print(f"{'config':<18} {'m':>2} {'d':>2} {'lambda':>6} {'lower':>5} {'upper':>5} {'nnz':>6}")
    for cfg in sorted((ROOT / "configs").glob("bench_*.json")):
        out = ROOT / "out" / cfg.stem
        main(["build", str(cfg), "--out", str(out)])
        s = json.loads((out / "summary.json").read_text())
        sat = [b for b in s["bandwidths"] if b[0] >= s["d"]]
        nnz = len((out / "sparsity.txt").read_text().splitlines()) - 1
        print(f"{cfg.stem:<18} {s['m']:>2} {s['d']:>2} {expected_bandwidth(s['m'], s['d']):>6} "
              f"{max(b[1] for b in sat):>5} {max(b[2] for b in sat):>5} {nnz:>6}")


if __name__ == "__main__":
    run()
