"""Rate tables for every benchmark problem along the default alpha path.

    python3 scripts/run_rates.py --cells 8192 --outdir results
    python3 scripts/run_rates.py --cells 1000000 --problems section7-sin   # full-size mesh, a few minutes
"""
import argparse
import time
from pathlib import Path

from semilinear_tikhonov.cli import run

PROBLEMS = ("section7-sin", "section7-cubic", "section7-exp", "sparse-sin")


def footer(path):
    return dict(line[2:].split("=", 1) for line in Path(path).read_text().splitlines() if line.startswith("# "))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cells", type=int, default=8192)
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--problems", nargs="+", default=list(PROBLEMS))
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    print(f"{'problem':16s} {'u_L2':>8s} {'u_L1':>8s} {'y_L2':>8s} {'p_Linf':>8s} {'secs':>7s}")
    for name in args.problems:
        path = out / f"rates_{name}_{args.cells}.csv"
        t0 = time.perf_counter()
        code = run(["rates", "--problem", name, "--cells", str(args.cells), "--out", str(path)])
        f = footer(path)
        cols = [float(f[f"slope_{k}"]) for k in ("u_L2", "u_L1", "y_L2", "p_Linf")]
        print(f"{name:16s} " + " ".join(f"{c:8.3f}" for c in cols) + f" {time.perf_counter() - t0:7.1f}"
              + ("" if code == 0 else f"  (exit {code})"))


if __name__ == "__main__":
    main()
