"""Empirical structure checks at the exact solution: ASC exponent, growth ratio, second-order sampling."""
import argparse

import numpy as np

from semilinear_tikhonov.harness import asc_sweep, growth_check, sosc_sample
from semilinear_tikhonov.manufactured import build_problem

PROBLEMS = ("section7-sin", "section7-cubic", "section7-exp", "sparse-sin")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cells", type=int, default=8192)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'problem':16s} {'kappa_hat':>9s} {'c_hat':>7s} {'growth':>8s} {'delta_hat':>9s}")
    for name in PROBLEMS:
        problem, exact = build_problem(name, args.cells)
        rep = asc_sweep(exact.p_bar, problem.beta, np.logspace(-3, np.log10(0.3), 20))
        _, ratio = growth_check(problem, exact, args.samples, args.seed)
        delta = sosc_sample(problem, exact, args.samples, seed=args.seed)
        print(f"{name:16s} {rep.kappa_hat:9.4f} {rep.c_hat:7.4f} {ratio:8.4f} {delta:9.4f}")


if __name__ == "__main__":
    main()
