"""Command-line front end.

    semilinear-tikhonov solve     --problem section7-sin --alpha 1e-3 --out sol.json
    semilinear-tikhonov path      --problem section7-sin --alpha-max 1e-1 --alpha-min 1e-5 --per-decade 3 --out path.csv
    semilinear-tikhonov rates     --problem section7-sin --cells 8192 --out rates.csv
    semilinear-tikhonov asc       --problem section7-sin --eps-min 1e-3 --eps-max 0.3 --out asc.csv
    semilinear-tikhonov gradcheck --problem section7-sin --out grad.csv

Exit codes: 0 success, 2 solver non-convergence (outputs still written), 3 usage/config errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from contextlib import contextmanager
from typing import Optional

import numpy as np

from .harness import RATE_COLUMNS, RATE_HEADER, asc_sweep, gradient_check_random, rate_sweep
from .manufactured import build_problem
from .mesh_fem import function_error, pieces_error
from .nonlinearity import NonMonotoneWarning
from .optimizer import SolverOptions, alpha_grid, solve_path, solve_regularized

EXIT_OK, EXIT_NONCONVERGED, EXIT_USAGE = 0, 2, 3

log = logging.getLogger("semilinear_tikhonov")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _common(p: argparse.ArgumentParser, cells_default=8192):
    p.add_argument("--config", help="JSON file with keys mirroring the flags")
    p.add_argument("--problem", help="section7-<kind> or sparse-<kind>, kind in zero|sin|cubic|exp")
    p.add_argument("--beta", type=float, help="L1 weight (sparse problems only, default 0.5)")
    p.add_argument("--cells", type=int, default=cells_default)
    p.add_argument("--tol", type=float, default=1e-8, help="stationarity tolerance")
    p.add_argument("--max-outer", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")


def _alpha_flags(p):
    p.add_argument("--alpha-max", type=float, default=1e-1)
    p.add_argument("--alpha-min", type=float, default=1e-5)
    p.add_argument("--per-decade", type=int, default=3)
    p.add_argument("--cold", action="store_true", help="solve every alpha from scratch (parallel with --jobs)")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semilinear-tikhonov", description="Tikhonov regularization of semilinear bang-bang control problems")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    parser.subcommands = sub.choices

    p = sub.add_parser("solve", help="solve one regularized problem")
    _common(p)
    p.add_argument("--alpha", type=float)

    p = sub.add_parser("path", help="warm-started regularization path")
    _common(p)
    _alpha_flags(p)

    p = sub.add_parser("rates", help="error table and fitted rates along the path")
    _common(p)
    _alpha_flags(p)

    p = sub.add_parser("asc", help="measure sweep of the active-set condition")
    _common(p)
    p.add_argument("--eps-min", type=float, default=1e-3)
    p.add_argument("--eps-max", type=float, default=0.3)
    p.add_argument("--n-eps", type=int, default=20)

    p = sub.add_parser("gradcheck", help="finite-difference check of the adjoint gradient")
    _common(p, cells_default=256)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--directions", type=int, default=5)
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def parse(argv) -> argparse.Namespace:
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(parser.format_usage())
    if args.config:
        cfg = _load_config(args.config)
        sub = parser.subcommands[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)  # explicit flags win over the file
    _validate(args)
    return args


def _validate(args):
    if not args.problem:
        raise UsageError("--problem is required")
    if args.cells < 2 or args.cells % 2:
        raise UsageError("--cells must be even and >= 2")
    if args.tol <= 0:
        raise UsageError("--tol must be positive")
    if args.command == "solve":
        if args.alpha is None or not args.alpha > 0:
            raise UsageError("--alpha must be given and positive")
    if args.command in ("path", "rates"):
        if not 0 < args.alpha_min < args.alpha_max or args.per_decade < 1:
            raise UsageError("need 0 < --alpha-min < --alpha-max and --per-decade >= 1")
    if args.command == "rates" and not args.out:
        raise UsageError("rates needs --out")
    if args.command == "asc" and not (0 < args.eps_min < args.eps_max and args.n_eps >= 2):
        raise UsageError("need 0 < --eps-min < --eps-max and --n-eps >= 2")
    if args.beta is not None and args.beta < 0:
        raise UsageError("--beta must be nonnegative")


@contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _problem(args):
    try:
        return build_problem(args.problem, args.cells, args.beta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


EXTRAPOLATION_NOTE = "sparse benchmark: extrapolation, no reference experiment exists"


def _note(args) -> Optional[str]:
    return EXTRAPOLATION_NOTE if args.problem.startswith("sparse-") else None


def _opts(args) -> SolverOptions:
    return SolverOptions(tol=args.tol, max_outer=args.max_outer)


def cmd_solve(args) -> int:
    problem, exact = _problem(args)
    sol = solve_regularized(problem, args.alpha, opts=_opts(args))
    doc = {
        "problem": args.problem,
        "alpha": sol.alpha,
        "beta": problem.beta,
        "n_cells": problem.mesh.n_cells,
        "objective": sol.objective_value,
        "stationarity": sol.stationarity,
        "outer_iters": sol.outer_iters,
        "converged": sol.converged,
        "message": sol.message,
        "note": _note(args),
        "errors": {
            "err_u_L2": pieces_error(sol.u, exact.u_fn, exact.u_breaks, "L2"),
            "err_u_L1": pieces_error(sol.u, exact.u_fn, exact.u_breaks, "L1"),
            "err_y_L2": function_error(sol.y, exact.y_fn, "L2"),
            "err_p_Linf": function_error(sol.p, exact.p_fn, "Linf"),
        },
        "nodes": problem.mesh.nodes.tolist(),
        "u": sol.u.values.tolist(),
        "y": sol.y.values.tolist(),
        "p": sol.p.values.tolist(),
    }
    with _output(args.out) as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return EXIT_OK if sol.converged else EXIT_NONCONVERGED


PATH_HEADER = ("alpha", "objective", "stationarity", "outer_iters", "converged", "err_u_L2")


def cmd_path(args) -> int:
    problem, exact = _problem(args)
    alphas = alpha_grid(args.alpha_max, args.alpha_min, args.per_decade)
    sols = solve_path(problem, alphas, _opts(args), cold=args.cold, jobs=args.jobs)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PATH_HEADER)
        for s in sols:
            err = pieces_error(s.u, exact.u_fn, exact.u_breaks, "L2") if np.isfinite(s.objective_value) else float("nan")
            w.writerow([fmt(s.alpha), fmt(s.objective_value), fmt(s.stationarity), fmt(s.outer_iters), fmt(s.converged), fmt(err)])
    return EXIT_OK if all(s.converged for s in sols) else EXIT_NONCONVERGED


def cmd_rates(args) -> int:
    problem, exact = _problem(args)
    alphas = alpha_grid(args.alpha_max, args.alpha_min, args.per_decade)
    table = rate_sweep(problem, exact, alphas, _opts(args), cold=args.cold, jobs=args.jobs)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATE_HEADER)
        for r in table.rows:
            w.writerow([fmt(v) for v in r.as_tuple()])
        if _note(args):
            fh.write(f"# note={_note(args)}\n")
        fh.write(f"# d={fmt(table.d)}\n")
        for col in RATE_COLUMNS:
            key = col.replace("err_", "")
            fit = table.slopes[col]
            if fit is None:
                fh.write(f"# slope_{key}=nan\n# r2_{key}=nan\n# fitted_rows_{key}=0\n")
            else:
                fh.write(f"# slope_{key}={fmt(fit.slope)}\n# r2_{key}={fmt(fit.r2)}\n# fitted_rows_{key}={fit.n}\n")
    return EXIT_OK if all(r.converged for r in table.rows) else EXIT_NONCONVERGED


def cmd_asc(args) -> int:
    problem, exact = _problem(args)
    eps = np.logspace(np.log10(args.eps_min), np.log10(args.eps_max), args.n_eps)
    rep = asc_sweep(exact.p_bar, problem.beta, eps)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epsilon", "measure"))
        for e, m in rep.rows:
            w.writerow([fmt(e), fmt(m)])
        if rep.kappa_hat is None:
            fh.write("# kappa_hat=undefined\n# c_hat=undefined\n")
        else:
            fh.write(f"# kappa_hat={fmt(rep.kappa_hat)}\n# c_hat={fmt(rep.c_hat)}\n# r2={fmt(rep.r2)}\n")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    problem, _ = _problem(args)
    rows = gradient_check_random(problem, args.points, args.directions, seed=args.seed)
    best = {}
    for point, direction, h, fd, ad, rel in rows:
        best[(point, direction)] = min(best.get((point, direction), np.inf), rel)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("point", "direction", "h", "fd", "adjoint", "rel_error"))
        for r in rows:
            w.writerow([fmt(v) for v in r])
        fh.write(f"# worst_min_rel_error={fmt(max(best.values()))}\n")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "path": cmd_path, "rates": cmd_rates, "asc": cmd_asc, "gradcheck": cmd_gradcheck}


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
    except UsageError as exc:
        sys.stderr.write(str(exc).rstrip("\n") + "\n")
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings():
        warnings.simplefilter("always", NonMonotoneWarning)
        try:
            return COMMANDS[args.command](args)
        except UsageError as exc:
            sys.stderr.write(str(exc).rstrip("\n") + "\n")
            return EXIT_USAGE
        except OSError as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_USAGE


def main():
    sys.exit(run())
