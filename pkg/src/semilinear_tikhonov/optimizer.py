"""Proximal gradient for the regularized problem and warm-started regularization paths.

One outer step with step size s is

    u+ = clip( soft(u - s p_u, s beta) / (1 + s alpha), u_lo, u_hi ),

the exact prox of  s (beta |.|_1 + alpha/2 |.|^2 + box indicator)  applied to a
gradient step on the tracking term.  For s -> infinity this becomes the
fixed-point map P(-soft(p_u, beta) / alpha).  Steps are proposed by a
Barzilai-Borwein rule and accepted by Armijo backtracking on the full objective.

On very fine meshes objective differences near the solution drop below the
evaluation noise of the objective itself, and Armijo can reject good steps.
The solver then tries the fixed-point step and keeps it only if the
stationarity residual (computed from the adjoint, which stays accurate) drops.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .control import (
    ControlProblem,
    Evaluation,
    RegularizedSolution,
    evaluate,
    fixed_point_map,
    project_box,
    stationarity_from,
)
from .mesh_fem import FEFunction, SingularSystemError, p0, to_p0
from .pde import NonConvergenceError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_outer: int = 5000
    armijo_c: float = 1e-4
    step_init: Optional[float] = None  # None: 1 / (1 + alpha)
    max_backtracks: int = 40
    mode: str = "prox"  # or "fixed-point"
    pde_tol: float = 1e-10
    step_max: float = 1e12


def prox_step(problem: ControlProblem, u: FEFunction, p_avg: np.ndarray, alpha: float, s: float) -> FEFunction:
    z = u.values - s * p_avg
    z = np.sign(z) * np.maximum(np.abs(z) - s * problem.beta, 0.0) / (1.0 + s * alpha)
    return project_box(p0(u.mesh, z), problem)


def _roundoff_slack(value: float) -> float:
    # objective differences below this are indistinguishable from evaluation noise
    return 1e3 * np.finfo(float).eps * max(abs(value), 1.0)


def solve_regularized(
    problem: ControlProblem,
    alpha: float,
    u_init: Optional[FEFunction] = None,
    opts: SolverOptions = SolverOptions(),
    y_init: Optional[FEFunction] = None,
) -> RegularizedSolution:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    mesh = problem.mesh
    if u_init is None:
        u = project_box(p0(mesh, np.zeros(mesh.n_cells)), problem)
    else:
        if not problem.is_feasible(u_init):
            raise ValueError("u_init is not feasible")
        u = u_init
    beta = problem.beta

    ev = evaluate(problem, u, y_init=y_init, tol=opts.pde_tol)
    F = ev.value(alpha, beta)
    res = stationarity_from(problem, ev, alpha)
    history = [F]
    s = opts.step_init if opts.step_init is not None else 1.0 / (1.0 + alpha)
    message = ""
    it = 0
    fallbacks = 0
    while res > opts.tol:
        if it >= opts.max_outer:
            message = f"reached max_outer={opts.max_outer}"
            break
        it += 1
        p_avg = to_p0(ev.p).values
        if opts.mode == "fixed-point":
            u_new = fixed_point_map(problem, ev.p, alpha)
            ev_new = evaluate(problem, u_new, y_init=ev.y, tol=opts.pde_tol)
        else:
            found = _armijo(problem, ev, p_avg, alpha, s, F, opts)
            if found is None:
                ev_new = _fixed_point_fallback(problem, ev, alpha, res, opts)
                if ev_new is None:
                    message = "line search failed"
                    break
                fallbacks += 1
            else:
                ev_new, s = found
        du = ev_new.u.values - u.values
        dp = to_p0(ev_new.p).values - p_avg
        curv = float(du @ dp)
        if opts.mode != "fixed-point":
            s = min(float(du @ du) / curv, opts.step_max) if curv > 0 else min(2.0 * s, opts.step_max)
        ev, u = ev_new, ev_new.u
        F = ev.value(alpha, beta)
        res = stationarity_from(problem, ev, alpha)
        history.append(F)
        if not np.isfinite(res):
            message = "non-finite iterate"
            break

    converged = res <= opts.tol
    if fallbacks and not message:
        message = f"{fallbacks} fixed-point fallback step(s)"
    log.debug("alpha=%.3e iters=%d res=%.2e converged=%s", alpha, it, res, converged)
    return RegularizedSolution(alpha, u, ev.y, ev.p, F, res, it, converged, message, tuple(history))


def _armijo(problem, ev: Evaluation, p_avg, alpha, s, F, opts):
    h = problem.mesh.h
    slack = _roundoff_slack(F)
    for _ in range(opts.max_backtracks + 1):
        u_try = prox_step(problem, ev.u, p_avg, alpha, s)
        d = u_try.values - ev.u.values
        dist2 = h * float(d @ d)
        if dist2 == 0.0:
            return None
        try:
            ev_try = evaluate(problem, u_try, y_init=ev.y, tol=opts.pde_tol)
        except (NonConvergenceError, SingularSystemError):
            s *= 0.5
            continue
        if ev_try.value(alpha, problem.beta) <= F - opts.armijo_c / s * dist2 + slack:
            return ev_try, s
        s *= 0.5
    return None


def _fixed_point_fallback(problem, ev: Evaluation, alpha, res, opts):
    u_fp = fixed_point_map(problem, ev.p, alpha)
    try:
        ev_fp = evaluate(problem, u_fp, y_init=ev.y, tol=opts.pde_tol)
    except (NonConvergenceError, SingularSystemError):
        return None
    return ev_fp if stationarity_from(problem, ev_fp, alpha) < 0.5 * res else None


def _failed(problem, alpha, u, exc) -> RegularizedSolution:
    zero = FEFunction(problem.mesh, "P1", np.zeros(problem.mesh.n_cells + 1))
    return RegularizedSolution(alpha, u, zero, zero, float("nan"), float("nan"), 0, False, f"{type(exc).__name__}: {exc}")


def solve_path(
    problem: ControlProblem,
    alphas: Sequence[float],
    opts: SolverOptions = SolverOptions(),
    cold: bool = False,
    jobs: int = 1,
    u_init: Optional[FEFunction] = None,
) -> list[RegularizedSolution]:
    """Solve along a strictly decreasing alpha grid, warm-starting each solve from the previous one.

    With ``cold=True`` every alpha starts from ``u_init`` (default: projection of 0)
    and the solves may run on ``jobs`` threads.
    """
    alphas = [float(a) for a in alphas]
    if not alphas or any(a <= 0 for a in alphas):
        raise ValueError("alphas must be a nonempty list of positive numbers")
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly decreasing")

    def one(alpha, u0, y0):
        try:
            return solve_regularized(problem, alpha, u0, opts, y_init=y0)
        except (NonConvergenceError, SingularSystemError, FloatingPointError) as exc:
            log.warning("alpha=%g failed: %s", alpha, exc)
            start = u0 if u0 is not None else project_box(p0(problem.mesh, np.zeros(problem.mesh.n_cells)), problem)
            return _failed(problem, alpha, start, exc)

    if cold:
        if jobs > 1:
            with ThreadPoolExecutor(jobs) as pool:
                return list(pool.map(lambda a: one(a, u_init, None), alphas))
        return [one(a, u_init, None) for a in alphas]

    out = []
    u0, y0 = u_init, None
    for a in alphas:
        sol = one(a, u0, y0)
        out.append(sol)
        if np.isfinite(sol.objective_value):
            u0, y0 = sol.u, sol.y
    return out


def alpha_grid(alpha_max: float = 1e-1, alpha_min: float = 1e-5, per_decade: int = 3) -> list[float]:
    """Log-spaced decreasing grid including both ends."""
    if not 0 < alpha_min < alpha_max:
        raise ValueError("need 0 < alpha_min < alpha_max")
    if per_decade < 1:
        raise ValueError("per_decade must be >= 1")
    n = int(round(np.log10(alpha_max / alpha_min) * per_decade)) + 1
    return list(np.logspace(np.log10(alpha_max), np.log10(alpha_min), n))
