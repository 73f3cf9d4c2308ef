"""Rate sweeps, log-log fits, active-set measure sweeps, gradient and growth checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .control import ControlProblem, evaluate, hessian_quadratic_form, l1_directional_derivative
from .manufactured import ExactSolution
from .mesh_fem import FEFunction, band_measure, function_error, p0, pieces_error, to_p0
from .optimizer import SolverOptions, alpha_grid, solve_path
from .pde import solve_linearized

RATE_COLUMNS = ("err_u_L2", "err_u_L1", "err_u_Linf", "err_y_L2", "err_p_Linf")
RATE_HEADER = ("alpha",) + RATE_COLUMNS + ("stationarity", "outer_iters", "converged")

# rows whose error is within this factor of the discretization floor are not fitted
FLOOR_FACTOR = 5.0


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float
    n: int


def fit_loglog_slope(xs, ys) -> LogLogFit:
    """Least squares line through (log x, log y)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError("xs and ys differ in length")
    if len(xs) < 3:
        raise ValueError(f"need at least 3 points, got {len(xs)}")
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(xs * ys)):
        raise ValueError("log-log fit needs positive finite data")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    # flat data: ss_tot is pure roundoff and the ratio would be meaningless
    flat = ss_tot <= 1e-24 * len(ly) * max(1.0, float(np.max(np.abs(ly)))) ** 2
    r2 = 1.0 if flat else 1.0 - float(resid @ resid) / ss_tot
    return LogLogFit(float(slope), float(intercept), r2, len(xs))


@dataclass(frozen=True)
class RateRow:
    alpha: float
    err_u_L2: float
    err_u_L1: float
    err_u_Linf: float
    err_y_L2: float
    err_p_Linf: float
    stationarity: float
    outer_iters: int
    converged: bool
    layers_resolved: bool = True

    def as_tuple(self):
        return tuple(getattr(self, k) for k in RATE_HEADER)


@dataclass
class RateTable:
    rows: list
    slopes: dict  # column -> LogLogFit or None
    d: float
    floors: dict = field(default_factory=dict)
    eligible: dict = field(default_factory=dict)  # column -> list of bools
    notes: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def expected_exponents(self, kappa: float) -> dict:
        """Upper-bound exponents for the theory's rates, given kappa and d = min(kappa, 1)."""
        d = self.d
        return {
            "err_u_L2": d / 2,
            "err_u_L1": kappa * (d + 1) / (kappa + 1),
            "err_y_L2": (d + 1) / 2,
            "err_p_Linf": (d + 1) / 2,
        }


def _layers_resolved(problem: ControlProblem, u: FEFunction, min_cells: int) -> bool:
    """True if every run of cells strictly inside the bounds (and nonzero) is at least ``min_cells`` long."""
    v = u.values
    free = (v > problem.u_lo.values) & (v < problem.u_hi.values) & (v != 0)
    if not free.any():
        return False
    edges = np.diff(np.concatenate([[0], free.astype(int), [0]]))
    runs = np.nonzero(edges == -1)[0] - np.nonzero(edges == 1)[0]
    return bool(runs.min() >= min_cells)


def discretization_floors(problem: ControlProblem, exact: ExactSolution) -> dict:
    """Errors that remain at alpha = 0: representation of u_bar and state/adjoint consistency."""
    ev = evaluate(problem, exact.u_bar)
    return {
        "err_u_L2": pieces_error(exact.u_bar, exact.u_fn, exact.u_breaks, "L2"),
        "err_u_L1": pieces_error(exact.u_bar, exact.u_fn, exact.u_breaks, "L1"),
        "err_u_Linf": pieces_error(exact.u_bar, exact.u_fn, exact.u_breaks, "Linf"),
        "err_y_L2": function_error(ev.y, exact.y_fn, "L2"),
        "err_p_Linf": function_error(ev.p, exact.p_fn, "Linf"),
    }


def rate_sweep(
    problem: ControlProblem,
    exact: ExactSolution,
    alphas: Optional[Sequence[float]] = None,
    opts: SolverOptions = SolverOptions(),
    cold: bool = False,
    jobs: int = 1,
    min_layer_cells: int = 3,
) -> RateTable:
    """Solve along the alpha path and tabulate errors against the exact solution.

    A row enters the fit of a column when the solve converged, the transition
    layers of u_alpha span at least ``min_layer_cells`` cells, and the error
    exceeds FLOOR_FACTOR times that column's discretization floor.
    """
    if exact.u_bar.mesh.n_cells != problem.mesh.n_cells:
        raise ValueError("exact solution lives on a different mesh")
    alphas = alpha_grid() if alphas is None else list(alphas)
    sols = solve_path(problem, alphas, opts, cold=cold, jobs=jobs)
    rows = []
    for s in sols:
        if np.isfinite(s.objective_value):
            errs = (
                pieces_error(s.u, exact.u_fn, exact.u_breaks, "L2"),
                pieces_error(s.u, exact.u_fn, exact.u_breaks, "L1"),
                pieces_error(s.u, exact.u_fn, exact.u_breaks, "Linf"),
                function_error(s.y, exact.y_fn, "L2"),
                function_error(s.p, exact.p_fn, "Linf"),
            )
        else:
            errs = (math.nan,) * 5
        rows.append(RateRow(s.alpha, *errs, s.stationarity, s.outer_iters, s.converged,
                            _layers_resolved(problem, s.u, min_layer_cells)))

    floors = discretization_floors(problem, exact)
    slopes, eligible, notes = {}, {}, {}
    for col in RATE_COLUMNS:
        mask = [
            r.converged and r.layers_resolved and getattr(r, col) > 0
            and getattr(r, col) >= FLOOR_FACTOR * floors[col]
            for r in rows
        ]
        eligible[col] = mask
        xs = [r.alpha for r, m in zip(rows, mask) if m]
        ys = [getattr(r, col) for r, m in zip(rows, mask) if m]
        try:
            slopes[col] = fit_loglog_slope(xs, ys)
        except ValueError as exc:
            slopes[col] = None
            notes[col] = str(exc)
    return RateTable(rows, slopes, min(exact.kappa, 1.0), floors, eligible, notes)


@dataclass(frozen=True)
class AscReport:
    rows: list  # (epsilon, measure)
    kappa_hat: Optional[float]
    c_hat: Optional[float]
    r2: Optional[float] = None


def asc_sweep(p: FEFunction, beta: float = 0.0, epsilons: Optional[Sequence[float]] = None) -> AscReport:
    """Measure of {0 < ||p| - beta| < eps} for each eps, with a power-law fit c * eps**kappa."""
    if epsilons is None:
        epsilons = np.logspace(-3, np.log10(0.3), 20)
    eps = np.asarray(epsilons, dtype=float)
    if np.any(eps <= 0) or np.any(np.diff(eps) <= 0):
        raise ValueError("epsilons must be positive and strictly increasing")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if beta == 0:
        meas = [band_measure(p, 0.0, e) for e in eps]
    else:
        # a negative lower level means no lower bound, i.e. eps >= beta
        meas = [band_measure(p, beta - e if e < beta else -1.0, beta + e) for e in eps]
    rows = list(zip(eps.tolist(), meas))
    pos = [(e, m) for e, m in rows if m > 0]
    if len(pos) < 3:
        return AscReport(rows, None, None)
    fit = fit_loglog_slope(*zip(*pos))
    return AscReport(rows, fit.slope, math.exp(fit.intercept), fit.r2)


def random_feasible(problem: ControlProblem, rng: np.random.Generator, margin: float = 0.1) -> FEFunction:
    lo, hi = problem.u_lo.values, problem.u_hi.values
    t = rng.uniform(margin, 1.0 - margin, size=lo.shape)
    return p0(problem.mesh, lo + t * (hi - lo))


def smooth_direction(problem: ControlProblem, rng: np.random.Generator, modes: int = 8) -> FEFunction:
    """Random combination of low sine modes sampled at cell midpoints, scaled to max 1."""
    x = problem.mesh.midpoints
    k = np.arange(1, modes + 1)
    v = np.sin(np.pi * np.outer(x, k)) @ (rng.standard_normal(modes) / k)
    return p0(problem.mesh, v / np.max(np.abs(v)))


DEFAULT_STEPS = tuple(10.0 ** -k for k in range(1, 10))


def gradient_check(
    problem: ControlProblem,
    u: FEFunction,
    directions: Sequence[FEFunction],
    h_list: Sequence[float] = DEFAULT_STEPS,
    alpha: float = 0.0,
    pde_tol: float = 1e-13,
) -> list[tuple]:
    """Central differences of J_alpha (without the L1 term) against the adjoint derivative.

    Returns rows (direction id, h, fd, adjoint, rel_error).
    """
    ev = evaluate(problem, u, tol=pde_tol)
    g = ev.gradient(alpha)
    h_mesh = problem.mesh.h

    def value(w):
        e = evaluate(problem, w, y_init=ev.y, tol=pde_tol)
        return e.tracking + 0.5 * alpha * e.l2sq

    rows = []
    for j, v in enumerate(directions):
        if not np.any(v.values):
            raise ValueError(f"direction {j} is zero")
        ad = float(h_mesh * g.values @ v.values)
        for h in h_list:
            fd = (value(u + h * v) - value(u - h * v)) / (2 * h)
            rows.append((j, float(h), fd, ad, abs(fd - ad) / max(abs(ad), 1e-300)))
    return rows


def gradient_check_random(
    problem: ControlProblem,
    n_points: int = 10,
    n_directions: int = 5,
    h_list: Sequence[float] = DEFAULT_STEPS,
    seed: int = 0,
) -> list[tuple]:
    """Rows (point, direction, h, fd, adjoint, rel_error) at random feasible controls."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_points):
        u = random_feasible(problem, rng)
        dirs = [smooth_direction(problem, rng) for _ in range(n_directions)]
        rows.extend((i,) + r for r in gradient_check(problem, u, dirs, h_list))
    return rows


def _random_competitor(problem, exact, rng):
    """Feasible control differing from u_bar on a window, often placed at a switching point."""
    n = problem.mesh.n_cells
    lo, hi = problem.u_lo.values, problem.u_hi.values
    u = exact.u_bar.values.copy()
    kind = rng.integers(3)
    if kind == 0:
        mask = np.ones(n, bool)
    else:
        h = problem.mesh.h
        width = 10 ** rng.uniform(np.log10(h), np.log10(0.3))
        centers = list(exact.u_breaks) + [0.0, 1.0]
        c = rng.choice(centers) if kind == 1 else rng.uniform(0, 1)
        x = problem.mesh.midpoints
        mask = np.abs(x - c) <= 0.5 * width + 0.5 * h
    u[mask] = rng.uniform(lo[mask], hi[mask])
    return p0(problem.mesh, u)


def growth_check(problem: ControlProblem, exact: ExactSolution, n_samples: int = 100, seed: int = 0):
    """Sampled growth of J'(u_bar)(u - u_bar) (+ beta j'(u_bar; u - u_bar)) against |u - u_bar|_L1.

    Returns (c_hat, min_ratio): the smallest ratio with the exponent 1 + 1/kappa,
    and the smallest ratio with exponent 2.
    """
    rng = np.random.default_rng(seed)
    ev = evaluate(problem, exact.u_bar)
    g = to_p0(ev.p).values
    h = problem.mesh.h
    expo = 1.0 + 1.0 / exact.kappa
    c_hat, min_ratio = math.inf, math.inf
    for _ in range(n_samples):
        u = _random_competitor(problem, exact, rng)
        d = u - exact.u_bar
        dist = h * float(np.sum(np.abs(d.values)))
        if dist == 0:
            continue
        num = h * float(g @ d.values)
        if problem.beta > 0:
            num += problem.beta * l1_directional_derivative(exact.u_bar, d)
        c_hat = min(c_hat, num / dist**expo)
        min_ratio = min(min_ratio, num / dist**2)
    return c_hat, min_ratio


def sosc_sample(
    problem: ControlProblem, exact: ExactSolution, n_directions: int = 100, tau_frac: float = 0.1, seed: int = 0
) -> float:
    """Smallest J''(u_bar) v^2 / |z_v|^2 over random v in the extended critical cone.

    v vanishes where |p_bar| > tau, is >= 0 where u_bar sits at the lower bound
    and <= 0 at the upper bound.  The returned value is an estimate, not a certificate.
    """
    rng = np.random.default_rng(seed)
    ev = evaluate(problem, exact.u_bar)
    p_avg = to_p0(ev.p).values
    tau = tau_frac * float(np.max(np.abs(ev.p.values)))
    support = np.abs(p_avg) <= tau
    if not support.any():
        raise ValueError("no cells with |p| <= tau")
    ub = exact.u_bar.values
    at_lo = ub <= problem.u_lo.values
    at_hi = ub >= problem.u_hi.values
    mesh = problem.mesh
    delta = math.inf
    for _ in range(n_directions):
        v = rng.standard_normal(mesh.n_cells) * support
        v = np.where(at_lo, np.abs(v), np.where(at_hi, -np.abs(v), v))
        vf = p0(mesh, v)
        q = hessian_quadratic_form(problem, exact.u_bar, vf, ev=ev)
        z = solve_linearized(mesh, problem.nl, ev.y, vf)
        zz = float(np.sum(z.at_gauss() ** 2) * 0.5 * mesh.h)
        if zz > 0:
            delta = min(delta, q / zz)
    return delta
