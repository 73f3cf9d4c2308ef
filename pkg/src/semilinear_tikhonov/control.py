"""Reduced objective, adjoint gradient, prox/projection and second-order form for the control problem."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mesh_fem import P0, FEFunction, Mesh, p0, to_p0
from .nonlinearity import Nonlinearity
from .pde import DEFAULT_TOL, StateSolution, solve_adjoint, solve_linearized, solve_state


@dataclass(frozen=True)
class ControlProblem:
    """min 1/2 |y - y_d|^2 + beta |u|_1 (+ alpha/2 |u|^2)  s.t.  A y + f(y) = u + e_shift, u_lo <= u <= u_hi."""

    mesh: Mesh
    nl: Nonlinearity
    y_d: FEFunction
    e_shift: FEFunction
    u_lo: FEFunction
    u_hi: FEFunction
    beta: float = 0.0
    clamp_reaction: bool = False
    name: str = ""

    def __post_init__(self):
        if self.y_d.kind != "P1":
            raise ValueError("y_d must be P1")
        for f in (self.e_shift, self.u_lo, self.u_hi):
            if f.kind != P0:
                raise ValueError("e_shift and bounds must be P0")
        if np.any(self.u_lo.values > self.u_hi.values):
            raise ValueError("lower bound exceeds upper bound")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.beta > 0 and (np.any(self.u_lo.values > 0) or np.any(self.u_hi.values < 0)):
            raise ValueError("sparse problems need u_lo <= 0 <= u_hi")

    def is_feasible(self, u: FEFunction) -> bool:
        return bool(np.all(u.values >= self.u_lo.values) and np.all(u.values <= self.u_hi.values))


@dataclass(frozen=True)
class RegularizedSolution:
    alpha: float
    u: FEFunction
    y: FEFunction
    p: FEFunction
    objective_value: float
    stationarity: float
    outer_iters: int
    converged: bool = True
    message: str = ""
    history: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class Evaluation:
    """Everything the optimizer needs at one control: state, adjoint, and the objective pieces."""

    u: FEFunction
    state: StateSolution
    p: FEFunction
    tracking: float
    l1: float
    l2sq: float

    def value(self, alpha: float, beta: float) -> float:
        return self.tracking + beta * self.l1 + 0.5 * alpha * self.l2sq

    @property
    def y(self):
        return self.state.y

    def gradient(self, alpha: float) -> FEFunction:
        return p0(self.u.mesh, to_p0(self.p).values + alpha * self.u.values)


def _l2sq_p1(e: np.ndarray, h: float) -> float:
    return float(h / 3.0 * np.sum(e[:-1] ** 2 + e[:-1] * e[1:] + e[1:] ** 2))


def evaluate(
    problem: ControlProblem, u: FEFunction, y_init: Optional[FEFunction] = None, tol: float = DEFAULT_TOL
) -> Evaluation:
    mesh = problem.mesh
    state = solve_state(mesh, problem.nl, u + problem.e_shift, y_init=y_init, tol=tol, clamp_reaction=problem.clamp_reaction)
    p = solve_adjoint(mesh, problem.nl, state.y, problem.y_d, problem.clamp_reaction)
    e = state.y.values - problem.y_d.values
    h = mesh.h
    return Evaluation(
        u,
        state,
        p,
        0.5 * _l2sq_p1(e, h),
        float(h * np.sum(np.abs(u.values))),
        float(h * np.sum(u.values**2)),
    )


def project_box(u: FEFunction, problem: ControlProblem) -> FEFunction:
    return p0(u.mesh, np.clip(u.values, problem.u_lo.values, problem.u_hi.values))


def soft_threshold(p: FEFunction, beta: float) -> FEFunction:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    v = p.values
    return FEFunction(p.mesh, p.kind, np.sign(v) * np.maximum(np.abs(v) - beta, 0.0))


def objective(problem: ControlProblem, u: FEFunction, alpha: float = 0.0, **kw) -> float:
    """1/2 |y_u - y_d|^2 + beta |u|_1 + alpha/2 |u|^2."""
    return evaluate(problem, u, **kw).value(alpha, problem.beta)


def gradient_smooth(problem: ControlProblem, u: FEFunction, alpha: float = 0.0, **kw) -> FEFunction:
    """P0 Riesz representative of J'(u) + alpha (u, .): cell averages of the adjoint plus alpha u."""
    return evaluate(problem, u, **kw).gradient(alpha)


def fixed_point_map(problem: ControlProblem, p: FEFunction, alpha: float) -> FEFunction:
    """P(-soft(p, beta) / alpha) with the adjoint reduced to P0 by cell averaging."""
    q = soft_threshold(to_p0(p), problem.beta)
    return project_box(-q * (1.0 / alpha), problem)


def stationarity_from(problem: ControlProblem, ev: Evaluation, alpha: float) -> float:
    target = fixed_point_map(problem, ev.p, alpha)
    return float(np.max(np.abs(ev.u.values - target.values)))


def stationarity_residual(problem: ControlProblem, u: FEFunction, alpha: float, **kw) -> float:
    if alpha <= 0:
        raise ValueError("stationarity residual needs alpha > 0")
    return stationarity_from(problem, evaluate(problem, u, **kw), alpha)


def hessian_quadratic_form(
    problem: ControlProblem, u: FEFunction, v: FEFunction, w: Optional[FEFunction] = None, ev: Optional[Evaluation] = None
) -> float:
    """J''(u)(v, w) = int (1 - f''(y) p) z_v z_w, by 2-point Gauss (exact for the discrete J)."""
    if ev is None:
        ev = evaluate(problem, u)
    mesh, nl = problem.mesh, problem.nl
    zv = solve_linearized(mesh, nl, ev.y, v, problem.clamp_reaction)
    zw = zv if w is None else solve_linearized(mesh, nl, ev.y, w, problem.clamp_reaction)
    weight = 1.0 - nl.deriv2(ev.y.at_gauss()) * ev.p.at_gauss()
    return float(0.5 * mesh.h * np.sum(weight * zv.at_gauss() * zw.at_gauss()))


def l1_directional_derivative(u: FEFunction, d: FEFunction) -> float:
    """j'(u; d) for j = |.|_1 on P0: sign(u) d where u != 0, |d| where u = 0."""
    uv, dv = u.values, d.values
    return float(u.mesh.h * np.sum(np.where(uv != 0, np.sign(uv) * dv, np.abs(dv))))

