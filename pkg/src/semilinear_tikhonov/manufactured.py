"""Benchmark problems on (0, 1) with a known optimal triple (u_bar, y_bar, p_bar).

The construction starts from p_bar = sin(2 pi x) and y_bar = sin(pi x), reads
u_bar off the sign structure of p_bar, and then chooses the source shift
e_shift and the desired state y_d so that state and adjoint equations hold.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .control import ControlProblem
from .mesh_fem import FEFunction, build_mesh, cell_average, interpolate, p0
from .nonlinearity import make_nonlinearity

PI = np.pi


def p_bar_fn(x):
    return np.sin(2 * PI * np.asarray(x, float))


def y_bar_fn(x):
    return np.sin(PI * np.asarray(x, float))


def u_bar_fn(x, beta: float = 0.0):
    """Bang-bang (beta = 0) or bang-bang-off (beta > 0) control read off p_bar, bounds -1 and 1."""
    p = p_bar_fn(x)
    return np.where(p > beta, -1.0, np.where(p < -beta, 1.0, 0.0))


def y_d_fn(kind: str):
    nl = make_nonlinearity(kind, warn=False)

    def y_d(x):
        x = np.asarray(x, float)
        yb = y_bar_fn(x)
        return yb - 4 * PI**2 * p_bar_fn(x) - nl.deriv(yb) * p_bar_fn(x)

    return y_d


def e_shift_fn(kind: str, beta: float = 0.0):
    """Closed form of e = -u_bar - y_bar'' + f(y_bar)."""
    nl = make_nonlinearity(kind, warn=False)

    def e(x):
        x = np.asarray(x, float)
        return -u_bar_fn(x, beta) + PI**2 * y_bar_fn(x) + nl.eval(y_bar_fn(x))

    return e


@dataclass(frozen=True)
class ExactSolution:
    u_bar: FEFunction
    y_bar: FEFunction
    p_bar: FEFunction
    kappa: float = 1.0
    active_set: tuple = ((0.0, 1.0),)
    beta: float = 0.0
    u_fn: Callable = field(default=u_bar_fn, repr=False)
    y_fn: Callable = field(default=y_bar_fn, repr=False)
    p_fn: Callable = field(default=p_bar_fn, repr=False)
    u_breaks: tuple = (0.5,)


def _switch_points(beta: float) -> tuple:
    if beta == 0:
        return (0.5,)
    s = np.arcsin(beta) / (2 * PI)
    return (s, 0.5 - s, 0.5, 0.5 + s, 1.0 - s)


def _build(kind: str, n_cells: int, beta: float, name: str):
    mesh = build_mesh(n_cells)
    nl = make_nonlinearity(kind)
    u_bar = p0(mesh, u_bar_fn(mesh.midpoints, beta))
    # u_bar + e_shift is the smooth part -y_bar'' + f(y_bar) exactly, cell averaged
    smooth = cell_average(mesh, lambda x: PI**2 * y_bar_fn(x) + nl.eval(y_bar_fn(x)))
    problem = ControlProblem(
        mesh=mesh,
        nl=nl,
        y_d=interpolate(mesh, y_d_fn(kind)),
        e_shift=smooth - u_bar,
        u_lo=p0(mesh, np.full(n_cells, -1.0)),
        u_hi=p0(mesh, np.full(n_cells, 1.0)),
        beta=beta,
        name=name,
    )
    exact = ExactSolution(
        u_bar=u_bar,
        y_bar=interpolate(mesh, y_bar_fn),
        p_bar=interpolate(mesh, p_bar_fn),
        beta=beta,
        u_fn=lambda x: u_bar_fn(x, beta),
        u_breaks=_switch_points(beta),
    )
    return problem, exact


def build_section7(kind: str, n_cells: int):
    """Bang-bang benchmark with bounds -1 <= u <= 1 and the given nonlinearity."""
    return _build(kind, n_cells, 0.0, f"section7-{kind}")


def build_sparse(kind: str, beta: float, n_cells: int):
    """Same p_bar, y_bar, y_d with an L1 weight beta; u_bar is bang-bang-off."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    return _build(kind, n_cells, float(beta), f"sparse-{kind}")


PROBLEM_FAMILIES = ("section7", "sparse")


def build_problem(name: str, n_cells: int, beta: Optional[float] = None):
    """Look up ``section7-<kind>`` or ``sparse-<kind>`` (beta defaults to 0.5 for sparse)."""
    family, _, kind = name.partition("-")
    if family == "section7":
        if beta:
            raise ValueError("section7 problems have beta = 0; use sparse-<kind>")
        return build_section7(kind, n_cells)
    if family == "sparse":
        return build_sparse(kind, 0.5 if beta is None else beta, n_cells)
    raise ValueError(f"unknown problem {name!r}")
