"""Newton solver for -(a y')' + f(y) = rhs with y = 0 on the boundary, plus linearized/adjoint solves."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .mesh_fem import (
    P0,
    P1,
    FEFunction,
    Mesh,
    Tridiagonal,
    assemble_reaction,
    assemble_stiffness,
    load_gauss,
    load_p0,
    load_p1,
    p1_from_interior,
    solve_tridiagonal,
)
from .nonlinearity import Nonlinearity

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 50
MAX_HALVINGS = 30


class NonConvergenceError(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = list(history)


class NewtonBlowUpError(NonConvergenceError):
    """Newton iterates became non-finite (e.g. exp overflow)."""


@dataclass(frozen=True)
class StateSolution:
    y: FEFunction
    newton_iters: int
    final_residual: float
    history: list = field(default_factory=list, repr=False)


def _check_mesh(mesh: Mesh, f: FEFunction):
    if f.mesh.n_cells != mesh.n_cells or f.mesh.domain != mesh.domain:
        raise ValueError("function lives on a different mesh")


def _residual(mesh, K, nl, y_int, b):
    y = p1_from_interior(mesh, y_int)
    with np.errstate(over="ignore", invalid="ignore"):
        fy = load_gauss(mesh, nl.eval(y.at_gauss()))
        r = K.matvec(y_int) + fy - b
    # magnitude of the terms, for the roundoff floor
    scale = np.max(np.abs(K.diag)) * 2 * np.max(np.abs(y_int), initial=0.0) + np.max(np.abs(fy)) + np.max(np.abs(b))
    return r, scale


def linearized_operator(mesh: Mesh, nl: Nonlinearity, y: FEFunction, clamp_reaction: bool = False) -> Tridiagonal:
    """Discrete A + f'(y): stiffness plus reaction with f'(y) at the Gauss nodes."""
    c = nl.deriv(y.at_gauss())
    if clamp_reaction:
        c = np.maximum(c, 0.0)
    return assemble_stiffness(mesh) + assemble_reaction(mesh, c)


def solve_state(
    mesh: Mesh,
    nl: Nonlinearity,
    rhs: FEFunction,
    y_init: Optional[FEFunction] = None,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    clamp_reaction: bool = False,
) -> StateSolution:
    """Damped Newton on the discrete state equation.

    Convergence is declared once the L-infinity residual is below ``tol`` or
    below the roundoff level of its own evaluation, whichever is larger (on
    very fine meshes the stiffness entries 2/h make 1e-10 unreachable).

    Once the residual is that small, one more full Newton step is always
    taken.  On fine meshes the roundoff floor of the residual is far above the
    actual solution error, and a warm start whose load change is below that
    floor must still move the state.
    """
    _check_mesh(mesh, rhs)
    if rhs.kind != P0:
        raise ValueError("state right-hand side must be P0")
    K = assemble_stiffness(mesh)
    b = load_p0(rhs)
    y_int = np.zeros(mesh.n_cells - 1) if y_init is None else np.array(y_init.interior, dtype=float)

    r, scale = _residual(mesh, K, nl, y_int, b)
    res = float(np.max(np.abs(r)))
    history = [res]
    polished = False
    for it in range(max_iters + 1):
        if not np.isfinite(res):
            raise NewtonBlowUpError("non-finite residual in Newton iteration", history)
        small = res <= max(tol, 32 * np.finfo(float).eps * scale)
        if small and polished:
            return StateSolution(p1_from_interior(mesh, y_int), it, res, history)
        if it == max_iters:
            break
        J = linearized_operator(mesh, nl, p1_from_interior(mesh, y_int), clamp_reaction)
        step = solve_tridiagonal(J, -r)
        if small:
            # polishing step: the residual is at noise level, so no line search
            y_int = y_int + step
            polished = True
            r, scale = _residual(mesh, K, nl, y_int, b)
            res = float(np.max(np.abs(r)))
            history.append(res)
            continue
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            y_try = y_int + t * step
            r_try, scale_try = _residual(mesh, K, nl, y_try, b)
            res_try = float(np.max(np.abs(r_try)))
            if np.isfinite(res_try) and res_try < (1.0 - 1e-4 * t) * res:
                break
            t *= 0.5
        else:
            if not np.all(np.isfinite(y_try)) or not np.isfinite(res_try):
                raise NewtonBlowUpError("Newton step overflowed at every damping level", history)
            raise NonConvergenceError("Newton line search failed", history)
        y_int, r, scale, res = y_try, r_try, scale_try, res_try
        history.append(res)
    raise NonConvergenceError(f"Newton did not converge in {max_iters} iterations", history)


def solve_linearized(
    mesh: Mesh,
    nl: Nonlinearity,
    y: FEFunction,
    v: Union[FEFunction, np.ndarray],
    clamp_reaction: bool = False,
) -> FEFunction:
    """Solve (A + f'(y)) z = v.  ``v`` is a P0/P1 function or a raw interior load vector."""
    if isinstance(v, FEFunction):
        _check_mesh(mesh, v)
        load = load_p0(v) if v.kind == P0 else load_p1(v)
    else:
        load = np.asarray(v, dtype=float)
    T = linearized_operator(mesh, nl, y, clamp_reaction)
    return p1_from_interior(mesh, solve_tridiagonal(T, load))


def solve_adjoint(
    mesh: Mesh, nl: Nonlinearity, y: FEFunction, y_d: FEFunction, clamp_reaction: bool = False
) -> FEFunction:
    """Adjoint state: the linearized operator is symmetric, so this is a linearized solve with load y - y_d."""
    if y.kind != P1 or y_d.kind != P1:
        raise ValueError("state and desired state must be P1")
    return solve_linearized(mesh, nl, y, load_p1(y - y_d), clamp_reaction)
