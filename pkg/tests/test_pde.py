import numpy as np
import pytest
from conftest import cached_problem
from hypothesis import given, settings
from hypothesis import strategies as st

from semilinear_tikhonov.harness import fit_loglog_slope, random_feasible
from semilinear_tikhonov.mesh_fem import (
    SingularSystemError,
    assemble_stiffness,
    build_mesh,
    inner,
    interpolate,
    load_p0,
    load_p1,
    norm,
    p0,
    p1,
    p1_from_interior,
    solve_tridiagonal,
)
from semilinear_tikhonov.nonlinearity import make_nonlinearity
from semilinear_tikhonov.pde import (
    NewtonBlowUpError,
    NonConvergenceError,
    solve_adjoint,
    solve_linearized,
    solve_state,
)

ZERO = make_nonlinearity("zero")
SIN = make_nonlinearity("sin")
EXP = make_nonlinearity("exp")


def max_node_error(y, fn):
    return float(np.max(np.abs(y.values - fn(y.mesh.nodes))))


def test_linear_poisson_center_value():
    m = build_mesh(64)
    sol = solve_state(m, ZERO, p0(m, np.ones(64)))
    assert sol.y.values[32] == pytest.approx(0.125, abs=m.h**2)
    assert max_node_error(sol.y, lambda x: x * (1 - x) / 2) < 1e-14
    assert sol.y.values[0] == 0.0 and sol.y.values[-1] == 0.0


def test_linear_refinement_slope_two():
    # -y'' = pi^2 sin(pi x): nodal values are not exact, error is O(h^2)
    ns = [2**k for k in range(6, 13)]
    errs = []
    for n in ns:
        m = build_mesh(n)
        rhs = p0(m, np.pi**2 * np.sin(np.pi * m.midpoints))
        errs.append(max_node_error(solve_state(m, ZERO, rhs).y, lambda x: np.sin(np.pi * x)))
    fit = fit_loglog_slope([1 / n for n in ns], errs)
    assert fit.slope == pytest.approx(2.0, abs=0.1)


def test_manufactured_state_is_second_order():
    errs, hs = [], []
    for n in (64, 128, 256, 512, 1024):
        problem, exact = cached_problem("section7-sin", n)
        y = solve_state(problem.mesh, problem.nl, exact.u_bar + problem.e_shift).y
        errs.append(max_node_error(y, exact.y_fn))
        hs.append(problem.mesh.h)
    consts = np.array(errs) / np.array(hs) ** 2
    assert consts.max() / consts.min() < 1.5


def test_newton_quadratic_tail():
    problem, exact = cached_problem("section7-sin", 1024)
    sol = solve_state(problem.mesh, problem.nl, exact.u_bar + problem.e_shift, tol=1e-13)
    r = sol.history
    assert len(r) >= 3
    for a, b in zip(r, r[1:]):
        if a < 1e-2 and b > 1e-11:  # below that, roundoff of the residual itself dominates
            assert b <= 10.0 * a * a


def test_exp_stiff_source_converges_with_damping():
    m = build_mesh(128)
    sol = solve_state(m, EXP, p0(m, np.full(128, 50.0)))
    assert sol.final_residual <= 1e-10


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), kind=st.sampled_from(["zero", "exp"]))
def test_monotone_newton_converges_from_zero(seed, kind):
    problem, _ = cached_problem(f"section7-{kind}", 128)
    u = random_feasible(problem, np.random.default_rng(seed), margin=0.0)
    sol = solve_state(problem.mesh, problem.nl, u + problem.e_shift)
    assert sol.final_residual <= 1e-10


def test_iteration_budget_exhausted():
    m = build_mesh(8)
    with pytest.raises(NonConvergenceError) as err:
        solve_state(m, EXP, p0(m, np.full(8, 1e6)), max_iters=1)
    assert err.value.history


def test_newton_overflow_raises_blow_up():
    m = build_mesh(8)
    start = p1_from_interior(m, np.full(7, 800.0))
    with pytest.raises(NewtonBlowUpError):
        solve_state(m, EXP, p0(m, np.zeros(8)), y_init=start)


def test_rhs_kind_and_mesh_checked():
    m = build_mesh(8)
    with pytest.raises(ValueError):
        solve_state(m, ZERO, p1(m, np.zeros(9)))
    with pytest.raises(ValueError):
        solve_state(m, ZERO, p0(build_mesh(10), np.zeros(10)))


def test_linearized_reduces_to_poisson():
    m = build_mesh(32)
    v = p0(m, np.random.default_rng(1).standard_normal(32))
    z = solve_linearized(m, ZERO, p1(m, np.zeros(33)), v)
    np.testing.assert_allclose(z.interior, solve_tridiagonal(assemble_stiffness(m), load_p0(v)), rtol=1e-14)
    zero = solve_linearized(m, SIN, p1(m, np.zeros(33)), p0(m, np.zeros(32)))
    assert not np.any(zero.values)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), kind=st.sampled_from(["sin", "cubic", "exp"]))
def test_linearized_self_adjoint(seed, kind):
    rng = np.random.default_rng(seed)
    m = build_mesh(64)
    nl = make_nonlinearity(kind, warn=False)
    y = interpolate(m, lambda x: np.sin(np.pi * x))
    v, w = p0(m, rng.standard_normal(64)), p0(m, rng.standard_normal(64))
    a = inner(solve_linearized(m, nl, y, v), w)
    b = inner(v, solve_linearized(m, nl, y, w))
    assert a == pytest.approx(b, rel=1e-10, abs=1e-14)


def test_adjoint_vanishes_at_target():
    m = build_mesh(16)
    y = interpolate(m, lambda x: x * (1 - x))
    assert not np.any(solve_adjoint(m, SIN, y, y).values)


def test_adjoint_is_linearized_solve_bitwise():
    problem, exact = cached_problem("section7-sin", 128)
    y = solve_state(problem.mesh, problem.nl, exact.u_bar + problem.e_shift).y
    p = solve_adjoint(problem.mesh, problem.nl, y, problem.y_d)
    q = solve_linearized(problem.mesh, problem.nl, y, load_p1(y - problem.y_d))
    assert np.array_equal(p.values, q.values)


def test_manufactured_adjoint_is_second_order():
    errs, hs = [], []
    for n in (64, 256, 1024):
        problem, exact = cached_problem("section7-sin", n)
        p = solve_adjoint(problem.mesh, problem.nl, exact.y_bar, problem.y_d)
        errs.append(max_node_error(p, exact.p_fn))
        hs.append(problem.mesh.h)
    assert fit_loglog_slope(hs, errs).slope == pytest.approx(2.0, abs=0.15)


def test_adjoint_stable_in_state():
    problem, _ = cached_problem("section7-sin", 256)
    rng = np.random.default_rng(0)
    ratios = []
    for _ in range(20):
        ys = []
        for _ in range(2):
            u = random_feasible(problem, rng, margin=0.0)
            ys.append(solve_state(problem.mesh, problem.nl, u + problem.e_shift).y)
        ps = [solve_adjoint(problem.mesh, problem.nl, y, problem.y_d) for y in ys]
        ratios.append(norm(ps[0] - ps[1], "Linf") / norm(ys[0] - ys[1], "L2"))
    assert max(ratios) < 1.0  # sup-norm Green's function bound for -y'' on (0, 1) is 1/2


def test_singular_linearization_surfaces():
    m = build_mesh(2)
    nl = make_nonlinearity("cubic", warn=False)
    # K = 2/h = 4, reaction with f' = -1 integrates to -2h/3 = -1/3; make f' = -12 to hit zero
    y = p1(m, np.zeros(3))
    crafted = type(nl)("crafted", nl.eval, lambda t: np.full_like(np.asarray(t, float), -12.0), nl.deriv2, False)
    with pytest.raises(SingularSystemError):
        solve_linearized(m, crafted, y, p0(m, np.ones(2)))
