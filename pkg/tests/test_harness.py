import math

import numpy as np
import pytest
from conftest import cached_problem
from hypothesis import given, settings
from hypothesis import strategies as st
from test_control import box_problem

from semilinear_tikhonov.harness import (
    RATE_HEADER,
    asc_sweep,
    fit_loglog_slope,
    gradient_check,
    growth_check,
    rate_sweep,
    smooth_direction,
)
from semilinear_tikhonov.manufactured import u_bar_fn
from semilinear_tikhonov.mesh_fem import build_mesh, interpolate, p0, p1
from semilinear_tikhonov.optimizer import alpha_grid


@settings(max_examples=50)
@given(
    k=st.floats(-3, 3),
    c=st.floats(1e-3, 1e3),
    n=st.integers(3, 30),
)
def test_fit_recovers_planted_exponent(k, c, n):
    xs = np.logspace(-5, -1, n)
    fit = fit_loglog_slope(xs, c * xs**k)
    assert fit.slope == pytest.approx(k, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(c), abs=1e-10)
    if abs(k) > 1e-2:  # r2 is ill-conditioned for nearly flat data
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_examples():
    xs = np.array([1e-3, 1e-2, 1e-1, 1.0])
    assert fit_loglog_slope(xs, np.sqrt(xs)).slope == pytest.approx(0.5)
    assert fit_loglog_slope(xs, np.full(4, 7.0)).slope == pytest.approx(0.0, abs=1e-14)
    f = fit_loglog_slope(xs, 3 * xs**2)
    assert (f.slope, f.intercept) == pytest.approx((2.0, math.log(3)))


def test_fit_rejects_bad_data():
    with pytest.raises(ValueError):
        fit_loglog_slope([1, 2], [1, 2])
    with pytest.raises(ValueError):
        fit_loglog_slope([1, 2, 3], [1, 0, 3])
    with pytest.raises(ValueError):
        fit_loglog_slope([1, 2, 3], [1, 2])


def sine_p(n=2**14):
    return interpolate(build_mesh(n), lambda x: np.sin(2 * np.pi * x))


def test_asc_sine_closed_form():
    eps = np.logspace(-3, -1, 12)
    rep = asc_sweep(sine_p(), 0.0, eps)
    meas = np.array([m for _, m in rep.rows])
    np.testing.assert_allclose(meas, 2 * np.arcsin(eps) / np.pi, atol=1e-6)
    assert rep.kappa_hat == pytest.approx(1.0, abs=0.05)
    assert rep.c_hat == pytest.approx(2 / np.pi, rel=0.02)


def test_asc_default_grid_nondecreasing():
    rep = asc_sweep(sine_p(1024))
    assert len(rep.rows) == 20
    assert rep.rows[0][0] == pytest.approx(1e-3) and rep.rows[-1][0] == pytest.approx(0.3)
    meas = [m for _, m in rep.rows]
    assert all(b >= a for a, b in zip(meas, meas[1:]))


def test_asc_constant_adjoint_undefined():
    p = interpolate(build_mesh(16), lambda x: np.full_like(x, 0.7))
    rep = asc_sweep(p, 0.0, [0.1, 0.2, 0.5])
    assert rep.kappa_hat is None and rep.c_hat is None
    assert all(m == 0 for _, m in rep.rows)


def test_asc_sparse_level():
    rep = asc_sweep(sine_p(), 0.5, np.logspace(-3, np.log10(0.3), 20))
    assert rep.kappa_hat == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("beta", [0.0, 0.5])
def test_asc_matches_counting_oracle(beta):
    p = sine_p(2**12)
    n_grid = 10**6
    x = (np.arange(n_grid) + 0.5) / n_grid
    a = np.abs(p(x))
    # the band has 4 (beta = 0) or 8 connected pieces; counting misses at most 2/n_grid per piece
    pieces = 4 if beta == 0 else 8
    for eps, meas in asc_sweep(p, beta, [1e-3, 1e-2, 0.1]).rows:
        dist = np.abs(a - beta)
        counted = np.count_nonzero((dist > 0) & (dist < eps)) / n_grid
        assert meas == pytest.approx(counted, abs=2 * pieces / n_grid)


def test_asc_rejects_unsorted():
    with pytest.raises(ValueError):
        asc_sweep(sine_p(64), 0.0, [0.1, 0.01])
    with pytest.raises(ValueError):
        asc_sweep(sine_p(64), -1.0, [0.1, 0.2])


def test_gradcheck_linear_case_tight():
    m = build_mesh(64)
    pr = box_problem(64, y_d=p1(m, np.sin(np.pi * m.nodes)))
    rng = np.random.default_rng(0)
    u = p0(m, rng.uniform(-0.5, 0.5, 64))
    rows = gradient_check(pr, u, [smooth_direction(pr, rng) for _ in range(3)], h_list=[1e-5])
    assert max(r[-1] for r in rows) <= 1e-7


def test_gradcheck_v_shape():
    problem, _ = cached_problem("section7-sin", 256)
    rng = np.random.default_rng(1)
    u = p0(problem.mesh, rng.uniform(-0.9, 0.9, 256))
    rows = gradient_check(problem, u, [smooth_direction(problem, rng)])
    rel = np.array([r[-1] for r in rows])
    i = int(np.argmin(rel))
    assert rel[i] < 1e-5
    assert 0 < i < len(rel) - 1
    assert rel[0] > rel[i] and rel[-1] > rel[i]


def test_gradcheck_rejects_zero_direction():
    problem, _ = cached_problem("section7-sin", 16)
    with pytest.raises(ValueError):
        gradient_check(problem, problem.u_lo * 0.0, [p0(problem.mesh, np.zeros(16))])


def test_growth_positive_small_mesh():
    problem, exact = cached_problem("section7-sin", 512)
    c_hat, min_ratio = growth_check(problem, exact, n_samples=50)
    assert min_ratio > 0 and c_hat == pytest.approx(min_ratio)


def test_growth_skips_identical_sample(monkeypatch):
    from semilinear_tikhonov import harness

    problem, exact = cached_problem("section7-sin", 64)
    monkeypatch.setattr(harness, "_random_competitor", lambda pr, ex, rng: ex.u_bar)
    assert growth_check(problem, exact, n_samples=5) == (math.inf, math.inf)


def test_rate_sweep_table_shape():
    problem, exact = cached_problem("section7-sin", 512)
    alphas = alpha_grid(1e-1, 1e-3)
    table = rate_sweep(problem, exact, alphas)
    assert [r.alpha for r in table.rows] == alphas
    assert len(table.rows[0].as_tuple()) == len(RATE_HEADER)
    assert table.d == 1.0
    assert set(table.eligible) == set(table.slopes)
    for col, mask in table.eligible.items():
        fit = table.slopes[col]
        assert (fit is None) or fit.n == sum(mask)
    assert table.expected_exponents(1.0) == {"err_u_L2": 0.5, "err_u_L1": 1.0, "err_y_L2": 1.0, "err_p_Linf": 1.0}


def test_rate_sweep_excludes_failed_rows(monkeypatch):
    from semilinear_tikhonov import optimizer
    from semilinear_tikhonov.pde import NonConvergenceError

    problem, exact = cached_problem("section7-sin", 512)
    real = optimizer.solve_regularized

    def flaky(pr, alpha, *a, **kw):
        if abs(alpha - 1e-2) < 1e-12:
            raise NonConvergenceError("forced", [])
        return real(pr, alpha, *a, **kw)

    monkeypatch.setattr(optimizer, "solve_regularized", flaky)
    table = rate_sweep(problem, exact, alpha_grid(1e-1, 1e-3))
    bad = [i for i, r in enumerate(table.rows) if not r.converged]
    assert len(bad) == 1 and math.isnan(table.rows[bad[0]].err_u_L2)
    assert not any(table.eligible[c][bad[0]] for c in table.eligible)


def test_rate_sweep_mesh_mismatch():
    problem, _ = cached_problem("section7-sin", 64)
    _, exact = cached_problem("section7-sin", 32)
    with pytest.raises(ValueError):
        rate_sweep(problem, exact, [1e-1])


def test_u_bar_fn_sparse_zero_band():
    x = np.linspace(0, 1, 1001)
    assert np.all(u_bar_fn(x, 0.99)[np.abs(np.sin(2 * np.pi * x)) < 0.99] == 0)
