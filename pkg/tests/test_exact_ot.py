import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import linprog_ot, random_simplex, vertex_enumeration_ot
from prw.exact_ot import (
    cost_matrix,
    frozen_quantile,
    interp_cdf,
    interp_quantile,
    monotone_plan_1d,
    quantile_positions,
    sinkhorn,
    solve_exact_ot,
    wasserstein_1d,
    wasserstein_p,
)
from prw.exceptions import InfeasibleMarginalsError, InvalidInputError
from prw.measures import DiscreteMeasure, make_empirical


def _instance(rng, n, m, integer_costs=False, zeros=False):
    C = rng.integers(0, 4, (n, m)).astype(float) if integer_costs else rng.random((n, m))
    return C, random_simplex(rng, n, zeros), random_simplex(rng, m, zeros)


def test_matches_vertex_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n, m = rng.integers(1, 5, 2)
        C, r, c = _instance(rng, n, m)
        _, val = solve_exact_ot(C, r, c, method="simplex")
        assert abs(val - vertex_enumeration_ot(C, r, c)) <= 1e-9


def test_degenerate_instances():
    # tied integer costs and zero-mass rows force degenerate pivots
    rng = np.random.default_rng(1)
    for _ in range(200):
        n, m = rng.integers(1, 5, 2)
        C, r, c = _instance(rng, n, m, integer_costs=True, zeros=True)
        plan, val = solve_exact_ot(C, r, c, method="simplex")
        assert abs(val - vertex_enumeration_ot(C, r, c)) <= 1e-9
        assert plan.marginal_error() <= 1e-9


def test_identical_uniform_marginals_are_degenerate():
    r = np.full(4, 0.25)
    C = np.ones((4, 4)) - np.eye(4)
    plan, val = solve_exact_ot(C, r, r, method="simplex")
    assert val == 0.0
    assert np.allclose(plan.matrix, np.eye(4) / 4)


@pytest.mark.parametrize("n, m", [(7, 12), (15, 9), (20, 20)])
def test_matches_linprog_on_larger_problems(n, m):
    rng = np.random.default_rng(n * m)
    for _ in range(5):
        C, r, c = _instance(rng, n, m)
        plan, val = solve_exact_ot(C, r, c, method="simplex")
        assert abs(val - linprog_ot(C, r, c)) <= 1e-8
        assert plan.marginal_error() <= 1e-9
        assert np.all(plan.matrix >= 0)
        # a basic solution has at most n + m - 1 positive cells
        assert np.count_nonzero(plan.matrix > 1e-15) <= n + m - 1


def test_assignment_path_agrees_with_simplex():
    rng = np.random.default_rng(2)
    for n in (1, 3, 10, 25):
        C = rng.random((n, n))
        r = np.full(n, 1.0 / n)
        _, a = solve_exact_ot(C, r, r, method="assignment")
        _, s = solve_exact_ot(C, r, r, method="simplex")
        assert abs(a - s) <= 1e-12


def test_assignment_requires_uniform_square():
    with pytest.raises(InvalidInputError):
        solve_exact_ot(np.ones((2, 3)), [0.5, 0.5], [1 / 3] * 3, method="assignment")


def test_errors():
    with pytest.raises(InfeasibleMarginalsError):
        solve_exact_ot(np.ones((2, 2)), [0.5, 0.5], [0.9, 0.2])
    with pytest.raises(InvalidInputError):
        solve_exact_ot(np.ones((2, 2)), [0.5, 0.5], [0.5, 0.5, 0.0])
    with pytest.raises(InvalidInputError):
        solve_exact_ot(np.full((2, 2), np.inf), [0.5, 0.5], [0.5, 0.5])
    with pytest.raises(InvalidInputError):
        solve_exact_ot(np.ones((2, 2)), [0.5, 0.5], [0.5, 0.5], method="magic")


def test_cost_matrix_with_projection():
    rng = np.random.default_rng(3)
    X, Y = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
    U = np.linalg.qr(rng.standard_normal((3, 2)))[0]
    C = cost_matrix(X, Y, U, 2.0)
    ref = ((X @ U)[:, None, :] - (Y @ U)[None, :, :]) ** 2
    assert np.allclose(C, ref.sum(axis=2))
    assert np.allclose(cost_matrix(X, Y, p=1.0), np.linalg.norm(X[:, None] - Y[None], axis=2))


def test_w2_between_translated_clouds():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((20, 3))
    t = np.array([0.3, -1.0, 2.0])
    assert np.isclose(wasserstein_p(make_empirical(X), make_empirical(X + t)), np.linalg.norm(t))


def test_sinkhorn_approaches_exact():
    rng = np.random.default_rng(5)
    C, r, c = _instance(rng, 6, 8)
    _, exact = solve_exact_ot(C, r, c)
    gaps = []
    for reg in (1e-1, 3e-2, 1e-2):
        res = sinkhorn(C, r, c, reg=reg, max_iter=50000)
        assert res.converged
        assert res.plan.marginal_error() <= 1e-8
        gaps.append(res.value - exact)
    assert min(gaps) >= -1e-9
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.02


def test_sinkhorn_rejects_nonpositive_reg():
    with pytest.raises(InvalidInputError):
        sinkhorn(np.ones((2, 2)), [0.5, 0.5], [0.5, 0.5], reg=0.0)


def test_1d_matches_linprog_with_mixed_weights():
    rng = np.random.default_rng(6)
    for _ in range(50):
        n, m = rng.integers(1, 9, 2)
        xs, ys = rng.standard_normal(n), rng.standard_normal(m)
        wx, wy = random_simplex(rng, n), random_simplex(rng, m)
        for p in (1.0, 2.0):
            C = np.abs(xs[:, None] - ys[None, :]) ** p
            assert abs(wasserstein_1d(xs, wx, ys, wy, p) ** p - linprog_ot(C, wx, wy)) <= 1e-9


def test_monotone_plan_marginals_and_order():
    rng = np.random.default_rng(7)
    xs, ys = rng.standard_normal(5), rng.standard_normal(7)
    wx, wy = random_simplex(rng, 5), random_simplex(rng, 7)
    plan = monotone_plan_1d(xs, wx, ys, wy)
    assert plan.marginal_error() <= 1e-12
    i, j = np.nonzero(plan.matrix)
    # no crossing pairs in the support
    for a in range(len(i)):
        for b in range(len(i)):
            if xs[i[a]] < xs[i[b]]:
                assert ys[j[a]] <= ys[j[b]]


def test_uniform_quantile_levels():
    atoms, levels = quantile_positions([3.0, 1.0, 2.0, 0.0])
    assert np.array_equal(atoms, [0.0, 1.0, 2.0, 3.0])
    assert np.allclose(levels, [0.0, 1 / 3, 2 / 3, 1.0])
    Q = interp_quantile([3.0, 1.0, 2.0, 0.0])
    assert np.isclose(Q(0.5), 1.5)
    assert Q(-1.0) == 0.0 and Q(2.0) == 3.0


def test_cdf_collapses_ties_to_mean_level():
    F = interp_cdf([0.0, 1.0, 1.0, 2.0])
    assert np.isclose(F(1.0), 0.5)
    assert F(0.0) == 0.0 and F(2.0) == 1.0


def test_cdf_inverts_quantile_without_ties():
    x = np.random.default_rng(8).standard_normal(30)
    t = np.linspace(0, 1, 101)
    assert np.allclose(interp_cdf(x)(interp_quantile(x)(t)), t)


def test_single_atom_interpolants():
    assert interp_quantile([2.0])(0.3) == 2.0
    assert np.isclose(interp_cdf([2.0])(2.0), 0.5)


def test_frozen_quantile_matches_interpolant():
    rng = np.random.default_rng(9)
    x = rng.standard_normal(40)
    w = random_simplex(rng, 40)
    t = rng.random(25)
    for weights in (None, w):
        fq = frozen_quantile(x, t, weights)
        assert np.allclose(fq.values, interp_quantile(x, weights)(t))
        assert np.allclose(fq.combine(x), fq.values)


def test_frozen_quantile_derivative_in_atoms():
    rng = np.random.default_rng(10)
    x = rng.standard_normal(15)
    t = rng.random(10)
    fq = frozen_quantile(x, t)
    v = rng.standard_normal(15)
    h = 1e-7
    fd = (frozen_quantile(x + h * v, t).values - frozen_quantile(x - h * v, t).values) / (2 * h)
    assert np.allclose(fd, fq.combine(v), atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_wasserstein_symmetric_and_nonnegative(n, m, seed):
    rng = np.random.default_rng(seed)
    mu = DiscreteMeasure(rng.standard_normal((n, 2)), random_simplex(rng, n))
    nu = DiscreteMeasure(rng.standard_normal((m, 2)), random_simplex(rng, m))
    a, b = wasserstein_p(mu, nu), wasserstein_p(nu, mu)
    assert a >= 0
    assert abs(a - b) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**31))
def test_1d_agrees_with_general_solver(n, m, seed):
    rng = np.random.default_rng(seed)
    xs, ys = rng.standard_normal(n), rng.standard_normal(m)
    wx, wy = random_simplex(rng, n), random_simplex(rng, m)
    _, val = solve_exact_ot((xs[:, None] - ys[None, :]) ** 2, wx, wy)
    assert abs(wasserstein_1d(xs, wx, ys, wy, 2.0) ** 2 - val) <= 1e-9
