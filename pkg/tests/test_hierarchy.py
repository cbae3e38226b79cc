import numpy as np
import pytest

from kummer_secants import hierarchy
from kummer_secants.errors import (
    IllConditioned,
    LowerOrdersUnsolved,
    OrderUnsolvable,
    ValidationError,
)
from kummer_secants.hierarchy import (
    AlphaTable,
    affine_block,
    initial_state,
    make_grid,
    min_norm_lstsq,
    p_coefficients,
    p_series_eval,
    q_s_eval,
    q_values,
    rt_cross_check,
    run_hierarchy,
    solve_order,
)
from kummer_secants.kummer import config_from_centered, degenerate_secant_test
from kummer_secants.theta_core import random_points, theta_values


def _random_unknowns(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def test_alpha_table_fixed_rows():
    t = AlphaTable(2, {(1, 1): 0.5, (3, 1): 2.0}, gauge=3.0)
    np.testing.assert_allclose(t.series(1, 2), [1, 0.5, 0])
    np.testing.assert_allclose(t.series(2, 2), [-1, 0, 0])
    np.testing.assert_allclose(t.series(3, 2), [0, 2, 0])
    np.testing.assert_allclose(t.series(4, 2), [0, 3, 0])
    assert t.free_rows() == [1, 3]


def test_p0_vanishes(random_g2_state):
    Z = random_points(random_g2_state.sm, 8, np.random.default_rng(0))
    state = random_g2_state.with_unknowns(1, _random_unknowns(np.random.default_rng(1), 3))
    assert np.max(np.abs(p_coefficients(state, Z, 1)[:, 0])) <= 1e-13


def test_q1_is_the_fixed_b_term(random_g2_state):
    # with alpha_{m+2} = gauge * eps the only order-1 content outside the
    # unknown block is gauge * theta(z + b_m) theta(z - b_m)
    st = random_g2_state
    Z = random_points(st.sm, 8, np.random.default_rng(2))
    b = st.config.centered_b[-1]
    th = theta_values(st.sm, np.vstack([Z + b, Z - b]))
    expected = st.alphas.gauge * th[:8] * th[8:]
    np.testing.assert_allclose(q_values(st, 1, Z), expected, atol=1e-13)


def test_q_ignores_order_s_slots(solved_g1):
    rng = np.random.default_rng(3)
    z = random_points(solved_g1.sm, 1, rng)[0]
    for s in range(1, 6):
        altered = solved_g1.with_unknowns(s, _random_unknowns(rng, solved_g1.n_unknowns))
        assert abs(q_s_eval(altered, s, z) - q_s_eval(solved_g1, s, z)) <= 1e-13 * max(1, abs(q_s_eval(solved_g1, s, z)))


@pytest.mark.parametrize("s", [1, 2, 3, 4])
def test_affinity(solved_g2, s):
    st = solved_g2
    rng = np.random.default_rng(s)
    Z = random_points(st.sm, 5, rng)
    x, y = _random_unknowns(rng, st.n_unknowns), _random_unknowns(rng, st.n_unknowns)
    for lam in (0.0, 0.3, 0.75, 1.0):
        mix = p_coefficients(st.with_unknowns(s, lam * x + (1 - lam) * y), Z, s)[:, s]
        px = p_coefficients(st.with_unknowns(s, x), Z, s)[:, s]
        py = p_coefficients(st.with_unknowns(s, y), Z, s)[:, s]
        combo = lam * px + (1 - lam) * py
        assert np.max(np.abs(mix - combo)) <= 1e-12 * max(1.0, np.max(np.abs(combo)))


@pytest.mark.parametrize("fixture", ["solved_g1", "solved_g2"])
def test_consistency_q_plus_block(fixture, request):
    st = request.getfixturevalue(fixture)
    rng = np.random.default_rng(7)
    Z = random_points(st.sm, 4, rng)
    A = affine_block(st, Z)
    for s in range(1, min(6, st.solved + 1) + 1):
        x = _random_unknowns(rng, st.n_unknowns)
        trial = st.with_unknowns(s, x)
        p = np.array([p_series_eval(trial, z, s)[s] for z in Z])
        rhs = q_values(st, s, Z) + A @ x
        assert np.max(np.abs(p - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(p)))


def test_genus_one_solves_eight_orders(solved_g1):
    assert solved_g1.failure is None
    assert solved_g1.solved == 8
    assert max(solved_g1.residuals) <= 1e-8
    assert np.linalg.norm(solved_g1.w[0]) > 0


def test_genus_two_solves_five_orders(solved_g2):
    assert solved_g2.failure is None
    assert solved_g2.solved == 5
    assert max(solved_g2.residuals) <= 1e-6


def test_s_max_zero_returns_initial_state(sm1):
    cfg = config_from_centered([0.2j], [[0.4]], sm1)
    st0 = initial_state(sm1, cfg)
    out = run_hierarchy(sm1, cfg, 0, state=st0)
    assert out is st0 and out.solved == 0


def test_lower_orders_required(random_g2_state):
    with pytest.raises(LowerOrdersUnsolved):
        q_values(random_g2_state, 3, random_g2_state.grid.points)
    with pytest.raises(LowerOrdersUnsolved):
        solve_order(random_g2_state, 2)


def test_random_configuration_is_unsolvable(random_g2_state):
    with pytest.raises(OrderUnsolvable) as info:
        solve_order(random_g2_state, 1)
    assert info.value.residual > 1e-4
    cfg = random_g2_state.config
    d1 = info.value.state.w[0]
    assert not degenerate_secant_test(random_g2_state.sm, cfg.centered_u, d1, cfg.centered_b).is_secant
    failed = run_hierarchy(random_g2_state.sm, cfg, 3, state=random_g2_state)
    assert failed.failure["order"] == 1 and failed.failure["kind"] == "OrderUnsolvable"


def test_ill_conditioned_is_reported(monkeypatch, solved_g1):
    monkeypatch.setattr(hierarchy, "COND_LIMIT", 1.0)
    cfg = solved_g1.config
    st0 = initial_state(solved_g1.sm, cfg, solved_g1.grid)
    with pytest.raises(IllConditioned) as info:
        solve_order(st0, 1)
    assert info.value.condition_number > 1.0
    assert run_hierarchy(solved_g1.sm, cfg, 2, state=st0).failure["kind"] == "IllConditioned"


def test_solve_order_validates_tolerance(random_g2_state):
    with pytest.raises(ValidationError):
        solve_order(random_g2_state, 1, tol_solve=0.0)


@pytest.mark.parametrize("c", [2.0, -0.5 + 1j])
def test_gauge_changes_values_not_verdicts(solved_g1, c):
    st = solved_g1
    out = run_hierarchy(st.sm, st.config, 3, grid=st.grid, gauge=c)
    assert out.failure is None and out.solved == 3
    for j in range(3):
        np.testing.assert_allclose(out.w[j], c ** (j + 1) * st.w[j], rtol=1e-8)


def test_gauge_verdicts_genus_two(sm2, random_g2_state, search_g2):
    for c in (1.0, 3.0, 0.2j):
        ok = run_hierarchy(sm2, search_g2.config, 3, 1e-6, grid=search_g2.state.grid, gauge=c)
        assert ok.failure is None and ok.solved == 3
        bad = run_hierarchy(sm2, random_g2_state.config, 3, 1e-6, grid=random_g2_state.grid, gauge=c)
        assert bad.failure["order"] == 1


@pytest.mark.parametrize("fixture,orders", [("solved_g1", 4), ("solved_g2", 3)])
def test_grid_robustness(fixture, orders, request):
    st = request.getfixturevalue(fixture)
    grid = make_grid(st.sm, st.config, st.grid.count, seed=st.grid.seed + 12345)
    other = run_hierarchy(st.sm, st.config, orders, 1e-6, grid=grid)
    assert other.solved == orders
    for s in range(1, orders + 1):
        if max(st.conditions[s - 1], other.conditions[s - 1]) > 1e8:
            continue
        a, b = st.unknowns(s), other.unknowns(s)
        assert np.linalg.norm(a - b) <= 1e-6 * np.linalg.norm(a)


@pytest.mark.parametrize("fixture", ["solved_g1", "solved_g2"])
def test_rt_cross_identities(fixture, request):
    st = request.getfixturevalue(fixture)
    Z = random_points(st.sm, 10, np.random.default_rng(5))
    for s in range(1, 6):
        assert max(rt_cross_check(st, s, Z)) <= 1e-7


def test_rt_cross_check_runs_unsolved(random_g2_state):
    st = random_g2_state.with_unknowns(1, _random_unknowns(np.random.default_rng(6), 3))
    vals = rt_cross_check(st, 2, st.grid.points[:3])
    assert all(np.isfinite(v) for v in vals)
    assert max(vals) > 1e-6


def test_min_norm_lstsq_matches_numpy():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(12, 4)) + 1j * rng.normal(size=(12, 4))
    b = rng.normal(size=12) + 0j
    fit = min_norm_lstsq(A, b, 4)
    np.testing.assert_allclose(fit.x, np.linalg.lstsq(A, b, rcond=None)[0], atol=1e-12)
    B = np.hstack([A[:, :2], A[:, :2] @ rng.normal(size=(2, 2))])
    fit = min_norm_lstsq(B, b, 2)
    np.testing.assert_allclose(fit.x, np.linalg.pinv(B, rcond=1e-10) @ b, atol=1e-10)
    assert fit.rank == 2 and np.isfinite(fit.condition_number)


def test_grid_validation(sm2, random_g2_state):
    with pytest.raises(ValidationError):
        make_grid(sm2, random_g2_state.config, count=7)
    grid = make_grid(sm2, random_g2_state.config, count=16, seed=4)
    u = random_g2_state.config.centered_u
    assert np.min(np.abs(theta_values(sm2, grid.points + u))) >= hierarchy.GRID_MIN_THETA
    assert np.array_equal(grid.points, make_grid(sm2, random_g2_state.config, count=16, seed=4).points)


def test_with_unknowns_shape(random_g2_state):
    with pytest.raises(ValidationError):
        random_g2_state.with_unknowns(1, np.zeros(2))
