
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aparareal.fd import (SingularSystemError, SpatialGrid, StateVector, TridiagonalSystem,
                          backward_euler_matrix, backward_euler_step, build_grid, initial_state,
                          interpolate_at, propagate, solve_tridiagonal)
from aparareal.pricing import MarketOption, boundary_values, derive_transform


@pytest.fixture(scope="module")
def tp():
    return derive_transform(MarketOption(0.2, 0.05, 15, 20, 1.6))


def dense(system):
    return (np.diag(system.diag) + np.diag(np.asarray(system.sub)[1:], -1)
            + np.diag(np.asarray(system.sup)[:-1], 1))


# -- grid ------------------------------------------------------------------

def test_grid_spacing_table1(tp):
    grid = build_grid(tp, 250)
    assert grid.h == pytest.approx(0.01224108, abs=1e-8)
    assert grid.nodes[0] == tp.x_minus
    assert grid.nodes[-1] == pytest.approx(tp.x_plus, abs=1e-14)


def test_grid_two_cells_has_midpoint_interior():
    grid = SpatialGrid(-1.0, 3.0, 2)
    np.testing.assert_array_equal(grid.interior, [1.0])


def test_grid_unit_interval():
    np.testing.assert_allclose(SpatialGrid(0.0, 1.0, 4).nodes, [0, 0.25, 0.5, 0.75, 1], atol=0)


@pytest.mark.parametrize("m", [0, 1])
def test_grid_rejects_too_few_cells(tp, m):
    with pytest.raises(ValueError):
        build_grid(tp, m)


def test_initial_state(tp):
    grid = build_grid(tp, 250)
    s = initial_state(grid, tp)
    assert s.tau == 0.0 and len(s) == 249
    assert np.all(s.values >= 0)
    assert np.all(s.values[grid.interior <= 0] == 0)


def test_initial_state_all_nonpositive_nodes_give_zero(tp):
    grid = SpatialGrid(-2.0, 0.0, 8)
    assert not initial_state(grid, tp).values.any()


def test_state_vector_is_read_only():
    s = StateVector(0.0, [1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 3.0


def test_state_vector_rejects_non_finite():
    with pytest.raises(ValueError):
        StateVector(0.0, [1.0, np.nan])


# -- tridiagonal -----------------------------------------------------------

def test_identity_system():
    n = 5
    sys_ = TridiagonalSystem(np.zeros(n), np.ones(n), np.zeros(n))
    rhs = np.arange(1.0, 6.0)
    np.testing.assert_array_equal(solve_tridiagonal(sys_, rhs), rhs)


def test_hand_example():
    sys_ = TridiagonalSystem(np.full(3, -1.0), np.full(3, 2.0), np.full(3, -1.0))
    np.testing.assert_allclose(solve_tridiagonal(sys_, [1.0, 0.0, 1.0]), [1, 1, 1], atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_random_dominant_residual(seed):
    rng = np.random.default_rng(seed)
    n = 50
    sub, sup = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
    diag = (np.abs(sub) + np.abs(sup) + rng.uniform(0.1, 2, n)) * rng.choice([-1, 1], n)
    sys_ = TridiagonalSystem(sub, diag, sup)
    assert sys_.is_diagonally_dominant()
    b = rng.normal(size=n)
    x = solve_tridiagonal(sys_, b)
    assert np.max(np.abs(dense(sys_) @ x - b)) <= 1e-10 * np.max(np.abs(b))
    np.testing.assert_allclose(x, np.linalg.solve(dense(sys_), b), rtol=1e-10, atol=1e-12)


def test_zero_pivot_raises():
    sys_ = TridiagonalSystem(np.zeros(2), np.zeros(2), np.zeros(2))
    with pytest.raises(SingularSystemError):
        solve_tridiagonal(sys_, [1.0, 1.0])


def test_backward_euler_matrix_rows():
    mu = 0.37
    A = backward_euler_matrix(6, mu)
    assert A.is_diagonally_dominant()
    rows = dense(A).sum(axis=1)
    # interior rows sum to one; the boundary coupling sits in the first and last rows
    np.testing.assert_allclose(rows[1:-1], 1.0, rtol=0, atol=1e-15)
    assert rows[0] == pytest.approx(1 + mu) and rows[-1] == pytest.approx(1 + mu)


# -- stepping --------------------------------------------------------------

def test_step_matches_dense_oracle(tp):
    grid = build_grid(tp, 40)
    s = initial_state(grid, tp)
    dtau = 0.004
    out = backward_euler_step(s, dtau, grid, tp)
    mu = dtau / grid.h ** 2
    n = grid.m - 1
    A = np.eye(n) * (1 + 2 * mu) - mu * (np.eye(n, k=1) + np.eye(n, k=-1))
    rhs = s.values.copy()
    left, right = boundary_values(dtau, tp)
    rhs[0] += mu * left
    rhs[-1] += mu * right
    np.testing.assert_allclose(out.values, np.linalg.solve(A, rhs), rtol=1e-12, atol=1e-13)
    assert out.tau == dtau


def test_zero_state_zero_boundary_stays_zero(tp):
    grid = build_grid(tp, 20)
    out = propagate(StateVector(0.0, np.zeros(19)), 5, 1e-3, grid, tp, boundary=(0.0, 0.0))
    assert not out.values.any()


def test_constant_preserved_with_frozen_boundary(tp):
    grid = build_grid(tp, 64)
    c = 3.7
    out = propagate(StateVector(0.0, np.full(63, c)), 50, 5e-4, grid, tp, boundary=(c, c))
    assert np.max(np.abs(out.values - c)) <= 1e-12


def test_half_steps_converge_at_second_order_locally(tp):
    grid = SpatialGrid(0.0, 1.0, 64)
    s = StateVector(0.0, np.sin(np.pi * grid.interior))
    diffs = []
    for dtau in (2e-3, 1e-3, 5e-4, 2.5e-4):
        one = backward_euler_step(s, dtau, grid, tp, boundary=(0.0, 0.0))
        two = propagate(s, 2, dtau / 2, grid, tp, boundary=(0.0, 0.0))
        diffs.append(np.max(np.abs(one.values - two.values)))
    ratios = np.array(diffs[:-1]) / np.array(diffs[1:])
    assert np.all((ratios > 3.5) & (ratios < 4.5)), ratios


def test_single_step_is_propagate_one(tp):
    grid = build_grid(tp, 30)
    s = initial_state(grid, tp)
    a = backward_euler_step(s, 1e-3, grid, tp)
    b = propagate(s, 1, 1e-3, grid, tp)
    assert np.array_equal(a.values, b.values) and a.tau == b.tau


@settings(max_examples=25, deadline=None)
@given(a=st.integers(1, 30), b=st.integers(1, 30))
def test_propagate_composes_bitwise(tp, a, b):
    grid = build_grid(tp, 40)
    s = initial_state(grid, tp)
    dtau = tp.tau_max / 80
    whole = propagate(s, a + b, dtau, grid, tp)
    split = propagate(propagate(s, a, dtau, grid, tp), b, dtau, grid, tp)
    assert np.array_equal(whole.values, split.values)
    assert whole.tau == split.tau


def test_propagate_is_deterministic(tp):
    grid = build_grid(tp, 100)
    s = initial_state(grid, tp)
    runs = [propagate(s, 200, 1e-4, grid, tp).values for _ in range(3)]
    assert all(np.array_equal(runs[0], r) for r in runs[1:])


def test_propagate_rejects_overshoot_and_bad_steps(tp):
    grid = build_grid(tp, 20)
    s = initial_state(grid, tp)
    with pytest.raises(ValueError):
        propagate(s, 2, tp.tau_max, grid, tp)
    with pytest.raises(ValueError):
        propagate(s, 0, 1e-3, grid, tp)
    with pytest.raises(ValueError):
        propagate(s, 1, -1e-3, grid, tp)


@settings(max_examples=20, deadline=None)
@given(m=st.integers(4, 120), steps=st.integers(1, 50),
       frac=st.floats(0.01, 1.0))
def test_discrete_maximum_principle(tp, m, steps, frac):
    grid = build_grid(tp, m)
    dtau = frac * tp.tau_max / steps
    out = propagate(initial_state(grid, tp), steps, dtau, grid, tp)
    assert out.values.min() >= -1e-12


# -- interpolation ---------------------------------------------------------

def test_interpolation_exact_at_nodes(tp):
    grid = build_grid(tp, 50)
    s = initial_state(grid, tp)
    for i in (1, 17, 49):
        assert interpolate_at(s, grid, grid.nodes[i], tp) == s.values[i - 1]


def test_interpolation_midpoint():
    grid = SpatialGrid(0.0, 4.0, 4)
    s = StateVector(0.0, [0.0, 1.0, 5.0])
    assert interpolate_at(s, grid, 1.5) == 0.5


@given(x=st.floats(-1.0, 2.0))
def test_interpolation_reproduces_linear_fields(x):
    grid = SpatialGrid(-1.0, 2.0, 12)
    line = lambda v: 2 * v + 1
    s = StateVector(0.0, line(grid.interior))
    value = interpolate_at(s, grid, x, boundary=(line(-1.0), line(2.0)))
    assert abs(value - line(x)) <= 1e-12


def test_interpolation_uses_boundary_values(tp):
    grid = build_grid(tp, 10)
    s = initial_state(grid, tp)
    assert interpolate_at(s, grid, tp.x_plus, tp) == boundary_values(0.0, tp)[1]
    assert interpolate_at(s, grid, tp.x_minus, tp) == 0.0


def test_interpolation_outside_grid_raises(tp):
    grid = build_grid(tp, 10)
    with pytest.raises(ValueError):
        interpolate_at(initial_state(grid, tp), grid, tp.x_plus + 0.1, tp)
