import math

import numpy as np
import pytest

from mfginv.costs import (
    HamiltonianSeries,
    TaylorCost,
    cauchy_bound,
    cauchy_consistent,
    cost_eval,
    extract_linearization_coeffs,
    graded_multi_indices,
    hamiltonian_eval,
    hamiltonian_grad,
    quadratic_hamiltonian,
)
from mfginv.grids import ScalarField, SpatialGrid, TimeGrid, ValidationError


@pytest.fixture
def gridc():
    return SpatialGrid(1, 32)


def const_field(grid, c):
    return ScalarField(grid, np.full(grid.shape, float(c)))


def test_zero_density_gives_zero(gridc, rng):
    cost = TaylorCost("terminal", gridc, (rng.standard_normal(gridc.shape),))
    out = cost_eval(cost, const_field(gridc, 0.0))
    assert np.max(np.abs(out.values)) == 0.0


def test_linear_case(gridc):
    x = gridc.axes()[0]
    cost = TaylorCost("terminal", gridc, (np.sin(2 * np.pi * x),))
    out = cost_eval(cost, const_field(gridc, 0.2))
    np.testing.assert_allclose(out.values, 0.2 * np.sin(2 * np.pi * x), atol=1e-15)


def test_truncated_exponential_series(gridc):
    # F(x,z) = sin(2 pi x) (e^z - 1), truncated at K = 8: remainder <= |z|^9/9!
    x = gridc.axes()[0]
    coeffs = tuple(np.sin(2 * np.pi * x) for _ in range(8))
    cost = TaylorCost("running-static", gridc, coeffs)
    z = 0.1
    out = cost_eval(cost, const_field(gridc, z))
    want = np.sin(2 * np.pi * x) * (np.exp(z) - 1.0)
    assert np.max(np.abs(out.values - want)) <= z**9 / math.factorial(9) + 1e-16


def test_running_cost_needs_time_index(gridc):
    time = TimeGrid(1.0, 4)
    coeff = np.ones((5,) + gridc.shape)
    cost = TaylorCost("running", gridc, (coeff,), time)
    with pytest.raises(ValidationError):
        cost_eval(cost, const_field(gridc, 0.1))
    with pytest.raises(ValidationError):
        cost_eval(cost, const_field(gridc, 0.1), t_index=9)
    out = cost_eval(cost, const_field(gridc, 0.1), t_index=2)
    np.testing.assert_allclose(out.values, 0.1, atol=1e-15)


def test_superposition_in_single_coefficient(gridc, rng):
    c1 = rng.standard_normal(gridc.shape)
    c2 = rng.standard_normal(gridc.shape)
    z = ScalarField(gridc, 0.3 * rng.standard_normal(gridc.shape))
    a = cost_eval(TaylorCost("terminal", gridc, (c1,)), z).values
    b = cost_eval(TaylorCost("terminal", gridc, (c2,)), z).values
    ab = cost_eval(TaylorCost("terminal", gridc, (c1 + c2,)), z).values
    np.testing.assert_allclose(ab, a + b, rtol=1e-13, atol=1e-16)


def test_cauchy_bound_arithmetic():
    assert cauchy_bound(6.0, 2.0, 1) == pytest.approx(3.0)
    assert cauchy_bound(1.0, 1.0, 3) == pytest.approx(6.0)
    with pytest.raises(ValidationError):
        cauchy_bound(1.0, 0.0, 1)


def test_cauchy_consistency_for_exponential_series(gridc):
    x = gridc.axes()[0]
    coeffs = tuple(np.sin(2 * np.pi * x) for _ in range(8))
    cost = TaylorCost("running-static", gridc, coeffs, convergence_radius_hint=1.0)
    sup = float(np.max(np.abs(np.sin(2 * np.pi * x)))) * (np.e - 1.0)
    ok, rows = cauchy_consistent(cost, sup)
    assert ok
    assert all(r["sup"] <= r["bound"] for r in rows)


def test_hamiltonian_zero_momentum(gridc, rng):
    H = HamiltonianSeries(gridc, 2, {(1,): rng.standard_normal(gridc.shape),
                                     (2,): rng.standard_normal(gridc.shape)})
    out = hamiltonian_eval(H, [const_field(gridc, 0.0)])
    assert np.max(np.abs(out.values)) == 0.0


def test_quadratic_shortcut(gridc):
    H = quadratic_hamiltonian(gridc)
    c = 0.7
    out = hamiltonian_eval(H, [const_field(gridc, c)])
    np.testing.assert_allclose(out.values, 0.5 * c * c, atol=1e-14)
    grad = hamiltonian_grad(H, [const_field(gridc, c)])
    np.testing.assert_allclose(grad[0].values, c, atol=1e-14)


def test_quadratic_flag_matches_series_encoding(rng):
    grid = SpatialGrid(2, 8)
    quad = quadratic_hamiltonian(grid)
    series = HamiltonianSeries(grid, 2, dict(quad.coefficients), quadratic_flag=False)
    P = [ScalarField(grid, rng.standard_normal(grid.shape)) for _ in range(2)]
    a = hamiltonian_eval(quad, P).values
    b = hamiltonian_eval(series, P).values
    assert np.max(np.abs(a - b)) <= 1e-14 * max(1.0, np.max(np.abs(a)))
    ga = hamiltonian_grad(quad, P)
    gb = hamiltonian_grad(series, P)
    for u, v in zip(ga, gb):
        assert np.max(np.abs(u.values - v.values)) <= 1e-14


def test_series_eval_matches_naive_sum(rng):
    grid = SpatialGrid(2, 8)
    betas = graded_multi_indices(2, 3)
    coeffs = {b: rng.standard_normal(grid.shape) for b in betas}
    H = HamiltonianSeries(grid, 3, coeffs)
    P = [ScalarField(grid, 0.4 * rng.standard_normal(grid.shape)) for _ in range(2)]
    naive = np.zeros(grid.shape)
    for b, c in coeffs.items():
        term = c / np.prod([math.factorial(e) for e in b])
        for j, e in enumerate(b):
            term = term * P[j].values**e
        naive += term
    out = hamiltonian_eval(H, P).values
    np.testing.assert_allclose(out, naive, rtol=1e-12, atol=1e-14)


def test_grad_matches_fd_in_momentum(rng):
    grid = SpatialGrid(2, 8)
    betas = graded_multi_indices(2, 3)
    H = HamiltonianSeries(grid, 3, {b: rng.standard_normal(grid.shape) for b in betas})
    P = [ScalarField(grid, 0.3 * rng.standard_normal(grid.shape)) for _ in range(2)]
    grad = hamiltonian_grad(H, P)
    h = 1e-5
    for comp in range(2):
        plus = [ScalarField(grid, p.values + (h if j == comp else 0)) for j, p in enumerate(P)]
        minus = [ScalarField(grid, p.values - (h if j == comp else 0)) for j, p in enumerate(P)]
        fd = (hamiltonian_eval(H, plus).values - hamiltonian_eval(H, minus).values) / (2 * h)
        assert np.max(np.abs(grad[comp].values - fd)) < 1e-7


def test_extract_linearization_quadratic(gridc):
    A1, B1 = extract_linearization_coeffs(quadratic_hamiltonian(gridc))
    assert np.max(np.abs(A1[0].values)) == 0.0
    np.testing.assert_array_equal(B1[0][0].values, np.ones(gridc.shape))


def test_extract_linearization_pure_drift(gridc, rng):
    a = rng.standard_normal(gridc.shape)
    H = HamiltonianSeries(gridc, 1, {(1,): a})
    A1, B1 = extract_linearization_coeffs(H)
    np.testing.assert_array_equal(A1[0].values, a)
    assert np.max(np.abs(B1[0][0].values)) == 0.0


def test_hessian_matches_fd(rng):
    grid = SpatialGrid(2, 8)
    betas = graded_multi_indices(2, 2)
    H = HamiltonianSeries(grid, 2, {b: rng.standard_normal(grid.shape) for b in betas})
    _, B1 = extract_linearization_coeffs(H)
    h = 1e-4

    def ham_at(p1, p2):
        P = [const_field(grid, p1), const_field(grid, p2)]
        return hamiltonian_eval(H, P).values

    fd = {
        (0, 0): (ham_at(h, 0) - 2 * ham_at(0, 0) + ham_at(-h, 0)) / h**2,
        (1, 1): (ham_at(0, h) - 2 * ham_at(0, 0) + ham_at(0, -h)) / h**2,
        (0, 1): (ham_at(h, h) - ham_at(h, -h) - ham_at(-h, h) + ham_at(-h, -h))
        / (4 * h**2),
    }
    fd[(1, 0)] = fd[(0, 1)]
    for i in range(2):
        for j in range(2):
            assert np.max(np.abs(B1[i][j].values - fd[(i, j)])) < 1e-6


def test_zeroth_coefficient_rejected(gridc):
    with pytest.raises(ValidationError):
        TaylorCost("terminal", gridc, ())


def test_multi_index_order_is_graded_lex():
    assert graded_multi_indices(2, 2) == [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
