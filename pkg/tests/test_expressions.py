import numpy as np
import pytest

from mfginv.expressions import parse_expression
from mfginv.grids import SpatialGrid, ValidationError


def test_evaluate_on_grid():
    grid = SpatialGrid(1, 32)
    expr = parse_expression("0.5*sin(2*pi*x1)", 1)
    x = grid.axes()[0]
    np.testing.assert_allclose(expr.evaluate(grid).values, 0.5 * np.sin(2 * np.pi * x), atol=1e-15)


def test_time_dependent_expression():
    grid = SpatialGrid(1, 16)
    expr = parse_expression("sin(2*pi*x1)*(1+t)", 1)
    assert expr.time_dependent
    a = expr.evaluate(grid, 0.0).values
    b = expr.evaluate(grid, 1.0).values
    np.testing.assert_allclose(b, 2 * a, atol=1e-14)


def test_constant_broadcasts():
    grid = SpatialGrid(2, 8)
    expr = parse_expression("3", 2)
    assert expr.evaluate(grid).values.shape == (8, 8)


def test_rejects_unknown_function():
    with pytest.raises(ValidationError, match="tan"):
        parse_expression("tan(x1)", 1)


def test_rejects_wrong_dimension_symbol():
    with pytest.raises(ValidationError, match="x2"):
        parse_expression("sin(x2)", 1)


def test_rejects_time_when_disallowed():
    with pytest.raises(ValidationError, match="'t'"):
        parse_expression("t*x1", 1, allow_time=False)


def test_rejects_garbage():
    with pytest.raises(ValidationError):
        parse_expression("sin(", 1)


@pytest.mark.parametrize("text", ["x1**2*cos(2*pi*x1)", "exp(x1)*(1+t)", "x1*t**3 - 2"])
def test_derivatives_match_central_differences(text, rng):
    expr = parse_expression(text, 1)
    dx = expr.diff("x1")
    dt = expr.diff("t")
    pts_x = rng.uniform(0.1, 0.9, size=12)
    pts_t = rng.uniform(0.1, 0.9, size=12)
    h = 1e-5
    fd_x = (expr.evaluate_window(pts_x + h, pts_t) - expr.evaluate_window(pts_x - h, pts_t)) / (2 * h)
    fd_t = (expr.evaluate_window(pts_x, pts_t + h) - expr.evaluate_window(pts_x, pts_t - h)) / (2 * h)
    np.testing.assert_allclose(dx.evaluate_window(pts_x, pts_t), fd_x, rtol=1e-7, atol=1e-8)
    np.testing.assert_allclose(dt.evaluate_window(pts_x, pts_t), fd_t, rtol=1e-7, atol=1e-8)
