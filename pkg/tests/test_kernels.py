import math

import numpy as np
import pytest

from mfginv import kernels


def naive_series(coeffs, z):
    out = np.zeros_like(z)
    for k in range(coeffs.shape[0]):
        out = out + coeffs[k] * z ** (k + 1)
    return out


def naive_monomials(coeffs, powers, p):
    out = np.zeros(p.shape[1])
    for r in range(coeffs.shape[0]):
        term = coeffs[r].copy()
        for j in range(p.shape[0]):
            term = term * p[j] ** powers[r, j]
        out += term
    return out


@pytest.fixture
def series_data(rng):
    K, P = 5, 300
    coeffs = rng.standard_normal((K, P))
    z = 0.3 * rng.standard_normal(P)
    return coeffs, z


@pytest.fixture
def monomial_data(rng):
    n, P, R = 3, 200, 7
    coeffs = rng.standard_normal((R, P))
    powers = rng.integers(0, 3, size=(R, n)).astype(np.int64)
    powers[:, 0] = np.maximum(powers[:, 0], 1)  # keep |beta| >= 1
    p = 0.5 * rng.standard_normal((n, P))
    return coeffs, powers, p


def test_series_numpy_matches_naive(series_data):
    coeffs, z = series_data
    got = kernels.series_eval_numpy(coeffs, z)
    np.testing.assert_allclose(got, naive_series(coeffs, z), rtol=1e-13, atol=1e-15)


def test_series_paths_agree(series_data):
    coeffs, z = series_data
    a = kernels.series_eval_numpy(coeffs, z)
    b = kernels.series_eval(coeffs, z)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


def test_monomial_numpy_matches_naive(monomial_data):
    coeffs, powers, p = monomial_data
    got = kernels.monomial_series_eval_numpy(coeffs, powers, p)
    np.testing.assert_allclose(got, naive_monomials(coeffs, powers, p), rtol=1e-12, atol=1e-14)


def test_monomial_paths_agree(monomial_data):
    coeffs, powers, p = monomial_data
    a = kernels.monomial_series_eval_numpy(coeffs, powers, p)
    b = kernels.monomial_series_eval(coeffs, powers, p)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_grad_matches_fd(monomial_data):
    coeffs, powers, p = monomial_data
    grad = kernels.monomial_series_grad(coeffs, powers, p)
    h = 1e-6
    for comp in range(p.shape[0]):
        plus = p.copy()
        plus[comp] += h
        minus = p.copy()
        minus[comp] -= h
        fd = (
            kernels.monomial_series_eval_numpy(coeffs, powers, plus)
            - kernels.monomial_series_eval_numpy(coeffs, powers, minus)
        ) / (2 * h)
        np.testing.assert_allclose(grad[comp], fd, rtol=1e-6, atol=1e-8)


def test_grad_paths_agree(monomial_data):
    coeffs, powers, p = monomial_data
    a = kernels.monomial_series_grad_numpy(coeffs, powers, p)
    b = kernels.monomial_series_grad(coeffs, powers, p)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_series_complex_falls_back(rng):
    coeffs = rng.standard_normal((3, 50))
    z = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    got = kernels.series_eval(coeffs, z)
    np.testing.assert_allclose(got, naive_series(coeffs, z), rtol=1e-13)


def test_factorial_scaling_convention(rng):
    # callers fold 1/k! into the stack; check the composition once
    P = 40
    z = 0.2 * rng.standard_normal(P)
    raw = rng.standard_normal((4, P))
    scaled = np.stack([raw[k] / math.factorial(k + 1) for k in range(4)])
    got = kernels.series_eval(scaled, z)
    want = sum(raw[k] * z ** (k + 1) / math.factorial(k + 1) for k in range(4))
    np.testing.assert_allclose(got, want, rtol=1e-13, atol=1e-16)
