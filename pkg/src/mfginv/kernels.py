"""
Pointwise series-evaluation kernels (numba JIT with a numpy fallback).

These are the hot inner loops of the solver: every IMEX sweep evaluates
the running-cost power series and the Hamiltonian multi-index series at
each grid point.  Set ``MFGINV_NUMBA=0`` to force the pure-numpy path
(the default uses numba when importable).  ``benchmarks/bench_kernels.py``
compares the two.

All kernels take pre-scaled coefficient stacks: the 1/k! (resp. 1/beta!)
factors are folded into the coefficients by the callers in
:mod:`mfginv.costs`, so a kernel computes plain sums of monomials.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "series_eval",
    "monomial_series_eval",
    "monomial_series_grad",
    "series_eval_numpy",
    "monomial_series_eval_numpy",
    "monomial_series_grad_numpy",
]


def series_eval_numpy(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """sum_k coeffs[k-1]*z^k, Horner form.  coeffs: (K, P), z: (P,)."""
    acc = np.zeros_like(z, dtype=np.result_type(coeffs, z))
    for k in range(coeffs.shape[0] - 1, -1, -1):
        acc = (acc + coeffs[k]) * z
    return acc


def monomial_series_eval_numpy(
    coeffs: np.ndarray, powers: np.ndarray, p: np.ndarray
) -> np.ndarray:
    """sum_r coeffs[r]*prod_j p[j]^powers[r,j].  coeffs: (R,P), p: (n,P)."""
    out = np.zeros(p.shape[1], dtype=np.result_type(coeffs, p))
    for r in range(coeffs.shape[0]):
        term = coeffs[r].copy()
        for j in range(p.shape[0]):
            e = int(powers[r, j])
            if e:
                term = term * p[j] ** e
        out += term
    return out


def monomial_series_grad_numpy(
    coeffs: np.ndarray, powers: np.ndarray, p: np.ndarray
) -> np.ndarray:
    """Gradient in p of the monomial series; returns (n, P)."""
    n, npts = p.shape
    out = np.zeros((n, npts), dtype=np.result_type(coeffs, p))
    for r in range(coeffs.shape[0]):
        for comp in range(n):
            e_c = int(powers[r, comp])
            if e_c == 0:
                continue
            term = coeffs[r] * e_c
            for j in range(n):
                e = int(powers[r, j]) - (1 if j == comp else 0)
                if e:
                    term = term * p[j] ** e
            out[comp] += term
    return out


def _build_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def _series_eval(coeffs, z, out):
        K, P = coeffs.shape
        for i in range(P):
            acc = 0.0
            zi = z[i]
            for k in range(K - 1, -1, -1):
                acc = (acc + coeffs[k, i]) * zi
            out[i] = acc

    @njit(cache=True)
    def _monomial_eval(coeffs, powers, p, out):
        R, P = coeffs.shape
        n = p.shape[0]
        for i in range(P):
            acc = 0.0
            for r in range(R):
                term = coeffs[r, i]
                for j in range(n):
                    e = powers[r, j]
                    for _ in range(e):
                        term *= p[j, i]
                acc += term
            out[i] = acc

    @njit(cache=True)
    def _monomial_grad(coeffs, powers, p, out):
        R, P = coeffs.shape
        n = p.shape[0]
        for i in range(P):
            for comp in range(n):
                acc = 0.0
                for r in range(R):
                    e_c = powers[r, comp]
                    if e_c == 0:
                        continue
                    term = coeffs[r, i] * e_c
                    for j in range(n):
                        e = powers[r, j]
                        if j == comp:
                            e -= 1
                        for _ in range(e):
                            term *= p[j, i]
                    acc += term
                out[comp, i] = acc

    def series_eval_numba(coeffs, z):
        coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
        z = np.ascontiguousarray(z, dtype=np.float64)
        out = np.empty_like(z)
        _series_eval(coeffs, z, out)
        return out

    def monomial_eval_numba(coeffs, powers, p):
        coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
        powers = np.ascontiguousarray(powers, dtype=np.int64)
        p = np.ascontiguousarray(p, dtype=np.float64)
        out = np.empty(p.shape[1], dtype=np.float64)
        _monomial_eval(coeffs, powers, p, out)
        return out

    def monomial_grad_numba(coeffs, powers, p):
        coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
        powers = np.ascontiguousarray(powers, dtype=np.int64)
        p = np.ascontiguousarray(p, dtype=np.float64)
        out = np.empty((p.shape[0], p.shape[1]), dtype=np.float64)
        _monomial_grad(coeffs, powers, p, out)
        return out

    return series_eval_numba, monomial_eval_numba, monomial_grad_numba


NUMBA_ENABLED = False
_series_eval_fast = None
_monomial_eval_fast = None
_monomial_grad_fast = None

if os.environ.get("MFGINV_NUMBA", "1") != "0":
    try:
        (
            _series_eval_fast,
            _monomial_eval_fast,
            _monomial_grad_fast,
        ) = _build_numba_kernels()
        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def series_eval(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Dispatching power-series evaluation (numba path only for real data)."""
    if NUMBA_ENABLED and not (np.iscomplexobj(coeffs) or np.iscomplexobj(z)):
        return _series_eval_fast(coeffs, z)
    return series_eval_numpy(coeffs, z)


def monomial_series_eval(coeffs: np.ndarray, powers: np.ndarray, p: np.ndarray) -> np.ndarray:
    if NUMBA_ENABLED and not (np.iscomplexobj(coeffs) or np.iscomplexobj(p)):
        return _monomial_eval_fast(coeffs, powers, p)
    return monomial_series_eval_numpy(coeffs, powers, p)


def monomial_series_grad(coeffs: np.ndarray, powers: np.ndarray, p: np.ndarray) -> np.ndarray:
    if NUMBA_ENABLED and not (np.iscomplexobj(coeffs) or np.iscomplexobj(p)):
        return _monomial_grad_fast(coeffs, powers, p)
    return monomial_series_grad_numpy(coeffs, powers, p)
