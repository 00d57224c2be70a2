import numpy as np
import pytest

from mfginv.grids import FourierSpectrum, ScalarField, SpatialGrid, ValidationError
from mfginv.spectral import (
    dealias_mask,
    dft_forward,
    dft_inverse,
    heat_propagate,
    spectral_divergence,
    spectral_gradient,
    spectral_laplacian,
)

from conftest import random_band_limited


def dense_dft_oracle(values: np.ndarray) -> np.ndarray:
    """Direct O(N^{2n}) lattice sum for coeff(xi) = mean of f * exp(-2 pi i xi.x)."""
    grid_shape = values.shape
    n = values.ndim
    N = grid_shape[0]
    x = np.arange(N) / N
    mesh = np.meshgrid(*([x] * n), indexing="ij")
    k = np.fft.fftfreq(N, 1.0 / N).astype(int)
    out = np.zeros(grid_shape, dtype=np.complex128)
    for idx in np.ndindex(*grid_shape):
        xi = [k[i] for i in idx]
        phase = sum(xi[j] * mesh[j] for j in range(n))
        out[idx] = np.mean(values * np.exp(-2j * np.pi * phase))
    return out


def fd4_derivative(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """4th-order centered difference with periodic wraparound."""
    f1 = np.roll(values, -1, axis=axis)
    f2 = np.roll(values, -2, axis=axis)
    b1 = np.roll(values, 1, axis=axis)
    b2 = np.roll(values, 2, axis=axis)
    return (-f2 + 8 * f1 - 8 * b1 + b2) / (12 * h)


def test_dft_constant_field(grid1d):
    f = ScalarField(grid1d, np.ones(grid1d.shape))
    spec = dft_forward(f)
    assert spec.coefficient((0,)) == pytest.approx(1.0, abs=1e-14)
    rest = spec.coefficients.copy()
    rest[0] = 0
    assert np.max(np.abs(rest)) < 1e-14


def test_dft_plane_wave(grid2d):
    X, _ = grid2d.meshgrid()
    f = ScalarField(grid2d, np.exp(2j * np.pi * X))
    spec = dft_forward(f)
    assert spec.coefficient((1, 0)) == pytest.approx(1.0, abs=1e-13)
    other = spec.coefficients.copy()
    other[1, 0] = 0
    assert np.max(np.abs(other)) < 1e-13


def test_dft_matches_dense_oracle(grid2d, rng):
    vals = rng.standard_normal(grid2d.shape)
    got = dft_forward(ScalarField(grid2d, vals)).coefficients
    want = dense_dft_oracle(vals)
    assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))


def test_inverse_delta_is_constant(grid1d):
    coeffs = np.zeros(grid1d.shape, dtype=np.complex128)
    coeffs[0] = 2.5
    f = dft_inverse(FourierSpectrum(grid1d, coeffs))
    assert np.max(np.abs(f.values - 2.5)) < 1e-13


def test_inverse_hermitian_spectrum_is_real(grid1d, rng):
    real_field = rng.standard_normal(grid1d.shape)
    spec = dft_forward(ScalarField(grid1d, real_field))
    back = dft_inverse(spec)
    assert np.max(np.abs(back.values.imag)) <= 1e-12


@pytest.mark.parametrize("dim,N", [(1, 64), (2, 16), (3, 8)])
def test_round_trip_random(dim, N, rng):
    grid = SpatialGrid(dim, N)
    vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    back = dft_inverse(dft_forward(ScalarField(grid, vals)))
    assert np.max(np.abs(back.values - vals)) <= 1e-12 * np.max(np.abs(vals))


@pytest.mark.parametrize("dim,N", [(1, 64), (2, 16)])
def test_parseval(dim, N, rng):
    grid = SpatialGrid(dim, N)
    vals = rng.standard_normal(grid.shape)
    spec = dft_forward(ScalarField(grid, vals))
    power = np.sum(np.abs(spec.coefficients) ** 2)
    mean_square = np.mean(vals**2)
    assert abs(power - mean_square) <= 1e-12 * mean_square


def test_gradient_single_mode(grid1d, x64):
    f = ScalarField(grid1d, np.sin(2 * np.pi * x64))
    (g,) = spectral_gradient(f)
    want = 2 * np.pi * np.cos(2 * np.pi * x64)
    assert np.max(np.abs(g.values - want)) < 1e-12 * 2 * np.pi


def test_gradient_constant_is_zero(grid2d):
    f = ScalarField(grid2d, np.full(grid2d.shape, 3.7))
    for comp in spectral_gradient(f):
        assert np.max(np.abs(comp.values)) < 1e-13


@pytest.mark.parametrize("dim,N", [(1, 64), (2, 32)])
def test_gradient_matches_fd4(dim, N, rng):
    grid = SpatialGrid(dim, N)
    vals = random_band_limited(grid, rng, max_freq=4)
    grads = spectral_gradient(ScalarField(grid, vals))
    h = grid.spacing
    # 4th-order FD on a band-limited field: error ~ (2 pi k h)^4 / 30
    bound = 40.0 * (2 * np.pi * 4 * h) ** 4
    for axis in range(dim):
        fd = fd4_derivative(vals, axis, h)
        assert np.max(np.abs(grads[axis].values - fd)) < bound


def test_divergence_of_gradient_single_mode(grid1d, x64):
    f = ScalarField(grid1d, np.cos(2 * np.pi * x64))
    div = spectral_divergence(spectral_gradient(f))
    want = -4 * np.pi**2 * np.cos(2 * np.pi * x64)
    assert np.max(np.abs(div.values - want)) < 1e-10


def test_divergence_constant_vector(grid2d):
    V = [ScalarField(grid2d, np.full(grid2d.shape, c)) for c in (1.0, -2.0)]
    div = spectral_divergence(V)
    assert np.max(np.abs(div.values)) < 1e-12


def test_divergence_matches_fd4(grid2d, rng):
    comps = [random_band_limited(grid2d, rng, max_freq=3) for _ in range(2)]
    div = spectral_divergence([ScalarField(grid2d, c) for c in comps])
    h = grid2d.spacing
    fd = sum(fd4_derivative(c, j, h) for j, c in enumerate(comps))
    bound = 40.0 * (2 * np.pi * 3 * h) ** 4 * 2
    assert np.max(np.abs(div.values - fd)) < bound


def test_div_grad_equals_laplacian(grid2d, rng):
    vals = rng.standard_normal(grid2d.shape)
    f = ScalarField(grid2d, vals)
    composed = spectral_divergence(spectral_gradient(f))
    lap = spectral_laplacian(f)
    scale = np.max(np.abs(lap.values))
    assert np.max(np.abs(composed.values - lap.values)) <= 1e-12 * scale


def test_heat_preserves_constant(grid1d):
    f = ScalarField(grid1d, np.ones(grid1d.shape))
    out = heat_propagate(f, 0.37)
    assert np.max(np.abs(out.values - 1.0)) < 1e-14


def test_heat_eigenfunction(grid2d):
    X, _ = grid2d.meshgrid()
    f = ScalarField(grid2d, np.exp(2j * np.pi * X))
    tau = 0.01
    out = heat_propagate(f, tau)
    want = np.exp(-4 * np.pi**2 * tau) * f.values
    assert np.max(np.abs(out.values - want)) < 1e-14


def test_heat_identity_at_zero(grid1d, rng):
    f = ScalarField(grid1d, rng.standard_normal(grid1d.shape))
    assert heat_propagate(f, 0.0) is f


def test_heat_rejects_negative_time(grid1d):
    f = ScalarField(grid1d, np.ones(grid1d.shape))
    with pytest.raises(ValidationError):
        heat_propagate(f, -0.1)


def test_heat_dirac_matches_periodized_gaussian(grid1d, x64):
    # lattice impulse normalized so every Fourier coefficient is 1
    N = grid1d.points_per_axis
    vals = np.zeros(N)
    vals[0] = N
    tau = 0.01
    out = heat_propagate(ScalarField(grid1d, vals), tau)
    oracle = np.zeros(N)
    for k in range(-8, 9):
        oracle += np.exp(-((x64 - k) ** 2) / (4 * tau)) / np.sqrt(4 * np.pi * tau)
    assert np.max(np.abs(out.values - oracle)) < 1e-10


def test_heat_semigroup_property(grid1d, rng):
    f = ScalarField(grid1d, rng.standard_normal(grid1d.shape))
    seq = heat_propagate(heat_propagate(f, 0.013), 0.027)
    direct = heat_propagate(f, 0.04)
    # exact in spectrum space: compare coefficients
    a = dft_forward(seq).coefficients
    b = dft_forward(direct).coefficients
    assert np.max(np.abs(a - b)) < 1e-15


def test_heat_conserves_mean(grid2d, rng):
    vals = rng.standard_normal(grid2d.shape)
    out = heat_propagate(ScalarField(grid2d, vals), 0.2)
    assert np.mean(out.values) == pytest.approx(np.mean(vals), abs=1e-14)


def test_dealias_mask_keeps_low_modes(grid1d):
    mask = dealias_mask(grid1d)
    k = np.fft.fftfreq(64, 1 / 64).astype(int)
    assert np.array_equal(mask, np.abs(k) <= 21)


def test_spectrum_invariants_mean_extraction(grid1d, rng):
    vals = rng.standard_normal(grid1d.shape)
    spec = dft_forward(ScalarField(grid1d, vals))
    assert spec.coefficient((0,)) == pytest.approx(np.mean(vals), abs=1e-14)
