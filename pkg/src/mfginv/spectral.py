"""
Spectral calculus on the unit torus.

Conventions
-----------
The forward transform matches the integral transform

    coeff(xi) = int_{T^n} f(x) exp(-2*pi*i xi.x) dx,

discretized by the lattice sum (1/N^n) sum_j f(x_j) exp(-2*pi*i xi.x_j),
which is exact for band-limited fields below Nyquist.  Derivatives are
Fourier multipliers 2*pi*i*xi_j applied literally on the wrap-around
lattice, including the xi = -N/2 Nyquist column; with that convention
div(grad f) equals the spectral Laplacian with symbol -4*pi^2*|xi|^2
exactly, which is the identity the rest of the code relies on.

The heat semigroup is the multiplier exp(-4*pi^2*|xi|^2 * tau).  It is
exact per mode, conserves the xi=0 coefficient, and composes exactly in
spectrum space.
"""

from __future__ import annotations

import numpy as np

from .grids import FourierSpectrum, ScalarField, SpatialGrid, ValidationError

__all__ = [
    "dft_forward",
    "dft_inverse",
    "spectral_gradient",
    "spectral_divergence",
    "spectral_laplacian",
    "heat_propagate",
    "heat_multiplier",
    "dealias_mask",
    "dealias",
]


def dft_forward(f: ScalarField) -> FourierSpectrum:
    """Forward lattice Fourier transform (integral normalization)."""
    coeffs = np.fft.fftn(f.values) / f.grid.num_points
    return FourierSpectrum(f.grid, coeffs)


def dft_inverse(spectrum: FourierSpectrum) -> ScalarField:
    """Inverse transform; returns a complex field (imaginary residue kept)."""
    values = np.fft.ifftn(spectrum.coefficients * spectrum.grid.num_points)
    return ScalarField(spectrum.grid, values)


def _multiplier_apply(values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    """ifft(symbol * fft(values)), preserving realness of the input."""
    out = np.fft.ifftn(symbol * np.fft.fftn(values))
    if not np.iscomplexobj(values):
        out = out.real
    return out


def gradient_arrays(
    grid: SpatialGrid, values: np.ndarray, realify: bool = True
) -> list[np.ndarray]:
    """Raw-array spectral gradient, one array per axis.

    With realify (the solver-internal path) a real input yields real
    output; this drops the Nyquist column of the derivative, which is
    purely imaginary on the grid.  Evolved solver fields carry no Nyquist
    energy (implicit diffusion crushes it in one step), but exact
    operator identities need realify=False.
    """
    fhat = np.fft.fftn(values)
    freqs = grid.frequencies()
    out = []
    for j in range(grid.dim):
        comp = np.fft.ifftn((2j * np.pi) * freqs[j] * fhat)
        if realify and not np.iscomplexobj(values):
            comp = comp.real
        out.append(comp)
    return out


def divergence_array(
    grid: SpatialGrid, components: list[np.ndarray], realify: bool = True
) -> np.ndarray:
    """Raw-array spectral divergence of a vector field."""
    if len(components) != grid.dim:
        raise ValidationError(
            f"vector field has {len(components)} components, expected {grid.dim}"
        )
    freqs = grid.frequencies()
    acc = np.zeros(grid.shape, dtype=np.complex128)
    any_complex = any(np.iscomplexobj(c) for c in components)
    for j, comp in enumerate(components):
        acc += (2j * np.pi) * freqs[j] * np.fft.fftn(comp)
    out = np.fft.ifftn(acc)
    return out if (any_complex or not realify) else out.real


def spectral_gradient(f: ScalarField) -> list[ScalarField]:
    """Gradient of f; component j is the inverse transform of 2*pi*i*xi_j*fhat.

    The literal multiplier is applied at every mode (including Nyquist),
    so the result is complex-typed; real inputs carry only a roundoff
    imaginary residue unless they have Nyquist content.
    """
    return [
        ScalarField(f.grid, g)
        for g in gradient_arrays(f.grid, f.values, realify=False)
    ]


def spectral_divergence(V: list[ScalarField]) -> ScalarField:
    """Divergence of a vector of scalar fields (literal multipliers)."""
    if not V:
        raise ValidationError("empty vector field")
    grid = V[0].grid
    for comp in V:
        if comp.grid != grid:
            raise ValidationError("vector components live on different grids")
    return ScalarField(
        grid, divergence_array(grid, [c.values for c in V], realify=False)
    )


def spectral_laplacian(f: ScalarField) -> ScalarField:
    """Laplacian via the multiplier -4*pi^2*|xi|^2."""
    symbol = -4.0 * np.pi**2 * f.grid.frequency_norm2()
    return ScalarField(f.grid, _multiplier_apply(f.values, symbol))


def heat_multiplier(grid: SpatialGrid, tau: float) -> np.ndarray:
    """exp(-4*pi^2*|xi|^2*tau) on the frequency lattice."""
    if tau < 0:
        raise ValidationError(
            f"heat_propagate requires tau >= 0, got {tau} "
            "(backward heat is a regularized inverse-recovery operation)"
        )
    return np.exp(-4.0 * np.pi**2 * grid.frequency_norm2() * tau)


def heat_propagate(f: ScalarField, tau: float) -> ScalarField:
    """Heat flow of f over time tau; tau = 0 is the identity."""
    if tau == 0.0:
        return f
    return ScalarField(f.grid, _multiplier_apply(f.values, heat_multiplier(f.grid, tau)))


def dealias_mask(grid: SpatialGrid) -> np.ndarray:
    """Boolean keep-mask of the 2/3 rule: all |xi_j| <= N/3."""
    limit = grid.points_per_axis // 3
    mask = np.ones(grid.shape, dtype=bool)
    for comp in grid.frequencies():
        mask &= np.abs(comp) <= limit
    return mask


def dealias(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero all modes outside the keep-mask (applied to a grid array)."""
    out = np.fft.ifftn(np.where(mask, np.fft.fftn(values), 0.0))
    return out if np.iscomplexobj(values) else out.real
