"""
Grids and field containers on the unit torus.

Space is the n-dimensional unit torus sampled on a uniform lattice
x_j = j/N per axis (period 1 in every axis); time is a uniform grid
t_k = k*T/M on [0, T].  Fields are thin immutable wrappers around numpy
arrays: a ``ScalarField`` holds one spatial sample array of shape
``(N,)*n``, a ``SpaceTimeField`` stacks M+1 such slices along a leading
time axis, and a ``FourierSpectrum`` holds lattice Fourier coefficients
in numpy's wrap-around frequency order (each component in [-N/2, N/2)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpatialGrid",
    "TimeGrid",
    "ScalarField",
    "SpaceTimeField",
    "FourierSpectrum",
    "canonical_frequencies",
]


class ValidationError(ValueError):
    """Raised when a grid/field/scenario constraint is violated."""


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform lattice on the unit torus: dim axes, points_per_axis points each."""

    dim: int
    points_per_axis: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"dimension must be >= 1, got {self.dim}")
        if self.dim > 3:
            raise ValidationError(f"dimensions above 3 are unsupported, got {self.dim}")
        if self.points_per_axis < 4:
            raise ValidationError(
                f"points_per_axis must be >= 4, got {self.points_per_axis}"
            )

    @property
    def spacing(self) -> float:
        return 1.0 / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def num_points(self) -> int:
        return self.points_per_axis**self.dim

    def axes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays x_j = j/N per axis."""
        x = np.arange(self.points_per_axis) / self.points_per_axis
        return (x,) * self.dim

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        """Full coordinate mesh, indexing='ij'."""
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def frequencies(self) -> tuple[np.ndarray, ...]:
        """Integer frequency mesh per axis in wrap-around order."""
        k = np.fft.fftfreq(self.points_per_axis, d=1.0 / self.points_per_axis)
        k = np.rint(k).astype(np.int64)
        mesh = np.meshgrid(*((k,) * self.dim), indexing="ij")
        return tuple(mesh)

    def frequency_norm2(self) -> np.ndarray:
        """|xi|^2 on the wrap-around frequency lattice (float array)."""
        total = np.zeros(self.shape, dtype=np.float64)
        for comp in self.frequencies():
            total += comp.astype(np.float64) ** 2
        return total


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, horizon] with `steps` intervals."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ValidationError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 2:
            raise ValidationError(f"steps must be >= 2, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def num_nodes(self) -> int:
        return self.steps + 1

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)


def _check_finite(values: np.ndarray, what: str):
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class ScalarField:
    """Samples of a scalar function on a spatial grid (real or complex)."""

    grid: SpatialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != self.grid.shape:
            if values.size == self.grid.num_points:
                values = values.reshape(self.grid.shape)
            else:
                raise ValidationError(
                    f"field length {values.size} does not match grid "
                    f"({self.grid.num_points} points)"
                )
        _check_finite(values, "ScalarField")
        object.__setattr__(self, "values", values)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def as_real(self, tol: float = 1e-10) -> "ScalarField":
        """Drop an imaginary residue, refusing if it is not negligible."""
        if not self.is_complex:
            return self
        resid = float(np.max(np.abs(self.values.imag))) if self.values.size else 0.0
        scale = max(float(np.max(np.abs(self.values))), 1.0)
        if resid > tol * scale:
            raise ValidationError(
                f"imaginary residue {resid:.3e} exceeds tolerance {tol:.1e}"
            )
        return ScalarField(self.grid, np.ascontiguousarray(self.values.real))

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _raw(other, self.grid))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _raw(other, self.grid))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * _raw(other, self.grid))

    __rmul__ = __mul__


def _raw(obj, grid):
    if isinstance(obj, ScalarField):
        if obj.grid != grid:
            raise ValidationError("grid mismatch in field arithmetic")
        return obj.values
    return obj


@dataclass(frozen=True)
class SpaceTimeField:
    """Time-stacked scalar fields; values shape (M+1, N, ..., N)."""

    grid: SpatialGrid
    time: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        expected = (self.time.num_nodes,) + self.grid.shape
        if values.shape != expected:
            if values.size == int(np.prod(expected)):
                values = values.reshape(expected)
            else:
                raise ValidationError(
                    f"space-time field shape {values.shape} does not match {expected}"
                )
        _check_finite(values, "SpaceTimeField")
        object.__setattr__(self, "values", values)

    def slice_at(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.values[k])

    @property
    def initial(self) -> ScalarField:
        return self.slice_at(0)

    @property
    def terminal(self) -> ScalarField:
        return self.slice_at(self.time.steps)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def time_reversed(self) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.time, self.values[::-1].copy())


@dataclass(frozen=True)
class FourierSpectrum:
    """Lattice Fourier coefficients in wrap-around order.

    Normalization: coefficient(xi) ~ integral of f(x) exp(-2*pi*i xi.x) dx,
    so the xi=0 entry is the field mean and sum(|coeff|^2) equals the
    mean square of the spatial samples (Parseval).
    """

    grid: SpatialGrid
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients)
        if coeffs.shape != self.grid.shape:
            if coeffs.size == self.grid.num_points:
                coeffs = coeffs.reshape(self.grid.shape)
            else:
                raise ValidationError(
                    f"spectrum length {coeffs.size} does not match grid "
                    f"({self.grid.num_points} points)"
                )
        if not np.iscomplexobj(coeffs):
            coeffs = coeffs.astype(np.complex128)
        _check_finite(coeffs.view(np.float64), "FourierSpectrum")
        object.__setattr__(self, "coefficients", coeffs)

    def coefficient(self, xi) -> complex:
        """Coefficient at integer lattice vector xi (wrap-around indexing)."""
        idx = tuple(int(c) % self.grid.points_per_axis for c in np.atleast_1d(xi))
        return complex(self.coefficients[idx])

    def with_coefficient(self, xi, value) -> "FourierSpectrum":
        idx = tuple(int(c) % self.grid.points_per_axis for c in np.atleast_1d(xi))
        coeffs = self.coefficients.copy()
        coeffs[idx] = value
        return FourierSpectrum(self.grid, coeffs)


def canonical_frequencies(grid: SpatialGrid, cutoff: int | None = None) -> list[tuple[int, ...]]:
    """Lattice frequencies sorted by |xi|^2, then lexicographically.

    This is the reproducible iteration order used whenever per-frequency
    results are assembled.  `cutoff` bounds the max-norm |xi|_inf; default
    is the full representable lattice.
    """
    half = grid.points_per_axis // 2
    if cutoff is None:
        lo, hi = -half, half - 1
    else:
        if cutoff >= half:
            raise ValidationError(
                f"cutoff {cutoff} must stay below the Nyquist frequency {half}"
            )
        lo, hi = -cutoff, cutoff
    rng = range(lo, hi + 1)
    freqs = [()]
    for _ in range(grid.dim):
        freqs = [f + (k,) for f in freqs for k in rng]
    freqs.sort(key=lambda f: (sum(c * c for c in f), f))
    return freqs
