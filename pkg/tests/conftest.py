import numpy as np
import pytest

from mfginv.grids import SpatialGrid, TimeGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def grid1d():
    return SpatialGrid(1, 64)


@pytest.fixture
def grid2d():
    return SpatialGrid(2, 16)


@pytest.fixture
def x64(grid1d):
    return grid1d.axes()[0]


def random_band_limited(grid: SpatialGrid, rng, max_freq: int = 5) -> np.ndarray:
    """Real random field supported on |xi|_inf <= max_freq."""
    N = grid.points_per_axis
    spec = np.zeros(grid.shape, dtype=np.complex128)
    mesh = np.meshgrid(
        *([np.fft.fftfreq(N, 1.0 / N).astype(int)] * grid.dim), indexing="ij"
    )
    keep = np.ones(grid.shape, dtype=bool)
    for comp in mesh:
        keep &= np.abs(comp) <= max_freq
    vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    spec[keep] = vals[keep]
    out = np.fft.ifftn(spec * grid.num_points).real
    return out / max(1.0, np.max(np.abs(out)))
