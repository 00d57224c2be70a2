import numpy as np
import pytest

from mfginv.fieldio import read_csv_field, read_field, write_csv_field, write_field
from mfginv.grids import ScalarField, SpaceTimeField, SpatialGrid, TimeGrid, ValidationError


@pytest.mark.parametrize("complex_payload", [False, True])
def test_binary_round_trip_scalar(tmp_path, rng, complex_payload):
    grid = SpatialGrid(2, 16)
    vals = rng.standard_normal(grid.shape)
    if complex_payload:
        vals = vals + 1j * rng.standard_normal(grid.shape)
    f = ScalarField(grid, vals)
    path = tmp_path / "f.field"
    write_field(path, f)
    back = read_field(path)
    assert isinstance(back, ScalarField)
    assert back.grid == grid
    np.testing.assert_array_equal(back.values, vals)


def test_binary_round_trip_spacetime(tmp_path, rng):
    grid = SpatialGrid(1, 32)
    time = TimeGrid(0.25, 8)
    vals = rng.standard_normal((9,) + grid.shape)
    f = SpaceTimeField(grid, time, vals)
    path = tmp_path / "st.field"
    write_field(path, f)
    back = read_field(path)
    assert isinstance(back, SpaceTimeField)
    assert back.time == time
    np.testing.assert_array_equal(back.values, vals)


def test_header_is_64_bytes_with_magic(tmp_path):
    grid = SpatialGrid(1, 8)
    write_field(tmp_path / "x.field", ScalarField(grid, np.zeros(8)))
    raw = (tmp_path / "x.field").read_bytes()
    assert raw[:4] == b"MFGF"
    assert len(raw) == 64 + 8 * 8


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.field"
    path.write_bytes(b"NOPE" + b"\x00" * 100)
    with pytest.raises(ValidationError):
        read_field(path)


def test_csv_round_trip_matches_binary(tmp_path, rng):
    grid = SpatialGrid(1, 64)
    vals = rng.standard_normal(grid.shape)
    f = ScalarField(grid, vals)
    write_csv_field(tmp_path / "f.csv", f)
    back = read_csv_field(tmp_path / "f.csv")
    assert np.max(np.abs(back.values - vals)) <= 1e-15


def test_csv_has_header_and_row_per_point(tmp_path):
    grid = SpatialGrid(1, 64)
    f = ScalarField(grid, np.arange(64.0))
    write_csv_field(tmp_path / "f.csv", f)
    lines = (tmp_path / "f.csv").read_text().strip().splitlines()
    assert lines[0] == "x1,value"
    assert len(lines) == 65


def test_csv_spacetime_round_trip(tmp_path, rng):
    grid = SpatialGrid(1, 16)
    time = TimeGrid(1.0, 4)
    vals = rng.standard_normal((5, 16))
    f = SpaceTimeField(grid, time, vals)
    write_csv_field(tmp_path / "st.csv", f)
    back = read_csv_field(tmp_path / "st.csv")
    assert isinstance(back, SpaceTimeField)
    assert back.time.steps == 4
    assert np.max(np.abs(back.values - vals)) <= 1e-15


def test_csv_complex_round_trip(tmp_path, rng):
    grid = SpatialGrid(1, 16)
    vals = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    write_csv_field(tmp_path / "c.csv", ScalarField(grid, vals))
    back = read_csv_field(tmp_path / "c.csv")
    assert np.max(np.abs(back.values - vals)) <= 1e-15
