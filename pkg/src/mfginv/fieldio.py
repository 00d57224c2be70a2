"""
Field file formats: flat binary with a 64-byte header, and CSV export.

Binary layout (little endian):
    bytes 0..3    magic b"MFGF"
    u32           format version (1)
    u32           spatial dimension n
    u32           points per axis N
    u32           time steps M (0 for a purely spatial field)
    u32           1 if complex payload, else 0
    f64           time horizon T (0.0 for spatial fields)
    zero padding to byte 64
    payload       float64 / complex128, row-major, time axis leading

CSV files carry one row per grid point: spatial coordinates, then the
time coordinate for space-time fields, then the value (two columns for
complex data).  Values are printed with 17 significant digits so a
re-import reproduces the binary field to 1e-15.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grids import ScalarField, SpaceTimeField, SpatialGrid, TimeGrid, ValidationError

__all__ = ["write_field", "read_field", "write_csv_field", "read_csv_field"]

MAGIC = b"MFGF"
HEADER_SIZE = 64
_HEADER_FMT = "<4sIIIIId"


def _pack_header(n: int, N: int, M: int, is_complex: bool, horizon: float) -> bytes:
    head = struct.pack(_HEADER_FMT, MAGIC, 1, n, N, M, int(is_complex), horizon)
    return head + b"\x00" * (HEADER_SIZE - len(head))


def write_field(path, field: ScalarField | SpaceTimeField) -> None:
    if isinstance(field, SpaceTimeField):
        n = field.grid.dim
        header = _pack_header(
            n,
            field.grid.points_per_axis,
            field.time.steps,
            np.iscomplexobj(field.values),
            field.time.horizon,
        )
    elif isinstance(field, ScalarField):
        header = _pack_header(
            field.grid.dim,
            field.grid.points_per_axis,
            0,
            np.iscomplexobj(field.values),
            0.0,
        )
    else:
        raise ValidationError(f"cannot serialize object of type {type(field)!r}")
    dtype = np.complex128 if np.iscomplexobj(field.values) else np.float64
    payload = np.ascontiguousarray(field.values, dtype=dtype)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.astype(payload.dtype.newbyteorder("<")).tobytes())


def read_field(path) -> ScalarField | SpaceTimeField:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise ValidationError(f"{path}: truncated field file")
    magic, version, n, N, M, is_complex, horizon = struct.unpack(
        _HEADER_FMT, raw[: struct.calcsize(_HEADER_FMT)]
    )
    if magic != MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}")
    if version != 1:
        raise ValidationError(f"{path}: unsupported field file version {version}")
    grid = SpatialGrid(n, N)
    dtype = np.dtype(np.complex128 if is_complex else np.float64).newbyteorder("<")
    count = grid.num_points * (M + 1 if M else 1)
    values = np.frombuffer(raw[HEADER_SIZE:], dtype=dtype, count=count).astype(
        np.complex128 if is_complex else np.float64
    )
    if M == 0:
        return ScalarField(grid, values.reshape(grid.shape))
    time = TimeGrid(horizon, M)
    return SpaceTimeField(grid, time, values.reshape((M + 1,) + grid.shape))


def write_csv_field(path, field: ScalarField | SpaceTimeField) -> None:
    grid = field.grid
    coords = [m.ravel() for m in grid.meshgrid()]
    header = [f"x{j + 1}" for j in range(grid.dim)]
    if isinstance(field, SpaceTimeField):
        nodes = field.time.nodes()
        npts = grid.num_points
        cols = [np.tile(c, len(nodes)) for c in coords]
        cols.append(np.repeat(nodes, npts))
        header.append("t")
        flat = field.values.reshape(len(nodes) * npts)
    else:
        cols = coords
        flat = field.values.ravel()
    if np.iscomplexobj(flat):
        header += ["value_re", "value_im"]
        cols += [flat.real, flat.imag]
    else:
        header.append("value")
        cols.append(flat)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_csv_field(path) -> ScalarField | SpaceTimeField:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    dim = sum(1 for name in header if name.startswith("x"))
    has_time = "t" in header
    is_complex = "value_im" in header
    N = len(np.unique(data[:, 0]))
    grid = SpatialGrid(dim, N)
    if is_complex:
        values = data[:, dim + int(has_time)] + 1j * data[:, dim + int(has_time) + 1]
    else:
        values = data[:, dim + int(has_time)]
    if not has_time:
        return ScalarField(grid, values.reshape(grid.shape))
    tcol = data[:, dim]
    nodes = np.unique(tcol)
    time = TimeGrid(float(nodes.max()), len(nodes) - 1)
    return SpaceTimeField(grid, time, values.reshape((len(nodes),) + grid.shape))
