"""Binary file formats: an ASCII header line, then little-endian float64.

Formats:
  WROMGRID v1 <nx> <ny> <h> <x0> <y0>\\n   - nx*ny speeds, row-major (nx, ny)
  WROMSEQ  v1 <count> <rows> <cols> <dt>\\n - count matrices, row-major, in order
  WROMMAT  v1 <rows> <cols>\\n              - one matrix, row-major
  WROMDS   v1 tau=<tau> n=<n> m=<m>\\n      - sidecar for a data-series pair

Numbers are written with repr-level precision so parse/serialize round-trips
are exact.
"""

from __future__ import annotations

import os

import numpy as np

from .dataseries import DataSeries
from .geometry import Grid2D, Medium


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _read_header(fh, magic: str, nfields: int) -> list[str]:
    line = fh.readline().decode("ascii")
    parts = line.split()
    if len(parts) != nfields + 2 or parts[0] != magic or parts[1] != "v1":
        raise ValueError(f"bad {magic} header: {line!r}")
    return parts[2:]


def write_medium(path: str, medium: Medium) -> None:
    g = medium.grid
    header = (
        f"WROMGRID v1 {g.nx} {g.ny} {_fmt(g.h)} "
        f"{_fmt(g.origin[0])} {_fmt(g.origin[1])}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(medium.speed, dtype="<f8").tobytes())


def read_medium(path: str, c_ref: float | None = None) -> Medium:
    with open(path, "rb") as fh:
        nx, ny, h, x0, y0 = _read_header(fh, "WROMGRID", 5)
        nx, ny = int(nx), int(ny)
        speed = np.frombuffer(fh.read(8 * nx * ny), dtype="<f8").reshape(nx, ny)
    grid = Grid2D(nx, ny, float(h), (float(x0), float(y0)))
    if c_ref is None:
        c_ref = float(np.median(speed))
    return Medium(grid, speed.copy(), c_ref)


def write_matrix_sequence(path: str, seq: np.ndarray, dt: float) -> None:
    seq = np.asarray(seq, dtype=float)
    if seq.ndim != 3:
        raise ValueError("sequence must have shape (count, rows, cols)")
    count, rows, cols = seq.shape
    header = f"WROMSEQ v1 {count} {rows} {cols} {_fmt(dt)}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(seq, dtype="<f8").tobytes())


def read_matrix_sequence(path: str) -> tuple[np.ndarray, float]:
    with open(path, "rb") as fh:
        count, rows, cols, dt = _read_header(fh, "WROMSEQ", 4)
        count, rows, cols = int(count), int(rows), int(cols)
        data = np.frombuffer(fh.read(8 * count * rows * cols), dtype="<f8")
    return data.reshape(count, rows, cols).copy(), float(dt)


def write_matrix(path: str, mat: np.ndarray) -> None:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim == 1:
        mat = mat[:, None]
    header = f"WROMMAT v1 {mat.shape[0]} {mat.shape[1]}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(mat, dtype="<f8").tobytes())


def read_matrix(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        rows, cols = _read_header(fh, "WROMMAT", 2)
        rows, cols = int(rows), int(cols)
        data = np.frombuffer(fh.read(8 * rows * cols), dtype="<f8")
    return data.reshape(rows, cols).copy()


def write_data_series(prefix: str, series: DataSeries) -> None:
    """Write <prefix>.ds sidecar plus <prefix>.d.seq / <prefix>.dd.seq."""
    with open(prefix + ".ds", "wb") as fh:
        fh.write(
            f"WROMDS v1 tau={_fmt(series.tau)} n={series.n} m={series.m}\n".encode()
        )
    write_matrix_sequence(prefix + ".d.seq", series.d, series.tau)
    write_matrix_sequence(prefix + ".dd.seq", series.ddot, series.tau)


def read_data_series(prefix: str) -> DataSeries:
    with open(prefix + ".ds", "rb") as fh:
        fields = _read_header(fh, "WROMDS", 3)
    kv = dict(f.split("=", 1) for f in fields)
    d, _ = read_matrix_sequence(prefix + ".d.seq")
    ddot, _ = read_matrix_sequence(prefix + ".dd.seq")
    return DataSeries(
        d=d, ddot=ddot, tau=float(kv["tau"]), n=int(kv["n"]), m=int(kv["m"])
    )


def write_pgm(path: str, values: np.ndarray) -> None:
    """8-bit binary PGM quick-look of a 2D field (min->0, max->255)."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise ValueError("PGM quick-look needs a 2D array")
    lo, hi = np.nanmin(v), np.nanmax(v)
    if hi > lo:
        img = np.clip((v - lo) / (hi - lo) * 255.0, 0, 255)
    else:
        img = np.zeros_like(v)
    img = np.nan_to_num(img).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
