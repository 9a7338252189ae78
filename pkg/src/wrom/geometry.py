"""Computational domain, medium model, and sensor geometry.

Coordinates are (cross-range, range) in meters: cross-range runs along the
sensor array, range is the depth direction orthogonal to it. Scalar fields
are stored as arrays of shape ``(nx, ny)`` indexed ``[i, j]`` with node
coordinates ``origin + (i*h, j*h)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import NonPositiveSpeed, OutOfDomain


@dataclass(frozen=True)
class Grid2D:
    """Uniform grid on the rectangle [origin, origin + ((nx-1)h, (ny-1)h)]."""

    nx: int
    ny: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid needs at least 3 nodes per direction")
        if self.h <= 0:
            raise ValueError("grid spacing must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def extent(self) -> tuple[float, float]:
        """Physical side lengths (cross-range, range)."""
        return ((self.nx - 1) * self.h, (self.ny - 1) * self.h)

    def node_coordinate(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + i * self.h, self.origin[1] + j * self.h)

    def contains(self, p) -> bool:
        ex, ey = self.extent
        x = p[0] - self.origin[0]
        y = p[1] - self.origin[1]
        return 0.0 <= x <= ex and 0.0 <= y <= ey

    def snap_to_grid(self, p) -> tuple[int, int]:
        """Nearest node index of a point inside the domain.

        The snapped node is within h/sqrt(2) of ``p``. Raises
        :class:`OutOfDomain` for points outside the rectangle.
        """
        if not self.contains(p):
            raise OutOfDomain(f"point {p} outside domain")
        i = int(round((p[0] - self.origin[0]) / self.h))
        j = int(round((p[1] - self.origin[1]) / self.h))
        return (min(i, self.nx - 1), min(j, self.ny - 1))

    def coordinate_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid ('ij' indexing) of node coordinates, shape (nx, ny) each."""
        x = self.origin[0] + self.h * np.arange(self.nx)
        y = self.origin[1] + self.h * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")


@dataclass(frozen=True)
class ArrayGeometry:
    """Co-located source/receiver positions, strictly inside the domain."""

    sensors: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.sensors) < 1:
            raise ValueError("need at least one sensor")
        if len(set(self.sensors)) != len(self.sensors):
            raise ValueError("sensor positions must be pairwise distinct")

    @property
    def m(self) -> int:
        return len(self.sensors)

    def node_indices(self, grid: Grid2D) -> list[tuple[int, int]]:
        idx = []
        for p in self.sensors:
            i, j = grid.snap_to_grid(p)
            if i in (0, grid.nx - 1) or j in (0, grid.ny - 1):
                raise OutOfDomain(f"sensor {p} snaps to a boundary node")
            idx.append((i, j))
        return idx

    @property
    def mean_range(self) -> float:
        return float(np.mean([p[1] for p in self.sensors]))


def linear_array(grid: Grid2D, m: int, aperture: float, depth: float) -> ArrayGeometry:
    """Evenly spaced sensors centered in cross-range at the given depth."""
    ex, _ = grid.extent
    x0 = grid.origin[0] + 0.5 * (ex - aperture)
    if m == 1:
        xs = [x0 + 0.5 * aperture]
    else:
        xs = [x0 + aperture * k / (m - 1) for k in range(m)]
    return ArrayGeometry(tuple((x, grid.origin[1] + depth) for x in xs))


@dataclass(frozen=True)
class Medium:
    """Wave-speed field c(x) on a grid, with reference speed c_ref.

    ``collar_radius > 0`` declares that the speed equals ``c_ref`` on every
    node within that distance of a collar center (typically the sensors);
    the equality is verified at construction.
    """

    grid: Grid2D
    speed: np.ndarray
    c_ref: float
    collar_centers: tuple[tuple[float, float], ...] = ()
    collar_radius: float = 0.0

    def __post_init__(self):
        speed = np.asarray(self.speed, dtype=float)
        if speed.shape != self.grid.shape:
            raise ValueError(f"speed shape {speed.shape} != grid {self.grid.shape}")
        if self.c_ref <= 0:
            raise NonPositiveSpeed("reference speed must be positive")
        if not np.all(np.isfinite(speed)) or speed.min() <= 0:
            raise NonPositiveSpeed("speed field must be finite and positive")
        object.__setattr__(self, "speed", speed)
        if self.collar_radius > 0 and self.collar_centers:
            mask = collar_mask(self.grid, self.collar_centers, self.collar_radius)
            dev = np.abs(speed[mask] - self.c_ref)
            if dev.size and dev.max() != 0.0:
                raise ValueError(
                    f"speed deviates from c_ref by {dev.max():g} inside the collar"
                )

    @property
    def c_min(self) -> float:
        return float(self.speed.min())

    @property
    def c_max(self) -> float:
        return float(self.speed.max())


def collar_mask(grid: Grid2D, centers, radius: float) -> np.ndarray:
    """Boolean node mask within ``radius`` of any center."""
    X, Y = grid.coordinate_arrays()
    mask = np.zeros(grid.shape, dtype=bool)
    for cx, cy in centers:
        mask |= (X - cx) ** 2 + (Y - cy) ** 2 <= radius**2
    return mask


def homogeneous_medium(grid: Grid2D, c_ref: float) -> Medium:
    if c_ref <= 0:
        raise NonPositiveSpeed("constant speed must be positive")
    return Medium(grid, np.full(grid.shape, float(c_ref)), c_ref)


def layered_medium(
    grid: Grid2D, c_ref: float, depth: float, thickness: float, contrast: float
) -> Medium:
    """Fast horizontal layer occupying range in [depth, depth + thickness]."""
    _, Y = grid.coordinate_arrays()
    speed = np.full(grid.shape, float(c_ref))
    band = (Y >= grid.origin[1] + depth) & (Y <= grid.origin[1] + depth + thickness)
    speed[band] = c_ref * (1.0 + contrast)
    return Medium(grid, speed, c_ref)


def disk_medium(
    grid: Grid2D, c_ref: float, center, radius: float, contrast: float
) -> Medium:
    """Disk-shaped inclusion with speed c_ref*(1 + contrast)."""
    X, Y = grid.coordinate_arrays()
    speed = np.full(grid.shape, float(c_ref))
    inside = (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= radius**2
    speed[inside] = c_ref * (1.0 + contrast)
    return Medium(grid, speed, c_ref)


def random_medium(
    grid: Grid2D,
    c_ref: float,
    contrast: float,
    corr_len: float,
    seed: int,
    quiet_centers=(),
    quiet_radius: float = 0.0,
) -> Medium:
    """Smooth random fluctuations with Gaussian covariance.

    The fluctuation field is white noise smoothed on the scale ``corr_len``
    and normalized so its largest deviation is ``contrast * c_ref``. Nodes
    within ``quiet_radius`` of a quiet center are pinned to ``c_ref`` (used
    to keep the medium homogeneous around the array).
    """
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(grid.shape)
    rough = gaussian_filter(white, sigma=corr_len / grid.h, mode="reflect")
    rough /= np.abs(rough).max()
    speed = c_ref * (1.0 + contrast * rough)
    if quiet_radius > 0 and quiet_centers:
        mask = collar_mask(grid, quiet_centers, quiet_radius)
        speed[mask] = c_ref
        return Medium(grid, speed, c_ref, tuple(quiet_centers), quiet_radius)
    return Medium(grid, speed, c_ref)
