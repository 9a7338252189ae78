import numpy as np
import pytest
from hypothesis import given, strategies as st

from wrom.errors import NonPositiveSpeed, OutOfDomain
from wrom.geometry import (
    ArrayGeometry,
    Grid2D,
    Medium,
    collar_mask,
    disk_medium,
    homogeneous_medium,
    layered_medium,
    linear_array,
    random_medium,
)


def test_snap_exact_node():
    grid = Grid2D(5, 5, 20.0)
    assert grid.snap_to_grid((40.0, 60.0)) == (2, 3)


def test_snap_nearest_node():
    grid = Grid2D(5, 5, 20.0)
    # 49 is 9 m from node 40 and 11 m from node 60
    assert grid.snap_to_grid((49.0, 60.0)) == (2, 3)


def test_snap_outside_raises():
    grid = Grid2D(5, 5, 20.0)
    with pytest.raises(OutOfDomain):
        grid.snap_to_grid((-1.0, 0.0))
    with pytest.raises(OutOfDomain):
        grid.snap_to_grid((0.0, 81.0))


@given(
    st.integers(min_value=0, max_value=9),
    st.integers(min_value=0, max_value=11),
)
def test_snap_round_trip(i, j):
    grid = Grid2D(10, 12, 7.5, origin=(-3.0, 11.0))
    assert grid.snap_to_grid(grid.node_coordinate(i, j)) == (i, j)


def test_snap_within_half_diagonal():
    grid = Grid2D(8, 8, 10.0)
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = tuple(rng.uniform(0, 70, size=2))
        i, j = grid.snap_to_grid(p)
        node = grid.node_coordinate(i, j)
        assert np.hypot(p[0] - node[0], p[1] - node[1]) <= 10.0 / np.sqrt(2) + 1e-12


def test_homogeneous_medium():
    grid = Grid2D(100, 125, 20.0)
    med = homogeneous_medium(grid, 3000.0)
    assert np.all(med.speed == 3000.0)
    med = homogeneous_medium(grid, 1500.0)
    assert np.all(med.speed == 1500.0)


def test_homogeneous_rejects_nonpositive():
    grid = Grid2D(5, 5, 20.0)
    with pytest.raises(NonPositiveSpeed):
        homogeneous_medium(grid, 0.0)


def test_medium_rejects_nonpositive_field():
    grid = Grid2D(5, 5, 20.0)
    speed = np.full(grid.shape, 100.0)
    speed[2, 2] = -1.0
    with pytest.raises(NonPositiveSpeed):
        Medium(grid, speed, 100.0)
    speed[2, 2] = np.nan
    with pytest.raises(NonPositiveSpeed):
        Medium(grid, speed, 100.0)


def test_collar_invariant_enforced():
    grid = Grid2D(21, 21, 10.0)
    speed = np.full(grid.shape, 1000.0)
    speed[10, 10] = 1200.0
    center = grid.node_coordinate(10, 10)
    with pytest.raises(ValueError, match="collar"):
        Medium(grid, speed, 1000.0, (center,), 15.0)
    # same field passes once the deviation is outside the collar
    Medium(grid, speed, 1000.0, (grid.node_coordinate(2, 2),), 15.0)


def test_collar_mask_geometry():
    grid = Grid2D(11, 11, 1.0)
    mask = collar_mask(grid, [(5.0, 5.0)], 1.5)
    assert mask[5, 5] and mask[4, 5] and mask[5, 6]
    assert not mask[3, 5] and not mask[5, 3]


def test_array_validation():
    with pytest.raises(ValueError):
        ArrayGeometry(())
    with pytest.raises(ValueError):
        ArrayGeometry(((0.0, 1.0), (0.0, 1.0)))


def test_array_boundary_sensor_rejected():
    grid = Grid2D(5, 5, 10.0)
    arr = ArrayGeometry(((0.0, 20.0),))
    with pytest.raises(OutOfDomain):
        arr.node_indices(grid)


def test_linear_array_layout():
    grid = Grid2D(61, 76, 20.0)
    arr = linear_array(grid, 5, aperture=800.0, depth=200.0)
    xs = [p[0] for p in arr.sensors]
    assert xs[0] == pytest.approx(200.0)
    assert xs[-1] == pytest.approx(1000.0)
    assert all(p[1] == 200.0 for p in arr.sensors)


def test_layered_and_disk_media():
    grid = Grid2D(21, 31, 10.0)
    lay = layered_medium(grid, 1000.0, depth=100.0, thickness=50.0, contrast=0.3)
    assert lay.speed[0, 0] == 1000.0
    assert lay.speed[0, 12] == 1300.0
    disk = disk_medium(grid, 1000.0, (100.0, 150.0), 40.0, 0.2)
    assert disk.speed[10, 15] == 1200.0
    assert disk.speed[0, 0] == 1000.0


def test_random_medium_contrast_and_quiet_zone():
    grid = Grid2D(31, 31, 10.0)
    center = (150.0, 40.0)
    med = random_medium(
        grid, 1000.0, 0.2, 30.0, seed=5, quiet_centers=[center], quiet_radius=35.0
    )
    assert med.c_max <= 1200.0 + 1e-9
    assert med.c_min >= 800.0 - 1e-9
    i, j = grid.snap_to_grid(center)
    assert med.speed[i, j] == 1000.0
    # deterministic in the seed
    med2 = random_medium(
        grid, 1000.0, 0.2, 30.0, seed=5, quiet_centers=[center], quiet_radius=35.0
    )
    assert np.array_equal(med.speed, med2.speed)
