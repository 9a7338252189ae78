"""Shared desk-scale fixtures.

The "tiny cavity" is a 30x30 homogeneous square, small enough for the
dense spectral reference, with sensors on nodes that survive a 2x grid
refinement. Session scope: the forward solves are reused by many tests.
"""

import numpy as np
import pytest

from wrom.dataseries import build_data_series, required_steps
from wrom.fdtd import SimulationConfig, gather_response_matrix
from wrom.geometry import ArrayGeometry, Grid2D, homogeneous_medium
from wrom.oracle import discretize_A, oracle_data_series
from wrom.signals import SignalSpec, sample_pulse


class TinyCavity:
    """Homogeneous 30x30 cavity with a 3-sensor array."""

    c0 = 1000.0
    f0 = 10.0
    bw = f0 * 2.0 / 3.0
    tau = 0.05
    sub = 40
    n = 4

    def __init__(self, refine: int = 1):
        self.h = 10.0 / refine
        nx = 29 * refine + 1
        self.grid = Grid2D(nx, nx, self.h)
        self.medium = homogeneous_medium(self.grid, self.c0)
        self.dt = self.tau / (self.sub * refine)
        self.spec = SignalSpec.from_hz(self.f0, self.bw, self.dt)
        self.array = ArrayGeometry(
            ((70.0, 100.0), (140.0, 100.0), (210.0, 100.0))
        )
        self.m = self.array.m

    def response(self, pad_coarse: int = 4):
        n_steps = required_steps(self.spec, self.tau, self.n, pad_coarse)
        config = SimulationConfig(self.dt, n_steps)
        return gather_response_matrix(
            self.medium, self.array, sample_pulse(self.spec), config
        )

    def series(self):
        return build_data_series(self.response(), self.spec, self.tau, self.n)

    def operator(self):
        return discretize_A(self.medium)

    def oracle_series(self, op=None):
        return oracle_data_series(
            op or self.operator(), self.array, self.spec, self.tau, self.n
        )


@pytest.fixture(scope="session")
def tiny():
    return TinyCavity()


@pytest.fixture(scope="session")
def tiny_record(tiny):
    return tiny.response()


@pytest.fixture(scope="session")
def tiny_series(tiny, tiny_record):
    return build_data_series(tiny_record, tiny.spec, tiny.tau, tiny.n)


@pytest.fixture(scope="session")
def tiny_operator(tiny):
    return tiny.operator()


@pytest.fixture(scope="session")
def tiny_oracle_series(tiny, tiny_operator):
    return tiny.oracle_series(tiny_operator)


def multimode_scalar_series(thetas, weights, tau, n):
    """Scalar (m=1) data series of a known diagonal operator.

    D_j = sum_k w_k cos(j tau sqrt(theta_k)) is the exact data of an
    operator with eigenvalues theta_k and initial-state weights w_k >= 0;
    the matching second-derivative series carries the extra -theta_k.
    """
    from wrom.dataseries import DataSeries

    thetas = np.asarray(thetas, dtype=float)
    weights = np.asarray(weights, dtype=float)
    d = np.empty((2 * n, 1, 1))
    dd = np.empty((2 * n, 1, 1))
    for j in range(2 * n):
        c = np.cos(j * tau * np.sqrt(thetas))
        d[j, 0, 0] = np.sum(weights * c)
        dd[j, 0, 0] = -np.sum(weights * thetas * c)
    return DataSeries(d=d, ddot=dd, tau=tau, n=n, m=1)
