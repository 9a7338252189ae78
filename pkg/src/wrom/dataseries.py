"""Coarse-grid data series consumed by the reduced-order models.

The series holds 2n matrices D_j (the symmetrized, source-compressed data
at coarse times j*tau) together with their second time derivatives. Both
are produced from fine-grid array traces by the even-data map followed by
Fourier-domain differentiation and integer sub-sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexRange, NonIntegerSubsampling, RecordTooShort
from .fdtd import ResponseRecord
from .signals import (
    SignalSpec,
    even_map_kernel,
    fft_second_derivative,
    map_to_even_data,
)

DEFAULT_SUBSAMPLING = 20


@dataclass(frozen=True)
class DataSeries:
    """2n coarse-time data matrices and their second derivatives."""

    d: np.ndarray  # (2n, m, m)
    ddot: np.ndarray  # (2n, m, m)
    tau: float
    n: int
    m: int

    def __post_init__(self):
        expect = (2 * self.n, self.m, self.m)
        if self.d.shape != expect or self.ddot.shape != expect:
            raise ValueError(
                f"series shapes {self.d.shape}/{self.ddot.shape} != {expect}"
            )


def subsampling_factor(tau: float, dt: float) -> int:
    """Integer ratio tau/dt, rejecting non-integer coarse grids."""
    ratio = tau / dt
    sub = int(round(ratio))
    if sub < 1 or abs(ratio - sub) > 1e-9 * max(1.0, ratio):
        raise NonIntegerSubsampling(f"tau/dt = {ratio:g} is not an integer")
    return sub


def required_steps(spec: SignalSpec, tau: float, n: int, pad_coarse: int = 2) -> int:
    """Fine steps needed to support 2n-1 coarse samples plus padding.

    The record must cover the even-map kernel support on both sides of the
    last coarse sample; ``pad_coarse`` extra coarse intervals reduce wrap
    effects in the Fourier-domain derivative near the record end.
    """
    sub = subsampling_factor(tau, spec.dt)
    k = spec.half_width_samples
    return sub * (2 * n - 1 + pad_coarse) + 2 * k + 1


def build_data_series(
    response: ResponseRecord,
    spec: SignalSpec,
    tau: float,
    n: int,
    cutoff_hz: float | None = None,
) -> DataSeries:
    """Map fine traces to the coarse data series {D_j, Dddot_j}.

    Applies the even-data transform, differentiates the full valid fine
    record in the Fourier domain behind the low-pass cutoff, then takes
    every (tau/dt)-th sample. Each matrix is explicitly symmetrized: the
    factorization downstream needs exact symmetry and the solver's
    reciprocity error sits at discretization level.
    """
    if abs(response.dt - spec.dt) > 1e-12 * spec.dt:
        raise ValueError("response and spec disagree on dt")
    sub = subsampling_factor(tau, response.dt)
    kernel = even_map_kernel(spec)
    n_fine = response.n_steps - response.t0_index - kernel.i0
    if n_fine < sub * (2 * n - 1) + 1:
        raise RecordTooShort(
            f"record supports {n_fine} fine samples, need {sub * (2 * n - 1) + 1}"
        )
    if cutoff_hz is None:
        cutoff_hz = spec.cutoff_hz()
    d_fine = map_to_even_data(response.traces, kernel, response.t0_index, n_fine)
    dd_fine = fft_second_derivative(d_fine, response.dt, cutoff_hz)
    sel = sub * np.arange(2 * n)
    d = d_fine[sel]
    ddot = dd_fine[sel]
    d = 0.5 * (d + np.transpose(d, (0, 2, 1)))
    ddot = 0.5 * (ddot + np.transpose(ddot, (0, 2, 1)))
    return DataSeries(d=d, ddot=ddot, tau=tau, n=n, m=response.m)


def restrict_series(series: DataSeries, j_window: int) -> DataSeries:
    """Truncate to the first 2J matrices (window for layer peeling)."""
    if not 1 <= j_window <= series.n:
        raise IndexRange(f"window {j_window} outside 1..{series.n}")
    if j_window == series.n:
        return series
    k = 2 * j_window
    return DataSeries(
        d=series.d[:k].copy(),
        ddot=series.ddot[:k].copy(),
        tau=series.tau,
        n=j_window,
        m=series.m,
    )
