"""Misfit functionals over a search medium.

Four comparable objectives, all driven by the same measured data and the
same simulation/transform pipeline applied to the search speed w:

  fwi      - least-squares trace misfit (the classical data fit),
  chol     - || R(w)^{-1} R - I ||_F^2 on the block Cholesky factors,
  rom_op   - || A_rom - A_rom(w) ||_F^2 on the wave-operator projections,
  prop     - || P_rom - P_rom(w) ||_F^2 on the propagator projections
             (kept as the known anti-pattern for comparison).

Identical pipelines on both sides make every objective vanish at w = c.
A time window J <= n restricts both sides to the first 2J data matrices,
which is what layer peeling iterates over.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataseries import (
    DataSeries,
    build_data_series,
    required_steps,
    restrict_series,
    subsampling_factor,
)
from .errors import NonPositiveSpeed
from .fdtd import ResponseRecord, SimulationConfig, gather_response_matrix
from .geometry import ArrayGeometry, Grid2D, Medium
from .rom import RomPair, block_upper_solve, build_rom
from .signals import SignalSpec, sample_pulse


@dataclass(frozen=True)
class ObjectiveContext:
    """Measured data plus the fixed pipeline parameters shared by all objectives."""

    array: ArrayGeometry
    spec: SignalSpec
    tau: float
    n: int
    trunc_tol: float
    pad_coarse: int
    measured_record: ResponseRecord
    measured_series: DataSeries
    measured_rom: RomPair
    window: int  # active restriction J <= n
    n_jobs: int = 1
    _rom_cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_truth(
        cls,
        true_medium: Medium,
        array: ArrayGeometry,
        spec: SignalSpec,
        tau: float,
        n: int,
        trunc_tol: float = 1e-9,
        pad_coarse: int = 4,
        n_jobs: int = 1,
    ) -> "ObjectiveContext":
        """Simulate the measured data once and freeze the pipeline."""
        record = simulate_record(true_medium, array, spec, tau, n, pad_coarse, n_jobs)
        series = build_data_series(record, spec, tau, n)
        rom = build_rom(series, trunc_tol)
        return cls(
            array=array,
            spec=spec,
            tau=tau,
            n=n,
            trunc_tol=trunc_tol,
            pad_coarse=pad_coarse,
            measured_record=record,
            measured_series=series,
            measured_rom=rom,
            window=n,
            n_jobs=n_jobs,
        )

    def with_window(self, j_window: int) -> "ObjectiveContext":
        return replace(self, window=j_window, _rom_cache={})

    def measured_rom_windowed(self) -> RomPair:
        """Measured ROM built from the restricted series (cached per window)."""
        if self.window == self.n:
            return self.measured_rom
        key = self.window
        if key not in self._rom_cache:
            self._rom_cache[key] = build_rom(
                restrict_series(self.measured_series, self.window), self.trunc_tol
            )
        return self._rom_cache[key]

    def simulate(self, w: Medium) -> tuple[ResponseRecord, DataSeries]:
        """Search-side pipeline, sized for the active window."""
        record = simulate_record(
            w, self.array, self.spec, self.tau, self.window, self.pad_coarse, self.n_jobs
        )
        series = build_data_series(record, self.spec, self.tau, self.window)
        return record, series


def simulate_record(
    medium: Medium,
    array: ArrayGeometry,
    spec: SignalSpec,
    tau: float,
    n: int,
    pad_coarse: int = 4,
    n_jobs: int = 1,
) -> ResponseRecord:
    n_steps = required_steps(spec, tau, n, pad_coarse)
    config = SimulationConfig(spec.dt, n_steps)
    return gather_response_matrix(medium, array, sample_pulse(spec), config, n_jobs)


def _fwi_weights(n_samples: int, dt: float) -> np.ndarray:
    w = np.full(n_samples, dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def fwi_trace_residual(ctx: ObjectiveContext, record_w: ResponseRecord) -> np.ndarray:
    """sqrt(trapezoid-weight) * (measured - simulated) over t in [0, (2J-1)tau]."""
    sub = subsampling_factor(ctx.tau, ctx.spec.dt)
    k0 = ctx.measured_record.t0_index
    k1 = k0 + sub * (2 * ctx.window - 1)
    meas = ctx.measured_record.traces[:, :, k0 : k1 + 1]
    sim = record_w.traces[:, :, record_w.t0_index : record_w.t0_index + meas.shape[2]]
    w = _fwi_weights(meas.shape[2], ctx.spec.dt)
    return ((meas - sim) * np.sqrt(w)[None, None, :]).reshape(-1)


def fwi_objective(ctx: ObjectiveContext, w: Medium) -> float:
    record_w, _ = ctx.simulate(w)
    return float(np.sum(fwi_trace_residual(ctx, record_w) ** 2))


def chol_residual(ctx: ObjectiveContext, rom_w: RomPair) -> np.ndarray:
    """vec( R(w)^{-1} R - I ) for the active window."""
    rom_meas = ctx.measured_rom_windowed()
    x = block_upper_solve(rom_w.r, rom_meas.r, ctx.array.m)
    x -= np.eye(x.shape[0])
    return x.reshape(-1)


def chol_objective(ctx: ObjectiveContext, w: Medium) -> float:
    _, series = ctx.simulate(w)
    rom_w = build_rom(series, ctx.trunc_tol)
    return float(np.sum(chol_residual(ctx, rom_w) ** 2))


def rom_operator_objective(ctx: ObjectiveContext, w: Medium) -> float:
    _, series = ctx.simulate(w)
    rom_w = build_rom(series, ctx.trunc_tol)
    diff = ctx.measured_rom_windowed().a_rom - rom_w.a_rom
    return float(np.sum(diff**2))


def propagator_misfit(ctx: ObjectiveContext, w: Medium) -> float:
    _, series = ctx.simulate(w)
    rom_w = build_rom(series, ctx.trunc_tol)
    diff = ctx.measured_rom_windowed().p_rom - rom_w.p_rom
    return float(np.sum(diff**2))


def evaluate_all(ctx: ObjectiveContext, w: Medium) -> dict[str, float]:
    """All four objectives from a single search-side simulation."""
    record_w, series = ctx.simulate(w)
    rom_w = build_rom(series, ctx.trunc_tol)
    rom_meas = ctx.measured_rom_windowed()
    return {
        "fwi": float(np.sum(fwi_trace_residual(ctx, record_w) ** 2)),
        "chol": float(np.sum(chol_residual(ctx, rom_w) ** 2)),
        "rom_op": float(np.sum((rom_meas.a_rom - rom_w.a_rom) ** 2)),
        "prop": float(np.sum((rom_meas.p_rom - rom_w.p_rom) ** 2)),
    }


def camembert_family(
    c_true: Medium, c_fwi: Medium, alpha: float, beta: float
) -> Medium:
    """Two-parameter interpolation between a stagnated estimate and the truth.

    w = c_ref + beta * [ (1 - alpha) (c_fwi - c_ref) + alpha (c_true - c_ref) ];
    (1, 1) reproduces the truth, (0, 1) the stagnated estimate, beta scales
    the contrast.
    """
    if c_true.grid != c_fwi.grid or c_true.c_ref != c_fwi.c_ref:
        raise ValueError("family members must share grid and reference speed")
    cbar = c_true.c_ref
    speed = cbar + beta * (
        (1.0 - alpha) * (c_fwi.speed - cbar) + alpha * (c_true.speed - cbar)
    )
    if speed.min() <= 0:
        raise NonPositiveSpeed(
            f"family member (alpha={alpha:g}, beta={beta:g}) has non-positive speed"
        )
    return Medium(
        c_true.grid, speed, cbar, c_true.collar_centers, c_true.collar_radius
    )


def grid_local_minima(values: np.ndarray) -> list[tuple[int, int]]:
    """Interior cells strictly smaller than all 8 neighbors."""
    v = np.asarray(values)
    minima = []
    for i in range(1, v.shape[0] - 1):
        for j in range(1, v.shape[1] - 1):
            patch = v[i - 1 : i + 2, j - 1 : j + 2].copy()
            center = patch[1, 1]
            patch[1, 1] = np.inf
            if center < patch.min():
                minima.append((i, j))
    return minima
