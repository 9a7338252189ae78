"""Finite-difference time-domain solver for the acoustic wave equation.

Physics:  d^2 p/dt^2 = c^2(x) Lap p + S(t, x)  on a rectangle with
homogeneous Dirichlet (sound-soft, perfectly reflecting) boundaries,
discretized with the five-point Laplacian and a three-point (leapfrog)
time scheme:

    p^{k+1} = 2 p^k - p^{k-1} + dt^2 [c^2 Lap_h p^k + S^k],

stable for dt <= h / (c_max sqrt(2)). Point sources are realized at the
nearest grid node with amplitude 1/h^2 (consistent 2D Dirac); receivers
sample the nearest node. The first step uses the Taylor start
p^1 = p^0 + (dt^2/2)(c^2 Lap_h p^0 + S^0) with p^0 = 0.

A damped variant integrates (1/Ta + d/dt)^2 p - c^2 Lap p = S for
noise-driven runs; the first-order term is centered, preserving
second-order accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .errors import CFLViolation, InstabilityDetected
from .geometry import ArrayGeometry, Medium
from .signals import Waveform

_NAN_CHECK_STRIDE = 200


@dataclass(frozen=True)
class SimulationConfig:
    """Fine-grid time stepping controls."""

    dt: float
    n_steps: int
    record_full_field: bool = False
    record_stride: int = 20

    def __post_init__(self):
        if self.dt <= 0 or self.n_steps < 1:
            raise ValueError("dt must be positive and n_steps >= 1")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")


@dataclass(frozen=True)
class ResponseRecord:
    """Array response traces[r, s, k] = p^(s) at receiver r, fine step k.

    Sample k corresponds to time (k - t0_index) * dt: the simulation starts
    at the onset of the probing signal, before its peak at t = 0.
    Reciprocity traces[r, s] = traces[s, r] holds to solver round-off.
    """

    traces: np.ndarray
    dt: float
    t0_index: int
    signal: Waveform

    @property
    def m(self) -> int:
        return self.traces.shape[0]

    @property
    def n_steps(self) -> int:
        return self.traces.shape[2]


@dataclass
class SolveResult:
    traces: np.ndarray  # (m, n_steps)
    frames: np.ndarray | None = None  # (n_frames, nx, ny) decimated movie
    frame_steps: np.ndarray | None = None
    weighted: np.ndarray | None = None  # (n_weights, nx*ny) accumulations


def cfl_limit(medium: Medium) -> float:
    return medium.grid.h / (medium.c_max * np.sqrt(2.0))


def _check_cfl(medium: Medium, dt: float):
    limit = cfl_limit(medium)
    if dt > limit * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:g} exceeds stability limit {limit:g}")


def solve_point_source(
    medium: Medium,
    array: ArrayGeometry,
    source_index: int,
    signal: Waveform,
    config: SimulationConfig,
    field_weights: np.ndarray | None = None,
) -> SolveResult:
    """Run one point-source simulation, recording traces at all sensors.

    ``field_weights`` (n_w, n_steps) requests streaming accumulations
    sum_k W[q, k] p^k over the full field, returned flattened; this is how
    time-filtered snapshot fields are extracted without storing the movie.
    """
    _check_cfl(medium, config.dt)
    grid = medium.grid
    dt, n_steps = config.dt, config.n_steps
    nodes = array.node_indices(grid)
    si, sj = nodes[source_index]
    src_amp = 1.0 / grid.h**2
    sig = np.zeros(n_steps)
    ncopy = min(n_steps, len(signal.values))
    sig[:ncopy] = signal.values[:ncopy]

    coef = (dt**2) * medium.speed**2 / grid.h**2  # interior stencil weight
    coef_in = coef[1:-1, 1:-1]
    dt2 = dt**2

    p_prev = np.zeros(grid.shape)
    p_cur = np.zeros(grid.shape)
    traces = np.zeros((array.m, n_steps))
    rec_rows = np.array([ij[0] for ij in nodes])
    rec_cols = np.array([ij[1] for ij in nodes])

    frames = []
    frame_steps = []
    weighted = None
    if field_weights is not None:
        weighted = np.zeros((field_weights.shape[0], grid.nx * grid.ny))

    def _record(k, p):
        traces[:, k] = p[rec_rows, rec_cols]
        if config.record_full_field and k % config.record_stride == 0:
            frames.append(p.copy())
            frame_steps.append(k)
        if weighted is not None:
            wk = field_weights[:, k]
            if np.any(wk):
                weighted[...] += wk[:, None] * p.reshape(1, -1)

    _record(0, p_cur)
    if n_steps == 1:
        return _finish(traces, frames, frame_steps, weighted)

    # Taylor start from homogeneous initial data.
    p_next = np.zeros(grid.shape)
    p_next[si, sj] = 0.5 * dt2 * sig[0] * src_amp
    p_prev, p_cur = p_cur, p_next
    _record(1, p_cur)

    lap = np.empty((grid.nx - 2, grid.ny - 2))
    for k in range(1, n_steps - 1):
        np.add(p_cur[2:, 1:-1], p_cur[:-2, 1:-1], out=lap)
        lap += p_cur[1:-1, 2:]
        lap += p_cur[1:-1, :-2]
        lap -= 4.0 * p_cur[1:-1, 1:-1]
        new = p_prev  # reuse buffer
        new[1:-1, 1:-1] *= -1.0
        new[1:-1, 1:-1] += 2.0 * p_cur[1:-1, 1:-1]
        new[1:-1, 1:-1] += coef_in * lap
        new[si, sj] += dt2 * sig[k] * src_amp
        p_prev, p_cur = p_cur, new
        _record(k + 1, p_cur)
        if (k + 1) % _NAN_CHECK_STRIDE == 0 and not np.isfinite(
            p_cur[si, sj]
        ):
            raise InstabilityDetected(f"non-finite field at step {k + 1}")
    if not np.all(np.isfinite(traces)):
        raise InstabilityDetected("non-finite trace values")
    return _finish(traces, frames, frame_steps, weighted)


def _finish(traces, frames, frame_steps, weighted) -> SolveResult:
    return SolveResult(
        traces=traces,
        frames=np.array(frames) if frames else None,
        frame_steps=np.array(frame_steps) if frame_steps else None,
        weighted=weighted,
    )


def gather_response_matrix(
    medium: Medium,
    array: ArrayGeometry,
    signal: Waveform,
    config: SimulationConfig,
    n_jobs: int = 1,
) -> ResponseRecord:
    """Probe with every source in turn and stack the receiver traces."""

    def _one(s):
        return solve_point_source(medium, array, s, signal, config).traces

    if n_jobs == 1:
        cols = [_one(s) for s in range(array.m)]
    else:
        cols = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_one)(s) for s in range(array.m)
        )
    traces = np.stack(cols, axis=1)  # (receiver, source, step)
    return ResponseRecord(traces, config.dt, signal.i0, signal)


def solve_reemission(
    medium: Medium,
    array: ArrayGeometry,
    emissions: np.ndarray,
    config: SimulationConfig,
) -> SolveResult:
    """Emit per-sensor waveforms simultaneously (time-reversal re-injection).

    ``emissions`` has shape (m, n_emit); sensor s drives a point source
    with emissions[s, k] at fine step k (zero once exhausted). Full-field
    frames are recorded at ``record_stride`` when requested.
    """
    _check_cfl(medium, config.dt)
    grid = medium.grid
    dt, n_steps = config.dt, config.n_steps
    nodes = array.node_indices(grid)
    rows = np.array([ij[0] for ij in nodes])
    cols = np.array([ij[1] for ij in nodes])
    src_amp = 1.0 / grid.h**2
    sig = np.zeros((array.m, n_steps))
    ncopy = min(n_steps, emissions.shape[1])
    sig[:, :ncopy] = emissions[:, :ncopy]

    coef_in = (dt**2) * medium.speed[1:-1, 1:-1] ** 2 / grid.h**2
    dt2 = dt**2
    p_prev = np.zeros(grid.shape)
    p_cur = np.zeros(grid.shape)
    traces = np.zeros((array.m, n_steps))
    frames = []
    frame_steps = []

    def _record(k, p):
        traces[:, k] = p[rows, cols]
        if config.record_full_field and k % config.record_stride == 0:
            frames.append(p.copy())
            frame_steps.append(k)

    _record(0, p_cur)
    if n_steps == 1:
        return _finish(traces, frames, frame_steps, None)
    p_next = np.zeros(grid.shape)
    p_next[rows, cols] = 0.5 * dt2 * sig[:, 0] * src_amp
    p_prev, p_cur = p_cur, p_next
    _record(1, p_cur)
    lap = np.empty((grid.nx - 2, grid.ny - 2))
    for k in range(1, n_steps - 1):
        np.add(p_cur[2:, 1:-1], p_cur[:-2, 1:-1], out=lap)
        lap += p_cur[1:-1, 2:]
        lap += p_cur[1:-1, :-2]
        lap -= 4.0 * p_cur[1:-1, 1:-1]
        new = p_prev
        new[1:-1, 1:-1] *= -1.0
        new[1:-1, 1:-1] += 2.0 * p_cur[1:-1, 1:-1]
        new[1:-1, 1:-1] += coef_in * lap
        new[rows, cols] += dt2 * sig[:, k] * src_amp
        p_prev, p_cur = p_cur, new
        _record(k + 1, p_cur)
    if not np.all(np.isfinite(traces)):
        raise InstabilityDetected("non-finite trace values")
    return _finish(traces, frames, frame_steps, None)


def solve_damped_noise(
    medium: Medium,
    array: ArrayGeometry,
    t_a: float,
    noise_blocks,
    config: SimulationConfig,
) -> np.ndarray:
    """Damped wave equation driven by a streamed volumetric source.

    ``noise_blocks`` iterates over (block_len, nx, ny) source arrays
    covering the fine steps in order; the stream may end early, after
    which the field rings down unforced. Returns traces (m, n_steps).
    """
    if t_a <= 0:
        raise ValueError("attenuation time must be positive")
    _check_cfl(medium, config.dt)
    grid = medium.grid
    dt, n_steps = config.dt, config.n_steps
    nodes = array.node_indices(grid)
    rec_rows = np.array([ij[0] for ij in nodes])
    rec_cols = np.array([ij[1] for ij in nodes])

    a = dt / t_a
    denom = 1.0 + a
    coef = (dt**2) * medium.speed**2 / grid.h**2
    coef_in = coef[1:-1, 1:-1]
    dt2 = dt**2

    blocks = iter(noise_blocks)
    cur_block = None
    cur_off = 0

    def _source(k):
        nonlocal cur_block, cur_off
        while True:
            if cur_block is not None and k - cur_off < len(cur_block):
                return cur_block[k - cur_off]
            try:
                nxt = next(blocks)
            except StopIteration:
                return None
            cur_off = cur_off + (len(cur_block) if cur_block is not None else 0)
            cur_block = nxt

    p_prev = np.zeros(grid.shape)
    p_cur = np.zeros(grid.shape)
    traces = np.zeros((array.m, n_steps))
    traces[:, 0] = 0.0
    if n_steps == 1:
        return traces

    s0 = _source(0)
    p_next = np.zeros(grid.shape)
    if s0 is not None:
        p_next[1:-1, 1:-1] = 0.5 * dt2 * s0[1:-1, 1:-1]
    p_prev, p_cur = p_cur, p_next
    traces[:, 1] = p_cur[rec_rows, rec_cols]

    lap = np.empty((grid.nx - 2, grid.ny - 2))
    for k in range(1, n_steps - 1):
        np.add(p_cur[2:, 1:-1], p_cur[:-2, 1:-1], out=lap)
        lap += p_cur[1:-1, 2:]
        lap += p_cur[1:-1, :-2]
        lap -= 4.0 * p_cur[1:-1, 1:-1]
        rhs = (2.0 - a * a) * p_cur[1:-1, 1:-1] + coef_in * lap
        rhs -= (1.0 - a) * p_prev[1:-1, 1:-1]
        sk = _source(k)
        if sk is not None:
            rhs += dt2 * sk[1:-1, 1:-1]
        new = p_prev
        new[1:-1, 1:-1] = rhs / denom
        p_prev, p_cur = p_cur, new
        traces[:, k + 1] = p_cur[rec_rows, rec_cols]
        if (k + 1) % _NAN_CHECK_STRIDE == 0 and not np.all(
            np.isfinite(traces[:, k + 1])
        ):
            raise InstabilityDetected(f"non-finite field at step {k + 1}")
    if not np.all(np.isfinite(traces)):
        raise InstabilityDetected("non-finite trace values")
    return traces
