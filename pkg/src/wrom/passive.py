"""Passive acquisition: noise-driven damped waves and cross correlations.

Ambient sources are zero-mean stationary Gaussian processes, independent
per grid node inside a support mask, with power spectral density
Fhat = |fhat|^2 matching the probing pulse's autocorrelation. Weak
attenuation 1/Ta regularizes the cavity. The empirical cross correlation
of the receiver traces converges (in T) to a statistical correlation
C1 whose second lag derivative recovers the active-array data series:

    (1/Ta) d^2/dtau^2 C1  ->  -D(tau)/4    as Ta -> infinity.

A dense modal path evaluates C1 and its lag derivatives in closed form
per eigenmode (exact at finite Ta), providing the oracle for both the
limit above and the Monte Carlo convergence of the empirical estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .dataseries import DataSeries, subsampling_factor
from .errors import InsufficientLength
from .fdtd import SimulationConfig, solve_damped_noise
from .geometry import ArrayGeometry, Grid2D, Medium
from .oracle import DenseOperator
from .signals import SignalSpec, Waveform, fft_second_derivative, _synthesize_from_spectrum


@dataclass(frozen=True)
class NoiseModel:
    """Spatial support, spectrum, attenuation, and averaging window."""

    support: np.ndarray  # boolean node mask (nx, ny)
    spec: SignalSpec  # Fhat = spec.power_spectrum
    t_a: float  # attenuation time, s
    t_average: float  # correlation averaging duration, s
    seed: int = 0

    def __post_init__(self):
        if self.t_a <= 0 or self.t_average <= 0:
            raise ValueError("t_a and t_average must be positive")


def noise_coloring_kernel(spec: SignalSpec) -> Waveform:
    """Filter kernel with transfer |fhat|: white noise -> spectrum Fhat."""
    vals = _synthesize_from_spectrum(spec.spectrum, spec.dt, spec.half_width)
    k = (len(vals) - 1) // 2
    return Waveform(vals, spec.dt, k)


def synthesize_noise(
    model: NoiseModel,
    grid: Grid2D,
    dt: float,
    n_steps: int,
    block_len: int = 4096,
):
    """Yield (block_len, nx, ny) source blocks with covariance F(t1-t2)/h^2.

    Per active node, an independent stationary sequence is produced by
    coloring white Gaussian noise through |fhat| (overlap-add across
    blocks); the 1/h amplitude makes the discrete spatial covariance
    converge to the Dirac delta in 2D.
    """
    kernel = noise_coloring_kernel(model.spec)
    g = kernel.values * dt
    rng = np.random.default_rng(model.seed)
    active = np.flatnonzero(model.support.reshape(-1))
    n_active = len(active)
    amp = 1.0 / (grid.h * np.sqrt(dt))
    carry = np.zeros((len(g) - 1, n_active))
    emitted = 0
    while emitted < n_steps:
        bl = min(block_len, n_steps - emitted)
        out = np.zeros((bl, grid.nx * grid.ny))
        if n_active:
            white = rng.standard_normal((bl, n_active)) * amp
            colored = fftconvolve(white, g[:, None], mode="full", axes=0)
            colored[: len(carry)] += carry
            carry = colored[bl:]
            out[:, active] = colored[:bl]
        yield out.reshape(bl, grid.nx, grid.ny)
        emitted += bl


def passive_traces(
    medium: Medium,
    array: ArrayGeometry,
    model: NoiseModel,
    dt: float,
    n_steps: int,
    block_len: int = 4096,
) -> np.ndarray:
    """Damped solve driven by the synthesized noise; returns (m, n_steps)."""
    blocks = synthesize_noise(model, medium.grid, dt, n_steps, block_len)
    return solve_damped_noise(
        medium, array, model.t_a, blocks, SimulationConfig(dt, n_steps)
    )


def empirical_cross_correlation(
    traces: np.ndarray, dt: float, t_average: float, lag_max: float
) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid correlation C_T(lag, r, r') for |lag| <= lag_max.

    Returns (lags, corr) with corr shape (2L+1, m, m); negative lags are
    filled by the exact index identity C(-lag, r, r') = C(lag, r', r).
    """
    m, n = traces.shape
    kt = int(round(t_average / dt))
    lg = int(round(lag_max / dt))
    if n < kt + lg + 1:
        raise InsufficientLength(
            f"record has {n} samples, need {kt + lg + 1} for T and lag_max"
        )
    t_eff = kt * dt
    corr_pos = np.empty((lg + 1, m, m))
    head = traces[:, : kt + 1]
    for l in range(lg + 1):
        seg = traces[:, l : kt + 1 + l]
        full = head @ seg.T * dt
        edge = 0.5 * dt * (
            np.outer(traces[:, 0], traces[:, l])
            + np.outer(traces[:, kt], traces[:, kt + l])
        )
        corr_pos[l] = (full - edge) / t_eff
    corr = np.empty((2 * lg + 1, m, m))
    corr[lg:] = corr_pos
    for l in range(1, lg + 1):
        corr[lg - l] = corr_pos[l].T
    lags = dt * np.arange(-lg, lg + 1)
    return lags, corr


def passive_data_series(
    corr: np.ndarray,
    t_a: float,
    dt: float,
    tau: float,
    n: int,
    spec: SignalSpec,
    scale: float = 1.0,
) -> DataSeries:
    """Recover the data series from symmetrized cross correlations.

    corr has a symmetric lag axis (2L+1, m, m). Correlations are averaged
    over lag sign and receiver transposition before differentiation (the
    statistical object is even), then D = -(4/Ta) d^2 C / d tau^2 is
    sub-sampled onto the coarse grid; a second pass of the same derivative
    machinery provides the Dddot series.
    """
    lg = (corr.shape[0] - 1) // 2
    c_even = 0.25 * (
        corr[lg:]
        + corr[lg::-1]
        + np.transpose(corr[lg:], (0, 2, 1))
        + np.transpose(corr[lg::-1], (0, 2, 1))
    )
    sub = subsampling_factor(tau, dt)
    if lg < sub * (2 * n - 1):
        raise InsufficientLength(
            f"lag grid has {lg} samples, need {sub * (2 * n - 1)}"
        )
    cutoff = spec.cutoff_hz()
    d_fine = -(4.0 / t_a) * fft_second_derivative(c_even, dt, cutoff)
    dd_fine = fft_second_derivative(d_fine, dt, cutoff)
    sel = sub * np.arange(2 * n)
    return DataSeries(
        d=scale * d_fine[sel],
        ddot=scale * dd_fine[sel],
        tau=tau,
        n=n,
        m=corr.shape[1],
    )


def greens_mode(theta: float, t_a: float):
    """Causal damped mode response H(t) exp(-t/Ta) sin(sqrt(theta) t)/sqrt(theta)."""
    sq = np.sqrt(theta)

    def g(t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, np.exp(-t / t_a) * np.sin(sq * t) / sq, 0.0)

    return g


def mode_correlation_kernel(theta: float, t_a: float):
    """Closed-form lag kernel k(u) of one mode's noise-driven correlation.

    k(u) = int_0^inf exp(-(2v+|u|)/Ta) s(v) s(v+|u|) dv with
    s(t) = sin(sqrt(theta) t)/sqrt(theta); the statistical correlation of
    the mode is F * k. Even in u; exact at finite Ta.
    """
    sq = np.sqrt(theta)
    a2 = 2.0 / t_a
    b = 2.0 * sq

    def k(u):
        u = np.abs(np.asarray(u, dtype=float))
        cos_u = np.cos(sq * u)
        sin_u = np.sin(sq * u)
        lead = 0.5 * t_a * cos_u
        corr = (a2 * cos_u - b * sin_u) / (a2**2 + b**2)
        return np.exp(-u / t_a) / (2.0 * theta) * (lead - corr)

    return k


def _spectral_moment_samples(spec: SignalSpec, t: np.ndarray, power: int) -> np.ndarray:
    """(1/2pi) int omega^power Fhat(omega) cos/sin(omega t) d omega.

    Even powers pair with cosine (even functions: F, F''), odd with sine
    scaled by -1 (odd: F'). Quadrature on a fine omega grid; Fhat decays
    like a Gaussian so the truncation at omega0 + 12B is far below
    round-off.
    """
    w_max = spec.omega0 + 12 * spec.bandwidth
    w = np.linspace(0.0, w_max, 6001)
    fh = spec.power_spectrum(w) * w**power
    phase = np.outer(t, w)
    osc = np.cos(phase) if power % 2 == 0 else -np.sin(phase)
    integral = np.trapezoid(fh[None, :] * osc, w, axis=1)
    return integral / np.pi  # half-line doubled: even integrand in omega


@dataclass(frozen=True)
class ModalCorrelation:
    """Statistical correlation of the noise-driven cavity and lag derivatives."""

    lags: np.ndarray  # (2L+1,)
    c1: np.ndarray  # (2L+1, m, m)
    dc1: np.ndarray
    d2c1: np.ndarray


def modal_statistical_correlation(
    op: DenseOperator,
    array: ArrayGeometry,
    spec: SignalSpec,
    t_a: float,
    dt_lag: float,
    lag_max: float,
    mode_cut: float = 1e-14,
) -> ModalCorrelation:
    """Mode-sum evaluation of C1(tau, r, r') and its lag derivatives.

    Each mode contributes y_j(r) y_j(r') (F * k_j)(tau) with the exact
    kernel above; F and its derivatives are evaluated spectrally so the
    only approximation is the lag-grid convolution quadrature and the
    omission of far-out-of-band modes.
    """
    lg = int(round(lag_max / dt_lag))
    kf = int(np.ceil(2 * spec.half_width / dt_lag))
    lags = dt_lag * np.arange(-lg, lg + 1)
    t_f = dt_lag * np.arange(-kf, kf + 1)
    f0 = _spectral_moment_samples(spec, t_f, 0)
    f1 = _spectral_moment_samples(spec, t_f, 1)
    f2 = -_spectral_moment_samples(spec, t_f, 2)

    fhat_modes = spec.power_spectrum(np.sqrt(op.theta))
    keep = np.flatnonzero(fhat_modes >= mode_cut * fhat_modes.max())
    sens = op.sensor_indices(array)
    # continuum-normalized eigenfunction values at the sensors
    y_sens = op.eigvecs[sens][:, keep] / op.h

    u = dt_lag * np.arange(-(lg + kf), lg + kf + 1)
    q0 = np.empty((len(keep), 2 * lg + 1))
    q1 = np.empty_like(q0)
    q2 = np.empty_like(q0)
    for idx, j in enumerate(keep):
        k_u = mode_correlation_kernel(op.theta[j], t_a)(u)
        for out, f_samp in ((q0, f0), (q1, f1), (q2, f2)):
            conv = np.convolve(k_u, f_samp) * dt_lag
            # full conv index i <-> lag (i - (lg + 2 kf)) * dt_lag
            out[idx] = conv[2 * kf : 2 * kf + 2 * lg + 1]
    c1 = np.einsum("rk,sk,kl->lrs", y_sens, y_sens, q0)
    dc1 = np.einsum("rk,sk,kl->lrs", y_sens, y_sens, q1)
    d2c1 = np.einsum("rk,sk,kl->lrs", y_sens, y_sens, q2)
    return ModalCorrelation(lags=lags, c1=c1, dc1=dc1, d2c1=d2c1)


def monte_carlo_convergence(
    medium: Medium,
    array: ArrayGeometry,
    model: NoiseModel,
    t_list,
    lag_max: float,
    reference: ModalCorrelation,
    block_len: int = 4096,
) -> np.ndarray:
    """Empirical-vs-statistical correlation error for each averaging T.

    Runs one noise realization long enough for max(T), then evaluates
    prefix correlations. Returns the Frobenius error over all lags and
    receiver pairs, normalized by the reference norm.
    """
    dt = model.spec.dt
    n_steps = int(round((max(t_list) + lag_max) / dt)) + 2
    traces = passive_traces(medium, array, model, dt, n_steps, block_len)
    ref_norm = np.linalg.norm(reference.c1)
    errors = []
    for t in t_list:
        lags, corr = empirical_cross_correlation(traces, dt, t, lag_max)
        if len(lags) != len(reference.lags):
            raise ValueError("reference lag grid does not match empirical grid")
        errors.append(np.linalg.norm(corr - reference.c1) / ref_norm)
    return np.array(errors)
