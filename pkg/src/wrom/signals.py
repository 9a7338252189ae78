"""Probing-signal synthesis and 1D time-axis processing.

The probing pulse is the Gaussian-modulated cosine

    f(t) = cos(w0 t) * exp(-B^2 t^2 / 2),

whose Fourier transform (convention fhat(w) = int f(t) exp(i w t) dt) is a
nonnegative pair of Gaussian bumps centered at +/- w0. All operations here
act on evenly sampled waveforms; the key transform maps recorded traces
M(t) to the symmetrized data series

    D(t) = Mf(t) + Mf(-t),    Mf(t) = -f'(-t) * M(t)   (time convolution),

whose samples are Gram inner products of band-limited interior wave
snapshots. Second time derivatives are taken in the Fourier domain on the
even extension of the sampled series, behind a sharp low-pass cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import InsufficientRecordLength, UnderSampled

# Envelope level at which sampled pulses are truncated.
TRUNCATION_LEVEL = 1e-12

# Samples per central period required of the fine grid.
MIN_SAMPLES_PER_PERIOD = 10

# Support widening of the half-power signal relative to the pulse: its
# square-root spectrum has heavier time tails, reaching the truncation
# level only at about three pulse half-widths.
HALF_POWER_WIDTH_FACTOR = 3.0


@dataclass(frozen=True)
class SignalSpec:
    """Pulse parameters: central angular frequency, bandwidth, sampling."""

    omega0: float  # rad/s
    bandwidth: float  # rad/s
    dt: float  # s
    half_width: float  # truncation time, s

    def __post_init__(self):
        if self.omega0 <= 0 or self.bandwidth <= 0:
            raise ValueError("omega0 and bandwidth must be positive")
        if self.dt <= 0 or self.half_width <= 0:
            raise ValueError("dt and half_width must be positive")
        if self.dt > 2 * np.pi / (MIN_SAMPLES_PER_PERIOD * self.omega0):
            raise UnderSampled(
                f"dt={self.dt:g} gives fewer than {MIN_SAMPLES_PER_PERIOD} "
                "samples per central period"
            )

    @classmethod
    def from_hz(cls, f0_hz: float, bandwidth_hz: float, dt: float) -> "SignalSpec":
        """Spec with half-width set by the envelope truncation level."""
        b = 2 * np.pi * bandwidth_hz
        half = np.sqrt(-2.0 * np.log(TRUNCATION_LEVEL)) / b
        return cls(2 * np.pi * f0_hz, b, dt, half)

    @property
    def half_width_samples(self) -> int:
        return int(np.ceil(self.half_width / self.dt))

    def pulse(self, t):
        """f(t), peak value 1 at t = 0; even."""
        t = np.asarray(t, dtype=float)
        return np.cos(self.omega0 * t) * np.exp(-0.5 * self.bandwidth**2 * t**2)

    def pulse_derivative(self, t):
        """Analytic f'(t)."""
        t = np.asarray(t, dtype=float)
        env = np.exp(-0.5 * self.bandwidth**2 * t**2)
        return (
            -self.omega0 * np.sin(self.omega0 * t)
            - self.bandwidth**2 * t * np.cos(self.omega0 * t)
        ) * env

    def spectrum(self, omega):
        """fhat(omega): two Gaussian bumps, real and nonnegative."""
        omega = np.asarray(omega, dtype=float)
        s = np.sqrt(2 * np.pi) / (2 * self.bandwidth)
        b2 = 2 * self.bandwidth**2
        return s * (
            np.exp(-((omega - self.omega0) ** 2) / b2)
            + np.exp(-((omega + self.omega0) ** 2) / b2)
        )

    def power_spectrum(self, omega):
        """Fhat(omega) = |fhat(omega)|^2, the autocorrelation spectrum."""
        return self.spectrum(omega) ** 2

    def autocorrelation_exact(self, t):
        """Closed-form F(t) = (f(-.) * f)(t)."""
        t = np.asarray(t, dtype=float)
        b, w0 = self.bandwidth, self.omega0
        return (
            np.sqrt(np.pi)
            / (2 * b)
            * np.exp(-(b**2) * t**2 / 4)
            * (np.cos(w0 * t) + np.exp(-(w0**2) / b**2))
        )

    def cutoff_hz(self) -> float:
        """Low-pass cutoff for Fourier-domain differentiation."""
        return (self.omega0 + 4 * self.bandwidth) / (2 * np.pi)


@dataclass(frozen=True)
class Waveform:
    """Evenly sampled waveform; sample k sits at t = (k - i0) * dt."""

    values: np.ndarray
    dt: float
    i0: int  # index of t = 0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def times(self) -> np.ndarray:
        return (np.arange(len(self.values)) - self.i0) * self.dt


def sample_pulse(spec: SignalSpec) -> Waveform:
    """f on its symmetric truncated support; f(0) = 1."""
    k = spec.half_width_samples
    t = np.arange(-k, k + 1) * spec.dt
    return Waveform(spec.pulse(t), spec.dt, k)


def even_map_kernel(spec: SignalSpec) -> Waveform:
    """Convolution kernel g(t) = -f'(-t) for the trace-to-data transform."""
    k = spec.half_width_samples
    t = np.arange(-k, k + 1) * spec.dt
    return Waveform(-spec.pulse_derivative(-t), spec.dt, k)


def autocorrelate(signal: Waveform) -> Waveform:
    """F = f(-.) * f, scaled by dt; even with a positive peak at 0."""
    v = signal.values
    acf = np.correlate(v, v, mode="full") * signal.dt
    return Waveform(acf, signal.dt, len(v) - 1)


def _synthesize_from_spectrum(target, dt: float, half_width: float) -> np.ndarray:
    """Real even samples with prescribed real even spectrum on the FFT grid.

    ``target`` maps omega -> spectrum values. Returns samples on
    [-half_width, half_width]; the FFT length is padded well past the
    support so periodization error stays below the truncation level.
    """
    k = int(np.ceil(half_width / dt))
    nfft = 1 << int(np.ceil(np.log2(max(8 * k, 64))))
    omega = 2 * np.pi * np.fft.fftfreq(nfft, dt)
    shat = target(omega)
    # fft (not ifft) realizes (1/(L dt)) * sum shat exp(-i w t) on the grid.
    s = np.fft.fft(shat).real / (nfft * dt)
    idx = np.arange(-k, k + 1) % nfft
    return s[idx]


def _differentiate_spectrum(target, dt: float, half_width: float) -> np.ndarray:
    """Samples of the time derivative of the signal with the given spectrum."""
    k = int(np.ceil(half_width / dt))
    nfft = 1 << int(np.ceil(np.log2(max(8 * k, 64))))
    omega = 2 * np.pi * np.fft.fftfreq(nfft, dt)
    # d/dt maps the spectrum to -i w * shat under fhat(w) = int f exp(iwt) dt.
    shat = -1j * omega * target(omega)
    s = np.fft.fft(shat).real / (nfft * dt)
    idx = np.arange(-k, k + 1) % nfft
    return s[idx]


def half_power_signal(spec: SignalSpec) -> Waveform:
    """Zero-phase signal h with |hhat| = |fhat|^(1/2).

    Autocorrelating h reproduces |fhat| on the FFT grid, so probing a
    medium with h and applying the even-data map yields unfiltered wave
    snapshots. The square-root spectrum decays slower in time than the
    pulse itself, hence the wider truncated support.
    """
    half = HALF_POWER_WIDTH_FACTOR * spec.half_width
    vals = _synthesize_from_spectrum(
        lambda w: np.sqrt(spec.spectrum(w)), spec.dt, half
    )
    k = (len(vals) - 1) // 2
    return Waveform(vals, spec.dt, k)


def half_power_kernel(spec: SignalSpec) -> Waveform:
    """Even-data map kernel -h'(-t) for the half-power signal."""
    half = HALF_POWER_WIDTH_FACTOR * spec.half_width
    dvals = _differentiate_spectrum(
        lambda w: np.sqrt(spec.spectrum(w)), spec.dt, half
    )
    k = (len(dvals) - 1) // 2
    return Waveform(-dvals[::-1], spec.dt, k)


def even_map_weights(
    kernel: Waveform, t0_index: int, n_steps: int, sample_indices
) -> np.ndarray:
    """Row weights realizing the even-data map at selected output samples.

    Row q of the result W satisfies, for a record p[k] starting at fine
    index -t0_index relative to t = 0,

        sum_k W[q, k] p[k] = Mf(t_q) + Mf(-t_q),  t_q = sample_indices[q]*dt.

    Used for streaming accumulation of full-field snapshots during time
    stepping, which avoids storing the fine-time field movie.
    """
    g = kernel.values * kernel.dt
    kcen = kernel.i0
    w = np.zeros((len(sample_indices), n_steps))
    for q, l in enumerate(sample_indices):
        for sgn in (1, -1):
            # Mf(sgn*l*dt) = dt * sum_k g((t0_index + sgn*l - k) dt) p[k]
            shift = t0_index + sgn * l
            k_lo = max(0, shift - kcen)
            k_hi = min(n_steps - 1, shift + kcen)
            if k_hi >= k_lo:
                idx = (shift - np.arange(k_lo, k_hi + 1)) + kcen
                w[q, k_lo : k_hi + 1] += g[idx]
    return w


def map_to_even_data(
    traces: np.ndarray, kernel: Waveform, t0_index: int, n_keep: int
) -> np.ndarray:
    """Apply the trace-to-data transform D(t) = Mf(t) + Mf(-t) on t >= 0.

    ``traces`` has shape (m, m, n_steps) with sample k at time
    (k - t0_index) * dt; the field is identically zero before the record
    starts. Returns D sampled at l = 0 .. n_keep-1, shape (n_keep, m, m).
    The output is valid only where the kernel support lies inside the
    record, which bounds n_keep.
    """
    n_steps = traces.shape[-1]
    kcen = kernel.i0
    max_keep = n_steps - t0_index - kcen
    if n_keep > max_keep:
        raise InsufficientRecordLength(
            f"record supports {max_keep} even-data samples, requested {n_keep}"
        )
    g = kernel.values * kernel.dt
    conv = fftconvolve(traces, g[None, None, :], mode="full", axes=-1)
    nc = conv.shape[-1]
    # conv index k corresponds to absolute fine time (k - t0_index - kcen)*dt
    off = t0_index + kcen
    out = np.empty((n_keep,) + traces.shape[:2])
    for l in range(n_keep):
        pos = conv[..., off + l]
        ineg = off - l
        neg = conv[..., ineg] if 0 <= ineg < nc else 0.0
        out[l] = pos + neg
    return out


def fft_second_derivative(
    series: np.ndarray, dt: float, cutoff_hz: float
) -> np.ndarray:
    """Second time derivative of an even series via the Fourier domain.

    ``series`` holds samples at t = 0 .. N*dt (leading axis); it is
    extended evenly to t in [-N dt, N dt], transformed, multiplied by
    -omega^2 behind a sharp low-pass cutoff, and transformed back. The
    imaginary residue must be negligible and is discarded.
    """
    n1 = series.shape[0]
    # j = -N..N with the +/-N samples both present (length 2N+1)
    ext = np.concatenate([series, series[-1:0:-1]], axis=0)
    nfft = ext.shape[0]
    omega = 2 * np.pi * np.fft.fftfreq(nfft, dt)
    mult = -(omega**2) * (np.abs(omega) <= 2 * np.pi * cutoff_hz)
    shape = (nfft,) + (1,) * (series.ndim - 1)
    der = np.fft.ifft(np.fft.fft(ext, axis=0) * mult.reshape(shape), axis=0)
    scale = max(np.abs(der.real).max(), np.abs(ext).max() * np.abs(mult).max())
    if scale > 0 and np.abs(der.imag).max() > 1e-8 * scale:
        raise ValueError("unexpected imaginary residue in spectral derivative")
    return der.real[:n1]
