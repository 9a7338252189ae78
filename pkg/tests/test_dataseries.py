import numpy as np
import pytest

from wrom.dataseries import (
    build_data_series,
    restrict_series,
    subsampling_factor,
)
from wrom.errors import IndexRange, NonIntegerSubsampling, RecordTooShort
from wrom.fdtd import ResponseRecord, SimulationConfig, gather_response_matrix
from wrom.rom import assemble_mass
from wrom.signals import sample_pulse


def test_subsampling_factor():
    assert subsampling_factor(0.05, 0.05 / 40) == 40
    with pytest.raises(NonIntegerSubsampling):
        subsampling_factor(0.05, 0.0013)


def test_series_matches_oracle(tiny, tiny_series, tiny_oracle_series):
    """The trace pipeline reproduces the modal reference within 2%."""
    for j in range(2 * tiny.n):
        err = np.linalg.norm(tiny_series.d[j] - tiny_oracle_series.d[j])
        assert err <= 0.02 * np.linalg.norm(tiny_oracle_series.d[j])


def test_series_second_derivative_tracks_oracle(tiny, tiny_series, tiny_oracle_series):
    """Second derivatives agree within discretization at healthy norms."""
    scale = max(np.linalg.norm(m) for m in tiny_oracle_series.ddot)
    for j in range(2 * tiny.n):
        err = np.linalg.norm(tiny_series.ddot[j] - tiny_oracle_series.ddot[j])
        assert err <= 0.05 * scale


def test_series_symmetry_and_gram(tiny_series):
    for mat in tiny_series.d:
        assert np.array_equal(mat, mat.T)
    assert np.linalg.eigvalsh(tiny_series.d[0]).min() > 0


def test_zero_response_gives_zero_series(tiny):
    sig = sample_pulse(tiny.spec)
    n_steps = tiny.sub * (2 * tiny.n + 1) + 2 * sig.i0 + 1
    rec = ResponseRecord(
        np.zeros((2, 2, n_steps)), tiny.dt, sig.i0, sig
    )
    series = build_data_series(rec, tiny.spec, tiny.tau, tiny.n)
    assert np.all(series.d == 0.0)
    assert np.all(series.ddot == 0.0)


def test_record_too_short(tiny):
    sig = sample_pulse(tiny.spec)
    rec = ResponseRecord(np.zeros((1, 1, 3 * sig.i0)), tiny.dt, sig.i0, sig)
    with pytest.raises(RecordTooShort):
        build_data_series(rec, tiny.spec, tiny.tau, tiny.n)


def test_restrict_series_identity_and_truncation(tiny_series):
    assert restrict_series(tiny_series, tiny_series.n) is tiny_series
    one = restrict_series(tiny_series, 1)
    assert one.n == 1
    assert one.d.shape == (2, tiny_series.m, tiny_series.m)
    assert np.array_equal(one.d[0], tiny_series.d[0])
    with pytest.raises(IndexRange):
        restrict_series(tiny_series, 0)
    with pytest.raises(IndexRange):
        restrict_series(tiny_series, tiny_series.n + 1)


def test_restricted_rom_equals_rom_of_restricted(tiny_series):
    """Leading mass blocks of the full series equal the restricted ones."""
    full = assemble_mass(tiny_series)
    for j in (1, 2, 3):
        sub = assemble_mass(restrict_series(tiny_series, j))
        k = j * tiny_series.m
        assert np.array_equal(sub.a, full.a[:k, :k])


def test_mass_conditioning_vs_tau(tiny):
    """Log-only diagnostic: halving tau worsens the mass conditioning."""
    import wrom.oracle as oracle

    op = tiny.operator()
    conds = []
    for tau in (tiny.tau, tiny.tau / 2):
        series = oracle.oracle_data_series(op, tiny.array, tiny.spec, tau, tiny.n)
        mass = assemble_mass(series)
        conds.append(np.linalg.cond(mass.a))
    print(f"cond(M) at tau={tiny.tau}: {conds[0]:.3e}; at tau/2: {conds[1]:.3e}")
    assert np.isfinite(conds[0])
