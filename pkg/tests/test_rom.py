import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wrom.dataseries import DataSeries, restrict_series
from wrom.errors import IndefinitePivot
from wrom.rom import (
    BlockMatrix,
    assemble_mass,
    assemble_stiffness_prop,
    assemble_stiffness_wave,
    block_cholesky,
    block_lower_solve,
    block_upper_solve,
    build_rom,
    rom_time_step,
    spectral_truncate,
    verify_data_fit,
)

from conftest import multimode_scalar_series


def scalar_series(values, ddot=None, tau=1.0):
    n = len(values) // 2
    d = np.asarray(values, dtype=float).reshape(-1, 1, 1)
    dd = (
        np.zeros_like(d)
        if ddot is None
        else np.asarray(ddot, dtype=float).reshape(-1, 1, 1)
    )
    return DataSeries(d=d, ddot=dd, tau=tau, n=n, m=1)


def test_mass_blocks_match_series():
    series = scalar_series([1.0, 0.5, 0.2, 0.1])
    mass = assemble_mass(series)
    assert mass.block(0, 0)[0, 0] == 1.0
    assert mass.block(0, 1)[0, 0] == 0.5
    assert mass.block(1, 1)[0, 0] == pytest.approx(0.6)  # (0.2 + 1.0)/2
    assert np.allclose(mass.a, mass.a.T)


def test_mass_first_block_row_is_data():
    rng = np.random.default_rng(0)
    n, m = 4, 3
    d = rng.standard_normal((2 * n, m, m))
    d = 0.5 * (d + np.transpose(d, (0, 2, 1)))
    series = DataSeries(d=d, ddot=np.zeros_like(d), tau=0.1, n=n, m=m)
    mass = assemble_mass(series)
    for j in range(n):
        assert np.array_equal(mass.block(0, j), d[j])


def test_stiffness_single_block_even_extension():
    # n = 1: the b - 1 = -1 index folds to +1
    series = scalar_series([2.0, 0.7])
    stiff = assemble_stiffness_prop(series)
    assert stiff.a[0, 0] == pytest.approx(0.7)


def test_stiffness_scalar_oscillator_identity():
    """Pure-cosine data: S = cos(theta) M exactly (trig product-to-sum)."""
    theta = 0.73
    n = 5
    d = [np.cos(j * theta) for j in range(2 * n)]
    series = scalar_series(d)
    mass = assemble_mass(series)
    stiff = assemble_stiffness_prop(series)
    assert np.allclose(stiff.a, np.cos(theta) * mass.a, atol=1e-12)


def test_stiffness_wave_blocks():
    rng = np.random.default_rng(1)
    n, m = 3, 2
    dd = rng.standard_normal((2 * n, m, m))
    dd = 0.5 * (dd + np.transpose(dd, (0, 2, 1)))
    series = DataSeries(d=np.zeros_like(dd), ddot=dd, tau=0.1, n=n, m=m)
    sw = assemble_stiffness_wave(series)
    assert np.allclose(sw.block(0, 0), -dd[0])
    assert np.allclose(sw.block(1, 2), -0.5 * (dd[3] + dd[1]))


def test_stiffness_wave_scalar_oscillator():
    """Analytic second derivative gives St = theta * M for one frequency."""
    theta = 2.1
    tau = 0.4
    n = 4
    alpha = tau * np.sqrt(theta)
    d = [np.cos(j * alpha) for j in range(2 * n)]
    dd = [-theta * np.cos(j * alpha) for j in range(2 * n)]
    series = scalar_series(d, dd, tau=tau)
    mass = assemble_mass(series)
    sw = assemble_stiffness_wave(series)
    assert np.allclose(sw.a, theta * mass.a, atol=1e-6)


def test_zero_series_assemblies():
    series = scalar_series([0.0] * 6)
    assert np.all(assemble_mass(series).a == 0)
    assert np.all(assemble_stiffness_prop(series).a == 0)
    assert np.all(assemble_stiffness_wave(series).a == 0)


def test_block_cholesky_identity():
    m, n = 3, 4
    mass = BlockMatrix(np.eye(n * m), m, n)
    r = block_cholesky(mass)
    assert np.allclose(r, np.eye(n * m), atol=1e-14)


def test_block_cholesky_scalar_hand_case():
    mass = BlockMatrix(np.array([[4.0, 2.0], [2.0, 2.0]]), 1, 2)
    r = block_cholesky(mass)
    assert np.allclose(r, [[2.0, 1.0], [0.0, 1.0]], atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=3), st.integers(min_value=1, max_value=4),
       st.integers(min_value=0, max_value=2**31 - 1))
def test_block_cholesky_reconstructs_random_spd(m, n, seed):
    rng = np.random.default_rng(seed)
    nm = n * m
    a = rng.standard_normal((nm, nm + 2))
    spd = a @ a.T + 0.1 * np.eye(nm)
    mass = BlockMatrix(spd, m, n)
    r = block_cholesky(mass)
    assert np.linalg.norm(r.T @ r - spd) <= 1e-12 * np.linalg.norm(spd)
    # block upper triangular: zero blocks below the diagonal
    for i in range(n):
        for j in range(i):
            assert np.all(r[i * m : (i + 1) * m, j * m : (j + 1) * m] == 0.0)


def test_block_cholesky_indefinite_rejected():
    mass = BlockMatrix(np.diag([1.0, -1.0]), 1, 2)
    with pytest.raises(IndefinitePivot):
        block_cholesky(mass)


def test_spectral_truncate_noop_when_clean():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((6, 8))
    spd = a @ a.T + np.eye(6)
    mass = BlockMatrix(spd, 2, 3)
    out, rank = spectral_truncate(mass, 1e-8)
    assert rank == 6
    assert out is mass


def test_spectral_truncate_floors_and_bounds_condition():
    v = np.linalg.qr(np.random.default_rng(3).standard_normal((6, 6)))[0]
    w = np.array([1e-14, 1e-6, 1e-3, 0.1, 0.5, 1.0])
    mass = BlockMatrix(v @ np.diag(w) @ v.T, 2, 3)
    tol = 1e-4
    out, rank = spectral_truncate(mass, tol)
    assert rank == 4  # eigenvalues >= 1e-4 * lambda_max survive
    eig = np.linalg.eigvalsh(out.a)
    assert eig.min() >= tol * eig.max() * (1 - 1e-10)
    assert np.linalg.cond(out.a) <= 1 / tol * (1 + 1e-6)
    r = block_cholesky(out, tol)
    assert np.linalg.norm(r.T @ r - out.a) <= 1e-10 * np.linalg.norm(out.a)


def test_block_solves():
    rng = np.random.default_rng(4)
    m, n = 2, 3
    r = np.triu(rng.standard_normal((n * m, n * m))) + 3 * np.eye(n * m)
    # make it block (not element) triangular: fill diagonal blocks fully
    for i in range(n):
        sl = slice(i * m, (i + 1) * m)
        r[sl, sl] = rng.standard_normal((m, m)) + 3 * np.eye(m)
    b = rng.standard_normal((n * m, 4))
    x = block_upper_solve(r, b, m)
    assert np.allclose(r @ x, b, atol=1e-10)
    xl = block_lower_solve(r.T, b, m)
    assert np.allclose(r.T @ xl, b, atol=1e-10)


def test_single_frequency_rom_closed_form():
    """One block, any m: P_rom = cos(alpha) I and A_rom = theta I."""
    theta = 3.7
    tau = 0.21
    alpha = tau * np.sqrt(theta)
    rng = np.random.default_rng(5)
    for m in (1, 3):
        g = rng.standard_normal((m, m + 1))
        c = g @ g.T + 0.2 * np.eye(m)  # SPD cross-sensor amplitude
        d = np.stack([np.cos(j * alpha) * c for j in range(2)])
        dd = np.stack([-theta * np.cos(j * alpha) * c for j in range(2)])
        series = DataSeries(d=d, ddot=dd, tau=tau, n=1, m=m)
        rom = build_rom(series)
        assert np.allclose(rom.p_rom, np.cos(alpha) * np.eye(m), atol=1e-6)
        assert np.allclose(rom.a_rom, theta * np.eye(m), atol=1e-6 * theta)


def test_multimode_scalar_rom_structure():
    """Consistent modal data: tridiagonal propagator, SPD wave operator."""
    tau = 0.3
    n = 5
    thetas = [1.0, 4.1, 9.3, 17.0, 26.5, 40.0]
    weights = [1.0, 0.8, 0.6, 0.4, 0.3, 0.2]
    series = multimode_scalar_series(thetas, weights, tau, n)
    rom = build_rom(series)
    # mass factor reproduces the mass matrix
    mass = assemble_mass(series)
    assert np.linalg.norm(rom.r.T @ rom.r - mass.a) <= 1e-8 * np.linalg.norm(mass.a)
    # propagator block tridiagonal (m = 1: plain tridiagonal)
    p = rom.p_rom
    off = np.triu(np.abs(p), 2)
    assert off.max() <= 1e-6 * np.linalg.norm(p)
    # wave operator SPD
    assert np.linalg.eigvalsh(rom.a_rom).min() > 0
    # propagator spectrum within [-1, 1]
    eig = np.linalg.eigvalsh(p)
    assert eig.min() >= -1 - 1e-6 and eig.max() <= 1 + 1e-6


def test_rom_snapshots_and_recursion():
    tau = 0.3
    n = 5
    series = multimode_scalar_series(
        [1.0, 3.7, 8.1, 15.0, 24.0, 33.0], [1, 0.7, 0.5, 0.4, 0.3, 0.2], tau, n
    )
    rom = build_rom(series)
    snaps = rom_time_step(rom, 2 * n - 1)
    # u_0 lives in the first block only
    assert np.abs(snaps[0][1:]).max() == 0.0
    assert np.abs(snaps[0][0]).max() > 0
    # the recursion is consistent with the factor columns inside the span
    for j in range(1, n - 1):
        lhs = 2 * rom.p_rom @ rom.snapshot(j) - rom.snapshot(j - 1)
        assert np.linalg.norm(lhs - rom.snapshot(j + 1)) <= 1e-8 * np.linalg.norm(rom.r)
    # first-block data fit is the mass identity
    for j in range(n):
        fit = snaps[0].T @ snaps[j]
        assert np.allclose(fit, series.d[j], atol=1e-10 * np.abs(series.d[0]))


def test_chebyshev_data_fit_through_2n_minus_1():
    """ROM snapshots reproduce the data out to twice the horizon."""
    tau = 0.25
    n = 6
    series = multimode_scalar_series(
        [1.0, 2.9, 6.5, 12.0, 20.0, 30.0, 41.0], [1, 0.9, 0.7, 0.5, 0.4, 0.3, 0.2],
        tau, n,
    )
    rom = build_rom(series)
    snaps = rom_time_step(rom, 2 * n - 1)
    scale = np.abs(series.d).max()
    for j in range(2 * n):
        fit = snaps[0].T @ snaps[j]
        assert np.abs(fit - series.d[j]).max() <= 1e-7 * scale


def test_data_fit_families(tiny_oracle_series):
    rom = build_rom(tiny_oracle_series)
    rep = verify_data_fit(rom, tiny_oracle_series)
    assert rep.max_family1 <= 1e-8
    assert rep.max_family2 <= 1e-8


def test_data_fit_family1_survives_truncation():
    tau = 0.3
    n = 5
    # weights spanning 12 orders force flooring at 1e-6
    series = multimode_scalar_series(
        [1.0, 3.7, 8.1, 15.0, 24.0], [1, 1e-4, 1e-8, 1e-12, 1e-14], tau, n
    )
    rom = build_rom(series, trunc_tol=1e-6)
    assert rom.truncation_rank < n
    rep = verify_data_fit(rom, series)
    # family 1 only needs R^T R = truncated mass: its error tracks the
    # flooring level, far above round-off but controlled by trunc_tol
    assert rep.max_family1 <= 10e-6
    assert np.isfinite(rep.max_family2)


def test_restriction_nesting(tiny_oracle_series):
    full = assemble_mass(tiny_oracle_series)
    for j_window in (1, 2, 3):
        sub = assemble_mass(restrict_series(tiny_oracle_series, j_window))
        k = j_window * tiny_oracle_series.m
        assert np.array_equal(sub.a, full.a[:k, :k])


def test_wave_operator_offdiagonal_decay(tiny_oracle_series):
    """Entries decay away from the diagonal: far blocks below near blocks."""
    rom = build_rom(tiny_oracle_series)
    n, m = rom.n, rom.m
    norms = {}
    for k in range(n):
        vals = [
            np.linalg.norm(rom.a_rom[i * m : (i + 1) * m, (i + k) * m : (i + k + 1) * m])
            for i in range(n - k)
        ]
        norms[k] = np.mean(vals)
    assert norms[n - 1] < norms[1]


def test_verify_data_fit_on_fdtd_series(tiny_series):
    rom = build_rom(tiny_series)
    rep = verify_data_fit(rom, tiny_series)
    assert rep.max_family1 <= 1e-8
    assert rep.max_family2 <= 1e-8
