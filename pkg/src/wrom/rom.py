"""Reduced-order models assembled from the coarse data series.

The mass matrix M and two stiffness matrices are built blockwise from the
data series using the product-to-sum cosine identities; with a = i + j and
b = |i - j| (even extension D_{-k} = D_k):

    M_{i,j}  = ( D_a + D_b ) / 2
    S_{i,j}  = ( D_{a+1} + D_{a-1} + D_{b+1} + D_{b-1} ) / 4
    St_{i,j} = -( Dddot_a + Dddot_b ) / 2

M is the Gram matrix of the interior snapshots, so M = R^T R with R its
block Cholesky factor (diagonal pivots via the symmetric eigenvalue square
root). The two ROMs are the Galerkin projections

    P_rom = R^{-T} S  R^{-1}   (propagator: block tridiagonal),
    A_rom = R^{-T} St R^{-1}   (wave operator: SPD, entries decay off-diagonal),

computed with block triangular solves and explicit symmetrization.
Ill-conditioned mass matrices are regularized by flooring small
eigenvalues (spectral truncation), which preserves the block dimensions
and hence the causal ordering of the basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataseries import DataSeries
from .errors import IndefinitePivot

DEFAULT_TRUNC_TOL = 1e-9


@dataclass(frozen=True)
class BlockMatrix:
    """Dense symmetric matrix addressed by m x m blocks."""

    a: np.ndarray  # (n*m, n*m)
    m: int
    n: int

    def __post_init__(self):
        nm = self.n * self.m
        if self.a.shape != (nm, nm):
            raise ValueError(f"shape {self.a.shape} != ({nm}, {nm})")

    def block(self, i: int, j: int) -> np.ndarray:
        m = self.m
        return self.a[i * m : (i + 1) * m, j * m : (j + 1) * m]


@dataclass(frozen=True)
class RomPair:
    """Block Cholesky factor of the mass matrix and the two projections."""

    r: np.ndarray  # block upper triangular, R^T R = M (truncated)
    p_rom: np.ndarray  # symmetric propagator projection
    a_rom: np.ndarray  # symmetric wave-operator projection
    truncation_rank: int
    m: int
    n: int

    @property
    def nm(self) -> int:
        return self.n * self.m

    def snapshot(self, j: int) -> np.ndarray:
        """j-th ROM snapshot R e_j for j < n (column block of R)."""
        return self.r[:, j * self.m : (j + 1) * self.m]


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def assemble_mass(series: DataSeries) -> BlockMatrix:
    n, m = series.n, series.m
    d = series.d
    a = np.empty((n * m, n * m))
    out = BlockMatrix(a, m, n)
    for i in range(n):
        for j in range(i, n):
            blk = 0.5 * (d[i + j] + d[abs(i - j)])
            a[i * m : (i + 1) * m, j * m : (j + 1) * m] = blk
            if j > i:
                a[j * m : (j + 1) * m, i * m : (i + 1) * m] = blk.T
    return out


def _even(series_arr: np.ndarray, k: int) -> np.ndarray:
    """Even extension lookup D_k with D_{-k} = D_k."""
    return series_arr[abs(k)]


def assemble_stiffness_prop(series: DataSeries) -> BlockMatrix:
    """Gram of snapshots against the one-step propagator.

    Cross indices use the even extension: with b = |i - j|, the b - 1 index
    maps to |b - 1|, which matters only on the diagonal (b = 0).
    """
    n, m = series.n, series.m
    d = series.d
    a = np.empty((n * m, n * m))
    for i in range(n):
        for j in range(i, n):
            s, b = i + j, abs(i - j)
            blk = 0.25 * (
                _even(d, s + 1) + _even(d, s - 1) + _even(d, b + 1) + _even(d, b - 1)
            )
            a[i * m : (i + 1) * m, j * m : (j + 1) * m] = blk
            if j > i:
                a[j * m : (j + 1) * m, i * m : (i + 1) * m] = blk.T
    return BlockMatrix(a, m, n)


def assemble_stiffness_wave(series: DataSeries) -> BlockMatrix:
    n, m = series.n, series.m
    dd = series.ddot
    a = np.empty((n * m, n * m))
    for i in range(n):
        for j in range(i, n):
            blk = -0.5 * (dd[i + j] + dd[abs(i - j)])
            blk = 0.5 * (blk + blk.T)
            a[i * m : (i + 1) * m, j * m : (j + 1) * m] = blk
            if j > i:
                a[j * m : (j + 1) * m, i * m : (i + 1) * m] = blk.T
    return BlockMatrix(a, m, n)


def spectral_truncate(
    mass: BlockMatrix, tol: float = DEFAULT_TRUNC_TOL
) -> tuple[BlockMatrix, int]:
    """Floor eigenvalues below tol * lambda_max, keeping dimensions.

    Flooring (rather than projecting out the weak subspace) preserves the
    block indexing, so the causal snapshot ordering and time-windowed
    restriction stay well defined. The output has cond <= 1/tol. The
    returned rank counts eigenvalues that needed no flooring.
    """
    w, v = np.linalg.eigh(_sym(mass.a))
    lam_max = w[-1]
    if lam_max <= 0:
        raise IndefinitePivot("mass matrix has no positive eigenvalue")
    floor = tol * lam_max
    rank = int(np.sum(w >= floor))
    if rank == len(w):
        return mass, rank
    w_fl = np.maximum(w, floor)
    a = _sym(v @ (w_fl[:, None] * v.T))
    return BlockMatrix(a, mass.m, mass.n), rank


def _sym_sqrt(pivot: np.ndarray, neg_floor: float) -> np.ndarray:
    """Symmetric PSD square root of a pivot block via eigendecomposition."""
    w, v = np.linalg.eigh(_sym(pivot))
    if w[0] < -neg_floor:
        raise IndefinitePivot(f"pivot eigenvalue {w[0]:g} below -{neg_floor:g}")
    return v @ (np.sqrt(np.maximum(w, 0.0))[:, None] * v.T)


def block_cholesky(mass: BlockMatrix, trunc_tol: float = DEFAULT_TRUNC_TOL) -> np.ndarray:
    """Block upper-triangular R with R^T R = M (outer-product form).

    Diagonal pivots take the unique symmetric PSD square root, which is
    insensitive to eigenvector sign or ordering conventions. Raises
    :class:`IndefinitePivot` if a pivot has an eigenvalue below
    -trunc_tol * ||M||_2.
    """
    n, m = mass.n, mass.m
    a = _sym(mass.a)
    scale = float(np.linalg.norm(a, 2))
    neg_floor = trunc_tol * scale
    r = np.zeros_like(a)
    for i in range(n):
        sl_i = slice(i * m, (i + 1) * m)
        pivot = a[sl_i, sl_i] - r[: i * m, sl_i].T @ r[: i * m, sl_i]
        rii = _sym_sqrt(pivot, neg_floor)
        r[sl_i, sl_i] = rii
        if i + 1 < n:
            sl_rest = slice((i + 1) * m, n * m)
            rhs = a[sl_i, sl_rest] - r[: i * m, sl_i].T @ r[: i * m, sl_rest]
            r[sl_i, sl_rest] = np.linalg.solve(rii, rhs)
    return r


def block_lower_solve(lower: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    """Solve L X = B by block forward substitution (L block lower tri)."""
    n = lower.shape[0] // m
    x = np.empty_like(b, dtype=float)
    for i in range(n):
        sl = slice(i * m, (i + 1) * m)
        rhs = b[sl] - lower[sl, : i * m] @ x[: i * m]
        x[sl] = np.linalg.solve(lower[sl, sl], rhs)
    return x


def block_upper_solve(upper: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    """Solve U X = B by block back substitution (U block upper tri)."""
    n = upper.shape[0] // m
    x = np.empty_like(b, dtype=float)
    for i in reversed(range(n)):
        sl = slice(i * m, (i + 1) * m)
        rhs = b[sl] - upper[sl, (i + 1) * m :] @ x[(i + 1) * m :]
        x[sl] = np.linalg.solve(upper[sl, sl], rhs)
    return x


def _project(r: np.ndarray, s: np.ndarray, m: int) -> np.ndarray:
    """R^{-T} S R^{-1} via two block triangular solves, symmetrized."""
    x = block_lower_solve(r.T, s, m)  # R^{-T} S
    y = block_lower_solve(r.T, x.T, m).T  # (R^{-T} X^T)^T = X R^{-1}
    return _sym(y)


def build_rom(series: DataSeries, trunc_tol: float = DEFAULT_TRUNC_TOL) -> RomPair:
    """Assemble, regularize, factorize, and project both ROMs."""
    mass = assemble_mass(series)
    stiff = assemble_stiffness_prop(series)
    stiff_w = assemble_stiffness_wave(series)
    mass_t, rank = spectral_truncate(mass, trunc_tol)
    r = block_cholesky(mass_t, trunc_tol)
    p_rom = _project(r, stiff.a, series.m)
    a_rom = _project(r, stiff_w.a, series.m)
    return RomPair(
        r=r, p_rom=p_rom, a_rom=a_rom, truncation_rank=rank, m=series.m, n=series.n
    )


def rom_time_step(rom: RomPair, j_max: int) -> np.ndarray:
    """ROM snapshots u_j for j = 0 .. j_max, shape (j_max+1, nm, m).

    The first n are the column blocks of R; later ones follow the
    three-term recursion u_{j+1} = 2 P_rom u_j - u_{j-1} (with u_{-1} = u_1,
    consistent with even time).
    """
    n, m, nm = rom.n, rom.m, rom.nm
    out = np.empty((j_max + 1, nm, m))
    for j in range(min(n, j_max + 1)):
        out[j] = rom.snapshot(j)
    if j_max == 0 and n >= 1:
        return out
    for j in range(n, j_max + 1):
        if j == 1:
            out[j] = rom.p_rom @ out[0]  # u_1 = P u_0 from u_{-1} = u_1
        else:
            out[j] = 2.0 * rom.p_rom @ out[j - 1] - out[j - 2]
    return out


@dataclass(frozen=True)
class DataFitReport:
    """Relative Frobenius errors of the two snapshot data-fit identities."""

    family1: np.ndarray  # |D_j - u0^T u_j| / scale, j = 0..n-1
    family2: np.ndarray  # |D_{j+n-1} - (2 u_{n-1}^T u_j - u0^T u_{n-1-j})| / scale
    max_family1: float
    max_family2: float


def verify_data_fit(rom: RomPair, series: DataSeries) -> DataFitReport:
    """Check that ROM snapshots reproduce all 2n-1 data matrices.

    Family 1: D_j = u0^T u_j for j < n, which holds whenever R^T R equals
    the (possibly truncated) mass matrix. Family 2 reaches the data beyond
    the projection horizon, D_{j+n-1} = 2 u_{n-1}^T u_j - u0^T u_{n-1-j},
    and may degrade under truncation. Both follow from expanding mass
    blocks in the data series; the second is exact only with the
    u_{n-1-j} pairing in the subtracted term.
    """
    n = rom.n
    snaps = rom_time_step(rom, n - 1)
    u0 = snaps[0]
    scale = max(np.linalg.norm(series.d[j]) for j in range(2 * n - 1))
    f1 = np.empty(n)
    f2 = np.empty(n)
    for j in range(n):
        f1[j] = np.linalg.norm(u0.T @ snaps[j] - series.d[j]) / scale
        fit2 = 2.0 * snaps[n - 1].T @ snaps[j] - u0.T @ snaps[n - 1 - j]
        f2[j] = np.linalg.norm(fit2 - series.d[j + n - 1]) / scale
    return DataFitReport(
        family1=f1, family2=f2, max_family1=float(f1.max()), max_family2=float(f2.max())
    )
