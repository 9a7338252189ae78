"""Estimated interior waves from a search medium's orthonormal basis.

For a search speed w, full-field snapshots u_j(x; w) are produced by
probing w with the half-power signal (whose autocorrelation spectrum is
|fhat|) and applying the even-data map to the similarity-transformed field
(c_ref / w) p at every node, accumulated on the fly during time stepping.
Orthonormalizing the snapshot columns through the block Cholesky factor of
their Gram matrix yields the causal basis V(x; w); combining that basis
with the Cholesky factor R of the *measured* data reproduces the measured
series for any w - the defining property of the estimated internal wave.

The module also discretizes the scattering integral identity that relates
the data residual to the slowness-contrast field through these estimates,
exposing the linear kernel used by linearized inversion steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .dataseries import DataSeries, subsampling_factor
from .errors import DegenerateSnapshots, DimensionMismatch
from .fdtd import SimulationConfig, solve_point_source
from .geometry import ArrayGeometry, Medium
from .rom import (
    BlockMatrix,
    block_cholesky,
    block_upper_solve,
    spectral_truncate,
)
from .signals import SignalSpec, even_map_weights, half_power_kernel, half_power_signal


@dataclass(frozen=True)
class SnapshotBasis:
    """Snapshot fields U, orthonormal basis V, and the factor U = V R.

    Columns are ordered source-major within time blocks; V satisfies
    h^2 V^T V = I and its block-triangular relation to U encodes causality
    (basis block j lies in the span of snapshot blocks 0..j).
    """

    medium: Medium
    u_fields: np.ndarray  # (n_nodes, n*m)
    v_fields: np.ndarray  # (n_nodes, n*m)
    r: np.ndarray  # (n*m, n*m) block upper triangular
    tau: float
    n: int
    m: int
    truncation_rank: int

    @property
    def nm(self) -> int:
        return self.n * self.m


def snapshot_fields(
    medium: Medium,
    array: ArrayGeometry,
    spec: SignalSpec,
    tau: float,
    n: int,
    n_jobs: int = 1,
) -> np.ndarray:
    """Wave snapshots u_j(x) on the full grid, shape (n_nodes, n*m)."""
    sub = subsampling_factor(tau, spec.dt)
    signal = half_power_signal(spec)
    kernel = half_power_kernel(spec)
    n_steps = (n - 1) * sub + signal.i0 + kernel.i0 + 1
    weights = even_map_weights(kernel, signal.i0, n_steps, sub * np.arange(n))
    config = SimulationConfig(spec.dt, n_steps)
    scale = (medium.c_ref / medium.speed).reshape(-1)

    def _one(s):
        res = solve_point_source(medium, array, s, signal, config, field_weights=weights)
        return res.weighted * scale[None, :]

    if n_jobs == 1:
        per_source = [_one(s) for s in range(array.m)]
    else:
        per_source = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_one)(s) for s in range(array.m)
        )
    n_nodes = medium.grid.nx * medium.grid.ny
    u = np.empty((n_nodes, n * array.m))
    for s, acc in enumerate(per_source):
        for j in range(n):
            u[:, j * array.m + s] = acc[j]
    return u


def compute_snapshot_basis(
    medium: Medium,
    array: ArrayGeometry,
    spec: SignalSpec,
    tau: float,
    n: int,
    trunc_tol: float = 1e-9,
    n_jobs: int = 1,
) -> SnapshotBasis:
    """Orthonormalize search-medium snapshots via their Gram factor.

    The Gram matrix is assembled directly from the realized fields (it is
    the search medium's mass matrix up to discretization), so V = U R^{-1}
    is orthonormal to round-off. Raises :class:`DegenerateSnapshots` when
    spectral truncation has to floor part of the spectrum.
    """
    u = snapshot_fields(medium, array, spec, tau, n, n_jobs=n_jobs)
    m = array.m
    h2 = medium.grid.h**2
    gram = h2 * (u.T @ u)
    gram = 0.5 * (gram + gram.T)
    mass_t, rank = spectral_truncate(BlockMatrix(gram, m, n), trunc_tol)
    if rank < n * m:
        raise DegenerateSnapshots(
            f"snapshot Gram rank {rank} < {n * m}; increase tau or sensor spacing"
        )
    r = block_cholesky(mass_t, trunc_tol)
    # V = U R^{-1}  <=>  (R^T V^T = U^T), R^T block lower: solve columnwise.
    v = block_upper_solve_right(u, r, m)
    return SnapshotBasis(
        medium=medium,
        u_fields=u,
        v_fields=v,
        r=r,
        tau=tau,
        n=n,
        m=m,
        truncation_rank=rank,
    )


def block_upper_solve_right(b: np.ndarray, upper: np.ndarray, m: int) -> np.ndarray:
    """Solve X U = B for X with U block upper triangular (X = B U^{-1})."""
    n = upper.shape[0] // m
    x = np.empty_like(b, dtype=float)
    for j in range(n):
        sl = slice(j * m, (j + 1) * m)
        rhs = b[:, sl] - x[:, : j * m] @ upper[: j * m, sl]
        x[:, sl] = np.linalg.solve(upper[sl, sl].T, rhs.T).T
    return x


def estimate_internal_wave(basis: SnapshotBasis, r_data: np.ndarray) -> np.ndarray:
    """Estimated interior snapshots V(x; w) R e_j, shape (n, n_nodes, m).

    ``r_data`` is the block Cholesky factor of the measured data's mass
    matrix, sharing (n, m) and ordering conventions with the basis.
    """
    nm = basis.nm
    if r_data.shape != (nm, nm):
        raise DimensionMismatch(f"R shape {r_data.shape} != ({nm}, {nm})")
    m = basis.m
    prod = basis.v_fields @ r_data
    return np.stack([prod[:, j * m : (j + 1) * m] for j in range(basis.n)])


def ls_data_misfit(
    basis: SnapshotBasis,
    u_est: np.ndarray,
    measured: DataSeries,
    search: DataSeries,
):
    """Scattering-identity misfit and its linearized kernel.

    Returns ``(misfit, residual, kernel)`` where ``residual`` stacks the
    coarse-time data residuals D_j - D_j(w) for j = 0..n-1 and ``kernel``
    is the dense linear map from the node field rho = (c^2 - w^2)/(c w) to
    the model-predicted residuals: a time integral (trapezoid on the
    coarse grid) of u_est against the time derivative of the search
    snapshots.
    """
    n, m = basis.n, basis.m
    if measured.n < n or search.n < n:
        raise DimensionMismatch("series shorter than the basis window")
    tau = basis.tau
    h2 = basis.medium.grid.h**2
    n_nodes = basis.u_fields.shape[0]
    # search snapshots and their centered time derivative on the tau grid
    u_w = np.stack(
        [basis.u_fields[:, j * m : (j + 1) * m] for j in range(n)]
    )  # (n, nodes, m)
    du = np.empty_like(u_w)
    if n > 1:
        du[0] = (u_w[1] - u_w[0]) / tau
        du[-1] = (u_w[-1] - u_w[-2]) / tau
        for j in range(1, n - 1):
            du[j] = (u_w[j + 1] - u_w[j - 1]) / (2 * tau)
    else:
        du[0] = 0.0

    residual = np.stack([measured.d[j] - search.d[j] for j in range(n)])
    # kernel[j, r, s, x] = h^2 * sum_{j'<=j} tw(j,j') u_est[j',x,s] du[j',x,r]
    kernel = np.zeros((n, m, m, n_nodes))
    acc = np.zeros((m, m, n_nodes))
    prev = None
    for j in range(1, n):
        # trapezoid over [0, j tau]: accumulate interior samples once,
        # endpoints weighted 1/2
        term_j = np.einsum("xs,xr->rsx", u_est[j], du[j])
        term_0 = np.einsum("xs,xr->rsx", u_est[0], du[0])
        if prev is None:
            acc[:] = 0.0
        else:
            acc += prev
        prev = term_j
        kernel[j] = h2 * tau * (0.5 * term_0 + acc + 0.5 * term_j)
    misfit = float(np.sum(residual**2))
    return misfit, residual.reshape(-1), kernel.reshape(n * m * m, n_nodes)
