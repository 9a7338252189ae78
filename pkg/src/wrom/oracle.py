"""Dense spectral ground truth on small grids.

Discretizes the symmetrized wave operator A = -c(x) Lap [c(x) . ] with the
five-point Dirichlet Laplacian, computes its full eigendecomposition, and
evaluates exact functional calculus: band-limited initial snapshots,
cosine time evolution, and the resulting data series. Grid inner products
carry the h^2 area weight so values match their continuum counterparts;
point sources are the discrete Dirac e_s / h^2.

This module is the brute-force reference for the trace pipeline and the
reduced-order models; it is capped at 4000 interior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataseries import DataSeries
from .errors import GridTooLarge
from .geometry import ArrayGeometry, Medium
from .signals import SignalSpec

MAX_DENSE_NODES = 4000


@dataclass(frozen=True)
class DenseOperator:
    """Eigendecomposition of the discretized symmetrized wave operator.

    ``eigvecs`` columns are orthonormal in the Euclidean sense; with the
    h^2 grid inner product the corresponding continuum-normalized
    eigenfunctions are eigvecs / h. ``theta`` is ascending and positive.
    """

    medium: Medium
    theta: np.ndarray  # (K,)
    eigvecs: np.ndarray  # (K, K)

    @property
    def n_modes(self) -> int:
        return len(self.theta)

    @property
    def h(self) -> float:
        return self.medium.grid.h

    def interior_shape(self) -> tuple[int, int]:
        g = self.medium.grid
        return (g.nx - 2, g.ny - 2)

    def interior_index(self, i: int, j: int) -> int:
        """Flat interior index of grid node (i, j)."""
        g = self.medium.grid
        if not (0 < i < g.nx - 1 and 0 < j < g.ny - 1):
            raise ValueError(f"node ({i}, {j}) is not interior")
        return (i - 1) * (g.ny - 2) + (j - 1)

    def sensor_indices(self, array: ArrayGeometry) -> np.ndarray:
        return np.array(
            [self.interior_index(i, j) for i, j in array.node_indices(self.medium.grid)]
        )

    def apply_function(self, fn, vectors: np.ndarray) -> np.ndarray:
        """fn(A) applied to columns (or a single vector) via eigenpairs."""
        y = self.eigvecs
        v = vectors if vectors.ndim == 2 else vectors[:, None]
        out = y @ (fn(self.theta)[:, None] * (y.T @ v))
        return out if vectors.ndim == 2 else out[:, 0]


def _fix_eigvec_signs(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def discretize_A(medium: Medium) -> DenseOperator:
    """Assemble and eigendecompose A_h = C (-Lap_h) C on interior nodes."""
    g = medium.grid
    ni, nj = g.nx - 2, g.ny - 2
    k = ni * nj
    if k > MAX_DENSE_NODES:
        raise GridTooLarge(f"{k} interior nodes exceeds cap {MAX_DENSE_NODES}")
    c = medium.speed[1:-1, 1:-1].reshape(-1)
    h2 = g.h**2
    a = np.zeros((k, k))
    idx = np.arange(k).reshape(ni, nj)
    np.fill_diagonal(a, 4.0 * c * c / h2)
    for shift_rows, shift_cols in (
        (idx[1:, :], idx[:-1, :]),
        (idx[:, 1:], idx[:, :-1]),
    ):
        r = shift_rows.reshape(-1)
        s = shift_cols.reshape(-1)
        w = -c[r] * c[s] / h2
        a[r, s] = w
        a[s, r] = w
    theta, vecs = np.linalg.eigh(a)
    return DenseOperator(medium, theta, _fix_eigvec_signs(vecs))


def oracle_u0(op: DenseOperator, array: ArrayGeometry, spec: SignalSpec) -> np.ndarray:
    """Initial snapshots u0 = |fhat(sqrt(A))| applied to the sensor Diracs.

    Returns (K, m) columns on interior nodes.
    """
    sens = op.sensor_indices(array)
    deltas = np.zeros((op.n_modes, len(sens)))
    deltas[sens, np.arange(len(sens))] = 1.0 / op.h**2
    return op.apply_function(lambda th: np.abs(spec.spectrum(np.sqrt(th))), deltas)


def oracle_snapshots(
    op: DenseOperator, u0_cols: np.ndarray, tau: float, n_max: int
) -> np.ndarray:
    """Exact snapshots u_j = cos(j tau sqrt(A)) u0 for j = 0 .. n_max.

    Returns (n_max + 1, K, m).
    """
    y = op.eigvecs
    w = y.T @ u0_cols
    sq = np.sqrt(op.theta)
    out = np.empty((n_max + 1,) + u0_cols.shape)
    for j in range(n_max + 1):
        out[j] = y @ (np.cos(j * tau * sq)[:, None] * w)
    return out


def oracle_data_series(
    op: DenseOperator,
    array: ArrayGeometry,
    spec: SignalSpec,
    tau: float,
    n: int,
) -> DataSeries:
    """Exact modal evaluation of the data series and its second derivative.

    D_j is the h^2-weighted Gram of u0 against cos(j tau sqrt(A)) u0; the
    second-derivative series applies an extra factor -theta per mode.
    """
    u0 = oracle_u0(op, array, spec)
    w = op.eigvecs.T @ u0  # modal coefficients, (K, m)
    sq = np.sqrt(op.theta)
    h2 = op.h**2
    d = np.empty((2 * n, array.m, array.m))
    ddot = np.empty_like(d)
    for j in range(2 * n):
        cosj = np.cos(j * tau * sq)
        d[j] = h2 * (w.T @ (cosj[:, None] * w))
        ddot[j] = -h2 * (w.T @ ((op.theta * cosj)[:, None] * w))
        d[j] = 0.5 * (d[j] + d[j].T)
        ddot[j] = 0.5 * (ddot[j] + ddot[j].T)
    return DataSeries(d=d, ddot=ddot, tau=tau, n=n, m=array.m)
