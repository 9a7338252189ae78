"""Gauss-Newton minimization over a Gaussian-basis search space.

The search speed is w(x) = c_ref + sum_l eta_l phi_l(x) with normalized
Gaussian bumps phi_l centered on a uniform grid over the inversion
region. Minimization runs in a layer-peeling schedule: the data series is
restricted to progressively longer time windows and, within window q,
only basis centers no deeper than the one-way reach c_max * (J_q tau) / 2
are updated. Each step solves the Tikhonov-damped normal equations

    (J^T J + mu I) delta = -(J^T r + mu eta_active),

with a residual-driven damping schedule mu = mu0 ||r||^2 / ||r_win0||^2
(floored), step backtracking, and damping escalation on rejection, so
accepted steps never increase ||r||^2 + mu ||eta||^2. Jacobians are
forward finite differences, column-parallel; derivatives are never
required of the objective implementations.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed

from .errors import (
    CFLViolation,
    IndefinitePivot,
    InstabilityDetected,
    SingularNormalEquations,
)
from .geometry import ArrayGeometry, Grid2D, Medium, collar_mask
from .objectives import (
    ObjectiveContext,
    chol_residual,
    fwi_trace_residual,
)
from .rom import build_rom

logger = logging.getLogger(__name__)

RESIDUAL_KINDS = ("fwi", "chol", "rom_op")


@dataclass(frozen=True)
class SearchModel:
    """Gaussian-basis coefficients over the inversion region."""

    centers: np.ndarray  # (N, 2) coordinates
    sigma_perp: float
    sigma_range: float
    eta: np.ndarray  # (N,)
    c_ref: float

    def __post_init__(self):
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))
        if self.centers.ndim != 2 or self.centers.shape[1] != 2:
            raise ValueError("centers must have shape (N, 2)")
        if len(self.eta) != len(self.centers):
            raise ValueError("eta length must match centers")

    @property
    def n_basis(self) -> int:
        return len(self.centers)

    @classmethod
    def regular_grid(
        cls,
        region: tuple[float, float, float, float],
        shape: tuple[int, int],
        sigma_perp: float,
        sigma_range: float,
        c_ref: float,
    ) -> "SearchModel":
        """Centers on a uniform (ncx, ncy) grid over (x0, x1, y0, y1)."""
        x0, x1, y0, y1 = region
        xs = np.linspace(x0, x1, shape[0])
        ys = np.linspace(y0, y1, shape[1])
        cx, cy = np.meshgrid(xs, ys, indexing="ij")
        centers = np.column_stack([cx.reshape(-1), cy.reshape(-1)])
        return cls(centers, sigma_perp, sigma_range, np.zeros(len(centers)), c_ref)

    def with_eta(self, eta: np.ndarray) -> "SearchModel":
        return SearchModel(
            self.centers, self.sigma_perp, self.sigma_range, eta, self.c_ref
        )

    def basis_matrix(self, grid: Grid2D) -> np.ndarray:
        """phi_l sampled on the grid, shape (n_nodes, N)."""
        X, Y = grid.coordinate_arrays()
        x = X.reshape(-1, 1)
        y = Y.reshape(-1, 1)
        amp = 1.0 / (2 * np.pi * self.sigma_perp * self.sigma_range)
        return amp * np.exp(
            -((x - self.centers[:, 0]) ** 2) / (2 * self.sigma_perp**2)
            - ((y - self.centers[:, 1]) ** 2) / (2 * self.sigma_range**2)
        )

    def default_fd_step(self) -> float:
        """Coefficient scale: 1e-2 of c_ref against the basis peak value."""
        return 1e-2 * self.c_ref * 2 * np.pi * self.sigma_perp * self.sigma_range


@dataclass(frozen=True)
class GaussNewtonConfig:
    objective: str = "chol"
    n_windows: int = 1
    iters_per_window: int = 10
    mu0: float = 1e-2
    mu_floor_factor: float = 1e-6
    fd_step: float | None = None
    c_max_bound: float | None = None
    speed_floor_frac: float = 0.2
    rel_decrease_tol: float = 1e-6
    step_norm_tol: float = 0.0
    max_backtracks: int = 8
    max_mu_escalations: int = 8
    n_jobs: int = 1

    def __post_init__(self):
        if self.objective not in RESIDUAL_KINDS:
            raise ValueError(f"objective must be one of {RESIDUAL_KINDS}")
        if self.n_windows < 1 or self.iters_per_window < 1 or self.mu0 <= 0:
            raise ValueError("window count, iteration budget, mu0 must be positive")


def evaluate_model(
    model: SearchModel,
    grid: Grid2D,
    basis: np.ndarray | None = None,
    clamp_centers=(),
    clamp_radius: float = 0.0,
    speed_floor_frac: float = 0.2,
) -> Medium:
    """Sample the search speed on the grid.

    The speed is floored at ``speed_floor_frac * c_ref`` (keeps the forward
    solver stable under aggressive steps; flagged via the module logger)
    and pinned to c_ref inside the sensor collar, preserving the
    known-speed-near-the-array convention.
    """
    if basis is None:
        basis = model.basis_matrix(grid)
    speed = (model.c_ref + basis @ model.eta).reshape(grid.shape)
    floor = speed_floor_frac * model.c_ref
    n_clipped = int(np.sum(speed < floor))
    if n_clipped:
        logger.info("speed floor engaged at %d nodes", n_clipped)
        speed = np.maximum(speed, floor)
    if clamp_radius > 0 and len(clamp_centers):
        speed[collar_mask(grid, clamp_centers, clamp_radius)] = model.c_ref
        return Medium(grid, speed, model.c_ref, tuple(clamp_centers), clamp_radius)
    return Medium(grid, speed, model.c_ref)


def residual_vector(ctx: ObjectiveContext, w: Medium, objective: str) -> np.ndarray:
    """Flatten the selected objective into a residual stack (obj = ||r||^2)."""
    record, series = ctx.simulate(w)
    if objective == "fwi":
        return fwi_trace_residual(ctx, record)
    rom_w = build_rom(series, ctx.trunc_tol)
    if objective == "chol":
        return chol_residual(ctx, rom_w)
    if objective == "rom_op":
        return (ctx.measured_rom_windowed().a_rom - rom_w.a_rom).reshape(-1)
    raise ValueError(f"unknown objective {objective!r}")


def jacobian_fd(
    ctx: ObjectiveContext,
    model: SearchModel,
    objective: str,
    base_residual: np.ndarray,
    eps: float,
    active_set: np.ndarray,
    grid: Grid2D,
    basis: np.ndarray,
    clamp_centers=(),
    clamp_radius: float = 0.0,
    speed_floor_frac: float = 0.2,
    n_jobs: int = 1,
) -> np.ndarray:
    """Forward-difference Jacobian columns over the active coefficients."""

    def _column(l):
        eta = model.eta.copy()
        eta[l] += eps
        w = evaluate_model(
            model.with_eta(eta),
            grid,
            basis,
            clamp_centers,
            clamp_radius,
            speed_floor_frac,
        )
        return (residual_vector(ctx, w, objective) - base_residual) / eps

    if n_jobs == 1:
        cols = [_column(l) for l in active_set]
    else:
        cols = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_column)(l) for l in active_set
        )
    return np.column_stack(cols)


def calibrate_mu0(
    ctx: ObjectiveContext,
    model: SearchModel,
    objective: str,
    grid: Grid2D,
    n_probe: int = 6,
    fraction: float = 1e-3,
    fd_step: float | None = None,
) -> float:
    """Damping weight as a fraction of the Jacobian's diagonal scale.

    The coefficient units carry the basis normalization 1/(2 pi s1 s2), so
    absolute damping weights are instance specific; probing a few columns
    at the starting model gives a sane magnitude.
    """
    basis = model.basis_matrix(grid)
    eps = fd_step if fd_step is not None else model.default_fd_step()
    r0 = residual_vector(ctx, evaluate_model(model, grid, basis), objective)
    idx = np.linspace(0, model.n_basis - 1, min(n_probe, model.n_basis)).astype(int)
    jac = jacobian_fd(ctx, model, objective, r0, eps, idx, grid, basis)
    scale = float(np.max(np.sum(jac**2, axis=0)))
    if scale <= 0:
        raise ValueError("flat objective: cannot calibrate damping")
    return fraction * scale


def gauss_newton_step(
    jac: np.ndarray, residual: np.ndarray, mu: float, eta_active: np.ndarray
) -> np.ndarray:
    """Solve the Tikhonov-damped normal equations by Cholesky."""
    a = jac.T @ jac + mu * np.eye(jac.shape[1])
    b = -(jac.T @ residual + mu * eta_active)
    try:
        factor = scipy.linalg.cho_factor(a)
    except scipy.linalg.LinAlgError as exc:
        raise SingularNormalEquations(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, b)


@dataclass
class InversionResult:
    model: SearchModel
    medium: Medium
    log: list[dict] = field(default_factory=list)
    eta_history: list[np.ndarray] = field(default_factory=list)
    diverged: bool = False

    def objective_trace(self) -> np.ndarray:
        return np.array([row["objective"] for row in self.log])


def layer_peeling_inversion(
    ctx: ObjectiveContext,
    model0: SearchModel,
    config: GaussNewtonConfig,
    grid: Grid2D,
    clamp_radius: float = 0.0,
) -> InversionResult:
    """Windowed Gauss-Newton descent, carrying coefficients forward.

    Window q restricts the data to J_q = ceil(q n / N_t) coarse steps and
    activates only centers with depth (range below the array) reachable by
    a round trip within J_q * tau at the configured speed bound.
    """
    model = model0
    basis = model.basis_matrix(grid)
    clamp_centers = ctx.array.sensors if clamp_radius > 0 else ()
    eps = config.fd_step if config.fd_step is not None else model.default_fd_step()
    c_bound = config.c_max_bound
    array_range = ctx.array.mean_range
    depth = model.centers[:, 1] - array_range

    def _medium(m):
        return evaluate_model(
            m, grid, basis, clamp_centers, clamp_radius, config.speed_floor_frac
        )

    result = InversionResult(model=model, medium=_medium(model))
    for q in range(1, config.n_windows + 1):
        j_q = int(np.ceil(q * ctx.n / config.n_windows))
        ctx_q = ctx.with_window(j_q)
        if c_bound is not None:
            depth_q = c_bound * j_q * ctx.tau / 2.0
            active = np.flatnonzero(depth <= depth_q)
        else:
            active = np.arange(model.n_basis)
        if len(active) == 0:
            continue
        r = residual_vector(ctx_q, _medium(model), config.objective)
        obj = float(r @ r)
        obj_window_start = obj
        r0_sq = max(obj, np.finfo(float).tiny)
        for it in range(1, config.iters_per_window + 1):
            tic = time.perf_counter()
            jac = jacobian_fd(
                ctx_q,
                model,
                config.objective,
                r,
                eps,
                active,
                grid,
                basis,
                clamp_centers,
                clamp_radius,
                config.speed_floor_frac,
                config.n_jobs,
            )
            mu = max(
                config.mu0 * obj / r0_sq, config.mu_floor_factor * config.mu0
            )
            accepted = False
            for _ in range(config.max_mu_escalations + 1):
                try:
                    delta = gauss_newton_step(jac, r, mu, model.eta[active])
                except SingularNormalEquations:
                    mu *= 10.0
                    continue
                phi0 = obj + mu * float(model.eta @ model.eta)
                scale = 1.0
                for _ in range(config.max_backtracks + 1):
                    eta_try = model.eta.copy()
                    eta_try[active] += scale * delta
                    try:
                        r_try = residual_vector(
                            ctx_q, _medium(model.with_eta(eta_try)), config.objective
                        )
                    except (CFLViolation, InstabilityDetected, IndefinitePivot):
                        # over-aggressive trial: treat as a rejected step
                        scale *= 0.5
                        continue
                    obj_try = float(r_try @ r_try)
                    phi_try = obj_try + mu * float(eta_try @ eta_try)
                    if phi_try < phi0:
                        accepted = True
                        break
                    scale *= 0.5
                if accepted:
                    break
                mu *= 10.0
            if not accepted:
                logger.info("window %d stalled at iteration %d", q, it)
                break
            step_norm = float(np.linalg.norm(scale * delta))
            prev_obj = obj
            model = model.with_eta(eta_try)
            r, obj = r_try, obj_try
            result.log.append(
                {
                    "window": q,
                    "iter": it,
                    "objective": obj,
                    "mu": mu,
                    "step_norm": step_norm,
                    "wall_ms": 1e3 * (time.perf_counter() - tic),
                }
            )
            result.eta_history.append(model.eta.copy())
            if prev_obj > 0 and (prev_obj - obj) / prev_obj < config.rel_decrease_tol:
                break
            if config.step_norm_tol > 0 and step_norm < config.step_norm_tol:
                break
        if obj > obj_window_start * (1 + 1e-12):
            result.diverged = True
    result.model = model
    result.medium = _medium(model)
    return result
