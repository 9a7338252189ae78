"""Command-line entry point and experiment orchestration.

Subcommands: simulate | transform | rom | landscape | invert | passive |
assess | time-reversal. Experiments are described by an INI-style config
with sections [grid], [medium], [signal], [array], [rom], [inversion],
[passive], [sweep], [assess], [timereversal]; numeric keys carry their
unit in the name (h_m, tau_s, f0_hz). Unknown sections or keys are
rejected and every subcommand checks its required keys up front.

Exit codes: 0 ok, 2 config error, 3 solver error, 4 factorization
failure, 5 inversion divergence.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import os
import sys

import numpy as np

from . import formats
from .dataseries import build_data_series, restrict_series
from .errors import (
    CFLViolation,
    ConfigError,
    DegenerateField,
    DivergenceError,
    IndefinitePivot,
    InstabilityDetected,
    RecordTooShort,
    UnderSampled,
    WromError,
)
from .fdtd import ResponseRecord, SimulationConfig, solve_point_source, solve_reemission
from .geometry import (
    ArrayGeometry,
    Grid2D,
    Medium,
    disk_medium,
    homogeneous_medium,
    layered_medium,
    linear_array,
    random_medium,
)
from .inversion import GaussNewtonConfig, SearchModel, layer_peeling_inversion
from .objectives import (
    ObjectiveContext,
    camembert_family,
    evaluate_all,
    simulate_record,
)
from .passive import (
    NoiseModel,
    empirical_cross_correlation,
    passive_data_series,
    passive_traces,
)
from .rom import build_rom, verify_data_fit
from .signals import SignalSpec, sample_pulse

# --------------------------------------------------------------------------
# configuration schema: section -> key -> (type, default); REQUIRED means
# the key must be present whenever the section is used by a subcommand.

REQUIRED = object()

SCHEMA = {
    "grid": {
        "nx": (int, REQUIRED),
        "ny": (int, REQUIRED),
        "h_m": (float, REQUIRED),
        "x0_m": (float, 0.0),
        "y0_m": (float, 0.0),
    },
    "medium": {
        "kind": (str, REQUIRED),
        "c_ref_mps": (float, REQUIRED),
        "layer_depth_m": (float, 0.0),
        "layer_thickness_m": (float, 0.0),
        "layer_contrast": (float, 0.0),
        "disk_cx_m": (float, 0.0),
        "disk_cy_m": (float, 0.0),
        "disk_radius_m": (float, 0.0),
        "disk_contrast": (float, 0.0),
        "random_contrast": (float, 0.0),
        "random_corr_m": (float, 0.0),
        "random_seed": (int, 0),
        "quiet_radius_m": (float, 0.0),
        "file": (str, ""),
    },
    "signal": {
        "f0_hz": (float, REQUIRED),
        "bandwidth_hz": (float, REQUIRED),
    },
    "array": {
        "m": (int, REQUIRED),
        "aperture_m": (float, REQUIRED),
        "depth_m": (float, REQUIRED),
    },
    "rom": {
        "tau_s": (float, REQUIRED),
        "n": (int, REQUIRED),
        "sub": (int, 20),
        "trunc_tol": (float, 1e-9),
        "pad_coarse": (int, 4),
    },
    "inversion": {
        "objective": (str, "chol"),
        "n_windows": (int, 1),
        "iters_per_window": (int, 10),
        "mu0": (float, 1e-2),
        "fd_step": (float, 0.0),
        "c_max_mps": (float, REQUIRED),
        "centers_nx": (int, REQUIRED),
        "centers_ny": (int, REQUIRED),
        "sigma_perp_m": (float, REQUIRED),
        "sigma_range_m": (float, REQUIRED),
        "inv_x0_m": (float, REQUIRED),
        "inv_x1_m": (float, REQUIRED),
        "inv_y0_m": (float, REQUIRED),
        "inv_y1_m": (float, REQUIRED),
        "speed_floor_rel": (float, 0.2),
        "collar_radius_m": (float, 0.0),
    },
    "passive": {
        "t_a_s": (float, REQUIRED),
        "averaging_t_s": (float, REQUIRED),
        "seed": (int, 0),
        "lag_max_s": (float, REQUIRED),
        "block_len": (int, 4096),
        "scale": (float, 1.0),
    },
    "sweep": {
        "family": (str, REQUIRED),
        "p1_min": (float, REQUIRED),
        "p1_max": (float, REQUIRED),
        "p1_count": (int, REQUIRED),
        "p2_min": (float, REQUIRED),
        "p2_max": (float, REQUIRED),
        "p2_count": (int, REQUIRED),
        "c_fwi_file": (str, ""),
        "pgm": (bool, False),
    },
    "assess": {
        "x0_m": (float, REQUIRED),
        "x1_m": (float, REQUIRED),
        "y0_m": (float, REQUIRED),
        "y1_m": (float, REQUIRED),
    },
    "timereversal": {
        "src_x_m": (float, REQUIRED),
        "src_y_m": (float, REQUIRED),
        "duration_s": (float, REQUIRED),
        "estimate_file": (str, REQUIRED),
    },
}

COMMAND_SECTIONS = {
    "simulate": ("grid", "medium", "signal", "array", "rom"),
    "transform": ("signal", "rom"),
    "rom": ("signal", "rom"),
    "landscape": ("grid", "medium", "signal", "array", "rom", "sweep"),
    "invert": ("grid", "medium", "signal", "array", "rom", "inversion"),
    "passive": ("grid", "medium", "signal", "array", "rom", "passive"),
    "assess": ("assess",),
    "time-reversal": ("grid", "medium", "signal", "array", "timereversal"),
}


def parse_config(text: str) -> dict:
    """Parse and validate; unknown sections/keys are rejected."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    out: dict = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        out[section] = {}
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            typ, _ = SCHEMA[section][key]
            try:
                if typ is bool:
                    out[section][key] = raw.strip().lower() in ("1", "true", "yes")
                else:
                    out[section][key] = typ(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
    return out


def require(config: dict, command: str) -> dict:
    """Fill defaults and check required keys for the given subcommand."""
    filled = {}
    for section in COMMAND_SECTIONS[command]:
        if section not in config:
            raise ConfigError(f"missing section [{section}] for '{command}'")
        filled[section] = dict(config[section])
        for key, (typ, default) in SCHEMA[section].items():
            if key not in filled[section]:
                if default is REQUIRED:
                    raise ConfigError(f"missing key {section}.{key}")
                filled[section][key] = default
    for section in config:
        if section not in filled:
            filled[section] = dict(config[section])
    return filled


def serialize_config(config: dict) -> str:
    """Canonical text form; serialize(parse(.)) is idempotent."""
    buf = io.StringIO()
    for section in sorted(config):
        buf.write(f"[{section}]\n")
        for key in sorted(config[section]):
            val = config[section][key]
            if isinstance(val, bool):
                txt = "true" if val else "false"
            elif isinstance(val, float):
                txt = f"{val:.17g}"
            else:
                txt = str(val)
            buf.write(f"{key} = {txt}\n")
        buf.write("\n")
    return buf.getvalue()


# --------------------------------------------------------------------------
# presets: the parameter sets of the three reference experiments, at their
# production scale; override freely with --set for desk-size runs.

PRESETS = {
    "camembert": """
[grid]
nx = 101
ny = 126
h_m = 20

[medium]
kind = disk
c_ref_mps = 3000
disk_cx_m = 1000
disk_cy_m = 1250
disk_radius_m = 600
disk_contrast = 0.3

[signal]
f0_hz = 6
bandwidth_hz = 4

[array]
m = 10
aperture_m = 1400
depth_m = 300

[rom]
tau_s = 0.0435
n = 16
sub = 20

[inversion]
objective = chol
n_windows = 6
iters_per_window = 10
c_max_mps = 3900
centers_nx = 20
centers_ny = 20
sigma_perp_m = 55.5
sigma_range_m = 69.4
inv_x0_m = 95
inv_x1_m = 1905
inv_y0_m = 119
inv_y1_m = 2381
""",
    "salt": """
[grid]
nx = 321
ny = 281
h_m = 18.75

[medium]
kind = file
c_ref_mps = 1500
file = salt_model.wromgrid

[signal]
f0_hz = 6
bandwidth_hz = 4

[array]
m = 40
aperture_m = 5550
depth_m = 150

[rom]
tau_s = 0.0333
n = 49
sub = 20

[inversion]
objective = chol
n_windows = 6
iters_per_window = 6
c_max_mps = 4500
centers_nx = 55
centers_ny = 55
sigma_perp_m = 61.2
sigma_range_m = 53.6
inv_x0_m = 105
inv_x1_m = 5895
inv_y0_m = 92
inv_y1_m = 5158
""",
    "random": """
[grid]
nx = 261
ny = 261
h_m = 25

[medium]
kind = random
c_ref_mps = 1500
random_contrast = 0.25
random_corr_m = 150
random_seed = 7
quiet_radius_m = 150

[signal]
f0_hz = 6
bandwidth_hz = 4

[array]
m = 40
aperture_m = 4500
depth_m = 150

[rom]
tau_s = 0.0333
n = 49
sub = 20

[inversion]
objective = rom_op
n_windows = 9
iters_per_window = 15
c_max_mps = 2000
centers_nx = 55
centers_ny = 55
sigma_perp_m = 66.6
sigma_range_m = 63.4
inv_x0_m = 114
inv_x1_m = 6386
inv_y0_m = 300
inv_y1_m = 6392
""",
}


# --------------------------------------------------------------------------
# construction helpers


def build_grid(cfg: dict) -> Grid2D:
    g = cfg["grid"]
    return Grid2D(g["nx"], g["ny"], g["h_m"], (g["x0_m"], g["y0_m"]))


def build_medium(cfg: dict, grid: Grid2D, array: ArrayGeometry | None = None) -> Medium:
    med = cfg["medium"]
    kind = med["kind"]
    c0 = med["c_ref_mps"]
    if kind == "homogeneous":
        return homogeneous_medium(grid, c0)
    if kind == "layered":
        return layered_medium(
            grid, c0, med["layer_depth_m"], med["layer_thickness_m"], med["layer_contrast"]
        )
    if kind == "disk":
        return disk_medium(
            grid, c0, (med["disk_cx_m"], med["disk_cy_m"]), med["disk_radius_m"],
            med["disk_contrast"],
        )
    if kind == "random":
        quiet = array.sensors if (array and med["quiet_radius_m"] > 0) else ()
        return random_medium(
            grid, c0, med["random_contrast"], med["random_corr_m"], med["random_seed"],
            quiet, med["quiet_radius_m"],
        )
    if kind == "file":
        if not med["file"]:
            raise ConfigError("medium.kind=file requires medium.file")
        loaded = formats.read_medium(med["file"], c0)
        if loaded.grid != grid:
            raise ConfigError("medium file grid does not match [grid]")
        return loaded
    raise ConfigError(f"unknown medium kind {kind!r}")


def build_signal(cfg: dict) -> SignalSpec:
    dt = cfg["rom"]["tau_s"] / cfg["rom"]["sub"]
    return SignalSpec.from_hz(cfg["signal"]["f0_hz"], cfg["signal"]["bandwidth_hz"], dt)


def build_array(cfg: dict, grid: Grid2D) -> ArrayGeometry:
    a = cfg["array"]
    return linear_array(grid, a["m"], a["aperture_m"], a["depth_m"])


def build_context(cfg: dict, medium: Medium, array: ArrayGeometry, n_jobs: int):
    spec = build_signal(cfg)
    r = cfg["rom"]
    return ObjectiveContext.from_truth(
        medium, array, spec, r["tau_s"], r["n"],
        trunc_tol=r["trunc_tol"], pad_coarse=r["pad_coarse"], n_jobs=n_jobs,
    )


def _meta_lines(pairs: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in pairs.items())


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: dict, out: str, n_jobs: int) -> int:
    grid = build_grid(cfg)
    array = build_array(cfg, grid)
    medium = build_medium(cfg, grid, array)
    spec = build_signal(cfg)
    r = cfg["rom"]
    record = simulate_record(
        medium, array, spec, r["tau_s"], r["n"], r["pad_coarse"], n_jobs
    )
    seq = np.moveaxis(record.traces, 2, 0)  # (steps, m, m), time ordered
    formats.write_matrix_sequence(os.path.join(out, "traces.seq"), seq, record.dt)
    with open(os.path.join(out, "meta.txt"), "w") as fh:
        fh.write(_meta_lines({
            "t0_index": record.t0_index,
            "dt_s": record.dt,
            "tau_s": r["tau_s"],
            "n": r["n"],
            "m": array.m,
        }))
    formats.write_medium(os.path.join(out, "medium.wromgrid"), medium)
    print(f"wrote {array.m}x{array.m} traces, {record.n_steps} steps")
    return 0


def _load_record(cfg: dict, traces_path: str) -> ResponseRecord:
    seq, dt = formats.read_matrix_sequence(traces_path)
    spec = build_signal(cfg)
    if abs(dt - spec.dt) > 1e-12 * spec.dt:
        raise ConfigError(f"trace dt {dt:g} does not match tau_s/sub = {spec.dt:g}")
    signal = sample_pulse(spec)
    return ResponseRecord(np.moveaxis(seq, 0, 2), dt, signal.i0, signal)


def cmd_transform(cfg: dict, out: str, traces_path: str) -> int:
    record = _load_record(cfg, traces_path)
    spec = build_signal(cfg)
    r = cfg["rom"]
    series = build_data_series(record, spec, r["tau_s"], r["n"])
    formats.write_data_series(os.path.join(out, "series"), series)
    print(f"wrote data series: n={series.n} m={series.m} tau={series.tau:g}")
    return 0


def cmd_rom(cfg: dict, out: str, traces_path: str) -> int:
    record = _load_record(cfg, traces_path)
    spec = build_signal(cfg)
    r = cfg["rom"]
    series = build_data_series(record, spec, r["tau_s"], r["n"])
    rom = build_rom(series, r["trunc_tol"])
    report = verify_data_fit(rom, series)
    formats.write_data_series(os.path.join(out, "series"), series)
    formats.write_matrix(os.path.join(out, "rom_r.mat"), rom.r)
    formats.write_matrix(os.path.join(out, "rom_p.mat"), rom.p_rom)
    formats.write_matrix(os.path.join(out, "rom_a.mat"), rom.a_rom)
    lines = {
        "tau_s": series.tau,
        "n": series.n,
        "m": series.m,
        "truncation_rank": rom.truncation_rank,
        "datafit_family1_max": f"{report.max_family1:.3e}",
        "datafit_family2_max": f"{report.max_family2:.3e}",
    }
    with open(os.path.join(out, "datafit.txt"), "w") as fh:
        fh.write(_meta_lines(lines))
    for k, v in lines.items():
        print(f"{k}={v}")
    return 0


def cmd_landscape(cfg: dict, out: str, n_jobs: int) -> int:
    grid = build_grid(cfg)
    array = build_array(cfg, grid)
    truth = build_medium(cfg, grid, array)
    ctx = build_context(cfg, truth, array, n_jobs)
    sw = cfg["sweep"]
    p1 = np.linspace(sw["p1_min"], sw["p1_max"], sw["p1_count"])
    p2 = np.linspace(sw["p2_min"], sw["p2_max"], sw["p2_count"])
    family = sw["family"]
    if family == "camembert":
        header = ["alpha", "beta", "fwi", "chol", "rom_op", "prop"]
        if not sw["c_fwi_file"]:
            raise ConfigError("camembert sweep needs sweep.c_fwi_file")
        c_fwi = formats.read_medium(sw["c_fwi_file"], truth.c_ref)

        def make(a, b):
            return camembert_family(truth, c_fwi, a, b)

    elif family == "layered":
        header = ["depth_m", "contrast", "fwi", "chol", "rom_op", "prop"]
        med = cfg["medium"]

        def make(depth, contrast):
            return layered_medium(
                grid, truth.c_ref, depth, med["layer_thickness_m"], contrast
            )

    else:
        raise ConfigError(f"unknown sweep family {family!r}")

    objs = ("fwi", "chol", "rom_op", "prop")
    values = {k: np.full((len(p1), len(p2)), np.nan) for k in objs}
    rows = []
    for i, a in enumerate(p1):
        for j, b in enumerate(p2):
            try:
                res = evaluate_all(ctx, make(a, b))
                for k in objs:
                    values[k][i, j] = res[k]
                rows.append([a, b] + [res[k] for k in objs])
            except WromError:
                rows.append([a, b] + [np.nan] * 4)
    csv_path = os.path.join(out, "sweep.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    if sw["pgm"]:
        for k in objs:
            with np.errstate(divide="ignore"):
                img = np.log10(np.maximum(values[k], np.finfo(float).tiny))
            formats.write_pgm(os.path.join(out, f"sweep_{k}.pgm"), img)
    print(f"wrote {len(rows)} sweep rows to {csv_path}")
    return 0


def cmd_invert(cfg: dict, out: str, n_jobs: int) -> int:
    grid = build_grid(cfg)
    array = build_array(cfg, grid)
    truth = build_medium(cfg, grid, array)
    ctx = build_context(cfg, truth, array, n_jobs)
    inv = cfg["inversion"]
    model0 = SearchModel.regular_grid(
        (inv["inv_x0_m"], inv["inv_x1_m"], inv["inv_y0_m"], inv["inv_y1_m"]),
        (inv["centers_nx"], inv["centers_ny"]),
        inv["sigma_perp_m"],
        inv["sigma_range_m"],
        truth.c_ref,
    )
    gn = GaussNewtonConfig(
        objective=inv["objective"],
        n_windows=inv["n_windows"],
        iters_per_window=inv["iters_per_window"],
        mu0=inv["mu0"],
        fd_step=inv["fd_step"] or None,
        c_max_bound=inv["c_max_mps"],
        speed_floor_frac=inv["speed_floor_rel"],
        n_jobs=n_jobs,
    )
    result = layer_peeling_inversion(
        ctx, model0, gn, grid, clamp_radius=inv["collar_radius_m"]
    )
    formats.write_medium(os.path.join(out, "estimate.wromgrid"), result.medium)
    formats.write_matrix(os.path.join(out, "eta_final.mat"), result.model.eta)
    with open(os.path.join(out, "inversion_log.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window", "iter", "objective", "mu", "step_norm", "wall_ms"])
        for row in result.log:
            writer.writerow([row[k] for k in
                             ("window", "iter", "objective", "mu", "step_norm", "wall_ms")])
    if result.log:
        print(f"final objective {result.log[-1]['objective']:.6e} "
              f"after {len(result.log)} accepted steps")
    if result.diverged:
        raise DivergenceError("objective increased across a window")
    return 0


def cmd_passive(cfg: dict, out: str) -> int:
    grid = build_grid(cfg)
    array = build_array(cfg, grid)
    medium = build_medium(cfg, grid, array)
    spec = build_signal(cfg)
    r, pv = cfg["rom"], cfg["passive"]
    model = NoiseModel(
        support=np.ones(grid.shape, dtype=bool),
        spec=spec,
        t_a=pv["t_a_s"],
        t_average=pv["averaging_t_s"],
        seed=pv["seed"],
    )
    n_steps = int(round((pv["averaging_t_s"] + pv["lag_max_s"]) / spec.dt)) + 2
    traces = passive_traces(medium, array, model, spec.dt, n_steps, pv["block_len"])
    lags, corr = empirical_cross_correlation(
        traces, spec.dt, pv["averaging_t_s"], pv["lag_max_s"]
    )
    formats.write_matrix_sequence(os.path.join(out, "correlation.seq"), corr, spec.dt)
    series = passive_data_series(
        corr, pv["t_a_s"], spec.dt, r["tau_s"], r["n"], spec, pv["scale"]
    )
    formats.write_data_series(os.path.join(out, "passive_series"), series)
    print(f"wrote correlations ({len(lags)} lags) and passive series n={r['n']}")
    return 0


def region_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation of two fields over the same region."""
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt(np.sum(da**2) * np.sum(db**2))
    if denom == 0:
        raise DegenerateField("constant field in assessment region")
    return float(np.sum(da * db) / denom)


def assess_media(true_med: Medium, estimate: Medium, region) -> float:
    x0, x1, y0, y1 = region
    grid = true_med.grid
    X, Y = grid.coordinate_arrays()
    mask = (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)
    return region_correlation(true_med.speed[mask], estimate.speed[mask])


def cmd_assess(cfg: dict, out: str, true_path: str, est_path: str) -> int:
    true_med = formats.read_medium(true_path)
    est_med = formats.read_medium(est_path)
    if true_med.grid != est_med.grid:
        raise ConfigError("assess: media are on different grids")
    a = cfg["assess"]
    corr = assess_media(true_med, est_med, (a["x0_m"], a["x1_m"], a["y0_m"], a["y1_m"]))
    with open(os.path.join(out, "metrics.txt"), "w") as fh:
        fh.write(f"correlation={corr:.6f}\n")
    print(f"correlation={corr:.6f}")
    return 0


def focal_metric(frames: np.ndarray, grid: Grid2D, src_node, exclude_radius: float):
    """Peak at the source node over off-focus peak outside the radius."""
    X, Y = grid.coordinate_arrays()
    sx, sy = grid.node_coordinate(*src_node)
    outside = (X - sx) ** 2 + (Y - sy) ** 2 > exclude_radius**2
    focal = np.abs(frames[:, src_node[0], src_node[1]])
    best = int(np.argmax(focal))
    off = np.abs(frames[best][outside]).max()
    return float(focal[best] / off), best


def cmd_time_reversal(cfg: dict, out: str, n_jobs: int) -> int:
    grid = build_grid(cfg)
    array = build_array(cfg, grid)
    truth = build_medium(cfg, grid, array)
    tr = cfg["timereversal"]
    estimate = formats.read_medium(tr["estimate_file"], truth.c_ref)
    reference = homogeneous_medium(grid, truth.c_ref)
    spec = SignalSpec.from_hz(
        cfg["signal"]["f0_hz"], cfg["signal"]["bandwidth_hz"],
        cfl_safe_dt(truth, cfg),
    )
    signal = sample_pulse(spec)
    src_node = grid.snap_to_grid((tr["src_x_m"], tr["src_y_m"]))
    n_steps = int(round(tr["duration_s"] / spec.dt)) + signal.i0
    src_array = ArrayGeometry((grid.node_coordinate(*src_node),))
    record = solve_point_source(
        truth,
        ArrayGeometry(array.sensors + src_array.sensors),
        len(array.sensors),
        signal,
        SimulationConfig(spec.dt, n_steps),
    )
    emissions = record.traces[: array.m, ::-1]
    lam0 = truth.c_ref / cfg["signal"]["f0_hz"]
    metrics = {}
    for name, med in (("true", truth), ("estimated", estimate), ("reference", reference)):
        res = solve_reemission(
            med, array, emissions,
            SimulationConfig(spec.dt, n_steps, record_full_field=True, record_stride=10),
        )
        metric, best = focal_metric(res.frames, grid, src_node, lam0)
        metrics[name] = metric
        formats.write_pgm(
            os.path.join(out, f"refocus_{name}.pgm"), np.abs(res.frames[best])
        )
    with open(os.path.join(out, "metrics.txt"), "w") as fh:
        fh.write(_meta_lines({f"focal_{k}": f"{v:.6f}" for k, v in metrics.items()}))
    for k, v in metrics.items():
        print(f"focal_{k}={v:.6f}")
    return 0


def cfl_safe_dt(medium: Medium, cfg: dict) -> float:
    """dt from tau/sub if configured, else 80% of the stability limit."""
    if "rom" in cfg and "tau_s" in cfg["rom"]:
        sub = cfg["rom"].get("sub", 20)
        return cfg["rom"]["tau_s"] / sub
    from .fdtd import cfl_limit

    return 0.8 * cfl_limit(medium)


# --------------------------------------------------------------------------
# entry point


def load_config(args) -> dict:
    text = ""
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}")
        text = PRESETS[args.preset]
    if args.config:
        with open(args.config) as fh:
            text = fh.read() if not text else text + "\n" + fh.read()
    if not text:
        raise ConfigError("need --config and/or --preset")
    cfg = parse_config(text)
    for item in args.set or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config key {target!r}")
        typ, _ = SCHEMA[section][key]
        if typ is bool:
            cfg.setdefault(section, {})[key] = value.strip().lower() in ("1", "true", "yes")
        else:
            cfg.setdefault(section, {})[key] = typ(value)
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wrom", description=__doc__)
    parser.add_argument("--config", help="experiment config file")
    parser.add_argument("--preset", help="built-in parameter set: camembert|salt|random")
    parser.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--reference-mode", action="store_true",
                        help="single-threaded, bit-reproducible execution")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate")
    p = sub.add_parser("transform")
    p.add_argument("traces")
    p = sub.add_parser("rom")
    p.add_argument("traces")
    sub.add_parser("landscape")
    sub.add_parser("invert")
    sub.add_parser("passive")
    p = sub.add_parser("assess")
    p.add_argument("true_medium")
    p.add_argument("estimate")
    sub.add_parser("time-reversal")

    args = parser.parse_args(argv)
    n_jobs = 1 if args.reference_mode else max(1, args.threads)
    try:
        os.makedirs(args.out, exist_ok=True)
        if args.command == "assess":
            cfg = require(load_config(args), "assess")
            return cmd_assess(cfg, args.out, args.true_medium, args.estimate)
        cfg = require(load_config(args), args.command)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, n_jobs)
        if args.command == "transform":
            return cmd_transform(cfg, args.out, args.traces)
        if args.command == "rom":
            return cmd_rom(cfg, args.out, args.traces)
        if args.command == "landscape":
            return cmd_landscape(cfg, args.out, n_jobs)
        if args.command == "invert":
            return cmd_invert(cfg, args.out, n_jobs)
        if args.command == "passive":
            return cmd_passive(cfg, args.out)
        if args.command == "time-reversal":
            return cmd_time_reversal(cfg, args.out, n_jobs)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CFLViolation, InstabilityDetected, UnderSampled, RecordTooShort) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except IndefinitePivot as exc:
        print(f"factorization error: {exc}", file=sys.stderr)
        return 4
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
