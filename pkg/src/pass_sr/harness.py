"""Experiment orchestration: seeded Monte Carlo over placements, CSV emission.

A scenario spec names a sweep axis (transmit power, PAs per waveguide, or the
solver iteration budget), a list of solvers, and a realization count. Every
(sweep value, realization, solver) triple maps to one result row; receiver
placements are a pure function of (master seed, realization index) and are
held fixed across sweep values for variance reduction. Spec files use a flat
INI format with one section per module (see configs/ for the schema).
"""

from __future__ import annotations

import configparser
import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .baselines import (ElementWiseConfig, conventional_mimo_baseline,
                        element_wise_search, fixed_pa_baseline)
from .config import Geometry, SystemConfig, dbm_to_watt, waveguide_y_grid
from .lgd import LgdConfig, solve_lgd
from .pso import PsoConfig
from .report import SolveReport
from .sca import ScaConfig
from .scapso import solve_sca_pso

SOLVER_NAMES = ("lgd", "scapso", "elementwise", "fixedpa", "mimo")
SWEEP_AXES = ("transmit_power_dbm", "antennas_per_waveguide", "iterations")


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str
    system: SystemConfig
    solvers: tuple[str, ...]
    sweep_axis: str
    sweep_values: tuple[float, ...]
    num_realizations: int
    master_seed: int
    lgd: LgdConfig = LgdConfig()
    sca: ScaConfig = ScaConfig()
    pso: PsoConfig = PsoConfig()
    elementwise: ElementWiseConfig = ElementWiseConfig()

    def __post_init__(self):
        unknown = set(self.solvers) - set(SOLVER_NAMES)
        if unknown:
            raise ValueError(f"unknown solvers: {sorted(unknown)}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
        if list(self.sweep_values) != sorted(set(self.sweep_values)):
            raise ValueError("sweep values must be strictly increasing")
        if self.num_realizations < 1:
            raise ValueError("need at least one realization")


RESULT_COLUMNS = (
    "scenario", "solver", "sweep_value", "realization", "seed", "sum_rate",
    "per_pr_rates", "kl", "pe_upper_bound", "power_residual",
    "detection_residual", "spacing_residual", "range_residual", "iterations",
    "wall_ms", "failed", "error",
)


@dataclass
class ResultRow:
    scenario: str
    solver: str
    sweep_value: float
    realization: int
    seed: int
    sum_rate: float = float("nan")
    per_pr_rates: tuple[float, ...] = ()
    kl: float = float("nan")
    pe_upper_bound: float = float("nan")
    power_residual: float = float("nan")
    detection_residual: float = float("nan")
    spacing_residual: float = float("nan")
    range_residual: float = float("nan")
    iterations: int = 0
    wall_ms: float = float("nan")
    failed: bool = False
    error: str = ""
    trace: np.ndarray | None = None  # per-iteration objective, not serialized to the raw CSV

    def sort_key(self):
        return (self.solver, self.sweep_value, self.realization)


def generate_realization(master_seed: int, index: int, cfg: SystemConfig) -> Geometry:
    """PR and IR positions drawn uniformly over the region; BD fixed from config."""
    if index < 0:
        raise ValueError("realization index must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))
    pts = rng.uniform([0.0, 0.0], [cfg.region_x_m, cfg.region_y_m],
                      size=(cfg.num_prs + 1, 2))
    xyz = np.hstack([pts, np.zeros((cfg.num_prs + 1, 1))])
    return Geometry(waveguide_y_m=waveguide_y_grid(cfg),
                    pr_positions_m=xyz[:-1], ir_position_m=xyz[-1],
                    bd_position_m=np.asarray(cfg.bd_position_m, dtype=float))


def _solver_seed(master_seed: int, index: int, solver: str) -> int:
    key = (index, SOLVER_NAMES.index(solver))
    return int(np.random.SeedSequence(master_seed, spawn_key=key).generate_state(1)[0])


def _apply_sweep(spec: ExperimentSpec, value: float):
    """Sweep-adjusted (system config, solver configs) for one sweep point."""
    cfg, lgd_cfg, pso_cfg, ew_cfg = spec.system, spec.lgd, spec.pso, spec.elementwise
    if spec.sweep_axis == "transmit_power_dbm":
        cfg = cfg.with_power_dbm(value)
    elif spec.sweep_axis == "antennas_per_waveguide":
        cfg = replace(cfg, num_pas_per_waveguide=int(value), amplitude_profile=None)
    elif spec.sweep_axis == "iterations":
        lgd_cfg = replace(lgd_cfg, max_iterations=int(value))
        pso_cfg = replace(pso_cfg, max_iterations=int(value))
        ew_cfg = replace(ew_cfg, sweep_rounds=max(1, int(value)))
    return cfg, lgd_cfg, pso_cfg, ew_cfg


def run_single(spec: ExperimentSpec, solver: str, value: float, index: int) -> ResultRow:
    """One (solver, sweep value, realization) cell; failures become flagged rows."""
    cfg, lgd_cfg, pso_cfg, ew_cfg = _apply_sweep(spec, value)
    seed = _solver_seed(spec.master_seed, index, solver)
    row = ResultRow(scenario=spec.scenario, solver=solver, sweep_value=value,
                    realization=index, seed=seed)
    t0 = time.perf_counter()
    try:
        geom = generate_realization(spec.master_seed, index, cfg)
        geom.validate_region(cfg)
        if solver == "lgd":
            rep = solve_lgd(geom, cfg, replace(lgd_cfg, seed=seed))
        elif solver == "scapso":
            rep = solve_sca_pso(geom, cfg, spec.sca, pso_cfg, seed=seed)
        elif solver == "elementwise":
            rep = element_wise_search(geom, cfg, ew_cfg, spec.sca, seed=seed)
        elif solver == "fixedpa":
            rep = fixed_pa_baseline(geom, cfg, spec.sca, seed=seed)
        elif solver == "mimo":
            rep = conventional_mimo_baseline(geom, cfg, spec.sca, seed=seed)
        else:
            raise ValueError(f"unknown solver {solver!r}")
    except Exception as exc:  # noqa: BLE001 - failures are data, the run continues
        row.failed = True
        row.error = f"{type(exc).__name__}: {exc}"
        row.wall_ms = (time.perf_counter() - t0) * 1e3
        return row
    row.sum_rate = rep.sum_rate
    row.per_pr_rates = tuple(float(r) for r in np.atleast_1d(rep.rates.per_pr_rate))
    row.kl = float(rep.detection.kl)
    row.pe_upper_bound = float(rep.detection.pe_upper_bound)
    row.power_residual = rep.residuals.power_residual
    row.detection_residual = rep.residuals.detection_residual
    row.spacing_residual = rep.residuals.spacing_residual
    row.range_residual = rep.residuals.range_residual
    row.iterations = rep.iterations
    row.wall_ms = rep.wall_ms
    row.trace = rep.objective_trace
    return row


def _run_cell(args) -> ResultRow:
    return run_single(*args)


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> list[ResultRow]:
    """All cells of the spec in canonical (solver, sweep value, realization) order."""
    cells = [(spec, solver, value, index)
             for solver in spec.solvers
             for value in spec.sweep_values
             for index in range(spec.num_realizations)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    rows.sort(key=ResultRow.sort_key)
    return rows


# -- CSV emission -------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ";".join(repr(float(v)) for v in value)
    return str(value)


def emit_results(rows: list[ResultRow], out_dir: str | Path) -> dict[str, Path]:
    """Write raw, aggregated, and per-iteration-trace CSVs; returns their paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOError(f"cannot create output directory {out}: {exc}") from exc

    raw = out / "results_raw.csv"
    with raw.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, col)) for col in RESULT_COLUMNS])

    agg = out / "results_aggregated.csv"
    groups: dict[tuple[str, float], list[ResultRow]] = {}
    for row in rows:
        if not row.failed:
            groups.setdefault((row.solver, row.sweep_value), []).append(row)
    with agg.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["solver", "sweep_value", "n", "sum_rate_mean",
                         "sum_rate_std", "kl_mean", "wall_ms_mean"])
        for (solver, value), grp in sorted(groups.items()):
            rates = np.array([g.sum_rate for g in grp])
            writer.writerow([solver, _fmt(value), len(grp), _fmt(float(rates.mean())),
                             _fmt(float(rates.std())),
                             _fmt(float(np.mean([g.kl for g in grp]))),
                             _fmt(float(np.mean([g.wall_ms for g in grp])))])

    traces = out / "results_traces.csv"
    with traces.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["solver", "sweep_value", "realization", "iteration", "objective"])
        for row in rows:
            if row.trace is None:
                continue
            for i, obj in enumerate(row.trace):
                writer.writerow([row.solver, _fmt(row.sweep_value),
                                 row.realization, i, _fmt(float(obj))])
    return {"raw": raw, "aggregated": agg, "traces": traces}


def parse_raw_csv(path: str | Path) -> list[ResultRow]:
    """Read back a raw results CSV (exact float round-trip)."""
    rows = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(ResultRow(
                scenario=rec["scenario"], solver=rec["solver"],
                sweep_value=float(rec["sweep_value"]),
                realization=int(rec["realization"]), seed=int(rec["seed"]),
                sum_rate=float(rec["sum_rate"]),
                per_pr_rates=tuple(float(v) for v in rec["per_pr_rates"].split(";") if v),
                kl=float(rec["kl"]), pe_upper_bound=float(rec["pe_upper_bound"]),
                power_residual=float(rec["power_residual"]),
                detection_residual=float(rec["detection_residual"]),
                spacing_residual=float(rec["spacing_residual"]),
                range_residual=float(rec["range_residual"]),
                iterations=int(rec["iterations"]), wall_ms=float(rec["wall_ms"]),
                failed=rec["failed"] == "true", error=rec["error"]))
    return rows


# -- spec files ---------------------------------------------------------------

def _config_from_section(cls, section, **overrides):
    kwargs = dict(overrides)
    valid = {f.name: f.type for f in fields(cls)}
    for key, raw in section.items():
        if key not in valid:
            raise ValueError(f"unknown key {key!r} for {cls.__name__}")
        current = getattr(cls(), key)
        if isinstance(current, bool):
            kwargs[key] = raw.strip().lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            kwargs[key] = int(raw)
        elif isinstance(current, float):
            kwargs[key] = float(raw)
        else:
            kwargs[key] = raw.strip()
    return cls(**kwargs)


def load_spec(path: str | Path) -> ExperimentSpec:
    """Parse an INI experiment spec; dBm fields are converted here, once."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    text = Path(path).read_text(encoding="utf-8")
    parser.read_string(text, source=str(path))

    exp = parser["experiment"]
    sys_section = dict(parser["system"]) if parser.has_section("system") else {}

    sys_kwargs = {}
    if "transmit_power_dbm" in sys_section:
        sys_kwargs["max_power_w"] = dbm_to_watt(float(sys_section.pop("transmit_power_dbm")))
    if "noise_power_dbm_pr" in sys_section:
        sys_kwargs["noise_power_w_pr"] = dbm_to_watt(float(sys_section.pop("noise_power_dbm_pr")))
    if "noise_power_dbm_ir" in sys_section:
        sys_kwargs["noise_power_w_ir"] = dbm_to_watt(float(sys_section.pop("noise_power_dbm_ir")))
    if "bd_position_m" in sys_section:
        sys_kwargs["bd_position_m"] = tuple(
            float(v) for v in sys_section.pop("bd_position_m").split(","))
    for key, raw in sys_section.items():
        f_types = {f.name: f for f in fields(SystemConfig)}
        if key not in f_types:
            raise ValueError(f"unknown [system] key {key!r}")
        default = getattr(SystemConfig(), key)
        sys_kwargs[key] = int(raw) if isinstance(default, int) else float(raw)
    system = SystemConfig(**sys_kwargs)

    def section_or_default(name, cls):
        if parser.has_section(name):
            return _config_from_section(cls, parser[name])
        return cls()

    return ExperimentSpec(
        scenario=exp.get("scenario", Path(path).stem),
        system=system,
        solvers=tuple(s.strip() for s in exp.get("solvers", "lgd,scapso").split(",") if s.strip()),
        sweep_axis=exp.get("sweep_axis", "transmit_power_dbm"),
        sweep_values=tuple(float(v) for v in exp.get("sweep_values", "30").split(",")),
        num_realizations=exp.getint("num_realizations", 1),
        master_seed=exp.getint("master_seed", 0),
        lgd=section_or_default("lgd", LgdConfig),
        sca=section_or_default("sca", ScaConfig),
        pso=section_or_default("pso", PsoConfig),
        elementwise=section_or_default("elementwise", ElementWiseConfig),
    )
