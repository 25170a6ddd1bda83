from __future__ import annotations

import csv
import json
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import repeat
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np
from pydantic import ValidationError

from app.analytics.baselines import class_sizes, ideal_mse, local_mse
from app.analytics.oracle import OracleCurveConfig, OracleEvaluator
from app.analytics.run_log import config_hash, log_event
from app.core.config import settings
from app.core.errors import ConfigError, ParameterError, UnsupportedConfigurationError
from app.models.experiment import AssignmentKind, CurveKind, ExperimentFile, SimConfig
from app.models.results import RunResult
from app.models.summary_schema import SUMMARY_SCHEMA
from app.noise.calibration import sigma2_dp_squared, sigma_dp_squared
from app.protocol.simulation import aggregate, draw_class_assignment, run_seed

CSV_HEADER = ["t", "curve", "mse_mean", "mse_stderr", "runs"]


@dataclass(frozen=True)
class CurveRow:
    t: int
    curve: str
    mse_mean: float
    mse_stderr: float
    runs: int


# -------- Loading --------
def parse_experiment(data: Dict[str, Any]) -> ExperimentFile:
    try:
        exp = ExperimentFile.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    try:
        exp.simulation.check_supported()
    except (UnsupportedConfigurationError, ParameterError) as e:
        raise ConfigError(str(e)) from e
    return exp


def load_experiment(path: str | Path) -> ExperimentFile:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text(encoding="utf-8")
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse {p}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a table/object")
    return parse_experiment(data)


# -------- Helpers --------
def output_times(t_max: int, stride: int) -> List[int]:
    if t_max <= 0:
        return []
    ts = list(range(1, t_max + 1, stride))
    if ts[-1] != t_max:
        ts.append(t_max)
    return ts


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def sim_hash(cfg: SimConfig) -> str:
    return config_hash(cfg.model_dump_json())


# -------- Seed sweep --------
def sweep(cfg: SimConfig, seeds: Sequence[int], workers: Optional[int] = None) -> RunResult:
    cfg.check_supported()
    seeds = list(seeds)
    n_workers = settings.pool_size() if workers is None else workers
    n_workers = max(1, min(n_workers, len(seeds) or 1))
    if n_workers == 1:
        runs = [run_seed(cfg, s) for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            runs = list(pool.map(run_seed, repeat(cfg), seeds))
    return aggregate(cfg, runs)


# -------- Analytic curves --------
def _agent_sigmas(cfg: SimConfig, classes: np.ndarray) -> np.ndarray:
    return np.array([cfg.class_std(int(c)) for c in classes])


def analytic_curves(
    exp: ExperimentFile, seeds: Sequence[int], times: Sequence[int]
) -> Tuple[Dict[str, np.ndarray], List[str]]:
    cfg = exp.simulation
    ts = np.asarray(times, dtype=float)
    out: Dict[str, np.ndarray] = {}
    notes: List[str] = []
    wanted = set(exp.curves)
    if not len(ts):
        return out, notes

    assignments = [draw_class_assignment(cfg, s) for s in (seeds or [0])]
    if CurveKind.local in wanted:
        out[CurveKind.local.value] = np.mean([local_mse(_agent_sigmas(cfg, c), ts) for c in assignments], axis=0)
    if CurveKind.ideal in wanted:
        out[CurveKind.ideal.value] = np.mean(
            [ideal_mse(_agent_sigmas(cfg, c), class_sizes(c), ts) for c in assignments], axis=0
        )

    oracle_kinds = [k for k in (CurveKind.oracle_rr, CurveKind.oracle_rrr) if k in wanted]
    if oracle_kinds:
        try:
            if cfg.assignment != AssignmentKind.uniform_random:
                raise ConfigError("oracle curves assume uniformly random class assignment")
            ocfg = OracleCurveConfig.from_sim(cfg, exp.oracle_half_width, exp.oracle_combo_budget)
        except ConfigError as e:
            notes.append(f"skipping oracle curves: {e}")
        else:
            ev = OracleEvaluator(ocfg)
            if CurveKind.oracle_rr in wanted:
                out[CurveKind.oracle_rr.value] = np.array([ev.rr(int(t)) for t in times])
            if CurveKind.oracle_rrr in wanted:
                out[CurveKind.oracle_rrr.value] = np.array([ev.rrr(int(t)) for t in times])
    return out, notes


def curve_rows(
    times: Sequence[int],
    analytic: Dict[str, np.ndarray],
    result: Optional[RunResult] = None,
) -> List[CurveRow]:
    rows: List[CurveRow] = []
    for i, t in enumerate(times):
        if result is not None:
            rows.append(
                CurveRow(t, CurveKind.simulated.value, result.mse_mean[t - 1], result.mse_stderr[t - 1], len(result.seeds))
            )
        for name in sorted(analytic):
            rows.append(CurveRow(t, name, float(analytic[name][i]), 0.0, 0))
    return rows


def write_trajectory_csv(rows: Sequence[CurveRow], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([r.t, r.curve, fmt(r.mse_mean), fmt(r.mse_stderr), r.runs])


# -------- Summary --------
def _finite_or_none(x: float) -> Optional[float]:
    x = float(x)
    return x if np.isfinite(x) else None


def build_summary(
    exp: ExperimentFile,
    result: Optional[RunResult],
    analytic: Dict[str, np.ndarray],
    seeds: Sequence[int],
    wall_seconds: float,
) -> Dict[str, Any]:
    cfg = exp.simulation
    mean_p, var_p = cfg.privacy_params()

    final: Dict[str, Optional[float]] = {}
    stderr: Optional[float] = None
    if result is not None and cfg.t_max > 0:
        final[CurveKind.simulated.value] = _finite_or_none(result.mse_mean[-1])
        stderr = _finite_or_none(result.mse_stderr[-1])
    for name, values in analytic.items():
        final[name] = _finite_or_none(values[-1]) if len(values) else None

    channels = [b.to_dict() for b in result.budgets] if result is not None else []
    privacy: Dict[str, Any] = {
        "enabled": mean_p is not None,
        "mechanism": cfg.mechanism.value,
        "noise_kind": cfg.privacy.noise_kind.value if cfg.privacy is not None else None,
        "sigma_dp_sq": sigma_dp_squared(mean_p) if mean_p is not None else 0.0,
        "sigma2_dp_sq": sigma2_dp_squared(var_p) if var_p is not None else 0.0,
        "max_total_epsilon": max((c["total_epsilon"] for c in channels), default=None),
        "max_total_delta": max((c["total_delta"] for c in channels), default=None),
        "channels": channels,
    }
    accuracy = result.class_accuracy if result is not None else float("nan")
    summary = {
        "config": json.loads(cfg.model_dump_json()),
        "config_hash": sim_hash(cfg),
        "seeds": [int(s) for s in seeds],
        "t_max": cfg.t_max,
        "final_mse": final,
        "final_mse_stderr": stderr,
        "class_accuracy": _finite_or_none(accuracy),
        "class_accuracy_per_seed": list(result.class_accuracy_per_seed) if result is not None else [],
        "privacy": privacy,
        "wall_seconds": round(float(wall_seconds), 3),
    }
    jsonschema.validate(summary, SUMMARY_SCHEMA)
    return summary


def write_summary(summary: Dict[str, Any], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -------- Commands --------
def simulate_experiment(
    exp: ExperimentFile,
    seeds: Optional[Sequence[int]] = None,
    out_dir: Optional[Path] = None,
    stride: Optional[int] = None,
    workers: Optional[int] = None,
) -> Tuple[Dict[str, Any], List[CurveRow], List[str]]:
    cfg = exp.simulation
    seeds = list(seeds) if seeds is not None else exp.seed_values()
    stride = stride or exp.stride
    h = sim_hash(cfg)
    log_event({"event": "run_started", "config_hash": h, "seeds": seeds, "agents": cfg.agents, "t_max": cfg.t_max})

    started = time.perf_counter()
    result = sweep(cfg, seeds, workers)
    times = output_times(cfg.t_max, stride)
    analytic, notes = analytic_curves(exp, seeds, times)
    rows = curve_rows(times, analytic, result)
    summary = build_summary(exp, result, analytic, seeds, time.perf_counter() - started)

    if out_dir is not None:
        write_trajectory_csv(rows, out_dir / "trajectory.csv")
        write_summary(summary, out_dir / "summary.json")

    log_event({
        "event": "budget_report",
        "config_hash": h,
        "channels": len(summary["privacy"]["channels"]),
        "max_total_epsilon": summary["privacy"]["max_total_epsilon"],
        "max_total_delta": summary["privacy"]["max_total_delta"],
    })
    log_event({
        "event": "run_finished",
        "config_hash": h,
        "final_mse": summary["final_mse"].get(CurveKind.simulated.value),
        "class_accuracy": summary["class_accuracy"],
        "wall_seconds": summary["wall_seconds"],
    })
    return summary, rows, notes


def curves_experiment(
    exp: ExperimentFile,
    out_dir: Optional[Path] = None,
    stride: Optional[int] = None,
) -> Tuple[List[CurveRow], List[str]]:
    cfg = exp.simulation
    times = output_times(cfg.t_max, stride or exp.stride)
    analytic, notes = analytic_curves(exp, exp.seed_values(), times)
    rows = curve_rows(times, analytic)
    if out_dir is not None:
        write_trajectory_csv(rows, out_dir / "trajectory.csv")
    log_event({"event": "curves_written", "config_hash": sim_hash(cfg), "curves": sorted(analytic), "rows": len(rows)})
    return rows, notes
