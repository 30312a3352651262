"""Experiment configuration, ensemble orchestration and aggregation."""
import math
import os
import time
from dataclasses import dataclass, field
from multiprocessing import Pool, cpu_count
from typing import Any, Dict, List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config import (
    BOUNDARY_WINDOW,
    BOUND_K,
    CUTOFF_M,
    DELTA0,
    GRID_POINTS,
    INTERIOR_MARGIN,
    MAX_DIVERGED_FRACTION,
    PRESETS,
    SCHEMA_VERSION,
    SNAPSHOTS,
    TIME_HORIZON,
    TIME_LAG_OCTAVES,
)
from coefficients import as_field, sample_times
from estimators import (
    HolderTargets,
    decay_profile,
    default_alpha_beta,
    default_space_lags,
    dyadic_lags,
    guarded,
    holder_exponent_space,
    holder_exponent_time,
    space_increments,
    target_exponents,
    target_violations,
    time_increments,
    weighted_holder_field,
)
from export import list_trajectories, read_trajectory, trajectory_path, write_trajectory
from noise import RngStream
from solver import SchemeSpec, SpdeProblem, Trajectory, check_max_principle, initial_profile, simulate_path
from weight import WeightFn, check_generator_condition, make_psi

PathRecord = Dict[str, Any]


class ConfigError(ValueError):
    """Every violated constraint of an experiment file, plus the line of a parse error."""

    def __init__(self, violations: List[str], line: Optional[int] = None):
        self.violations = list(violations)
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + "; ".join(self.violations))


class ExperimentConfig(BaseModel):
    """Flat experiment schema; every field documents its admissible range."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    preset: Optional[str] = None
    # problem
    a: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    b: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    c: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    xi: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    lam: float = Field(0.0, ge=0.0, lt=0.5)
    u0: Literal["sine", "parabola", "bump", "zero"] = "parabola"
    T: float = Field(TIME_HORIZON, gt=0.0)
    noise_mode: Literal["multiplicative", "additive"] = "multiplicative"
    delta0: float = Field(DELTA0, gt=0.0)
    K: float = Field(BOUND_K, gt=0.0)
    # scheme
    N: int = Field(GRID_POINTS, ge=8)
    dt: Optional[float] = Field(None, gt=0.0)
    K_modes: Optional[int] = Field(None, ge=1)
    m: float = Field(CUTOFF_M, gt=0.0)
    snapshots: int = Field(SNAPSHOTS, ge=1)
    # estimation
    kappa: float = Field(0.25, gt=0.0, lt=0.5)
    p: float = Field(16.0, gt=1.0)
    theta: float = 1.0
    alpha: Optional[float] = None
    beta: Optional[float] = None
    delta: float = Field(0.0, ge=0.0)
    margin: float = Field(INTERIOR_MARGIN, gt=0.0, lt=0.5)
    boundary_window: float = Field(BOUNDARY_WINDOW, gt=0.0, le=0.1)
    statistic: Literal["median", "mean", "max"] = "median"
    # ensemble
    paths: int = Field(16, ge=0)
    seed: int = Field(0, ge=0)
    out: str = "outputs"

    @model_validator(mode="after")
    def _cross_field(self) -> "ExperimentConfig":
        problems = target_violations(self.kappa, self.lam, self.p, self.theta, self.alpha, self.beta, self.delta)
        if (self.alpha is None) != (self.beta is None):
            problems.append("alpha and beta must be given together")
        if self.K_modes is not None and self.K_modes > self.N - 1:
            problems.append("K_modes > N-1")
        if self.preset is not None and self.preset not in PRESETS:
            problems.append(f"unknown preset '{self.preset}'")
        problems.extend(coefficient_violations(self))
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def targets(self) -> HolderTargets:
        if self.alpha is None:
            alpha, beta = default_alpha_beta(self.kappa, self.p)
        else:
            alpha, beta = self.alpha, self.beta
        return HolderTargets(
            kappa=self.kappa, lam=self.lam, p=self.p, theta=self.theta, alpha=alpha, beta=beta, delta=self.delta
        )

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return build_config(values)


COEFFICIENT_RULES = {
    "a_lower_bound": "a < delta0 somewhere (need a >= delta0)",
    "c2_bound": "|a|+|b|+|c| in C2 >= K",
    "xi_bound": "sup|xi| > K",
    "u0_nonnegative": "u0 < 0 somewhere",
}


def coefficient_violations(config: ExperimentConfig) -> List[str]:
    """Coefficient assumptions and the generator condition of psi, named like the inequalities."""
    rules = build_problem(config).validate()
    out = [COEFFICIENT_RULES[name] for name in COEFFICIENT_RULES if not rules[name]]
    a = as_field(config.a)
    psi = make_psi(config.K, config.delta0)
    generator = check_generator_condition(
        psi, a, a.derivative(), as_field(config.b), max(config.N, 1024), sample_times(config.T, 5)
    )
    if generator["status"] == "fail":
        out.append(f"a psi'' + (2a_x - b) psi' > 0 somewhere (worst {generator['worst']:.3g})")
    elif any(v.startswith("|2a_x - b|") for v in generator["precondition_violations"]):
        out.append("sup|2a_x - b| > 3K")
    return out


def _describe(err: Dict[str, Any]) -> List[str]:
    msg = str(err.get("msg", ""))
    if msg.startswith("Value error, "):
        return msg[len("Value error, ") :].split("; ")
    loc = ".".join(str(part) for part in err.get("loc", ()))
    return [f"{loc}: {msg}" if loc else msg]


def build_config(mapping: Dict[str, Any]) -> ExperimentConfig:
    """Merge the named preset under ``mapping`` and validate."""
    mapping = dict(mapping)
    nested = [k for k, v in mapping.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError([f"{k}: nested mappings are not allowed" for k in sorted(nested)])
    name = mapping.get("preset")
    if name is not None and name not in PRESETS:
        raise ConfigError([f"unknown preset '{name}' (known: {', '.join(sorted(PRESETS))})"])
    merged = dict(PRESETS.get(name, {})) if name else {}
    merged.update(mapping)
    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as exc:
        violations: List[str] = []
        for err in exc.errors():
            violations.extend(_describe(err))
        raise ConfigError(violations) from exc


def loads_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError([f"parse error: {problem}"], line) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(["config must be a flat key-value mapping"])
    return build_config(data)


def load_config(path: str) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError([f"config file not found: {path}"])
    with open(path, encoding="utf-8") as f:
        return loads_config(f.read())


def serialize_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.model_dump(), sort_keys=True, default_flow_style=None)


def build_problem(config: ExperimentConfig) -> SpdeProblem:
    return SpdeProblem.build(
        a=config.a,
        b=config.b,
        c=config.c,
        xi=config.xi,
        lam=config.lam,
        u0=initial_profile(config.u0, config.N),
        T=config.T,
        delta0=config.delta0,
        K=config.K,
        noise_mode=config.noise_mode,
    )


def build_scheme(config: ExperimentConfig) -> SchemeSpec:
    return SchemeSpec(
        N=config.N,
        m=config.m,
        dt=config.dt,
        K_modes=config.K_modes,
        snapshots=config.snapshots,
        nu=config.targets().cutoff_exponent,
    )


def _curves(traj: Trajectory, config: ExperimentConfig) -> Dict[str, Any]:
    """Log-log increment series and the boundary profile behind the path's estimates."""
    N = traj.N
    lo = int(math.ceil(config.margin * N))
    lags = default_space_lags(N, config.margin)
    space = np.median([space_increments(row, lags, lo, N - lo, config.statistic) for row in traj.values], axis=0)
    out: Dict[str, Any] = {
        "space_lags": [l / N for l in lags],
        "space_increments": space.tolist(),
    }
    if len(traj.times) >= 64:
        tlags = dyadic_lags(len(traj.times) // 8, TIME_LAG_OCTAVES)
        i_lo, i_hi = int(math.ceil(0.25 * N)), int(math.floor(0.75 * N))
        per_x = [time_increments(traj.values[:, i], tlags, config.statistic) for i in range(i_lo, i_hi + 1)]
        tau = float(np.mean(np.diff(traj.times)))
        out["time_lags"] = [l * tau for l in tlags]
        out["time_increments"] = np.median(per_x, axis=0).tolist()
    prof = decay_profile(traj, (2.0 / N, config.boundary_window))
    out["decay_rho"] = prof["rho"].tolist()
    out["decay_left"] = prof["left"].tolist()
    out["decay_right"] = prof["right"].tolist()
    return out


def analyze_path(traj: Trajectory, config: ExperimentConfig, psi: WeightFn, targets: HolderTargets) -> PathRecord:
    """Every estimator on one trajectory."""
    record: PathRecord = {
        "path_index": int(traj.path_index),
        "status": "diverged" if traj.diverged else "ok",
        "error": None,
        "cutoff_active": bool(traj.cutoff_active),
        "cutoff_exit_time": traj.cutoff_exit_time,
        "max_weighted_sup": float(traj.max_weighted_sup),
        "running_min": float(traj.running_min),
        "negativity_tol": float(traj.negativity_tol),
    }
    record["max_principle"] = check_max_principle(traj, traj.negativity_tol)["passed"]
    if traj.diverged:
        return record
    window = (2.0 / traj.N, config.boundary_window)
    report = weighted_holder_field(traj, targets, psi, statistic=config.statistic, fit_window=window)
    report.interior = {
        "space": guarded(holder_exponent_space, traj, margin=config.margin, statistic=config.statistic),
        "time": guarded(holder_exponent_time, traj, statistic=config.statistic),
    }
    record["report"] = report.to_dict()
    try:
        record["curves"] = _curves(traj, config)
    except ValueError:
        record["curves"] = {}
    return record


def _simulate_task(task) -> Trajectory:
    config, index = task
    return simulate_path(build_problem(config), build_scheme(config), RngStream(config.seed, index))


def _path_task(task) -> PathRecord:
    """One ensemble work unit: simulate, persist, analyze. Failures become records."""
    config, index, directory = task
    try:
        traj = _simulate_task((config, index))
        if directory is not None:
            write_trajectory(traj, trajectory_path(directory, index))
        targets = config.targets()
        return analyze_path(traj, config, make_psi(config.K, config.delta0), targets)
    except Exception as exc:  # noqa: BLE001 - recorded per path
        return {"path_index": index, "status": "error", "error": f"{type(exc).__name__}: {exc}"}


def _analyze_task(task) -> PathRecord:
    config, path = task
    traj = read_trajectory(path)
    try:
        return analyze_path(traj, config, make_psi(config.K, config.delta0), config.targets())
    except Exception as exc:  # noqa: BLE001
        return {"path_index": int(traj.path_index), "status": "error", "error": f"{type(exc).__name__}: {exc}"}


def _map(fn, tasks: List[Any], workers: Optional[int]) -> List[Any]:
    workers = cpu_count() if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with Pool(processes=min(workers, len(tasks))) as pool:
        return pool.map(fn, tasks)


@dataclass
class EnsembleReport:
    config: Dict[str, Any]
    paths: List[PathRecord]
    aggregate: Dict[str, Any]
    targets: Dict[str, float]
    invalid: bool = False
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """Deterministic part of the report; wall-clock metadata is kept apart."""
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "targets": self.targets,
            "aggregate": self.aggregate,
            "invalid": self.invalid,
            "paths": self.paths,
        }


def _summary(values: List[float]) -> Dict[str, Any]:
    if not values:
        return {"count": 0, "median": None, "iqr": [None, None]}
    q25, q50, q75 = np.percentile(values, [25, 50, 75])
    return {"count": len(values), "median": float(q50), "iqr": [float(q25), float(q75)]}


def _estimates(records: List[PathRecord], *keys: str) -> List[float]:
    out = []
    for rec in records:
        node: Any = rec.get("report")
        for key in keys:
            node = node.get(key) if isinstance(node, dict) else None
        if isinstance(node, dict) and node.get("defined"):
            out.append(float(node["estimate"]))
    return out


def aggregate(records: List[PathRecord]) -> Dict[str, Any]:
    """Statistics recomputable from the per-path records."""
    total = len(records)
    ok = [r for r in records if r["status"] == "ok"]
    diverged = sum(1 for r in records if r["status"] == "diverged")
    errors = sum(1 for r in records if r["status"] == "error")
    simulated = [r for r in records if r["status"] != "error"]
    finite = [r for r in ok if r["report"]["weighted_sup_finite"]]
    bounded = [r for r in ok if r["report"]["weighted_sup_bounded"]]
    return {
        "paths": total,
        "included": len(ok),
        "excluded": total - len(ok),
        "diverged": diverged,
        "errors": errors,
        "diverged_fraction": diverged / total if total else 0.0,
        "interior_space": _summary(_estimates(ok, "interior", "space")),
        "interior_time": _summary(_estimates(ok, "interior", "time")),
        "weighted_space": _summary(_estimates(ok, "space_exponent")),
        "weighted_time": _summary(_estimates(ok, "time_exponent")),
        "boundary_slope": _summary(_estimates(ok, "boundary_slope")),
        "weighted_sup_finite_fraction": len(finite) / len(ok) if ok else 0.0,
        "weighted_sup_bounded_fraction": len(bounded) / len(ok) if ok else 0.0,
        "cutoff_active_fraction": (sum(1 for r in simulated if r["cutoff_active"]) / len(simulated)) if simulated else 0.0,
        "negativity": {
            "worst": min((r["running_min"] for r in simulated), default=0.0),
            "passed_fraction": (sum(1 for r in simulated if r["max_principle"]) / len(simulated)) if simulated else 1.0,
            "tolerance": max((r["negativity_tol"] for r in simulated), default=0.0),
        },
    }


def build_report(config: ExperimentConfig, records: List[PathRecord], elapsed: float = 0.0, workers: int = 1) -> EnsembleReport:
    records = sorted(records, key=lambda r: r["path_index"])
    agg = aggregate(records)
    invalid = agg["diverged_fraction"] > MAX_DIVERGED_FRACTION or agg["errors"] > 0
    return EnsembleReport(
        config=config.model_dump(),
        paths=records,
        aggregate=agg,
        targets=target_exponents(config.targets()),
        invalid=invalid,
        metadata={
            "wall_clock_s": elapsed,
            "paths_per_s": len(records) / elapsed if elapsed > 0 else None,
            "workers": workers,
        },
    )


def simulate_ensemble(config: ExperimentConfig, workers: Optional[int] = None) -> List[Trajectory]:
    """Trajectories only, in path-index order."""
    return _map(_simulate_task, [(config, i) for i in range(config.paths)], workers)


def run_ensemble(config: ExperimentConfig, workers: Optional[int] = None, persist: bool = True) -> EnsembleReport:
    """Simulate ``config.paths`` paths, write ``path_<i>.csv`` files and aggregate."""
    directory = os.path.join(config.out, "paths") if persist else None
    if directory is not None:
        os.makedirs(directory, exist_ok=True)
    start = time.perf_counter()
    tasks = [(config, i, directory) for i in range(config.paths)]
    records = _map(_path_task, tasks, workers)
    elapsed = time.perf_counter() - start
    return build_report(config, records, elapsed, workers or cpu_count())


def analyze_saved(config: ExperimentConfig, directory: str, workers: Optional[int] = None) -> EnsembleReport:
    """Re-run the estimators on persisted trajectories without re-simulating."""
    paths = list_trajectories(directory)
    start = time.perf_counter()
    records = _map(_analyze_task, [(config, p) for p in paths], workers)
    return build_report(config, records, time.perf_counter() - start, workers or cpu_count())
