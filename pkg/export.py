"""Persist trajectories, reports and plot series."""
import csv
import glob
import json
import math
import os
from typing import Any, Dict, List

import numpy as np

from config import HISTOGRAM_BINS, SCHEMA_VERSION
from solver import Trajectory

HISTOGRAM_QUANTITIES = (
    ("interior_space", ("interior", "space")),
    ("interior_time", ("interior", "time")),
    ("weighted_space", ("space_exponent",)),
    ("weighted_time", ("time_exponent",)),
    ("boundary_slope", ("boundary_slope",)),
)


def jsonable(value: Any) -> Any:
    """Plain JSON types; NaN and infinities become null."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(data: Dict[str, Any], filepath: str) -> None:
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(jsonable(data), f, indent=2, sort_keys=True)
        f.write("\n")


def trajectory_path(directory: str, index: int) -> str:
    return os.path.join(directory, f"path_{index}.csv")


def list_trajectories(directory: str) -> List[str]:
    files = glob.glob(os.path.join(directory, "path_*.csv"))
    return sorted(files, key=lambda p: int(os.path.basename(p)[5:-4]))


def write_trajectory(traj: Trajectory, filepath: str) -> None:
    """``# {metadata}`` line, ``t,u_0..u_N`` header, one row per snapshot in repr precision."""
    meta = dict(traj.metadata(), schema_version=SCHEMA_VERSION)
    with open(filepath, "w", newline="", encoding="utf-8") as f:
        f.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        writer = csv.writer(f)
        writer.writerow(["t"] + [f"u_{i}" for i in range(traj.N + 1)])
        for t, row in zip(traj.times, traj.values):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def read_trajectory(filepath: str) -> Trajectory:
    with open(filepath, encoding="utf-8") as f:
        first = f.readline()
        if not first.startswith("# "):
            raise ValueError(f"{filepath}: missing metadata line")
        meta = json.loads(first[2:])
        rows = list(csv.reader(f))
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{filepath}: unsupported schema_version {meta.get('schema_version')}")
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    data = data.reshape(len(rows) - 1, len(rows[0]))
    return Trajectory(
        times=data[:, 0],
        values=data[:, 1:],
        master_seed=meta["master_seed"],
        path_index=meta["path_index"],
        dt=meta["dt"],
        K_modes=meta["K_modes"],
        m=meta["m"],
        nu=meta["nu"],
        cutoff_active=meta["cutoff_active"],
        cutoff_exit_time=meta["cutoff_exit_time"],
        max_weighted_sup=meta["max_weighted_sup"],
        running_min=meta["running_min"],
        negativity_tol=meta["negativity_tol"],
        diverged=meta["diverged"],
    )


def read_sampled_function(filepath: str) -> np.ndarray:
    """u from an ``x,u`` CSV sampled on a uniform grid of [0, 1]."""
    with open(filepath, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    if not rows or not {"x", "u"} <= set(rows[0]):
        raise ValueError(f"{filepath}: expected an x,u header and at least one row")
    x = np.array([float(r["x"]) for r in rows])
    u = np.array([float(r["u"]) for r in rows])
    if len(x) < 5:
        raise ValueError(f"{filepath}: need at least 5 samples")
    if not np.allclose(x, np.linspace(0.0, 1.0, len(x)), rtol=0.0, atol=1e-9):
        raise ValueError(f"{filepath}: x must be a uniform grid from 0 to 1")
    return u


def write_report(report, filepath: str) -> None:
    data = report.to_dict() if hasattr(report, "to_dict") else dict(report)
    data.setdefault("schema_version", SCHEMA_VERSION)
    write_json(data, filepath)


def read_report(filepath: str) -> Dict[str, Any]:
    with open(filepath, encoding="utf-8") as f:
        data = json.load(f)
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{filepath}: unsupported schema_version {data.get('schema_version')}")
    return data


def _estimate(record: Dict[str, Any], keys) -> Any:
    node = record.get("report")
    for key in keys:
        node = node.get(key) if isinstance(node, dict) else None
    if isinstance(node, dict) and node.get("defined") and node.get("estimate") is not None:
        return float(node["estimate"])
    return None


def _write_rows(filepath: str, header: List[str], rows: List[List[Any]]) -> None:
    with open(filepath, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def emit_plot_data(report, out: str) -> Dict[str, str]:
    """CSV series behind the standard plots; an empty ensemble gives header-only files."""
    data = report.to_dict() if hasattr(report, "to_dict") else report
    os.makedirs(out, exist_ok=True)
    records = [r for r in data.get("paths", []) if r.get("status") == "ok"]

    increments = {"space": [], "time": []}
    decay: List[List[Any]] = []
    for rec in records:
        curves = rec.get("curves") or {}
        idx = int(rec["path_index"])
        for kind in ("space", "time"):
            lags = curves.get(f"{kind}_lags", [])
            values = curves.get(f"{kind}_increments", [])
            for lag, value in zip(lags, values):
                if value is not None and value > 0.0:
                    increments[kind].append([idx, math.log(lag), math.log(value)])
        for rho_x, left, right in zip(curves.get("decay_rho", []), curves.get("decay_left", []), curves.get("decay_right", [])):
            decay.append([idx, float(rho_x), float(left), float(right)])

    files = {
        "space_increments": os.path.join(out, "space_increments.csv"),
        "time_increments": os.path.join(out, "time_increments.csv"),
        "boundary_decay": os.path.join(out, "boundary_decay.csv"),
        "exponent_histograms": os.path.join(out, "exponent_histograms.csv"),
    }
    for kind in ("space", "time"):
        _write_rows(files[f"{kind}_increments"], ["path_index", "log_lag", "log_increment"], increments[kind])
    _write_rows(files["boundary_decay"], ["path_index", "rho", "sup_left", "sup_right"], decay)

    hist_rows: List[List[Any]] = []
    for name, keys in HISTOGRAM_QUANTITIES:
        values = [v for v in (_estimate(r, keys) for r in records) if v is not None and math.isfinite(v)]
        if not values:
            continue
        counts, edges = np.histogram(values, bins=HISTOGRAM_BINS)
        for count, lo, hi in zip(counts, edges[:-1], edges[1:]):
            hist_rows.append([name, float(lo), float(hi), int(count)])
    _write_rows(files["exponent_histograms"], ["quantity", "bin_lo", "bin_hi", "count"], hist_rows)
    return files
