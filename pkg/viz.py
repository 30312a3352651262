import csv
import os
from collections import defaultdict
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

COLORS = {"left": "#1f77b4", "right": "#ff7f0e", "median": "#d62728"}


def _read(filepath: str) -> List[Dict[str, str]]:
    with open(filepath, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def plot_increments(filepath: str, outfile: str, title: str) -> None:
    """Per-path log-log increment curves with the pointwise median."""
    by_path: Dict[str, List] = defaultdict(list)
    for row in _read(filepath):
        by_path[row["path_index"]].append((float(row["log_lag"]), float(row["log_increment"])))

    fig, ax = plt.subplots(figsize=(7, 5))
    for points in by_path.values():
        xs, ys = zip(*points)
        ax.plot(xs, ys, color="#888888", lw=0.8, alpha=0.4)
    if by_path:
        first = next(iter(by_path.values()))
        curves = np.array([[y for _, y in pts] for pts in by_path.values() if len(pts) == len(first)])
        ax.plot([x for x, _ in first], np.median(curves, axis=0), color=COLORS["median"], lw=2, label="median")
        ax.legend(loc="lower right")
    ax.set_title(title)
    ax.set_xlabel("log lag")
    ax.set_ylabel("log increment")
    ax.grid(True, linestyle="--", alpha=0.3)
    fig.tight_layout()
    fig.savefig(outfile, dpi=150)
    plt.close(fig)


def plot_boundary_decay(filepath: str, outfile: str) -> None:
    rows = _read(filepath)
    fig, ax = plt.subplots(figsize=(7, 5))
    by_path: Dict[str, List] = defaultdict(list)
    for row in rows:
        by_path[row["path_index"]].append(row)
    for i, path_rows in enumerate(by_path.values()):
        rho = np.array([float(r["rho"]) for r in path_rows])
        for side in ("left", "right"):
            sup = np.array([float(r[f"sup_{side}"]) for r in path_rows])
            keep = sup > 0.0
            ax.loglog(rho[keep], sup[keep], color=COLORS[side], lw=0.8, alpha=0.4, label=side if i == 0 else None)
    if by_path:
        ax.legend(loc="lower right")
    ax.set_title("Boundary decay of sup_t |u|")
    ax.set_xlabel("distance to boundary")
    ax.set_ylabel("sup_t |u|")
    ax.grid(True, which="both", linestyle="--", alpha=0.3)
    fig.tight_layout()
    fig.savefig(outfile, dpi=150)
    plt.close(fig)


def plot_histograms(filepath: str, outfile: str) -> None:
    groups: Dict[str, List] = defaultdict(list)
    for row in _read(filepath):
        groups[row["quantity"]].append((float(row["bin_lo"]), float(row["bin_hi"]), int(row["count"])))
    n = max(len(groups), 1)
    fig, axes = plt.subplots(1, n, figsize=(4 * n, 3.5), squeeze=False)
    for ax, (name, bins) in zip(axes[0], groups.items()):
        lo = [b[0] for b in bins]
        width = [b[1] - b[0] for b in bins]
        ax.bar(lo, [b[2] for b in bins], width=width, align="edge", color="#1f77b4", alpha=0.8, ec="#111111")
        ax.set_title(name)
        ax.set_xlabel("exponent")
    axes[0][0].set_ylabel("paths")
    fig.tight_layout()
    fig.savefig(outfile, dpi=150)
    plt.close(fig)


def render_all(files: Dict[str, str], out: str) -> List[str]:
    """PNG for each CSV written by ``emit_plot_data``."""
    os.makedirs(out, exist_ok=True)
    pngs = []
    for kind in ("space", "time"):
        png = os.path.join(out, f"{kind}_increments.png")
        plot_increments(files[f"{kind}_increments"], png, f"{kind.capitalize()} increments")
        pngs.append(png)
    png = os.path.join(out, "boundary_decay.png")
    plot_boundary_decay(files["boundary_decay"], png)
    pngs.append(png)
    png = os.path.join(out, "exponent_histograms.png")
    plot_histograms(files["exponent_histograms"], png)
    pngs.append(png)
    return pngs
