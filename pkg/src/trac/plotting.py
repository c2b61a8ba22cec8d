"""Figures for a finished run: reward/cost scatter, learning curves, partition view.

Each figure is written as SVG next to a CSV holding the plotted points.
SVG output is made reproducible by fixing the hash salt and dropping the date.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "trac"

_SVG_META = {"Date": None, "Creator": None}
_ORIGIN_COLORS = {"safe_top": "tab:green", "safe_bottom": "tab:olive", "unsafe": "tab:red", "safe_unused": "tab:gray"}


def _rows(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def _write_points(path: str, fields: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        w.writerows(rows)


def _save(fig, path: str) -> None:
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_reward_cost(summary_csv: str, out_dir: str, name: str = "reward_cost") -> tuple[str, str]:
    """Normalized reward against normalized cost, one marker per method and seed."""
    rows = [r for r in _rows(summary_csv) if r.get("seed") != "mean"]
    key = "method" if rows and "method" in rows[0] else "variant"
    points = [(r[key], r["seed"], float(r["normalized_cost"]), float(r["normalized_reward"])) for r in rows]
    csv_path, svg_path = os.path.join(out_dir, f"{name}.csv"), os.path.join(out_dir, f"{name}.svg")
    _write_points(csv_path, [key, "seed", "normalized_cost", "normalized_reward"], points)

    fig, ax = plt.subplots(figsize=(5, 4))
    for label in dict.fromkeys(p[0] for p in points):
        xs = [p[2] for p in points if p[0] == label]
        ys = [p[3] for p in points if p[0] == label]
        ax.scatter(xs, ys, label=label, alpha=0.8)
    ax.axvline(1.0, color="k", linestyle="--", linewidth=1)
    ax.set_xlabel("normalized cost")
    ax.set_ylabel("normalized reward")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, svg_path)
    return csv_path, svg_path


def plot_learning_curves(trainlog_csvs: dict[str, str], out_dir: str, name: str = "learning_curves") -> tuple[str, str]:
    """Loss and mean scores per class against step; ``trainlog_csvs`` maps label to path."""
    csv_path, svg_path = os.path.join(out_dir, f"{name}.csv"), os.path.join(out_dir, f"{name}.svg")
    fig, (ax_loss, ax_psi) = plt.subplots(1, 2, figsize=(9, 3.5))
    points = []
    for label, path in trainlog_csvs.items():
        rows = _rows(path)
        steps = [int(r["step"]) for r in rows]
        loss = [float(r["loss"]) for r in rows]
        psi_d = [float(r["mean_psi_desirable"]) for r in rows]
        psi_u = [float(r["mean_psi_undesirable"]) for r in rows]
        points += [(label, s, l, d, u) for s, l, d, u in zip(steps, loss, psi_d, psi_u)]
        ax_loss.plot(steps, loss, label=label)
        ax_psi.plot(steps, psi_d, label=f"{label} desirable")
        ax_psi.plot(steps, psi_u, linestyle="--", label=f"{label} undesirable")
    _write_points(csv_path, ["run", "step", "loss", "mean_psi_desirable", "mean_psi_undesirable"], points)
    ax_loss.set_xlabel("step")
    ax_loss.set_ylabel("loss")
    ax_psi.set_xlabel("step")
    ax_psi.set_ylabel("mean score")
    ax_loss.legend(frameon=False, fontsize=7)
    ax_psi.legend(frameon=False, fontsize=7)
    fig.tight_layout()
    _save(fig, svg_path)
    return csv_path, svg_path


def plot_partition(partition_csv: str, out_dir: str, cost_threshold: float | None = None,
                   name: str = "partition") -> tuple[str, str]:
    """Dataset trajectories in (cost, return) space colored by contrastive origin."""
    rows = _rows(partition_csv)
    csv_path, svg_path = os.path.join(out_dir, f"{name}.csv"), os.path.join(out_dir, f"{name}.svg")
    _write_points(csv_path, ["traj_id", "cost", "return", "origin"],
                  [(r["traj_id"], r["cost"], r["return"], r["origin"]) for r in rows])
    fig, ax = plt.subplots(figsize=(5, 4))
    for origin, color in _ORIGIN_COLORS.items():
        sel = [r for r in rows if r["origin"] == origin]
        if sel:
            ax.scatter([float(r["cost"]) for r in sel], [float(r["return"]) for r in sel], s=6, color=color,
                       label=origin, alpha=0.6)
    if cost_threshold is not None:
        ax.axvline(cost_threshold, color="k", linestyle="--", linewidth=1)
    ax.set_xlabel("cost")
    ax.set_ylabel("return")
    ax.legend(frameon=False, markerscale=2)
    fig.tight_layout()
    _save(fig, svg_path)
    return csv_path, svg_path


def plot_run(out_dir: str, cost_threshold: float | None = None) -> list[str]:
    """Render every figure whose inputs exist under a pipeline output directory."""
    written = []
    summary = os.path.join(out_dir, "summary.csv")
    if os.path.exists(summary):
        written += plot_reward_cost(summary, out_dir)
    partition = os.path.join(out_dir, "partition.csv")
    if os.path.exists(partition):
        written += plot_partition(partition, out_dir, cost_threshold)
    logs = {}
    for entry in sorted(os.listdir(out_dir)):
        path = os.path.join(out_dir, entry, "trainlog.csv")
        if entry.startswith("seed_") and os.path.exists(path):
            logs[entry] = path
    if logs:
        written += plot_learning_curves(logs, out_dir)
    for entry in sorted(os.listdir(out_dir)):
        if entry.startswith(("ablation_", "sweep_")) and entry.endswith(".csv") and not entry.endswith("_scatter.csv"):
            written += plot_reward_cost(os.path.join(out_dir, entry), out_dir, name=entry[:-4] + "_scatter")
    return written
