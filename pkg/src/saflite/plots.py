"""Figure rendering for campaign reports: arena views, histograms, timelines."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Polygon  # noqa: E402

from .core import Mission, Obstacle, ScenarioBody, case_from_json  # noqa: E402
from .sut import Trajectory  # noqa: E402

DEFAULT_MAX_CASE_FIGURES = 6


def _obstacle_footprint(ob: Obstacle) -> list[tuple[float, float]]:
    cx, cy, _ = ob.center
    hx, hy, _ = ob.half_extents()
    yaw = math.radians(ob.yaw_deg)
    c, s = math.cos(yaw), math.sin(yaw)
    corners = []
    for dx, dy in ((-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)):
        corners.append((cx + c * dx - s * dy, cy + s * dx + c * dy))
    return corners


def draw_arena(ax, mission: Optional[Mission], obstacles, trajectory=None,
               title: str = "") -> None:
    """Top-down view: route, obstacle footprints, and optionally the flown path."""
    if mission is not None:
        xs = [w[0] for w in mission.waypoints]
        ys = [w[1] for w in mission.waypoints]
        ax.plot(xs, ys, "o--", color="tab:blue", label="route", zorder=2)
        ax.annotate("start", (xs[0], ys[0]), fontsize=8)
    for ob in obstacles:
        ax.add_patch(Polygon(_obstacle_footprint(ob), closed=True,
                             facecolor="tab:red", alpha=0.5, edgecolor="black",
                             zorder=3))
    if trajectory is not None and len(trajectory) > 0:
        ax.plot([p[0] for p in trajectory.positions],
                [p[1] for p in trajectory.positions],
                color="tab:green", linewidth=1.2, label="flown", zorder=4)
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(loc="upper right", fontsize=8)


def render_run_figures(report: dict, run_dir, mission: Optional[Mission] = None,
                       max_case_figures: int = DEFAULT_MAX_CASE_FIGURES) -> list[Path]:
    """Render summary figures for a finished run into <run_dir>/figures."""
    run_dir = Path(run_dir)
    fig_dir = run_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = []

    hist = report.get("category_histogram", {})
    fig, ax = plt.subplots(figsize=(4.5, 3))
    labels = list(hist.keys())
    ax.bar(labels, [hist[k] for k in labels], color=["#999999", "#e6b84c", "#c0392b"])
    ax.set_ylabel("scored mutants")
    ax.set_title("score categories")
    fig.tight_layout()
    path = fig_dir / "category_histogram.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    iterations = report.get("iterations_run", 0)
    counts = [0] * (iterations + 1)
    for v in report.get("violations", []):
        if v["iteration"] <= iterations:
            counts[v["iteration"]] += 1
    cumulative = []
    total = 0
    for c in counts:
        total += c
        cumulative.append(total)
    fig, ax = plt.subplots(figsize=(4.5, 3))
    ax.step(range(iterations + 1), cumulative, where="post")
    ax.set_xlabel("iteration")
    ax.set_ylabel("violations found")
    ax.set_title("violation discovery")
    fig.tight_layout()
    path = fig_dir / "violations_timeline.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    if report.get("mode") == "scenario":
        for v in report.get("violations", [])[:max_case_figures]:
            case = case_from_json(v["case"])
            if not isinstance(case.body, ScenarioBody):
                continue
            traj_path = run_dir / "trajectories" / f"{case.id}.csv"
            trajectory = Trajectory.from_csv(traj_path) if traj_path.exists() else None
            fig, ax = plt.subplots(figsize=(5, 5))
            verdict = v["verdict"]
            title = (f"{case.id}: {verdict['kind']} "
                     f"(d_min={verdict.get('min_distance', 0.0):.2f} m)")
            draw_arena(ax, mission, case.body.obstacles, trajectory, title)
            fig.tight_layout()
            path = fig_dir / f"violation_{case.id}.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(path)
    return written


def render_paired_figures(series: dict, out_dir) -> list[Path]:
    """Per-seed guided/baseline bars for a paired experiment series."""
    out_dir = Path(out_dir)
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    rows = series.get("rows", [])
    seeds = [str(r["rng_seed"]) for r in rows]
    guided = [r["guided_valid"] for r in rows]
    baseline = [r["baseline_valid"] for r in rows]
    x = range(len(rows))
    width = 0.4
    fig, ax = plt.subplots(figsize=(max(5.0, 0.5 * len(rows) + 2), 3.2))
    ax.bar([i - width / 2 for i in x], guided, width, label="guided", color="#2c7fb8")
    ax.bar([i + width / 2 for i in x], baseline, width, label="baseline", color="#bdbdbd")
    ax.set_xticks(list(x))
    ax.set_xticklabels(seeds, fontsize=8)
    ax.set_xlabel("rng seed")
    ax.set_ylabel("unique violating cases")
    ax.set_title("guided vs baseline")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = fig_dir / "paired_valid_cases.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]
