"""Render panel CSVs to PNG files with matplotlib (Agg backend)."""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_LOG_Y = {"surrogate_by_layer"}


def _num(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return None


def render_panel(csv_path, png_path) -> bool:
    """Draw one long-form panel (columns ``x``, ``series``, ``y``; optional ``c`` for colour).

    Returns False when the panel has nothing numeric to plot.
    """
    with Path(csv_path).open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return False
    name = Path(csv_path).stem
    scatter = "c" in rows[0]
    series = defaultdict(list)
    for r in rows:
        series[r.get("series", "")].append(r)
    fig, ax = plt.subplots(figsize=(6, 4))
    if scatter:
        groups = list(series)
        fig.clf()
        axes = fig.subplots(1, len(groups), squeeze=False)[0]
        fig.set_size_inches(3 * len(groups), 3)
        for a, g in zip(axes, groups):
            pts = [(float(r["x"]), float(r["y"]), float(r["c"])) for r in series[g]]
            xs, ys, cs = zip(*pts)
            a.scatter(xs, ys, c=cs, s=3, cmap="viridis")
            a.set_title(g, fontsize=8)
            a.set_aspect("equal", adjustable="datalim")
    else:
        numeric_x = all(_num(r["x"]) is not None for r in rows)
        if not numeric_x:
            labels = [r["x"] for r in rows]
            ax.bar(range(len(rows)), [_num(r["y"]) or 0.0 for r in rows])
            ax.set_xticks(range(len(rows)), labels, rotation=60, ha="right", fontsize=7)
        else:
            for label, pts in series.items():
                xy = [(_num(r["x"]), _num(r["y"])) for r in pts if _num(r["y"]) is not None]
                if xy:
                    xs, ys = zip(*xy)
                    ax.plot(xs, ys, label=label, lw=1)
            if len(series) <= 12:
                ax.legend(fontsize=7)
        if name in _LOG_Y:
            ax.set_yscale("log")
        ax.set_title(name)
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)
    return True


def render_all(panel_dir, figure_dir) -> list[Path]:
    figure_dir = Path(figure_dir)
    figure_dir.mkdir(parents=True, exist_ok=True)
    out = []
    for path in sorted(Path(panel_dir).glob("*.csv")):
        target = figure_dir / (path.stem + ".png")
        if render_panel(path, target):
            out.append(target)
    return out
