"""Execute one experiment config and lay out its artifacts.

    <out>/config.json        resolved config (the replay reference)
    <out>/metrics.jsonl      one MetricsRecord per cadence tick
    <out>/summary.csv        last record of every run id
    <out>/results.json       headline numbers of the experiment
    <out>/checkpoints/*.grmw last good weights of every run
    <out>/panels/*.csv       plot-ready long-form tables
    <out>/figures/*.png      the same panels rendered
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

from .config import ExperimentConfig, config_hash
from .experiments import EXPERIMENT_FUNCS, RunContext, save_results
from .records import MetricsWriter, read_metrics, summary_table, write_panel

log = logging.getLogger(__name__)


def _finalize(ctx: RunContext, render: bool) -> None:
    metrics_path = ctx.out / "metrics.jsonl"
    (ctx.out / "summary.csv").write_text(summary_table(read_metrics(metrics_path)))
    save_results(ctx)
    panel_dir = ctx.out / "panels"
    panel_dir.mkdir(exist_ok=True)
    for name, rows in ctx.panels.items():
        write_panel(panel_dir / f"{name}.csv", rows)
    if render and ctx.panels:
        from .plotting import render_all

        render_all(panel_dir, ctx.out / "figures")


def run(cfg: dict | ExperimentConfig, out_dir, data_dir=None, seed: int | None = None, render: bool = True) -> RunContext:
    """Run an experiment; artifacts are written even when it fails part-way."""
    raw = dict(cfg.raw if isinstance(cfg, ExperimentConfig) else cfg)
    if seed is not None:
        raw["seed"] = int(seed)
    conf = ExperimentConfig.from_dict(raw)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(conf.raw, indent=2, sort_keys=True) + "\n")
    metrics = MetricsWriter(out / "metrics.jsonl", config_hash(conf.raw))
    ctx = RunContext(conf.raw, out, Path(data_dir) if data_dir else None, metrics)
    log.info("running %s -> %s", conf.experiment, out)
    try:
        EXPERIMENT_FUNCS[conf.experiment](ctx)
    except Exception as exc:
        ctx.results["error"] = f"{type(exc).__name__}: {exc}"
        _finalize(ctx, render=False)
        raise
    _finalize(ctx, render)
    return ctx
