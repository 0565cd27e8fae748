"""Command-line entry point: ``gramlab run|replay|probe|check|config``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import EXPERIMENTS, default_config, load_config
from .errors import AcceptanceFailure, GramLabError

log = logging.getLogger("gramlab")


def _cmd_run(args) -> int:
    from .runner import run

    cfg = load_config(args.config)
    out = Path(args.out) if args.out else Path("runs") / cfg["experiment"]
    ctx = run(cfg, out, args.data_dir, args.seed, render=not args.no_figures)
    print(json.dumps(ctx.results, indent=2, sort_keys=True, default=float))
    print(f"artifacts written to {out}")
    return 0


def _cmd_replay(args) -> int:
    from .records import replay

    report = replay(args.metrics)
    print(report.render())
    return 0 if report.clean else AcceptanceFailure.exit_code


def _cmd_probe(args) -> int:
    from .probe import probe_dump

    sys.stdout.write(probe_dump(args.activations, args.targets, args.lam, args.pca))
    return 0


def _cmd_check(args) -> int:
    from .checks import run_all

    results = run_all(args.trials, args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  trials={r.trials:<4d} worst={r.worst:.3e}  ({r.limit})")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise AcceptanceFailure(f"{len(failed)} check(s) failed: {', '.join(failed)}")
    return 0


def _cmd_config(args) -> int:
    print(json.dumps(default_config(args.experiment), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gramlab", description="Weight-Gram feature-learning laboratory.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--data-dir", help="dataset directory (falls back to $DATA_DIR, then the repository data/ folder)")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering of the panel CSVs")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("replay", help="verify a metrics.jsonl against its run directory")
    p.add_argument("--metrics", required=True)
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("probe", help="layer-wise TL of dumped activations")
    p.add_argument("--activations", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--pca", type=int)
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("check", help="run the randomised property sweeps")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("config", help="print the default config of an experiment")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.set_defaults(func=_cmd_config)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be a u64", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except GramLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
