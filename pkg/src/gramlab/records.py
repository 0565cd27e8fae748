"""Run artifacts: metrics JSONL, summary table, panel CSVs and replay checks."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from .config import canonical_json, config_hash, validate
from .errors import DataError

VOLATILE = ("wall_time", "row_hash")


def _clean(value):
    """JSON-safe copy: numpy scalars become floats, non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def row_hash(record: dict) -> str:
    body = {k: v for k, v in record.items() if k not in VOLATILE}
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()[:16]


@dataclass
class MetricsWriter:
    """Appends one JSON object per line; each row carries a hash of its own content."""

    path: Path
    config_hash: str
    t0: float = field(default_factory=time.perf_counter)

    def __post_init__(self):
        self.path = Path(self.path)
        self.path.write_text("")

    def write(self, run_id: str, step: int, epoch: int, optimizer: str, **fields) -> dict:
        record = _clean({
            "run_id": run_id,
            "step": int(step),
            "epoch": int(epoch),
            "optimizer": optimizer,
            "config_hash": self.config_hash,
            **fields,
        })
        record["wall_time"] = round(time.perf_counter() - self.t0, 6)
        record["row_hash"] = row_hash(record)
        with self.path.open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True, allow_nan=False) + "\n")
        return record


def read_metrics(path) -> list[dict]:
    rows = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
    return rows


def _flatten(record: dict) -> dict:
    flat = {}
    for k, v in record.items():
        if k in VOLATILE:
            continue
        if k == "layers" and isinstance(v, list):
            for entry in v:
                for name, val in entry.items():
                    if name != "layer":
                        flat[f"{name}_L{entry['layer']}"] = val
        elif isinstance(v, dict):
            for name, val in v.items():
                if not isinstance(val, (dict, list)):
                    flat[f"{k}.{name}"] = val
        elif not isinstance(v, list):
            flat[k] = v
    return flat


def summary_table(rows: list[dict]) -> str:
    """CSV text with the last record of every run id (in first-appearance order)."""
    last: dict[str, dict] = {}
    for row in rows:
        last[row["run_id"]] = row
    flat = [_flatten(r) for r in last.values()]
    columns = []
    for f in flat:
        for k in f:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for f in flat:
        writer.writerow({k: f.get(k, "") for k in columns})
    return buf.getvalue()


def write_panel(path, rows: list[dict]) -> None:
    """Long-form panel CSV; every row has at least ``x``, ``series`` and ``y``."""
    columns = []
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _clean(r.get(k, "")) for k in columns})


@dataclass
class ReplayReport:
    rows: int = 0
    runs: int = 0
    problems: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.problems

    def render(self) -> str:
        head = f"rows={self.rows} runs={self.runs} status={'clean' if self.clean else 'FAILED'}"
        return "\n".join([head] + [f"  - {p}" for p in self.problems])


def replay(metrics_path) -> ReplayReport:
    """Re-verify a run directory from its metrics file.

    Checks the stored config hash against the archived ``config.json``, the
    per-row content hashes, step monotonicity within each run id, and that
    ``summary.csv`` matches the table re-derived from the metrics.
    """
    metrics_path = Path(metrics_path)
    run_dir = metrics_path.parent
    rows = read_metrics(metrics_path)
    report = ReplayReport(rows=len(rows), runs=len({r.get("run_id") for r in rows}))
    cfg_path = run_dir / "config.json"
    expected_hash = None
    if cfg_path.exists():
        try:
            expected_hash = config_hash(validate(json.loads(cfg_path.read_text())))
        except Exception as exc:  # a tampered config is a finding, not a crash
            report.problems.append(f"config.json no longer validates: {exc}")
    else:
        report.problems.append("config.json missing")
    last_step: dict[str, int] = {}
    for i, row in enumerate(rows, 1):
        if row.get("row_hash") != row_hash(row):
            report.problems.append(f"row {i}: content hash mismatch")
        if expected_hash and row.get("config_hash") != expected_hash:
            report.problems.append(f"row {i}: config hash {row.get('config_hash')} != {expected_hash}")
        rid, step = row.get("run_id"), row.get("step", -1)
        if rid in last_step and step < last_step[rid]:
            report.problems.append(f"row {i}: step {step} goes backwards in run {rid}")
        last_step[rid] = step
    summary = run_dir / "summary.csv"
    if summary.exists():
        if summary.read_text() != summary_table(rows):
            report.problems.append("summary.csv differs from the table derived from metrics.jsonl")
    else:
        report.problems.append("summary.csv missing")
    return report
