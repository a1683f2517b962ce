"""On-disk results: line-delimited iteration records, run manifests, and
cross-replication summary tables.

Record streams are append-only JSON lines; a truncated file parses up to the
last complete record.  Serialized records exclude wall-clock timing so that
identical (config, seed) pairs produce byte-identical files; timing lives in
the in-memory records and in the manifest totals.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .driver import IterationRecord, RunRecord


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def record_line(rec: IterationRecord) -> str:
    """Canonical serialization of one iteration record (timing excluded)."""
    payload = {
        "t": rec.t,
        "x": rec.x.tolist(),
        "y": float(rec.y),
        "y_min": float(rec.y_min),
        "rho_median": None if rec.rho_median is None else rec.rho_median.tolist(),
        "eff_dim_01": rec.eff_dim_01,
        "eff_dim_05": rec.eff_dim_05,
        "jitter": None if rec.jitter is None else float(rec.jitter),
        "sampler": _jsonable(rec.sampler),
        "fit_failed": rec.fit_failed,
        "duplicate": rec.duplicate,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def write_records(path, record: RunRecord) -> None:
    with open(path, "w") as fh:
        for rec in record.iterations:
            fh.write(record_line(rec) + "\n")


def read_records(path) -> list[dict]:
    """Parse a record stream, ignoring a trailing incomplete line."""
    out = []
    with open(path) as fh:
        for line in fh:
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError:
                break
    return out


def incumbent_trace(parsed_records: list[dict]) -> np.ndarray:
    return np.array([r["y_min"] for r in parsed_records])


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(manifest), sort_keys=True, indent=2) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())


def summary_rows(traces: list[np.ndarray]) -> list[dict]:
    """Per-iteration statistics of the incumbent across replications."""
    if not traces:
        return []
    matrix = np.stack(traces)
    reps, total = matrix.shape
    rows = []
    for t in range(total):
        col = matrix[:, t]
        stderr = float(col.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
        rows.append(
            {
                "iteration": t + 1,
                "mean_best": float(col.mean()),
                "stderr_best": stderr,
                "q05": float(np.quantile(col, 0.05)),
                "q50": float(np.quantile(col, 0.50)),
                "q95": float(np.quantile(col, 0.95)),
            }
        )
    return rows


_SUMMARY_COLUMNS = ("iteration", "mean_best", "stderr_best", "q05", "q50", "q95")


def write_summary_csv(path, rows: list[dict]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(_SUMMARY_COLUMNS) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    str(row[c]) if c == "iteration" else repr(float(row[c]))
                    for c in _SUMMARY_COLUMNS
                )
                + "\n"
            )


def read_summary_csv(path) -> list[dict]:
    lines = Path(path).read_text().strip().splitlines()
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        row = dict(zip(_SUMMARY_COLUMNS, parts))
        row["iteration"] = int(row["iteration"])
        for c in _SUMMARY_COLUMNS[1:]:
            row[c] = float(row[c])
        rows.append(row)
    return rows
