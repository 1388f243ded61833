"""Bit-stable CSV and JSON writers for run rows, summaries and the ablation matrices."""
from __future__ import annotations

import csv
import hashlib
import io
import json

from .sim import CSV_FIELDS, METRIC_FIELDS, summarize

MATRIX_METRICS = {"energy": "total_energy_J", "latency": "mean_service_latency_ms"}


def _cell(v) -> str:
    # repr is the shortest round-tripping form, so equal floats give equal bytes
    return repr(float(v)) if isinstance(v, float) else str(v)


def runs_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow([_cell(v) for v in r.row()])
    return buf.getvalue()


def trace_digest(rows) -> str:
    h = hashlib.sha256()
    for r in rows:
        h.update(r.trace_hash.encode())
    return h.hexdigest()


def summary_doc(cells) -> dict:
    """``cells`` maps (variant, scenario) -> list of RunMetrics."""
    out = []
    for (variant, scenario), rows in cells.items():
        mean, std = summarize(rows)
        out.append({
            "variant": variant,
            "scenario": scenario,
            "runs": len(rows),
            "mean": {k: mean[k] for k in METRIC_FIELDS},
            "std": {k: std[k] for k in METRIC_FIELDS},
            "trace_sha256": trace_digest(rows),
        })
    return {"metrics": list(METRIC_FIELDS), "cells": out}


def summary_json(cells) -> str:
    return json.dumps(summary_doc(cells), indent=2, sort_keys=True) + "\n"


def matrix_csv(cells, metric: str, variants, scenarios) -> str:
    """Variant rows by scenario columns of per-cell means."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", *scenarios])
    for v in variants:
        row = [v]
        for s in scenarios:
            mean, _ = summarize(cells[(v, s)])
            row.append(_cell(mean[metric]))
        w.writerow(row)
    return buf.getvalue()


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
