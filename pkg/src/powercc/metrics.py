"""Metric records, NDJSON I/O, and the fairness / completion-time reducers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass


@dataclass(frozen=True)
class MetricRecord:
    """One observation: entity names a port or flow, kind is one of
    throughput | qlen | cwnd | rate | inflight | fct."""

    t: float
    entity: str
    kind: str
    value: float


def write_ndjson(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(
                {"t": r.t, "entity": r.entity, "kind": r.kind,
                 "value": r.value},
                sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_ndjson(path):
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(MetricRecord(t=obj["t"], entity=obj["entity"],
                                        kind=obj["kind"], value=obj["value"]))
    return records


def series(records, entity: str, kind: str):
    """(t, value) pairs for one entity/kind, in record order."""
    return [(r.t, r.value) for r in records
            if r.entity == entity and r.kind == kind]


def jain_index(rates) -> float:
    """(sum x)^2 / (n * sum x^2) over non-negative rates."""
    rates = [float(r) for r in rates]
    if not rates:
        raise ValueError("need at least one rate")
    if any(r < 0 for r in rates):
        raise ValueError("rates must be non-negative")
    total = sum(rates)
    if total == 0:
        raise ValueError("all rates are zero; the index is undefined")
    return total * total / (len(rates) * sum(r * r for r in rates))


def nearest_rank(values, pct: float) -> float:
    """Nearest-rank percentile: the value at rank floor(n*p/100)+1, clamped
    to the sample, over the ascending sort. Deterministic and exact on
    integer grids."""
    if not values:
        raise ValueError("empty sample")
    ordered = sorted(values)
    n = len(ordered)
    rank = min(n, math.floor(n * pct / 100.0) + 1)
    return ordered[rank - 1]


#: Flow-size buckets for completion-time tables (bytes).
FCT_BUCKETS = (
    ("small_lt_10KB", lambda s: s < 10_000),
    ("medium_100KB_1MB", lambda s: 100_000 <= s <= 1_000_000),
    ("large_gt_1MB", lambda s: s > 1_000_000),
)

FCT_PERCENTILES = (50.0, 95.0, 99.0, 99.9)


def fct_percentiles(completions):
    """Percentile table of completion times by flow-size bucket.

    completions: iterable of (size_bytes, duration_seconds). Buckets with
    no flows are omitted and listed under 'empty_buckets'. An 'all' row
    always covers every completion.
    """
    completions = list(completions)
    if not completions:
        raise ValueError("no completions")
    table = {}
    empty = []
    groups = {"all": [d for _, d in completions]}
    for name, pred in FCT_BUCKETS:
        groups[name] = [d for s, d in completions if pred(s)]
    for name, durations in groups.items():
        if not durations:
            empty.append(name)
            continue
        table[name] = {
            f"p{pct:g}": nearest_rank(durations, pct)
            for pct in FCT_PERCENTILES
        }
        table[name]["count"] = len(durations)
    return {"buckets": table, "empty_buckets": sorted(empty)}
