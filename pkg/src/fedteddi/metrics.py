"""Metrics persistence: schema-versioned line-delimited round records.

A metrics file starts with the literal header line ``schema=1`` followed by
one JSON object per round.  Content is policy-free so that runs which make
identical decisions produce byte-identical files; the (policy, seed) pair
lives in the filename, ``<policy>_seed<seed>.jsonl``.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path
from typing import Iterable, Sequence

from .orchestrator import RoundRecord

__all__ = [
    "SCHEMA_HEADER",
    "metrics_filename",
    "parse_metrics_filename",
    "write_metrics",
    "read_metrics",
    "rounds_to_target",
    "summarize_runs",
]

SCHEMA_HEADER = "schema=1"

_FILENAME_RE = re.compile(r"^(?P<policy>[a-z_]+)_seed(?P<seed>-?\d+)\.jsonl$")


def metrics_filename(policy: str, seed: int) -> str:
    return f"{policy}_seed{seed}.jsonl"


def parse_metrics_filename(name: str) -> tuple[str, int]:
    m = _FILENAME_RE.match(Path(name).name)
    if not m:
        raise ValueError(f"metrics filename {name!r} is not <policy>_seed<seed>.jsonl")
    return m.group("policy"), int(m.group("seed"))


def write_metrics(path, records: Iterable[RoundRecord]) -> None:
    """Write the header then one record per line (append-only layout)."""
    with open(path, "w") as f:
        f.write(SCHEMA_HEADER + "\n")
        for rec in records:
            f.write(json.dumps(rec.to_json_dict()) + "\n")


def read_metrics(path) -> list[dict]:
    """Parse a metrics file, checking its schema header."""
    with open(path) as f:
        header = f.readline().strip()
        if header != SCHEMA_HEADER:
            raise ValueError(f"{path}: expected header {SCHEMA_HEADER!r}, got {header!r}")
        return [json.loads(line) for line in f if line.strip()]


def rounds_to_target(records: Sequence[dict], threshold: float) -> int | None:
    """1-based index of the first round whose test accuracy reaches the
    threshold, or None if it never does."""
    for i, rec in enumerate(records, start=1):
        if rec["test_accuracy"] >= threshold:
            return i
    return None


def summarize_runs(
    files_by_policy: dict[str, list[Path]], targets: Sequence[float]
) -> dict:
    """Cross-seed summary: per policy, final accuracy and rounds-to-target
    (mean and standard deviation over the seeds that reached it)."""
    summary: dict = {"targets": list(targets), "policies": {}}
    for policy, files in sorted(files_by_policy.items()):
        final_accs = []
        per_target: dict[str, dict] = {}
        runs = [read_metrics(f) for f in sorted(files)]
        for records in runs:
            if records:
                final_accs.append(records[-1]["test_accuracy"])
        for t in targets:
            per_seed = [rounds_to_target(records, t) for records in runs]
            reached = [r for r in per_seed if r is not None]
            per_target[f"{t}"] = {
                "per_seed": per_seed,
                "reached": len(reached),
                "mean": _mean(reached),
                "std": _std(reached),
            }
        summary["policies"][policy] = {
            "seeds": len(runs),
            "final_accuracy_mean": _mean(final_accs),
            "final_accuracy_std": _std(final_accs),
            "rounds_to_target": per_target,
        }
    return summary


def _mean(values) -> float | None:
    vals = list(values)
    if not vals:
        return None
    return float(sum(vals) / len(vals))


def _std(values) -> float | None:
    vals = list(values)
    if not vals:
        return None
    m = sum(vals) / len(vals)
    return float(math.sqrt(sum((v - m) ** 2 for v in vals) / len(vals)))
