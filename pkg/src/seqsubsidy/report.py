"""Stable tabular output and run manifests.

Floats are written with 12 significant digits. Every CSV starts with one
``# manifest: {...}`` comment line holding the deterministic part of the run
manifest (no timestamps), so identical inputs give identical bytes. The full
manifest, including wall-clock time, goes to ``manifest.json``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMAS = {
    "vertices": ("epsilon", "social_utility", "agent_value", "policy_id"),
    "curve": ("epsilon", "interval", "policy_id", "social_utility", "agent_value", "p_approve", "p_optout"),
    "simulate": ("statistic", "mean", "ci_low", "ci_high"),
    "sweep": ("param", "value", "metric", "estimate", "ci_low", "ci_high"),
    "policy": ("l", "total_n", "total_x", "action", "v_zero", "a_cost", "p_approve", "p_optout", "absorbing"),
    "region": ("alpha", "beta", "exponential", "uniform_mixture"),
}
SCHEMA_VERSION = 1


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    if value == 0.0:
        return "0"
    return format(value, ".12g")


def jsonable(value):
    """Round floats to 12 significant digits for JSON output."""
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if not math.isfinite(value) else float(format(value, ".12g"))
    return value


@dataclass
class RunManifest:
    command: str
    config_hash: str
    overrides: list[str] = field(default_factory=list)
    seed: int | None = None
    version: str = ""
    mdp_solve_count: int = 0
    wall_clock_s: float = 0.0
    started: float = field(default_factory=time.perf_counter, repr=False)

    def deterministic(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "overrides": list(self.overrides),
            "seed": self.seed,
            "version": self.version,
            "schema_version": SCHEMA_VERSION,
        }

    def finish(self) -> dict:
        self.wall_clock_s = time.perf_counter() - self.started
        d = self.deterministic()
        d["mdp_solve_count"] = self.mdp_solve_count
        d["wall_clock_s"] = round(self.wall_clock_s, 3)
        return d


def csv_text(schema: str, rows: list[dict], manifest: RunManifest | None = None) -> str:
    columns = SCHEMAS[schema]
    buf = io.StringIO()
    if manifest is not None:
        buf.write("# manifest: " + json.dumps(manifest.deterministic(), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path: Path, schema: str, rows: list[dict], manifest: RunManifest | None = None) -> None:
    Path(path).write_text(csv_text(schema, rows, manifest))


def write_json(path: Path, payload: dict, manifest: RunManifest | None = None) -> None:
    body = dict(payload)
    if manifest is not None:
        body["manifest"] = manifest.deterministic()
    Path(path).write_text(json.dumps(jsonable(body), indent=2, sort_keys=True) + "\n")


def read_csv(path: Path) -> list[dict]:
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


