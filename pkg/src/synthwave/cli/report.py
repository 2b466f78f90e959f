"""Run reports and their CSV / JSON serialization."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .. import __version__
from ..counting.io import _atomic_write_bytes


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        self.rows.append(tuple(row))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


@dataclass
class RunReport:
    command: str
    scenario_digest: str
    input_hash: str
    seed: int
    scenario: dict
    tables: dict[str, Table] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def table(self, name: str, columns: list[str]) -> Table:
        t = Table(list(columns))
        self.tables[name] = t
        return t

    def merge(self, other: "RunReport", prefix: str) -> None:
        for name, t in other.tables.items():
            self.tables[f"{prefix}_{name}"] = t
        self.diagnostics[prefix] = other.diagnostics


def _cell(v) -> str:
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if hasattr(v, "item"):
        return _json_value(v.item())
    return v


def table_csv(report: RunReport, name: str) -> str:
    t = report.tables[name]
    meta = [
        f"# command: {report.command}",
        f"# table: {name}",
        f"# scenario_digest: {report.scenario_digest}",
        f"# input_sha1: {report.input_hash}",
        f"# seed: {report.seed}",
        f"# version: {__version__}",
    ]
    if not t.rows:
        meta.append("# empty: true")
    lines = meta + [",".join(t.columns)] + [",".join(_cell(c) for c in r) for r in t.rows]
    return "\n".join(lines) + "\n"


def report_dict(report: RunReport) -> dict:
    return _json_value({
        "command": report.command,
        "version": __version__,
        "scenario_digest": report.scenario_digest,
        "input_sha1": report.input_hash,
        "seed": report.seed,
        "scenario": report.scenario,
        "tables": {n: {"columns": t.columns, "rows": [list(r) for r in t.rows],
                       "empty": not t.rows} for n, t in report.tables.items()},
        "diagnostics": report.diagnostics,
        "wall_time_s": report.wall_time,
    })


def write_report(report: RunReport, out_dir, fmt: str = "csv") -> list[Path]:
    """Write tables (CSV, one file each) or the whole report (JSON); returns paths.

    CSV mode also writes the JSON mirror so diagnostics and the echoed
    scenario travel with the tables.  CSV bytes do not depend on wall time.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if fmt == "csv":
        for name in report.tables:
            p = out / f"{report.command}_{name}.csv"
            _atomic_write_bytes(p, table_csv(report, name).encode())
            paths.append(p)
    elif fmt != "json":
        raise ValueError(f"unknown format {fmt!r}")
    p = out / f"{report.command}_report.json"
    _atomic_write_bytes(p, (json.dumps(report_dict(report), indent=2, sort_keys=True) + "\n").encode())
    paths.append(p)
    return paths
