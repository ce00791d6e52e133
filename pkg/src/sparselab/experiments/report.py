"""CSV and JSON emission of experiment reports.

Floats use ``%.17g`` in both formats so that values read back bit-exactly.
Non-finite floats are written as ``NaN``/``Infinity`` in JSON, which the
standard ``json`` module accepts.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..formats import csv_text, fmt_float, write_text
from ..sampling import EntryDistribution


def rows_csv(rep):
    """Header plus one line per trial (the byte-stable part of a report)."""
    return csv_text(rep.columns, ([r.get(c) for c in rep.columns] for r in rep.rows))


def _json(v):
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return fmt_float(x)
    if isinstance(v, (complex, np.complexfloating)):
        return _json([v.real, v.imag])
    if isinstance(v, EntryDistribution):
        return json.dumps(v.describe())
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json(x) for x in v) + "]"
    return json.dumps(str(v))


def report_json(rep, include_wall_clock=True):
    doc = {
        "config": dict(rep.config.items()),
        "columns": rep.columns,
        "rows": [[r.get(c) for c in rep.columns] for r in rep.rows],
        "aggregates": rep.aggregates,
        "counters": rep.counters,
        "errors": {str(k): v for k, v in rep.errors.items()},
    }
    if include_wall_clock:
        doc["wall_clock_seconds"] = rep.wall_clock
    return _json(doc) + "\n"


def _aggregates_csv(rep):
    rows = []
    for col, stats in rep.aggregates.items():
        for name, v in stats.items():
            rows.append((col, name, v))
    for name, v in rep.counters.items():
        rows.append(("counter", name, v))
    return csv_text(["column", "statistic", "value"], rows)


def write_report(rep, fmt="csv", out=None):
    """Write ``rep`` and return the list of paths created.

    ``out`` is a directory (default: the config's ``output_path`` or the
    working directory).  CSV output is ``<kind>.csv`` with the rows plus
    ``<kind>_aggregates.csv``; JSON output is a single ``<kind>.json``.
    """
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown report format {fmt!r}")
    out = Path(out if out is not None else (rep.config.output_path or "."))
    kind = rep.config.kind
    if fmt == "json":
        return [write_text(out / f"{kind}.json", report_json(rep))]
    return [
        write_text(out / f"{kind}.csv", rows_csv(rep)),
        write_text(out / f"{kind}_aggregates.csv", _aggregates_csv(rep)),
    ]
