"""Serialising benchmark results as JSON, CSV or a plain text table."""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

FORMATS = ("json", "csv", "table")


def _plain(value):
    """JSON-safe copy: numpy scalars and arrays become Python values, NaN/inf become strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def as_record(item, timing=True):
    """Dictionary form of a report object, dataclass or mapping."""
    if hasattr(item, "to_dict"):
        return item.to_dict(timing=timing)
    if is_dataclass(item):
        return asdict(item)
    if isinstance(item, dict):
        return {k: v for k, v in item.items() if timing or k != "wall_ms"}
    raise TypeError(f"cannot serialise {type(item).__name__}")


def flatten(record, prefix=""):
    """Nested mapping -> one level with dotted keys; lists are JSON-encoded."""
    out = {}
    for k, v in record.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v, separators=(",", ":"))
        else:
            out[key] = v
    return out


def _columns(rows):
    cols = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    return cols


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(items, fmt="json", timing=True):
    """Text of ``items`` (one report or a list) in ``fmt``."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")
    single = not isinstance(items, (list, tuple))
    records = [_plain(as_record(it, timing)) for it in ([items] if single else items)]
    if fmt == "json":
        return json.dumps(records[0] if single else records, indent=2) + "\n"
    rows = [flatten(r) for r in records]
    cols = _columns(rows)
    if fmt == "csv":
        buf = io.StringIO(newline="")
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in cols])
        return buf.getvalue()
    cells = [[_table_cell(row.get(c)) for c in cols] for row in rows]
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip(),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in cells]
    return "\n".join(lines) + "\n"


def _table_cell(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return _cell(v)


def emit_report(items, fmt="json", out=None, timing=True):
    """Write ``items`` to ``out`` (path) or standard output; returns the text.

    Raises
    ------
    OSError
        The output path cannot be written.
    """
    text = render(items, fmt, timing)
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        path = Path(out)
        # newline="" keeps the CSV's CRLF line endings intact
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    return text
