"""Reading sample tables and measure files; writing lossless JSON and CSV."""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .measures import Measure1D

SCHEMA = 1


class ParseError(Exception):
    """Malformed input; ``line`` is 1-based (0 when not line specific)."""

    def __init__(self, message, line=0, source=None):
        where = ": ".join(p for p in (source, f"line {line}" if line else None) if p)
        super().__init__(f"{where}: {message}" if where else message)
        self.message = message
        self.line = line
        self.source = source


def read_table(text):
    """Parse CSV with header ``[group,]x1,...,xd``.

    Returns ``(names, groups, columns)`` where ``groups`` maps each group
    label (in order of first appearance) to an ``(n, d)`` array and
    ``names`` lists the labels of the input rows.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input", 1) from None
    header = [h.strip() for h in header]
    has_group = bool(header) and header[0].lower() == "group"
    columns = header[1:] if has_group else header
    if not columns or any(not c for c in columns):
        raise ParseError("header needs at least one named value column", 1)
    width = len(header)
    labels, rows = [], []
    for record in reader:
        line = reader.line_num
        if not record or all(not f.strip() for f in record):
            continue
        if len(record) != width:
            raise ParseError(f"expected {width} fields, got {len(record)}", line)
        label = record[0].strip() if has_group else ""
        try:
            values = [float(f) for f in (record[1:] if has_group else record)]
        except ValueError:
            raise ParseError("non-numeric value", line) from None
        if not all(np.isfinite(values)):
            raise ParseError("non-finite value", line)
        labels.append(label)
        rows.append(values)
    if not rows:
        raise ParseError("no data rows", 2)
    data = np.array(rows, dtype=float)
    groups = {}
    for label in dict.fromkeys(labels):
        groups[label] = data[[i for i, g in enumerate(labels) if g == label]]
    return labels, groups, columns


def read_measure_json(text):
    """Quantile-grid measures from a JSON document.

    Accepts ``{"kind": "quantile_grid", "values": [...]}``, an object with a
    ``"measure"`` entry of that form, or ``{"measures": [...]}``.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    if isinstance(obj, dict) and "measures" in obj:
        items = obj["measures"]
    elif isinstance(obj, dict) and "measure" in obj:
        items = [obj["measure"]]
    else:
        items = [obj]
    out = {}
    for i, item in enumerate(items):
        if not isinstance(item, dict) or item.get("kind") != "quantile_grid":
            raise ParseError(f"measure {i} is not a quantile_grid object")
        try:
            mu = Measure1D.from_grid(np.asarray(item["values"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"measure {i}: {exc}") from None
        out[str(item.get("name", i))] = mu
    return out


def grid_to_dict(grid, name=None):
    obj = {"kind": "quantile_grid", "m": int(grid.m), "values": grid.values.tolist()}
    if name is not None:
        obj = {"name": name, **obj}
    return obj


def map_to_dict(T):
    return {"knots": [[x, y] for x, y in zip(T.xs.tolist(), T.ys.tolist())], "extrapolation": T.extrapolation}


def dump_json(obj):
    # Python's float repr is the shortest string that round-trips exactly
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def fmt(x):
    return format(float(x), ".17g")


def dump_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
