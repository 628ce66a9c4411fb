"""CSV and JSON writers for command results.

A result is a flat mapping of named values (scalars, complex numbers,
vectors, matrices) plus an optional table (list of rows with shared keys).
Reals are written with 17 significant digits so that they parse back
exactly; complex numbers become ``[re, im]`` pairs in JSON and ``name.re`` /
``name.im`` fields in CSV.

CSV layout::

    # tool: qasym <version>
    # <key>: <value>            (one line per reproducibility field)
    <header row>
    <data rows>

With a table the header is the table's column names; otherwise the header is
``quantity,value`` and each matrix entry gets its own row (``Sigma[0][1].im``).
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any

import numpy as np

from .errors import ValidationError


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def to_jsonable(v: Any):
    if isinstance(v, dict):
        return {str(k): to_jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return to_jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def _flatten(name, v, out):
    if isinstance(v, dict):
        for k, x in v.items():
            _flatten(f"{name}.{k}", x, out)
    elif isinstance(v, (list, tuple, np.ndarray)):
        for i, x in enumerate(list(v)):
            _flatten(f"{name}[{i}]", x, out)
    elif isinstance(v, (complex, np.complexfloating)):
        out.append((f"{name}.re", fmt(v.real)))
        out.append((f"{name}.im", fmt(v.imag)))
    elif isinstance(v, (bool, np.bool_)):
        out.append((name, "true" if v else "false"))
    elif isinstance(v, (int, np.integer)):
        out.append((name, str(int(v))))
    elif isinstance(v, (float, np.floating)):
        out.append((name, fmt(v)))
    else:
        out.append((name, str(v)))


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def _table_rows(table):
    rows = []
    for row in table:
        flat = []
        for k, v in row.items():
            if isinstance(v, (complex, np.complexfloating)):
                _flatten(k, v, flat)
            else:
                flat.append((k, _cell(v)))
        rows.append(dict(flat))
    return rows


def render_csv(meta: dict, values: dict, table=None) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {json.dumps(to_jsonable(v), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    if table:
        rows = _table_rows(table)
        cols = list(rows[0])
        w.writerow(cols)
        for r in rows:
            w.writerow([r.get(c, "") for c in cols])
    else:
        flat = []
        for k, v in values.items():
            _flatten(k, v, flat)
        w.writerow(["quantity", "value"])
        w.writerows(flat)
    return buf.getvalue()


def render_json(meta: dict, values: dict, table=None) -> str:
    doc = {"meta": to_jsonable(meta), "result": to_jsonable(values)}
    if table:
        doc["table"] = to_jsonable(table)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def read_csv(text: str):
    """Parse a CSV written by :func:`render_csv` into ``(meta, columns)``.

    Numeric cells become floats; ``columns`` maps header name to its values.
    """
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(": ")
            meta[key] = json.loads(val) if val else None
        else:
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ValidationError("CSV has no header row")
    header, data = rows[0], rows[1:]
    cols = {h: [] for h in header}
    for r in data:
        for h, c in zip(header, r):
            try:
                cols[h].append(float(c))
            except ValueError:
                cols[h].append(c)
    return meta, cols


def read_curve(path: str):
    """Load a risk curve (``abscissa``, ``risk``, optional ``stderr``) from CSV or JSON."""
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json"):
        doc = json.loads(text)
        table = doc.get("table") or []
        cols = {k: [row[k] for row in table] for k in (table[0] if table else {})}
    else:
        _, cols = read_csv(text)
    if "abscissa" not in cols or "risk" not in cols:
        raise ValidationError(f"{path}: not a risk curve (needs abscissa and risk columns)")
    bad = [v for v in cols["risk"] if not isinstance(v, float) or not math.isfinite(v)]
    if bad:
        raise ValidationError(f"{path}: non-numeric risk values")
    return cols
