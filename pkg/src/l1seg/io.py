"""CSV ingestion/emission and the JSON result document."""
from __future__ import annotations

import csv
import io
import json
import math
from typing import IO, Iterable, List, Optional

import numpy as np

from .core import InputError


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def parse_csv(text: str, columns: Optional[int] = None) -> np.ndarray:
    """Parse one-sample-per-row CSV into an ``(N, n)`` float array.

    A first row containing any non-numeric field is taken as a header.
    Errors name the offending 1-based row and column.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(f.strip() for f in r)]
    if not rows:
        raise InputError("input contains no data rows")
    start = 0
    if not all(_is_number(f.strip()) for f in rows[0]):
        start = 1
    data: List[List[float]] = []
    width = None
    for i, row in enumerate(rows[start:], start=start + 1):
        vals = []
        for j, field in enumerate(row, start=1):
            field = field.strip()
            try:
                v = float(field)
            except ValueError:
                raise InputError(f"row {i}, column {j}: {field!r} is not a number") from None
            if not math.isfinite(v):
                raise InputError(f"row {i}, column {j}: non-finite value {field!r}")
            vals.append(v)
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise InputError(f"row {i}: expected {width} columns, found {len(vals)}")
        data.append(vals)
    if not data:
        raise InputError("input contains a header but no data rows")
    arr = np.array(data, dtype=float)
    if columns is not None and arr.shape[1] != columns:
        raise InputError(f"expected {columns} column(s), found {arr.shape[1]}")
    return arr


def emit_csv(values: np.ndarray, out: Optional[IO[str]] = None) -> str:
    """Write samples one per row with round-trip exact float formatting."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    lines = [",".join(repr(float(v)) for v in row) for row in arr]
    text = "\n".join(lines) + "\n"
    if out is not None:
        out.write(text)
    return text


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump_document(doc: dict) -> str:
    return json.dumps(_clean(doc), indent=1)


def write_table(path, header: Iterable[str], columns: Iterable[np.ndarray]) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(header))
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
