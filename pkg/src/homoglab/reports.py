"""Deterministic report emission: JSON documents and CSV tables.

Floats are rendered with 17 significant digits so that byte-identical
output encodes bit-identical doubles; host metadata and timestamps live in
a separate "meta" block so that diffs of the "science" block reflect only
the computation.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np


def format_float(x: float) -> str:
    if isinstance(x, bool):  # bool is an int subtype; handled by caller
        raise TypeError("bool is not a float")
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(float(x), ".17g")


def _render(obj, indent: int, level: int) -> str:
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [_render(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(pad_in + it for it in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            json.dumps(str(k)) + ": " + _render(v, indent, level + 1) for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(pad_in + it for it in items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def json_text(obj, indent: int = 2) -> str:
    """UTF-8 JSON with insertion-ordered keys and 17-significant-digit floats."""
    return _render(obj, indent, 0) + "\n"


def csv_text(header, rows) -> str:
    """CSV with a header row; floats at 17 significant digits."""

    def cell(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (float, np.floating)):
            return format_float(float(v))
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        s = str(v)
        if any(c in s for c in ",\"\n"):
            s = '"' + s.replace('"', '""') + '"'
        return s

    lines = [",".join(cell(h) for h in header)]
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_text_atomic(path, text: str):
    """Write via a temporary name and rename, so no partial artifact survives."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".report-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
