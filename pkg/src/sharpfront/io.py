"""Deterministic serialisation helpers: atomic writes, fixed-precision JSON, CSV."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def atomic_write(path, data, mode="w"):
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        if "b" in mode:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
        else:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_float(x: float) -> str:
    if math.isnan(x):
        raise ValueError("NaN cannot be serialised")
    if math.isinf(x):
        return json.dumps("infinite" if x > 0 else "-infinite")
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj, indent=2) -> str:
    """JSON text with floats at 17 significant digits and infinities as strings.

    ``schema_version`` is prepended to top-level dicts that lack it.
    """
    if isinstance(obj, dict) and "schema_version" not in obj:
        obj = {"schema_version": SCHEMA_VERSION, **obj}
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps_json(obj))


def decode_extended(x):
    """Inverse of the infinity encoding used by :func:`dumps_json`."""
    if x == "infinite":
        return math.inf
    if x == "-infinite":
        return -math.inf
    return float(x)


def csv_text(header, columns) -> str:
    """Comma-separated text with a header row and LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    cols = [np.asarray(col) for col in columns]
    for row in zip(*cols):
        writer.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header, columns):
    atomic_write(path, csv_text(header, columns))


def read_csv(path):
    """Header and float columns of a CSV file written by :func:`write_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in row] for row in body], dtype=float).reshape(len(body), len(header))
    return header, {name: data[:, j] for j, name in enumerate(header)}
