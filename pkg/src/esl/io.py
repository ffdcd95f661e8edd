"""Matrix files, reports, and configuration.

Matrix JSON: ``{"rows": n, "cols": m, "data": [[...], ...], "labels": [...]}``
with complex entries written as ``[re, im]``.  CSV: plain rows, ``.`` as the
decimal separator, optional ``c0,c1,...`` header.  Every float is written
with 17 significant digits so binary doubles round-trip exactly, and JSON
keys are sorted so equal content gives identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path

import numpy as np

CONFIG_ENV = "ESL_CONFIG"


class MatrixFormatError(ValueError):
    pass


def fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(float(x), ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, complex):
        return _encode([obj.real, obj.imag], indent, level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # flat numeric lists (matrix rows) stay on one line
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
               for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON with 17-significant-digit floats."""
    return _encode(obj, indent, 0) + "\n"


def matrix_to_dict(m, labels=None) -> dict:
    a = np.asarray(m)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if np.iscomplexobj(a):
        data = [[[float(z.real), float(z.imag)] for z in row] for row in a]
    else:
        data = [[float(x) for x in row] for row in a]
    d = {"rows": a.shape[0], "cols": a.shape[1], "data": data}
    if labels is not None:
        d["labels"] = list(labels)
    return d


def matrix_from_dict(d: dict) -> np.ndarray:
    try:
        rows, cols, data = int(d["rows"]), int(d["cols"]), d["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MatrixFormatError(f"matrix object needs rows, cols and data: {exc}") from None
    if len(data) != rows or any(len(r) != cols for r in data):
        raise MatrixFormatError(f"data does not have shape ({rows}, {cols})")
    is_complex = any(isinstance(x, list) for r in data for x in r)
    try:
        if is_complex:
            a = np.array([[complex(x[0], x[1]) if isinstance(x, list) else complex(x) for x in r]
                          for r in data])
        else:
            a = np.array(data, dtype=float).reshape(rows, cols)
    except (TypeError, ValueError, IndexError) as exc:
        raise MatrixFormatError(f"non-numeric matrix entry: {exc}") from None
    return a


def write_matrix(path, m, fmt: str | None = None, labels=None, header: bool = False) -> Path:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "json")
    a = np.asarray(m)
    if fmt == "json":
        text = dumps(matrix_to_dict(a, labels))
    elif fmt == "csv":
        if np.iscomplexobj(a):
            raise ValueError("CSV output supports real matrices only")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow([f"c{j}" for j in range(a.shape[1])])
        for row in a:
            w.writerow([fmt_float(x) for x in row])
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv" or not text.lstrip().startswith("{"):
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows:
            raise MatrixFormatError("empty CSV file")
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
        try:
            a = np.array([[float(x) for x in r] for r in rows])
        except ValueError as exc:
            raise MatrixFormatError(f"bad CSV entry: {exc}") from None
        if a.ndim != 2:
            raise MatrixFormatError("CSV rows have unequal lengths")
        return a
    try:
        return matrix_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise MatrixFormatError(f"invalid JSON: {exc}") from None


def load_config(path=None) -> dict:
    """Read ``key=value`` lines (``#`` comments) from ``path`` or ``$ESL_CONFIG``."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = _parse_value(value)
    return cfg


def _parse_value(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    if v.lower() in ("true", "false"):
        return v.lower() == "true"
    return v
