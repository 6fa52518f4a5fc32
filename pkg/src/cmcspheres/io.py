"""Deterministic report writers: JSON, CSV tables and gnuplot scripts.

Floats are always printed with 17 significant digits so that identical runs
produce byte-identical files.  Non-finite floats become ``null`` in JSON.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1.0"


def _fmt(x: float) -> str:
    s = format(float(x), ".17g")
    # keep floats recognizable as floats
    return s if any(ch in s for ch in ".en") else s + ".0"


def to_plain(obj):
    """Convert numpy arrays, dataclasses and enums into JSON-ready builtins."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_plain(obj.to_dict())
        return to_plain({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Path):
        return str(obj)
    return repr(obj)


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [pad + json.dumps(k) + ": " + _encode(obj[k], indent, level + 1)
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(to_plain(obj), indent, 0)


def report(kind: str, payload: dict) -> dict:
    """Wrap a payload with the schema header."""
    out = {"schema_version": SCHEMA_VERSION, "kind": kind}
    out.update(payload)
    return out


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(_fmt(v) if math.isfinite(v) else "nan")
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_gnuplot(path, csv_name: str, x: int, ys, labels, title="", logx=False, logy=False,
                  xlabel="", ylabel="") -> Path:
    """Emit a gnuplot script plotting columns ``ys`` against column ``x`` (1-based)."""
    path = Path(path)
    stem = Path(csv_name).stem
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title {title!r}" if title else "",
        f"set xlabel {xlabel!r}" if xlabel else "",
        f"set ylabel {ylabel!r}" if ylabel else "",
        "set logscale x" if logx else "",
        "set logscale y" if logy else "",
        "set terminal pngcairo size 900,600",
        f"set output '{stem}.png'",
    ]
    plots = [f"'{csv_name}' using {x}:{y} with linespoints title {lab!r}"
             for y, lab in zip(ys, labels)]
    lines.append("plot " + ", \\\n     ".join(plots))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(line for line in lines if line) + "\n")
    return path
