"""Deterministic JSON emission for reports.

Reports must be byte-identical across runs, so floats are rendered with a
fixed 17-significant-digit format (lossless for IEEE doubles) and dict fields
keep their insertion order. Non-finite floats render as Infinity/-Infinity/NaN,
which json.loads accepts back.
"""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


def dumps_stable(obj: Any, indent: int = 2) -> str:
    """Serialize to JSON with pinned float formatting and field order."""
    out: list[str] = []
    _emit(obj, out, indent, 0)
    out.append("\n")
    return "".join(out)


def _emit(obj: Any, out: list[str], indent: int, level: int) -> None:
    pad = " " * (indent * (level + 1))
    close_pad = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for k, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            out.append(f"{pad}{json.dumps(key, ensure_ascii=False)}: ")
            _emit(value, out, indent, level + 1)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(f"{close_pad}}}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for k, value in enumerate(seq):
            out.append(pad)
            _emit(value, out, indent, level + 1)
            out.append(",\n" if k < len(seq) - 1 else "\n")
        out.append(f"{close_pad}]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")
