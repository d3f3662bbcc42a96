"""JSON-lines trace serialization with bit-stable float formatting.

Floats are written with 17 significant digits so that parsing the trace
reproduces the exact binary values.
"""

from __future__ import annotations

import enum
from typing import Any

import numpy as np

SCHEMA = "rallysim-trace-v1"


def _format_float(x: float) -> str:
    if x != x:
        return "NaN"
    if x in (float("inf"), float("-inf")):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    s = format(x, ".17g")
    # keep the value recognizably a float in JSON
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj: Any) -> str:
    """Serialize a plain dict/list/scalar tree to compact JSON text."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(obj, enum.Enum):
        return dumps(obj.value)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, dict):
        items = ",".join(f"{dumps(str(k))}:{dumps(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def trace_lines(trace) -> list[str]:
    """Render one trial trace as JSONL: header, steps, terminal record."""
    lines = [dumps({"schema": SCHEMA, "config": trace.config_echo})]
    lines.extend(dumps(rec) for rec in trace.steps)
    lines.append(dumps(trace.terminal))
    return lines
