"""Deterministic report emission.

JSON documents are written with sorted keys and shortest-round-trip
float repr; CSV tables use the same float formatting.  Identical inputs
therefore produce byte-identical files.  Reports never contain
timestamps or environment data.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

__all__ = ["json_bytes", "write_json", "csv_bytes", "write_csv"]


def _clean(x):
    """Recursively coerce to plain JSON types; non-finite floats become
    their repr strings since JSON has no literals for them."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if x is None or isinstance(x, str):
        return x
    return str(x)


def json_bytes(doc: dict) -> bytes:
    text = json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False)
    return (text + "\n").encode("utf-8")


def write_json(path, doc: dict) -> None:
    Path(path).write_bytes(json_bytes(doc))


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    s = str(v)
    if any(ch in s for ch in ",\n\r\""):
        raise ValueError(f"CSV cell {s!r} needs quoting, which is not supported")
    return s


def csv_bytes(header, rows) -> bytes:
    lines = [",".join(_cell(h) for h in header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_csv(path, header, rows) -> None:
    Path(path).write_bytes(csv_bytes(header, rows))
