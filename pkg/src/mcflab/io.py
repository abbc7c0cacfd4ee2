"""Deterministic artifact writers.

Every file starts with a comment line embedding the config hash and seed;
all numeric fields print with 17 significant digits so identical configs
produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os


def fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _meta_line(meta: dict, comment: str = "#") -> str:
    parts = " ".join(f"{k}={v}" for k, v in sorted(meta.items()))
    return f"{comment} {parts}\n"


def write_csv(path, header: str, rows, meta: dict):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(_meta_line(meta))
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_dat(path, columns, meta: dict):
    """gnuplot-style two-column (or more) whitespace table."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(_meta_line(meta))
        for row in zip(*columns):
            fh.write(" ".join(fmt(v) for v in row) + "\n")


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float):
        return obj
    return obj


def write_json(path, obj: dict, meta: dict):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    payload = {"meta": meta, **_jsonable(obj)}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=str)
        fh.write("\n")
