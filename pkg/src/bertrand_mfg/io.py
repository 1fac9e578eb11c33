"""CSV/JSON persistence.

Field files: a header row ``t,x_0,...,x_Nx`` followed by one row per time node,
first column the time coordinate; every float is written with 17 significant
digits so a read reproduces the array bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import Grid


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_field(path, values, grid: Grid) -> None:
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    lines = ["t," + ",".join(_fmt(x) for x in grid.x)]
    for t, row in zip(grid.t, values):
        lines.append(_fmt(t) + "," + ",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_field(path):
    """Return ``(t, x, values)`` from a field CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or not rows[0] or rows[0][0].strip() != "t":
        raise ValueError(f"{path}: not a field file (missing 't,x...' header)")
    try:
        x = np.array([float(v) for v in rows[0][1:]])
        body = np.array([[float(v) for v in row] for row in rows[1:] if row])
    except ValueError as exc:
        raise ValueError(f"{path}: bad number ({exc})") from None
    if body.ndim != 2 or body.shape[1] != x.size + 1:
        raise ValueError(f"{path}: ragged rows")
    return body[:, 0], x, body[:, 1:]


def write_paths(path, grid: Grid, eta, Q, f, pbar) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "eta", "Q", "f", "pbar"])
        for row in zip(grid.t, eta, Q, f, pbar):
            *head, p = row
            w.writerow([_fmt(v) for v in head] + ["" if not math.isfinite(p) else _fmt(p)])


def read_paths(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) if r[k] != "" else np.nan for r in rows])
            for k in ("t", "eta", "Q", "f", "pbar")}


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n", encoding="utf-8")
