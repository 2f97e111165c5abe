"""CSV and JSON artifacts.

Floats are written with repr, which round-trips IEEE doubles exactly, so a
field written by :func:`write_field_csv` reloads bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .discretization import Field, Grid

__all__ = [
    "FIELD_COLUMNS",
    "THIN_ANNULUS_COLUMNS",
    "SWEEP_COLUMNS",
    "write_field_csv",
    "read_field_csv",
    "write_rows_csv",
    "write_radial_csv",
    "write_grid_json",
    "write_json",
    "to_jsonable",
]

FIELD_COLUMNS = ("theta", "rho", "r", "s", "t", "value")
THIN_ANNULUS_COLUMNS = ("R", "gammaR", "lambda", "lambda_over_R2", "deviation_from_pi2")
SWEEP_COLUMNS = ("m", "n", "p", "lambda1", "criterion", "M", "nonradiality", "energy", "distinct_flags")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _open_csv(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


def write_rows_csv(path, columns, rows) -> Path:
    """Rows are dicts (extra keys ignored) or sequences in column order."""
    with _open_csv(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row[c] for c in columns]
            w.writerow([_fmt(x) for x in row])
    return Path(path)


def write_field_csv(path, field: Field) -> Path:
    """One row per interior node, theta varying slowest."""
    g = field.grid
    th = np.broadcast_to(g.theta[:, None], g.shape)
    rho = np.broadcast_to(g.rho[None, 1:-1], g.shape)
    cols = (th, rho, g.r[:, 1:-1], g.s[:, 1:-1], g.t[:, 1:-1], field.values)
    rows = zip(*(c.ravel() for c in cols))
    return write_rows_csv(path, FIELD_COLUMNS, rows)


def read_field_csv(path, grid: Grid, check_nodes: bool = True) -> Field:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != FIELD_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        data = np.array([[float(x) for x in row] for row in reader])
    if data.shape[0] != grid.size:
        raise ValueError(f"{path}: {data.shape[0]} rows, grid has {grid.size} interior nodes")
    if check_nodes:
        th = np.broadcast_to(grid.theta[:, None], grid.shape).ravel()
        rho = np.broadcast_to(grid.rho[None, 1:-1], grid.shape).ravel()
        if not (np.array_equal(data[:, 0], th) and np.array_equal(data[:, 1], rho)):
            raise ValueError(f"{path}: node coordinates do not match the grid")
    return grid.field(data[:, 5])


def write_radial_csv(path, r, u) -> Path:
    return write_rows_csv(path, ("r", "u"), zip(np.asarray(r).ravel(), np.asarray(u).ravel()))


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become null, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def write_json(path, obj) -> Path:
    """Sorted keys and a trailing newline so identical reports are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_grid_json(path, grid: Grid) -> Path:
    return write_json(path, grid.describe())
