"""CSV / JSON persistence for grids and function sets.

A function set is stored as a headerless CSV (one row per function, one
column per grid point, optionally led by an index column) next to a JSON
grid header.  Values are printed with 17 significant digits, which makes the
float64 round trip exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import FunctionSet, Grid
from .exceptions import ShapeMismatch

__all__ = [
    "write_grid",
    "read_grid",
    "write_function_set",
    "read_function_set",
    "write_matrix_csv",
    "read_matrix_csv",
    "dump_json",
]

FLOAT_FMT = "%.17g"


def _to_builtin(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"{type(o).__name__} is not JSON serializable")


def dump_json(obj, path) -> None:
    """Pretty, key-sorted UTF-8 JSON; numpy scalars and arrays become plain values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_to_builtin)
        fh.write("\n")


def write_grid(grid: Grid, path) -> None:
    dump_json(grid.to_dict(), path)


def read_grid(path) -> Grid:
    with open(path, encoding="utf-8") as fh:
        return Grid.from_dict(json.load(fh))


def write_matrix_csv(values, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        np.savetxt(fh, values, fmt=FLOAT_FMT, delimiter=",")


def read_matrix_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return np.empty((0, 0))
    return np.loadtxt(text.splitlines(), delimiter=",", ndmin=2, dtype=np.float64)


def write_function_set(fs: FunctionSet, path, include_index: bool = True) -> None:
    """Write ``fs`` as CSV; the index column is written when labels exist."""
    values = fs.values
    if include_index and fs.index_labels is not None:
        values = np.column_stack([fs.index_labels, values])
    write_matrix_csv(values, path)


def read_function_set(path, grid: Grid) -> FunctionSet:
    """Read a CSV written by :func:`write_function_set`.

    A file with ``grid.size + 1`` columns is taken to carry a leading index
    column.
    """
    m = read_matrix_csv(path)
    if m.size == 0:
        return FunctionSet(grid, np.empty((0, grid.size)))
    if m.shape[1] == grid.size:
        return FunctionSet(grid, m)
    if m.shape[1] == grid.size + 1:
        return FunctionSet(grid, m[:, 1:], index_labels=m[:, 0])
    raise ShapeMismatch(
        f"{path}: {m.shape[1]} columns do not match a grid of {grid.size} points"
    )
