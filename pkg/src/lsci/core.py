"""Discretized functional data: grids, function samples and sets, norms.

Every function in lsci lives on a fixed :class:`Grid`.  A grid carries
per-point quadrature weights, so that weighted sums approximate integrals
over the domain.  All containers are immutable; their arrays are flagged
read-only on construction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .exceptions import GridMismatch, ShapeMismatch

__all__ = [
    "GridKind",
    "Grid",
    "FunctionSample",
    "FunctionSet",
    "l2_norm",
    "sup_norm",
    "inner",
    "subtract",
    "add",
    "check_same_grid",
]


class GridKind(str, enum.Enum):
    INTERVAL_1D = "Interval1D"
    LATLON_2D = "LatLon2D"


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Grid:
    """Ordered evaluation points with positive quadrature weights.

    Parameters
    ----------
    kind : GridKind
        ``Interval1D`` for points in [0, 1], ``LatLon2D`` for (lat, lon)
        pairs in degrees stored row-major, latitude first.
    points : array_like
        Shape ``(p,)`` for 1D grids and ``(p, 2)`` for lat-lon grids.
    cell_weights : array_like of shape (p,)
        Quadrature weights; their sum is the measure of the domain.
    shape : tuple of int, optional
        Logical shape of the grid, ``(p,)`` or ``(n_lat, n_lon)``.
    """

    kind: GridKind
    points: np.ndarray
    cell_weights: np.ndarray
    shape: tuple = field(default=())

    def __post_init__(self):
        kind = GridKind(self.kind)
        points = _frozen(self.points)
        weights = _frozen(self.cell_weights)
        if weights.ndim != 1 or len(points) != len(weights):
            raise ShapeMismatch(
                f"|points| = {len(points)} but |cell_weights| = {weights.shape}"
            )
        if not np.all(weights > 0):
            raise ValueError("cell weights must be strictly positive")
        if kind is GridKind.INTERVAL_1D:
            if points.ndim != 1:
                raise ShapeMismatch("1D grid points must be a flat vector")
            if np.any(np.diff(points) <= 0):
                raise ValueError("1D grid points must be strictly increasing")
            shape = (len(points),)
        else:
            if points.ndim != 2 or points.shape[1] != 2:
                raise ShapeMismatch("lat-lon grid points must have shape (p, 2)")
            shape = tuple(self.shape) if self.shape else _infer_latlon_shape(points)
            if int(np.prod(shape)) != len(points):
                raise ShapeMismatch(f"grid shape {shape} does not hold {len(points)} points")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "cell_weights", weights)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def interval(cls, n_points: int = 64) -> "Grid":
        """Uniform cell-centred grid on [0, 1] with weights summing to 1."""
        if n_points < 1:
            raise ValueError("n_points must be positive")
        x = (np.arange(n_points) + 0.5) / n_points
        return cls(GridKind.INTERVAL_1D, x, np.full(n_points, 1.0 / n_points))

    @classmethod
    def latlon(cls, n_lat: int = 32, n_lon: int = 64) -> "Grid":
        """Equiangular cell-centred sphere grid with cos(latitude) weights summing to 1."""
        lat = -90.0 + (np.arange(n_lat) + 0.5) * 180.0 / n_lat
        lon = np.arange(n_lon) * 360.0 / n_lon
        la, lo = np.meshgrid(lat, lon, indexing="ij")
        points = np.column_stack([la.ravel(), lo.ravel()])
        w = np.cos(np.deg2rad(la.ravel()))
        return cls(GridKind.LATLON_2D, points, w / w.sum(), shape=(n_lat, n_lon))

    @property
    def size(self) -> int:
        return len(self.cell_weights)

    @property
    def measure(self) -> float:
        return float(self.cell_weights.sum())

    @property
    def is_1d(self) -> bool:
        return self.kind is GridKind.INTERVAL_1D

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.kind is other.kind
            and self.shape == other.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.cell_weights, other.cell_weights)
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.shape, self.points.tobytes(), self.cell_weights.tobytes()))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "shape": list(self.shape),
            "points": self.points.tolist(),
            "weights": self.cell_weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(GridKind(d["kind"]), d["points"], d["weights"], shape=tuple(d.get("shape", ())))


def _infer_latlon_shape(points):
    n_lat = len(np.unique(points[:, 0]))
    return (n_lat, len(points) // max(n_lat, 1))


def check_same_grid(a: Grid, b: Grid) -> None:
    if a is not b and a != b:
        raise GridMismatch(f"grid of size {a.size} ({a.kind.value}) vs {b.size} ({b.kind.value})")


@dataclass(frozen=True, eq=False)
class FunctionSample:
    """One function evaluated on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (self.grid.size,):
            raise ShapeMismatch(f"expected {self.grid.size} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("function values must be finite")
        object.__setattr__(self, "values", values)

    def __add__(self, other: "FunctionSample") -> "FunctionSample":
        return add(self, other)

    def __sub__(self, other: "FunctionSample") -> "FunctionSample":
        return subtract(self, other)


class FunctionSet:
    """An ordered collection of functions sharing one grid.

    Values are held as a single ``(n_samples, grid.size)`` matrix; indexing
    with an integer yields a :class:`FunctionSample`, indexing with a slice
    or an index array yields a new :class:`FunctionSet`.
    """

    __slots__ = ("grid", "values", "index_labels")

    def __init__(self, grid: Grid, values, index_labels: Optional[Sequence[float]] = None):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, grid.size)
        if values.ndim != 2 or values.shape[1] != grid.size:
            raise ShapeMismatch(
                f"expected an (n, {grid.size}) value matrix, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("function values must be finite")
        labels = None
        if index_labels is not None:
            labels = _frozen(index_labels)
            if labels.shape != (values.shape[0],):
                raise ShapeMismatch("index_labels must have one entry per sample")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "index_labels", labels)

    def __setattr__(self, name, value):
        raise AttributeError("FunctionSet is immutable")

    @classmethod
    def from_samples(cls, samples: Sequence[FunctionSample], index_labels=None) -> "FunctionSet":
        if not samples:
            raise ValueError("need at least one sample to infer the grid")
        grid = samples[0].grid
        for s in samples[1:]:
            check_same_grid(grid, s.grid)
        return cls(grid, np.stack([s.values for s in samples]), index_labels)

    @property
    def samples(self) -> list:
        return list(self)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __iter__(self) -> Iterator[FunctionSample]:
        for row in self.values:
            yield FunctionSample(self.grid, row)

    def __getitem__(self, idx) -> Union[FunctionSample, "FunctionSet"]:
        if isinstance(idx, (int, np.integer)):
            return FunctionSample(self.grid, self.values[idx])
        labels = None if self.index_labels is None else self.index_labels[idx]
        return FunctionSet(self.grid, self.values[idx], labels)

    def __repr__(self) -> str:
        return f"FunctionSet(n={len(self)}, grid={self.grid.kind.value}[{self.grid.size}])"


def l2_norm(f: FunctionSample) -> float:
    """Quadrature L2 norm ``sqrt(sum_i w_i f_i^2)``."""
    return float(np.sqrt(np.dot(f.grid.cell_weights, f.values**2)))


def sup_norm(f: FunctionSample) -> float:
    return float(np.max(np.abs(f.values))) if f.values.size else 0.0


def inner(a: FunctionSample, b: FunctionSample) -> float:
    """Quadrature inner product of two functions on the same grid."""
    check_same_grid(a.grid, b.grid)
    return float(np.dot(a.grid.cell_weights, a.values * b.values))


def subtract(a: FunctionSample, b: FunctionSample) -> FunctionSample:
    check_same_grid(a.grid, b.grid)
    return FunctionSample(a.grid, a.values - b.values)


def add(a: FunctionSample, b: FunctionSample) -> FunctionSample:
    check_same_grid(a.grid, b.grid)
    return FunctionSample(a.grid, a.values + b.values)
