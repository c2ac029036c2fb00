"""Band metrics: risk, width and distance correlation."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core import FunctionSet
from ..exceptions import ShapeMismatch
from ..pipeline import band_width, inside_fraction

__all__ = [
    "inside_fraction",
    "band_width",
    "risk",
    "width",
    "distance_correlation",
    "marginal_coverage",
]


def risk(bands: Sequence, targets: FunctionSet, delta: float = 0.01) -> float:
    """Share of targets whose inside fraction reaches ``1 - delta``.

    ``bands`` is a sequence of :class:`~lsci.sampler.PredictionBand`, one per
    row of ``targets``.
    """
    if len(bands) != len(targets):
        raise ShapeMismatch(f"{len(bands)} bands for {len(targets)} targets")
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    if len(bands) == 0:
        return float("nan")
    lower = np.stack([b.lower.values for b in bands])
    upper = np.stack([b.upper.values for b in bands])
    frac = inside_fraction(lower, upper, targets.values, targets.grid.cell_weights)
    return float(np.mean(frac >= 1.0 - delta))


def width(band) -> float:
    return float(band_width(band.lower.values, band.upper.values))


def _centered_distances(x):
    a = np.abs(x[:, None] - x[None, :])
    return a - a.mean(axis=0) - a.mean(axis=1)[:, None] + a.mean()


def distance_correlation(x, y) -> float:
    """Sample distance correlation of two scalar samples, in [0, 1].

    Uses doubly centred distance matrices (the V-statistic form).  A sample
    with no spread gives 0.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(x) != len(y):
        raise ShapeMismatch(f"samples of length {len(x)} and {len(y)}")
    if len(x) < 4:
        raise ValueError("distance correlation needs at least 4 observations")
    a = _centered_distances(x)
    b = _centered_distances(y)
    v_xy = (a * b).mean()
    v_xx = (a * a).mean()
    v_yy = (b * b).mean()
    if v_xx <= 0 or v_yy <= 0:
        return 0.0
    r2 = v_xy / np.sqrt(v_xx * v_yy)
    return float(np.sqrt(min(max(r2, 0.0), 1.0)))


def marginal_coverage(in_set) -> float:
    return float(np.mean(np.asarray(in_set, dtype=bool)))
