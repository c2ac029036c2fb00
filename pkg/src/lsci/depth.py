"""Weighted univariate depths and the infimum depth over a projection family.

A :class:`LocalMeasure` is a weighted empirical distribution on the real
line plus a point mass at infinity.  The array kernels in this module take
sorted atom locations and weights with arbitrary leading batch axes, so the
same code scores one residual or a whole batch of test points at once.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FunctionSample, check_same_grid
from .exceptions import EmptyMeasure, ShapeMismatch
from .projections import ProjectionFamily

__all__ = [
    "DepthKind",
    "InfinityMass",
    "LocalMeasure",
    "univariate_depth",
    "phi_depth",
    "depth_at_points",
    "depth_at_atoms",
]

MIN_VARIANCE = 1e-12


class DepthKind(str, enum.Enum):
    TUKEY = "Tukey"
    NORM_INF = "NormInf"
    MAHALANOBIS = "Mahalanobis"


class InfinityMass(str, enum.Enum):
    """Where the reserved test-slot mass sits: all at +inf, or half at each end."""

    UPPER = "upper"
    SPLIT = "split"


@dataclass(frozen=True, eq=False)
class LocalMeasure:
    """Sorted weighted atoms plus ``inf_mass`` reserved at infinity."""

    locations: np.ndarray
    weights: np.ndarray
    inf_mass: float = 0.0

    def __post_init__(self):
        loc = np.array(self.locations, dtype=np.float64, copy=True)
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if loc.ndim != 1 or loc.shape != w.shape:
            raise ShapeMismatch("locations and weights must be matching vectors")
        if np.any(w < 0) or self.inf_mass < 0:
            raise ValueError("measure weights must be nonnegative")
        total = w.sum() + self.inf_mass
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"measure mass is {total!r}, expected 1")
        if np.any(np.diff(loc) < 0):
            raise ValueError("atoms must be sorted ascending; use LocalMeasure.from_atoms")
        loc.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "inf_mass", float(self.inf_mass))

    @classmethod
    def from_atoms(cls, values, weights, inf_mass: float = 0.0) -> "LocalMeasure":
        values = np.asarray(values, dtype=np.float64)
        order = np.argsort(values, kind="stable")
        return cls(values[order], np.asarray(weights, dtype=np.float64)[order], inf_mass)

    @property
    def n_atoms(self) -> int:
        return len(self.locations)

    def cdf(self, x: float) -> float:
        """Mass of the finite atoms at or below ``x``."""
        return float(self.weights[self.locations <= x].sum())


def _inf_split(inf_mass, infinity_mass):
    inf_mass = np.asarray(inf_mass, dtype=np.float64)
    if InfinityMass(infinity_mass) is InfinityMass.SPLIT:
        return 0.5 * inf_mass, 0.5 * inf_mass
    return np.zeros_like(inf_mass), inf_mass


# Points within this relative distance of an atom count as sitting on it.
# Sampled proposals are built from atom values, so in exact arithmetic their
# projections hit atoms; this keeps rounding in the projection from deciding
# whether that atom is counted.
TIE_RTOL = 1e-9


def _cdf_at(sorted_vals, cum, x, side):
    """Cumulative finite mass at ``x`` (side='right') or just below it (side='left')."""
    lead = sorted_vals.shape[:-1]
    n = sorted_vals.shape[-1]
    sv = sorted_vals.reshape(-1, n)
    cm = cum.reshape(-1, n)
    xx = np.broadcast_to(x, lead + x.shape[-1:]).reshape(len(sv), -1)
    out = np.empty(xx.shape)
    for i in range(len(sv)):
        tol = TIE_RTOL * max(abs(sv[i, 0]), abs(sv[i, -1]))
        probe = xx[i] + tol if side == "right" else xx[i] - tol
        idx = np.searchsorted(sv[i], probe, side=side)
        out[i] = np.where(idx > 0, cm[i][np.maximum(idx - 1, 0)], 0.0)
    return out.reshape(lead + x.shape[-1:])


def _weighted_median(sorted_vals, cum):
    total = cum[..., -1:]
    idx = np.argmax(cum >= 0.5 * total, axis=-1)
    return np.take_along_axis(sorted_vals, idx[..., None], axis=-1)[..., 0]


def _moments(sorted_vals, sorted_w):
    total = sorted_w.sum(axis=-1)
    mean = (sorted_w * sorted_vals).sum(axis=-1) / total
    var = (sorted_w * (sorted_vals - mean[..., None]) ** 2).sum(axis=-1) / total
    return mean, np.maximum(var, MIN_VARIANCE)


def _check_nonempty(sorted_vals, sorted_w, kind):
    if sorted_vals.shape[-1] == 0:
        raise EmptyMeasure("the measure has no finite atoms")
    if kind is not DepthKind.TUKEY and np.any(sorted_w.sum(axis=-1) <= 0):
        raise EmptyMeasure(f"{kind.value} depth needs positive finite mass")


def depth_at_points(sorted_vals, sorted_w, inf_mass, x, kind, infinity_mass="upper"):
    """Depth of query points ``x`` under batches of sorted measures.

    Parameters
    ----------
    sorted_vals, sorted_w : (..., n) arrays
        Atom locations (ascending along the last axis) and their masses.
    inf_mass : (...) array
        Mass reserved at infinity for every measure.
    x : (..., m) array
        Query points, broadcast against the leading axes.
    kind : DepthKind

    Returns
    -------
    (..., m) array of depths
    """
    kind = DepthKind(kind)
    sorted_vals = np.asarray(sorted_vals, dtype=np.float64)
    sorted_w = np.asarray(sorted_w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    _check_nonempty(sorted_vals, sorted_w, kind)
    if kind is DepthKind.TUKEY:
        cum = np.cumsum(sorted_w, axis=-1)
        low_inf, up_inf = _inf_split(inf_mass, infinity_mass)
        f_at = _cdf_at(sorted_vals, cum, x, "right")
        f_below = _cdf_at(sorted_vals, cum, x, "left")
        lower = low_inf[..., None] + f_at
        upper = up_inf[..., None] + cum[..., -1:] - f_below
        return np.minimum(lower, upper)
    if kind is DepthKind.NORM_INF:
        med = _weighted_median(sorted_vals, np.cumsum(sorted_w, axis=-1))
        return 1.0 / (1.0 + np.abs(x - med[..., None]))
    mean, var = _moments(sorted_vals, sorted_w)
    return 1.0 / (1.0 + (x - mean[..., None]) ** 2 / var[..., None])


def depth_at_atoms(sorted_vals, sorted_w, inf_mass, kind, infinity_mass="upper",
                   exclude_self: bool = False):
    """Depth of every atom of its own measure, in sorted order.

    Equivalent to ``depth_at_points(..., x=sorted_vals)``, and linear time for
    Tukey depth when no two atoms are tied.  With ``exclude_self`` each
    atom's own mass is left out of both of its Tukey tails, so an atom is
    scored against the others exactly as a fresh point would be.  The other
    kinds do not count atom masses and ignore the flag.
    """
    kind = DepthKind(kind)
    sorted_vals = np.asarray(sorted_vals, dtype=np.float64)
    sorted_w = np.asarray(sorted_w, dtype=np.float64)
    _check_nonempty(sorted_vals, sorted_w, kind)
    if kind is not DepthKind.TUKEY:
        return depth_at_points(sorted_vals, sorted_w, inf_mass, sorted_vals, kind, infinity_mass)
    cum = np.cumsum(sorted_w, axis=-1)
    tol = TIE_RTOL * np.maximum(np.abs(sorted_vals[..., :1]), np.abs(sorted_vals[..., -1:]))
    low_inf, up_inf = _inf_split(inf_mass, infinity_mass)
    if np.all(np.diff(sorted_vals, axis=-1) > tol):
        lower = low_inf[..., None] + cum
        f_below = np.concatenate([np.zeros_like(cum[..., :1]), cum[..., :-1]], axis=-1)
        upper = up_inf[..., None] + cum[..., -1:] - f_below
    else:
        # tied atoms: fall back to the point-wise lookup, which groups them
        d = depth_at_points(sorted_vals, sorted_w, inf_mass, sorted_vals, kind, infinity_mass)
        if not exclude_self:
            return d
        lower = upper = d
    if exclude_self:
        lower = lower - sorted_w
        upper = upper - sorted_w
    return np.maximum(np.minimum(lower, upper), 0.0)


def univariate_depth(x: float, m: LocalMeasure, kind=DepthKind.TUKEY, infinity_mass="upper") -> float:
    """Depth of a scalar under one local measure.

    Tukey: ``min(F(x), 1 - F(x-))`` with the infinity mass in the upper tail.
    NormInf: ``1 / (1 + |x - median|)``.
    Mahalanobis: ``1 / (1 + (x - mean)^2 / var)``.
    Median, mean and variance are taken over the finite atoms only.
    """
    out = depth_at_points(m.locations, m.weights, np.float64(m.inf_mass),
                          np.array([x], dtype=np.float64), kind, infinity_mass)
    return float(out[0])


def phi_depth(r: FunctionSample, family: ProjectionFamily, measures: Sequence[LocalMeasure],
              kind=DepthKind.TUKEY, infinity_mass="upper") -> float:
    """Infimum over the family of the univariate depths of ``phi_k(r)``."""
    check_same_grid(family.grid, r.grid)
    if len(measures) != family.n_phi:
        raise ShapeMismatch(f"{len(measures)} measures for {family.n_phi} projections")
    scores = (family.directions * family.grid.cell_weights) @ r.values
    return min(
        univariate_depth(s, m, kind, infinity_mass) for s, m in zip(scores, measures)
    )
