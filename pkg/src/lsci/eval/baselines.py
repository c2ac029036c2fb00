"""Split-conformal band baselines for functional residuals.

Each rule is calibrated once and gives the same band offsets around every
prediction:

* ``Conf1``: conformal quantile of L2 residual norms, rendered as the
  constant band of half-width ``k_n / sqrt(|D|)`` (the L2 ball itself is
  not a band).
* ``Supr``: conformal quantile of sup-norm residuals, a constant band.
* ``Conf2``: sup scores of residuals divided by their pointwise standard
  deviation ``s(x)``; the band is ``+- k s(x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import FunctionSample, FunctionSet
from ..exceptions import InsufficientCalibration
from ..sampler import PredictionBand

__all__ = [
    "BandRule",
    "conformal_rank",
    "conformal_quantile",
    "baseline_conf_l2",
    "baseline_supr",
    "baseline_conf_modulated",
]

MIN_SCALE = 1e-8


@dataclass(frozen=True, eq=False)
class BandRule:
    """Band ``prediction + [-half_width, +half_width]``, one half-width per grid point."""

    name: str
    half_width: np.ndarray
    k_n: float
    norm: str = "sup"
    scale: Optional[np.ndarray] = None
    cell_weights: Optional[np.ndarray] = None

    def scores(self, residuals) -> np.ndarray:
        """Nonconformity score of residual rows ``(m, p)`` under this rule."""
        r = np.atleast_2d(residuals)
        if self.scale is not None:
            r = r / self.scale
        if self.norm == "l2":
            return np.sqrt((r**2) @ self.cell_weights)
        return np.abs(r).max(axis=-1)

    def contains(self, residuals) -> np.ndarray:
        """Membership of residual rows in the conformal set (score at most ``k_n``)."""
        return self.scores(residuals) <= self.k_n

    def band(self, prediction: FunctionSample) -> PredictionBand:
        grid = prediction.grid
        return PredictionBand(FunctionSample(grid, prediction.values - self.half_width),
                              FunctionSample(grid, prediction.values + self.half_width))

    def bounds(self, predictions: np.ndarray):
        """Lower and upper bounds for prediction rows ``(m, p)``."""
        return predictions - self.half_width, predictions + self.half_width


def conformal_rank(n: int, alpha: float) -> int:
    """``ceil((1 - alpha)(n + 1))``, the rank of the split-conformal quantile."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return int(math.ceil((1 - alpha) * (n + 1) - 1e-9))


def conformal_quantile(scores, alpha: float) -> float:
    scores = np.sort(np.asarray(scores, dtype=np.float64))
    k = conformal_rank(len(scores), alpha)
    if k > len(scores):
        raise InsufficientCalibration(
            f"{len(scores)} calibration scores cannot give level {1 - alpha}; "
            f"need at least {math.ceil(1 / alpha - 1)}")
    return float(scores[k - 1])


def baseline_conf_l2(residuals_cal: FunctionSet, alpha: float) -> BandRule:
    grid = residuals_cal.grid
    norms = np.sqrt((residuals_cal.values**2) @ grid.cell_weights)
    k_n = conformal_quantile(norms, alpha)
    half = np.full(grid.size, k_n / math.sqrt(grid.measure))
    return BandRule("Conf1", half, k_n, "l2", None, grid.cell_weights)


def baseline_supr(residuals_cal: FunctionSet, alpha: float) -> BandRule:
    k_n = conformal_quantile(np.abs(residuals_cal.values).max(axis=1), alpha)
    return BandRule("Supr", np.full(residuals_cal.grid.size, k_n), k_n)


def baseline_conf_modulated(residuals_cal: FunctionSet, alpha: float) -> BandRule:
    if len(residuals_cal) < 2:
        raise InsufficientCalibration("a modulated band needs at least 2 calibration residuals")
    s = np.maximum(residuals_cal.values.std(axis=0, ddof=1), MIN_SCALE)
    k_n = conformal_quantile(np.abs(residuals_cal.values / s).max(axis=1), alpha)
    return BandRule("Conf2", k_n * s, k_n, "sup", s)
