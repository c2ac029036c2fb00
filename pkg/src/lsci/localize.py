"""Localization: knock-offs, kernel weights, coverage-gap bound, bandwidth choice.

Weights always have ``n + 1`` entries: one per calibration input and a final
slot for the test point itself, which the local measures place at infinity.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import FunctionSample, FunctionSet, check_same_grid
from .exceptions import DegenerateWeights, ShapeMismatch, Unsupported

__all__ = [
    "LocalizerKind",
    "Localizer",
    "LocalWeights",
    "knockoff",
    "pairwise_distances",
    "weights_from_distances",
    "local_weights",
    "coverage_gap_bound",
    "campbell_weights",
    "select_bandwidth",
    "knn_size",
]

log = logging.getLogger(__name__)


class LocalizerKind(str, enum.Enum):
    L2 = "L2"
    LINF = "LInf"
    KNN = "KNN"


@dataclass(frozen=True)
class Localizer:
    """A localization kernel and its bandwidth ``lam >= 0``.

    ``L2`` and ``LInf`` weight calibration point ``t`` by ``exp(-lam * d_t)``
    with ``d_t`` the L2 or sup distance between input functions.  ``KNN``
    spreads uniform mass over the ``round(n / (1 + lam))`` nearest inputs.
    """

    kind: LocalizerKind = LocalizerKind.L2
    bandwidth: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LocalizerKind(self.kind))
        if not self.bandwidth >= 0:
            raise ValueError("bandwidth must be nonnegative")

    def with_bandwidth(self, lam: float) -> "Localizer":
        return replace(self, bandwidth=float(lam))


@dataclass(frozen=True, eq=False)
class LocalWeights:
    """Probability vector over ``n`` calibration slots plus the test slot."""

    w: np.ndarray
    distances: np.ndarray
    localizer: Localizer

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        d = np.array(self.distances, dtype=np.float64, copy=True)
        if w.shape != (len(d) + 1,):
            raise ShapeMismatch(f"{len(w)} weights for {len(d)} calibration distances")
        w.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "distances", d)

    @property
    def n(self) -> int:
        return len(self.distances)

    @property
    def calibration(self) -> np.ndarray:
        return self.w[:-1]

    @property
    def test_mass(self) -> float:
        return float(self.w[-1])

    @property
    def effective_size(self) -> float:
        """Kish effective sample size of the calibration weights."""
        c = self.calibration
        s2 = float(np.dot(c, c))
        return float(c.sum() ** 2 / s2) if s2 > 0 else 0.0


def knockoff(f: FunctionSample, noise_scale: float, seed) -> FunctionSample:
    """``f`` plus i.i.d. Gaussian noise of standard deviation ``noise_scale`` per grid point."""
    if noise_scale < 0:
        raise ValueError("noise_scale must be nonnegative")
    if noise_scale == 0:
        return f
    rng = np.random.default_rng(seed)
    return FunctionSample(f.grid, f.values + noise_scale * rng.standard_normal(f.grid.size))


def pairwise_distances(cal_values, test_values, cell_weights, kind) -> np.ndarray:
    """Distances between test inputs ``(..., p)`` and calibration inputs ``(n, p)``.

    Returns an array of shape ``(..., n)``.
    """
    kind = LocalizerKind(kind)
    diff = np.asarray(test_values)[..., None, :] - np.asarray(cal_values)
    if kind is LocalizerKind.LINF:
        return np.abs(diff).max(axis=-1)
    # KNN ranks by L2 distance
    return np.sqrt((diff**2) @ cell_weights)


def knn_size(n: int, lam: float) -> int:
    return int(min(n, max(1, np.floor(n / (1.0 + lam) + 0.5))))


def weights_from_distances(distances, localizer: Localizer) -> np.ndarray:
    """Normalized ``(..., n + 1)`` weights for distance arrays of shape ``(..., n)``."""
    d = np.asarray(distances, dtype=np.float64)
    n = d.shape[-1]
    lam = localizer.bandwidth
    if localizer.kind is LocalizerKind.KNN:
        k = knn_size(n, lam)
        rank = np.argsort(np.argsort(d, axis=-1, kind="stable"), axis=-1, kind="stable")
        cal = np.where(rank < k, 1.0, 0.0)
    else:
        cal = np.exp(-lam * d)
    w = np.concatenate([cal, np.ones(d.shape[:-1] + (1,))], axis=-1)
    return w / w.sum(axis=-1, keepdims=True)


def local_weights(f_cal: FunctionSet, f_test: FunctionSample, localizer: Localizer) -> LocalWeights:
    """Weights of calibration inputs relative to a (knocked-off) test input."""
    check_same_grid(f_cal.grid, f_test.grid)
    d = pairwise_distances(f_cal.values, f_test.values, f_cal.grid.cell_weights, localizer.kind)
    return LocalWeights(weights_from_distances(d, localizer), d, localizer)


def coverage_gap_bound(w: LocalWeights) -> float:
    """Upper bound on the coverage gap for exponential-kernel weights.

    ``sum_t exp(-lam d_t) d_t / (1 + sum_t exp(-lam d_t))``, the test slot
    contributing ``exp(0) = 1`` to the denominator only.
    """
    if w.localizer.kind is LocalizerKind.KNN:
        raise Unsupported("the coverage-gap bound is derived for exponential weights only")
    return float(_gap_bound(w.distances, w.localizer.bandwidth))


def _gap_bound(d, lam):
    e = np.exp(-lam * d)
    return (e * d).sum(axis=-1) / (e.sum(axis=-1) + 1.0)


def campbell_weights(distances) -> np.ndarray:
    """Local-exchangeability weights ``eta_t`` from sorted distances.

    ``M`` is the largest count with ``mean_{m <= M}(1 + 2 d_(m)) >= 2 d_(M)``,
    ``mu`` the mean of the ``M`` smallest distances, and
    ``eta_t = max(0, 1/M + 2 (mu - d_t))``, renormalized to sum to one.
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.ndim != 1 or d.size == 0 or not np.all(np.isfinite(d)):
        raise ValueError("distances must be a nonempty finite vector")
    ds = np.sort(d)
    counts = np.arange(1, len(ds) + 1)
    ok = np.cumsum(1.0 + 2.0 * ds) / counts >= 2.0 * ds
    big_m = int(counts[ok].max()) if ok.any() else 1
    mu = ds[:big_m].mean()
    eta = np.maximum(0.0, 1.0 / big_m + 2.0 * (mu - d))
    total = eta.sum()
    if total <= 0:
        raise DegenerateWeights("every local-exchangeability weight is zero")
    return eta / total


def select_bandwidth(
    f: FunctionSet,
    residuals: FunctionSet,
    localizer: Localizer,
    lam_grid: Sequence[float],
    alpha: float,
    config=None,
    n_folds: int = 5,
    max_eval_per_fold: Optional[int] = 40,
    n_samples: int = 100,
    seed: int = 0,
) -> float:
    """Pick a bandwidth by K-fold cross validation on the calibration pairs.

    For every candidate, each fold is scored by an LSCI predictor calibrated
    on the remaining folds: held-out coverage and mean sampled band width.
    Among bandwidths whose mean coverage reaches ``1 - alpha - 0.01`` the
    narrowest wins; if none does, the best-covering one.  Ties go to the
    smaller bandwidth.

    ``max_eval_per_fold`` caps the held-out points evaluated per fold and
    ``n_samples`` the ensemble size behind each band, to keep the search
    cheap; pass ``None`` to evaluate every held-out point.
    """
    from .conformal import LSCIConfig
    from .pipeline import evaluate_lsci

    lam_grid = sorted(float(x) for x in lam_grid)
    if not lam_grid:
        raise ValueError("lam_grid must not be empty")
    if len(lam_grid) == 1:
        return lam_grid[0]
    base = config if config is not None else LSCIConfig()
    n = len(f)
    rng = np.random.default_rng(seed)
    folds = np.array_split(rng.permutation(n), n_folds)
    results = []
    for lam in lam_grid:
        cfg = replace(base, localizer=localizer.with_bandwidth(lam), alpha=alpha)
        covered, widths = [], []
        for k, held in enumerate(folds):
            train = np.setdiff1d(np.arange(n), held)
            held = held[:max_eval_per_fold] if max_eval_per_fold else held
            out = evaluate_lsci(
                f[train], residuals[train], f[held], residuals[held], cfg,
                n_samples=n_samples, seed=seed * 1000 + k,
            )
            covered.append(out["in_set"])
            widths.append(out["width"])
        cov = float(np.mean(np.concatenate(covered)))
        wid = float(np.mean(np.concatenate(widths)))
        log.debug("bandwidth %g: coverage %.3f width %.4f", lam, cov, wid)
        results.append((lam, cov, wid))
    feasible = [r for r in results if r[1] >= 1 - alpha - 0.01]
    if feasible:
        return min(feasible, key=lambda r: (r[2], r[0]))[0]
    return max(results, key=lambda r: (r[1], -r[0]))[0]
