"""Local spectral conformal calibration and set membership.

For a test input the calibration residuals are projected onto a family of
directions, each projection is turned into a locally weighted empirical
measure (weights from a kernel between inputs, plus the test slot held at
infinity), and every calibration residual is scored by its infimum depth
across projections.  The depth threshold ``q`` is a rank statistic of those
scores; the prediction set is every function whose residual is at least
``q`` deep.

:func:`calibrate_batch` runs the whole pipeline for many test inputs at once;
:func:`calibrate` is the single-input form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, List, Optional, Sequence

import numpy as np

from .core import FunctionSample, FunctionSet, Grid, check_same_grid
from .depth import DepthKind, InfinityMass, LocalMeasure, depth_at_atoms, depth_at_points
from .exceptions import EmptyCalibration, ShapeMismatch
from .localize import (
    Localizer,
    LocalizerKind,
    LocalWeights,
    pairwise_distances,
    weights_from_distances,
)
from .projections import (
    ProjectionFamily,
    ProjectionKind,
    build_random,
    build_wavelet,
    project,
    random_directions,
    weighted_fpca,
    weighted_fpca_batch,
)

__all__ = [
    "ThresholdRank",
    "LSCIConfig",
    "CalibrationScores",
    "CalibratedPredictor",
    "build_measures",
    "calibration_scores",
    "threshold",
    "threshold_rank",
    "contains",
    "calibrate",
    "calibrate_batch",
    "project_rows",
]

_LOCAL_FPCA = (ProjectionKind.FPCA, ProjectionKind.RFPCA)
_HYBRID = (ProjectionKind.RFPCA, ProjectionKind.RWAVE)
# p above which the per-test FPCA switches from batched primal to looped dual
_BATCH_FPCA_MAX_POINTS = 512


class ThresholdRank(str, enum.Enum):
    """Which order statistic of the calibration depths becomes ``q``.

    ``coverage`` takes the ``floor(alpha (n + 1))``-th smallest depth, the
    rank that leaves ``1 - alpha`` of the scores at or above ``q``.
    ``paper_literal`` takes the ``ceil((1 - alpha)(n + 1))``-th smallest.
    """

    COVERAGE = "coverage"
    PAPER_LITERAL = "paper_literal"


@dataclass(frozen=True)
class LSCIConfig:
    """Settings for one LSCI calibration.

    ``n_rand`` is the number of random directions appended in the hybrid
    families (RFPCA, RWave); by default half of ``n_phi``.  ``knockoff_scale``
    is relative: the knock-off noise standard deviation is this factor times
    the sample standard deviation of the calibration inputs.
    ``exclude_self`` scores each calibration residual under Tukey depth
    without its own atom, the way a test residual is scored; turning it off
    gives the literal in-sample depths, which sit one atom deeper than a
    test residual of the same rank and undercover at small thresholds.
    """

    projection: ProjectionKind = ProjectionKind.FPCA
    n_phi: int = 20
    n_rand: Optional[int] = None
    depth: DepthKind = DepthKind.TUKEY
    localizer: Localizer = field(default_factory=Localizer)
    alpha: float = 0.1
    knockoff_scale: float = 0.05
    seed: int = 0
    threshold_rank: ThresholdRank = ThresholdRank.COVERAGE
    infinity_mass: InfinityMass = InfinityMass.UPPER
    exclude_self: bool = True

    def __post_init__(self):
        object.__setattr__(self, "projection", ProjectionKind(self.projection))
        object.__setattr__(self, "depth", DepthKind(self.depth))
        object.__setattr__(self, "threshold_rank", ThresholdRank(self.threshold_rank))
        object.__setattr__(self, "infinity_mass", InfinityMass(self.infinity_mass))
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.n_phi < 1:
            raise ValueError("n_phi must be at least 1")
        if self.knockoff_scale < 0:
            raise ValueError("knockoff_scale must be nonnegative")

    @property
    def random_count(self) -> int:
        if self.projection not in _HYBRID:
            return 0
        n_rand = self.n_phi // 2 if self.n_rand is None else self.n_rand
        if not 0 <= n_rand < self.n_phi:
            raise ValueError("a hybrid family needs 0 <= n_rand < n_phi")
        return n_rand

    def to_dict(self) -> dict:
        return {
            "projection": self.projection.value,
            "n_phi": self.n_phi,
            "n_rand": self.n_rand,
            "depth": self.depth.value,
            "localizer": self.localizer.kind.value,
            "bandwidth": self.localizer.bandwidth,
            "alpha": self.alpha,
            "knockoff_scale": self.knockoff_scale,
            "seed": self.seed,
            "threshold_rank": self.threshold_rank.value,
            "infinity_mass": self.infinity_mass.value,
            "exclude_self": self.exclude_self,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LSCIConfig":
        d = dict(d)
        loc = Localizer(d.pop("localizer", "L2"), d.pop("bandwidth", 1.0))
        known = {f for f in cls.__dataclass_fields__}
        return cls(localizer=loc, **{k: v for k, v in d.items() if k in known})


@dataclass(frozen=True, eq=False)
class CalibrationScores:
    depths: np.ndarray

    def __len__(self) -> int:
        return len(self.depths)


def project_rows(values: np.ndarray, family: ProjectionFamily, block: int = 256) -> np.ndarray:
    """Project rows ``(m, p)`` onto a family, giving ``(m, n_phi)``.

    Each score is an explicit product-and-sum over the grid, so a row gets the
    same bits whatever else is in the batch.  Membership tests and the sampler
    both go through here and therefore never disagree.
    """
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    dw = family.directions * family.grid.cell_weights
    out = np.empty((values.shape[0], family.n_phi))
    step = max(1, block * 64 // max(1, dw.shape[1]))
    for s in range(0, values.shape[0], step):
        out[s:s + step] = (values[s:s + step, None, :] * dw[None, :, :]).sum(axis=-1)
    return out


class CalibratedPredictor:
    """Frozen LSCI prediction set for one test input.

    Attributes
    ----------
    family : ProjectionFamily
        Scoring directions.
    sorted_atoms, sorted_weights : (n_phi, n) arrays
        Projected calibration residuals per direction, ascending, with their
        local weights.
    inf_mass : float
        Test-slot mass held at infinity.
    depth_kind : DepthKind
    q : float
        Depth threshold; a residual belongs to the set iff its depth >= q.
    alpha : float
    prediction : FunctionSample
        Base-model prediction the residual set is shifted by.
    weights : LocalWeights
    scores : CalibrationScores or None
    """

    def __init__(self, family, sorted_atoms, sorted_weights, inf_mass, depth_kind, q, alpha,
                 prediction, weights, infinity_mass=InfinityMass.UPPER, scores=None, config=None):
        check_same_grid(family.grid, prediction.grid)
        if sorted_atoms.shape != (family.n_phi, weights.n):
            raise ShapeMismatch("need one measure per projection over every calibration residual")
        if q < 0:
            raise ValueError("q must be nonnegative")
        self.family = family
        self.sorted_atoms = np.asarray(sorted_atoms, dtype=np.float64)
        self.sorted_weights = np.asarray(sorted_weights, dtype=np.float64)
        self.inf_mass = float(inf_mass)
        self.depth_kind = DepthKind(depth_kind)
        self.q = float(q)
        self.alpha = float(alpha)
        self.prediction = prediction
        self.weights = weights
        self.infinity_mass = InfinityMass(infinity_mass)
        self.scores = scores
        self.config = config

    def __repr__(self):
        return (f"CalibratedPredictor(q={self.q:.6g}, alpha={self.alpha}, "
                f"n_phi={self.family.n_phi}, depth={self.depth_kind.value})")

    @property
    def grid(self) -> Grid:
        return self.family.grid

    @cached_property
    def measures(self) -> List[LocalMeasure]:
        return [LocalMeasure(a, w, self.inf_mass)
                for a, w in zip(self.sorted_atoms, self.sorted_weights)]

    def residual_depths(self, residuals) -> np.ndarray:
        """Infimum depth of each residual row ``(m, p)`` under the local measures."""
        x = project_rows(residuals, self.family).T
        inf = np.full(self.family.n_phi, self.inf_mass)
        d = depth_at_points(self.sorted_atoms, self.sorted_weights, inf, x,
                            self.depth_kind, self.infinity_mass)
        return d.min(axis=0)

    def depth_of(self, g: FunctionSample) -> float:
        check_same_grid(self.grid, g.grid)
        return float(self.residual_depths((g.values - self.prediction.values)[None, :])[0])

    def contains_values(self, g_values) -> np.ndarray:
        """Membership of many candidate functions given as rows."""
        g_values = np.atleast_2d(g_values)
        return self.residual_depths(g_values - self.prediction.values) >= self.q

    def coverage_gap_bound(self) -> float:
        from .localize import coverage_gap_bound
        return coverage_gap_bound(self.weights)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "family": self.family.to_dict(),
            "sorted_atoms": self.sorted_atoms.tolist(),
            "sorted_weights": self.sorted_weights.tolist(),
            "inf_mass": self.inf_mass,
            "depth_kind": self.depth_kind.value,
            "infinity_mass": self.infinity_mass.value,
            "q": self.q,
            "alpha": self.alpha,
            "prediction": self.prediction.values.tolist(),
            "weights": self.weights.w.tolist(),
            "distances": self.weights.distances.tolist(),
            "localizer": self.weights.localizer.kind.value,
            "bandwidth": self.weights.localizer.bandwidth,
            "scores": None if self.scores is None else self.scores.depths.tolist(),
            "config": None if self.config is None else self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibratedPredictor":
        grid = Grid.from_dict(d["grid"])
        loc = Localizer(d["localizer"], d["bandwidth"])
        weights = LocalWeights(np.asarray(d["weights"]), np.asarray(d["distances"]), loc)
        scores = None if d.get("scores") is None else CalibrationScores(np.asarray(d["scores"]))
        config = None if d.get("config") is None else LSCIConfig.from_dict(d["config"])
        return cls(
            ProjectionFamily.from_dict(d["family"], grid),
            np.asarray(d["sorted_atoms"], dtype=np.float64),
            np.asarray(d["sorted_weights"], dtype=np.float64),
            d["inf_mass"], d["depth_kind"], d["q"], d["alpha"],
            FunctionSample(grid, d["prediction"]), weights,
            d.get("infinity_mass", "upper"), scores, config,
        )


def build_measures(proj_cal: np.ndarray, w: LocalWeights) -> List[LocalMeasure]:
    """One local measure per projection: atoms ``phi_k(r_t)`` with mass ``w_t``."""
    proj_cal = np.atleast_2d(proj_cal)
    if proj_cal.shape[1] != w.n:
        raise ShapeMismatch(f"{proj_cal.shape[1]} projected residuals for {w.n} weights")
    return [LocalMeasure.from_atoms(row, w.calibration, w.test_mass) for row in proj_cal]


def calibration_scores(residuals_cal: FunctionSet, family: ProjectionFamily,
                       measures: Sequence[LocalMeasure], depth_kind=DepthKind.TUKEY,
                       infinity_mass=InfinityMass.UPPER, self_weights=None) -> CalibrationScores:
    """Infimum depth of every calibration residual under the local measures.

    When the measures were built from these same residuals, passing their
    weights as ``self_weights`` removes each residual's own atom from its
    Tukey depth (see ``LSCIConfig.exclude_self``).
    """
    check_same_grid(family.grid, residuals_cal.grid)
    if len(measures) != family.n_phi:
        raise ShapeMismatch(f"{len(measures)} measures for {family.n_phi} projections")
    proj = project(family, residuals_cal)
    depths = np.full(len(residuals_cal), np.inf)
    for row, m in zip(proj, measures):
        d = depth_at_points(m.locations, m.weights, np.float64(m.inf_mass), row,
                            depth_kind, infinity_mass)
        if self_weights is not None and DepthKind(depth_kind) is DepthKind.TUKEY:
            d = np.maximum(d - np.asarray(self_weights, dtype=np.float64), 0.0)
        np.minimum(depths, d, out=depths)
    return CalibrationScores(depths)


def threshold_rank(n: int, alpha: float, rank=ThresholdRank.COVERAGE) -> int:
    """1-based rank of the calibration depth used as ``q`` (0 means accept everything)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if ThresholdRank(rank) is ThresholdRank.COVERAGE:
        return int(math.floor(alpha * (n + 1) + 1e-9))
    return int(math.ceil((1 - alpha) * (n + 1) - 1e-9))


def _threshold_rows(depths: np.ndarray, alpha: float, rank) -> np.ndarray:
    n = depths.shape[-1]
    k = threshold_rank(n, alpha, rank)
    if k < 1:
        return np.zeros(depths.shape[:-1])
    if k > n:
        return np.full(depths.shape[:-1], np.inf)
    return np.partition(depths, k - 1, axis=-1)[..., k - 1]


def threshold(scores: CalibrationScores, alpha: float, rank=ThresholdRank.COVERAGE) -> float:
    """The rank statistic of the calibration depths used as the set threshold.

    Under the default ``coverage`` rank this is the ``floor(alpha (n + 1))``-th
    smallest depth, or 0 when that rank is below one.  Under ``paper_literal``
    it is the ``ceil((1 - alpha)(n + 1))``-th smallest (infinite, i.e. an
    empty set, if that exceeds ``n``).
    """
    return float(_threshold_rows(np.asarray(scores.depths, dtype=np.float64), alpha, rank))


def contains(pred: CalibratedPredictor, g_candidate: FunctionSample) -> bool:
    """Whether ``g_candidate`` lies in the prediction set (depth >= q)."""
    return pred.depth_of(g_candidate) >= pred.q


def fixed_family(grid: Grid, cfg: LSCIConfig) -> Optional[ProjectionFamily]:
    """The test-independent part of the scoring family.

    Returns the whole family for Rand / Wave / RWave, the random block for
    RFPCA and ``None`` for FPCA.
    """
    kind = cfg.projection
    if kind is ProjectionKind.RAND:
        return build_random(grid, cfg.n_phi, cfg.seed)
    if kind is ProjectionKind.WAVE:
        return build_wavelet(grid, cfg.n_phi)
    if kind is ProjectionKind.RWAVE:
        n_rand = cfg.random_count
        base = build_wavelet(grid, cfg.n_phi - n_rand)
        if n_rand == 0:
            return base
        d = np.vstack([base.directions, random_directions(grid, n_rand, cfg.seed)])
        return ProjectionFamily(grid, d, ProjectionKind.RWAVE, cfg.seed)
    if kind is ProjectionKind.RFPCA and cfg.random_count > 0:
        return ProjectionFamily(grid, random_directions(grid, cfg.random_count, cfg.seed),
                                ProjectionKind.RAND, cfg.seed)
    return None


def knockoff_noise_scale(f_cal: FunctionSet, cfg: LSCIConfig) -> float:
    return cfg.knockoff_scale * float(np.std(f_cal.values))


def _knockoffs(f_test: np.ndarray, keys, seed: int, noise_scale: float) -> np.ndarray:
    if noise_scale == 0:
        return f_test.copy()
    noise = np.stack([np.random.default_rng([seed, int(k), 0]).standard_normal(f_test.shape[1])
                      for k in keys])
    return f_test + noise_scale * noise


def _local_fpca(res: np.ndarray, w_cal: np.ndarray, cw: np.ndarray, n_comp: int):
    p = res.shape[1]
    if p <= _BATCH_FPCA_MAX_POINTS:
        return weighted_fpca_batch(res, w_cal, cw, n_comp)
    out = [weighted_fpca(res, w, cw, n_comp) for w in w_cal]
    return tuple(np.stack(x) for x in zip(*out))


@dataclass
class _Chunk:
    weights: np.ndarray            # (B, n + 1)
    distances: np.ndarray          # (B, n)
    directions: np.ndarray         # (K, p) shared or (B, K, p)
    eigenvalues: Optional[np.ndarray]
    centers: Optional[np.ndarray]
    sorted_atoms: np.ndarray       # (K, n) shared or (B, K, n)
    sorted_weights: np.ndarray     # (B, K, n)
    cal_depths: np.ndarray         # (B, n)
    q: np.ndarray                  # (B,)


def _calibrate_chunk(res: np.ndarray, f_cal: np.ndarray, cw: np.ndarray, f_test: np.ndarray,
                     keys, cfg: LSCIConfig, fixed: Optional[ProjectionFamily],
                     noise_scale: float) -> _Chunk:
    n = res.shape[0]
    tilde = _knockoffs(f_test, keys, cfg.seed, noise_scale)
    dist = pairwise_distances(f_cal, tilde, cw, cfg.localizer.kind)
    w = weights_from_distances(dist, cfg.localizer)
    w_cal = w[:, :n]
    eig = centers = None
    if cfg.projection in _LOCAL_FPCA:
        n_fpca = cfg.n_phi - cfg.random_count
        eig, dirs, centers = _local_fpca(res, w_cal, cw, n_fpca)
        if fixed is not None:
            dirs = np.concatenate(
                [dirs, np.broadcast_to(fixed.directions, (len(dirs),) + fixed.directions.shape)],
                axis=1)
        proj = np.matmul(dirs * cw, res.T)                           # (B, K, n)
        order = np.argsort(proj, axis=-1)
        atoms = np.take_along_axis(proj, order, axis=-1)
        sw = np.take_along_axis(np.broadcast_to(w_cal[:, None, :], proj.shape), order, axis=-1)
    else:
        dirs = fixed.directions
        proj = (dirs * cw) @ res.T                                    # (K, n)
        order = np.argsort(proj, axis=-1, kind="stable")
        atoms = np.take_along_axis(proj, order, axis=-1)
        sw = w_cal[:, order]                                          # (B, K, n)
    inf = np.broadcast_to(w[:, n:], sw.shape[:2])
    d_sorted = depth_at_atoms(np.broadcast_to(atoms, sw.shape), sw, inf, cfg.depth,
                              cfg.infinity_mass, cfg.exclude_self)
    depth = np.empty_like(d_sorted)
    np.put_along_axis(depth, np.broadcast_to(order, sw.shape), d_sorted, axis=-1)
    cal_depths = depth.min(axis=1)
    q = _threshold_rows(cal_depths, cfg.alpha, cfg.threshold_rank)
    return _Chunk(w, dist, dirs, eig, centers, atoms, sw, cal_depths, q)


def calibrate_batch(base_residuals: FunctionSet, f_cal: FunctionSet, f_test: FunctionSet,
                    predictions: Optional[FunctionSet], config: LSCIConfig,
                    keys: Optional[Sequence[int]] = None,
                    chunk_size: int = 100) -> Iterator[CalibratedPredictor]:
    """Calibrate one LSCI set per test input, yielding predictors in order.

    ``keys`` (default ``0 .. m-1``) seed each test input's knock-off together
    with ``config.seed``; a test input calibrated alone with the same key
    gives the same predictor up to rounding in the batched local FPCA.
    Results are bit-identical for a fixed ``chunk_size``.  ``predictions`` of ``None`` means the sets are
    expressed on residuals (zero prediction).
    """
    n = len(base_residuals)
    if n == 0:
        raise EmptyCalibration("no calibration residuals")
    if len(f_cal) != n:
        raise ShapeMismatch(f"{len(f_cal)} calibration inputs for {n} residuals")
    grid = base_residuals.grid
    check_same_grid(grid, f_cal.grid)
    check_same_grid(grid, f_test.grid)
    if predictions is not None:
        check_same_grid(grid, predictions.grid)
        if len(predictions) != len(f_test):
            raise ShapeMismatch("need one prediction per test input")
    keys = np.arange(len(f_test)) if keys is None else np.asarray(keys)
    cw = grid.cell_weights
    fixed = fixed_family(grid, config)
    noise = knockoff_noise_scale(f_cal, config)
    zero = np.zeros(grid.size)
    fam_kind = config.projection
    for s in range(0, len(f_test), chunk_size):
        idx = slice(s, s + chunk_size)
        ch = _calibrate_chunk(base_residuals.values, f_cal.values, cw, f_test.values[idx],
                              keys[idx], config, fixed, noise)
        for b in range(len(ch.q)):
            if ch.directions.ndim == 3:
                fam = ProjectionFamily(grid, ch.directions[b], fam_kind, config.seed,
                                       ch.eigenvalues[b], ch.centers[b])
                atoms = ch.sorted_atoms[b]
            else:
                fam = fixed
                atoms = ch.sorted_atoms
            pred_vals = zero if predictions is None else predictions.values[s + b]
            yield CalibratedPredictor(
                fam, atoms, ch.sorted_weights[b], ch.weights[b, n], config.depth, ch.q[b],
                config.alpha, FunctionSample(grid, pred_vals),
                LocalWeights(ch.weights[b], ch.distances[b], config.localizer),
                config.infinity_mass, CalibrationScores(ch.cal_depths[b]), config,
            )


def calibrate(base_residuals: FunctionSet, f_cal: FunctionSet, f_test: FunctionSample,
              prediction: FunctionSample, config: LSCIConfig, key: int = 0) -> CalibratedPredictor:
    """LSCI calibration for a single test input.

    Knock-off the test input, weight the calibration inputs by the localizer,
    build the scoring family (local FPCA uses the same weights), form the
    local measures, score every calibration residual and take the threshold.
    """
    if len(base_residuals) == 0:
        raise EmptyCalibration("no calibration residuals")
    check_same_grid(base_residuals.grid, f_test.grid)
    tests = FunctionSet(f_test.grid, f_test.values[None, :])
    preds = FunctionSet(prediction.grid, prediction.values[None, :])
    return next(calibrate_batch(base_residuals, f_cal, tests, preds, config, keys=[key]))
