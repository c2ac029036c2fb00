"""Base operator predictors whose residuals LSCI calibrates.

Three kinds are provided: a convolution ridge operator for 1D grids, the
persistence forecast ``g_t = g_{t-1}`` for autoregressive tasks, and an
external table of precomputed predictions (for residuals of models trained
elsewhere).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import FunctionSample, FunctionSet, Grid, check_same_grid
from .exceptions import NotFitted, ShapeMismatch, SingularSystem, Unsupported
from .io import read_function_set

__all__ = [
    "PredictorKind",
    "BasePredictor",
    "fit_ridge",
    "persistence",
    "external",
    "load_external",
    "predict",
    "predict_set",
    "residuals",
]


class PredictorKind(str, enum.Enum):
    FUNCTIONAL_RIDGE = "FunctionalRidge"
    PERSISTENCE = "Persistence"
    EXTERNAL = "External"


@dataclass(frozen=True, eq=False)
class BasePredictor:
    """A fitted base predictor.

    ``kernel`` and ``bias`` are set for ``FunctionalRidge``; ``table`` holds
    the stored predictions of an ``External`` predictor, indexed by row.
    """

    kind: PredictorKind
    grid: Optional[Grid] = None
    h: int = 0
    rho: float = 0.0
    kernel: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None
    table: Optional[FunctionSet] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PredictorKind(self.kind))
        if self.h < 0 or self.rho < 0:
            raise ValueError("h and rho must be nonnegative")

    @property
    def fitted(self) -> bool:
        if self.kind is PredictorKind.FUNCTIONAL_RIDGE:
            return self.kernel is not None
        if self.kind is PredictorKind.EXTERNAL:
            return self.table is not None
        return True


def _design(f: np.ndarray, h: int) -> np.ndarray:
    """Shifted copies ``(n, p, 2h + 1)`` with ``X[..., j] = f[i + j - h]``, zero padded."""
    n, p = f.shape
    padded = np.pad(f, ((0, 0), (h, h)))
    return np.stack([padded[:, j:j + p] for j in range(2 * h + 1)], axis=-1)


def fit_ridge(train_f: FunctionSet, train_g: FunctionSet, h: int = 2, rho: float = 0.0) -> BasePredictor:
    """Fit ``g(x) = b(x) + sum_j k_j f(x + j - h)`` by penalized least squares.

    Minimizes ``sum_t ||g_t - b - k * f_t||^2 + rho ||k||^2`` with the L2
    norm of the grid; the bias function ``b`` is unpenalized, so it is
    profiled out by centring both sides over the training pairs.
    """
    check_same_grid(train_f.grid, train_g.grid)
    grid = train_f.grid
    if not grid.is_1d:
        raise Unsupported("the convolution ridge operator is defined on 1D grids only")
    if h < 0 or rho < 0:
        raise ValueError("h and rho must be nonnegative")
    n = len(train_f)
    if len(train_g) != n:
        raise ShapeMismatch(f"{n} inputs for {len(train_g)} targets")
    if n < 2 * h + 2:
        raise ValueError(f"need at least {2 * h + 2} training pairs, got {n}")
    x = _design(train_f.values, h)
    x_mean = x.mean(axis=0)
    g_mean = train_g.values.mean(axis=0)
    xc = (x - x_mean).reshape(-1, 2 * h + 1)
    gc = (train_g.values - g_mean).reshape(-1)
    cw = np.tile(grid.cell_weights, n)
    a = (xc * cw[:, None]).T @ xc
    rhs = (xc * cw[:, None]).T @ gc
    if rho == 0:
        if np.linalg.matrix_rank(a) < 2 * h + 1:
            raise SingularSystem("rank-deficient design and no ridge penalty")
    else:
        a = a + rho * np.eye(2 * h + 1)
    kernel = np.linalg.solve(a, rhs)
    bias = g_mean - x_mean @ kernel
    return BasePredictor(PredictorKind.FUNCTIONAL_RIDGE, grid, h, float(rho), kernel, bias)


def persistence() -> BasePredictor:
    """Predict the input function itself (``g_t`` forecast by ``g_{t-1}``)."""
    return BasePredictor(PredictorKind.PERSISTENCE)


def external(table: FunctionSet) -> BasePredictor:
    return BasePredictor(PredictorKind.EXTERNAL, table.grid, table=table)


def load_external(path, grid: Grid) -> BasePredictor:
    """External predictor from a CSV of predictions, row-aligned with the inputs."""
    return external(read_function_set(path, grid))


def _require_fitted(p: BasePredictor):
    if not p.fitted:
        raise NotFitted(f"{p.kind.value} predictor has not been fitted")


def predict_set(p: BasePredictor, f: FunctionSet) -> FunctionSet:
    """Predictions for every row of ``f``; External rows are matched by position."""
    _require_fitted(p)
    if p.kind is PredictorKind.PERSISTENCE:
        return f
    check_same_grid(p.grid, f.grid)
    if p.kind is PredictorKind.EXTERNAL:
        if len(p.table) != len(f):
            raise ShapeMismatch(f"{len(p.table)} stored predictions for {len(f)} inputs")
        return p.table
    out = _design(f.values, p.h) @ p.kernel + p.bias
    return FunctionSet(f.grid, out, f.index_labels)


def predict(p: BasePredictor, f: FunctionSample, index: Optional[int] = None) -> FunctionSample:
    """Prediction for one input; an External predictor needs the sample's row ``index``."""
    _require_fitted(p)
    if p.kind is PredictorKind.PERSISTENCE:
        return f
    check_same_grid(p.grid, f.grid)
    if p.kind is PredictorKind.EXTERNAL:
        if index is None:
            raise ValueError("an External predictor needs the row index of the sample")
        return p.table[int(index)]
    out = _design(f.values[None, :], p.h)[0] @ p.kernel
    return FunctionSample(f.grid, out + p.bias)


def residuals(p: BasePredictor, f: FunctionSet, g: FunctionSet) -> FunctionSet:
    """``g_t - predict(f_t)`` for every pair."""
    check_same_grid(f.grid, g.grid)
    if len(f) != len(g):
        raise ShapeMismatch(f"{len(f)} inputs for {len(g)} targets")
    pred = predict_set(p, f)
    return FunctionSet(g.grid, g.values - pred.values, g.index_labels)
