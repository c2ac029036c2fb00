"""Local Spectral Conformal Inference for function-valued predictions.

Calibrate a prediction set around a base-model prediction from projected,
locally weighted calibration residuals, then sample ensembles and bands
from it.  A minimal round trip::

    >>> from lsci import LSCIConfig, calibrate, sample_ensemble, to_band
    >>> pred = calibrate(res_cal, f_cal, f_test, prediction, LSCIConfig())  # doctest: +SKIP
    >>> band = to_band(sample_ensemble(pred, res_cal))                       # doctest: +SKIP
"""

from .basemodel import BasePredictor, fit_ridge, persistence
from .conformal import (
    CalibratedPredictor,
    LSCIConfig,
    ThresholdRank,
    calibrate,
    calibrate_batch,
    contains,
)
from .core import FunctionSample, FunctionSet, Grid, GridKind
from .datagen import Task, generate
from .depth import DepthKind, LocalMeasure, phi_depth
from .exceptions import LSCIError
from .localize import Localizer, LocalizerKind, coverage_gap_bound, local_weights, select_bandwidth
from .pipeline import evaluate_lsci
from .projections import ProjectionFamily, ProjectionKind
from .sampler import PredictionBand, PredictionEnsemble, sample_ensemble, to_band

__version__ = "0.1.0"

__all__ = [
    "BasePredictor", "fit_ridge", "persistence",
    "CalibratedPredictor", "LSCIConfig", "ThresholdRank", "calibrate", "calibrate_batch",
    "contains",
    "FunctionSample", "FunctionSet", "Grid", "GridKind",
    "Task", "generate",
    "DepthKind", "LocalMeasure", "phi_depth",
    "LSCIError",
    "Localizer", "LocalizerKind", "coverage_gap_bound", "local_weights", "select_bandwidth",
    "evaluate_lsci",
    "ProjectionFamily", "ProjectionKind",
    "PredictionBand", "PredictionEnsemble", "sample_ensemble", "to_band",
]
