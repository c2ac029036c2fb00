"""Ensembles and bands drawn from an LSCI prediction set.

Residual proposals are assembled coefficient by coefficient along local
principal directions, each coefficient drawn from the weighted empirical
quantile function of the projected calibration residuals.  A proposal is
kept when the shifted function passes the predictor's own membership test.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .conformal import CalibratedPredictor, project_rows
from .core import FunctionSample, FunctionSet, Grid, check_same_grid
from .depth import LocalMeasure
from .exceptions import AcceptanceStalled, EmptyEnsemble, InvalidU, ShapeMismatch
from .io import write_matrix_csv
from .projections import ProjectionFamily, ProjectionKind, project, weighted_fpca

__all__ = [
    "ProposalFamily",
    "PredictionEnsemble",
    "PredictionBand",
    "inverse_transform_sample",
    "proposal_family",
    "sample_ensemble",
    "to_band",
]

log = logging.getLogger(__name__)

_TINY = np.nextafter(0.0, 1.0)


class ProposalFamily(str, enum.Enum):
    LOCAL_FPCA = "local_fpca"
    SCORING = "scoring"


@dataclass(frozen=True, eq=False)
class PredictionEnsemble:
    """Accepted functions ``prediction + residual``, stored as rows."""

    members: FunctionSet
    n_proposed: int

    @property
    def n_accepted(self) -> int:
        return len(self.members)

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_proposed if self.n_proposed else 0.0

    def to_csv(self, path) -> None:
        write_matrix_csv(self.members.values, path)


@dataclass(frozen=True, eq=False)
class PredictionBand:
    lower: FunctionSample
    upper: FunctionSample

    def __post_init__(self):
        check_same_grid(self.lower.grid, self.upper.grid)
        if np.any(self.lower.values > self.upper.values):
            raise ValueError("band lower bound exceeds upper bound")

    @property
    def grid(self) -> Grid:
        return self.lower.grid

    def to_csv(self, path) -> None:
        write_matrix_csv(np.vstack([self.lower.values, self.upper.values]), path)


def _check_u(u):
    u = np.asarray(u, dtype=np.float64)
    if np.any(~(u > 0)) or np.any(~(u < 1)):
        raise InvalidU("uniform draws must lie strictly between 0 and 1")
    return u


def _quantiles(sorted_atoms: np.ndarray, norm_cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Generalized inverse ``min{x : F(x) >= u}`` per row; ``u`` is ``(m, K)``."""
    n = sorted_atoms.shape[1]
    out = np.empty(u.shape)
    for k in range(sorted_atoms.shape[0]):
        idx = np.searchsorted(norm_cum[k], u[:, k], side="left")
        out[:, k] = sorted_atoms[k, np.minimum(idx, n - 1)]
    return out


def _finite_cdf(sorted_weights: np.ndarray) -> np.ndarray:
    cum = np.cumsum(sorted_weights, axis=-1)
    return cum / cum[..., -1:]


def inverse_transform_sample(measures: Sequence[LocalMeasure], u, family: ProjectionFamily,
                             center=None) -> FunctionSample:
    """Residual whose coordinates along ``family`` are quantiles of ``measures``.

    Coefficient ``c_k`` is the weighted quantile of measure ``k`` at ``u_k``
    over its finite atoms; the residual is
    ``center + sum_k (c_k - phi_k(center)) d_k`` with ``center`` defaulting
    to the family's stored centre (or zero).
    """
    u = _check_u(u)
    if len(measures) != family.n_phi or u.shape != (family.n_phi,):
        raise ShapeMismatch("need one measure and one uniform per direction")
    atoms = np.stack([m.locations for m in measures])
    cdf = _finite_cdf(np.stack([m.weights for m in measures]))
    coef = _quantiles(atoms, cdf, u[None, :])[0]
    return FunctionSample(family.grid, _assemble(family, coef[None, :], center)[0])


def _assemble(family: ProjectionFamily, coef: np.ndarray, center) -> np.ndarray:
    if center is None:
        center = family.center if family.center is not None else np.zeros(family.grid.size)
    center = np.asarray(center, dtype=np.float64)
    c_mu = (family.directions * family.grid.cell_weights) @ center
    return center + (coef - c_mu) @ family.directions


def proposal_family(pred: CalibratedPredictor, residuals_cal: FunctionSet, m: int,
                    kind=ProposalFamily.LOCAL_FPCA) -> ProjectionFamily:
    """Directions the proposals are built along, centred on the local weighted mean.

    ``local_fpca`` uses the first ``m`` locally weighted principal directions
    (reusing the scoring family when it already starts with them);
    ``scoring`` uses the scoring family itself.
    """
    check_same_grid(pred.grid, residuals_cal.grid)
    w = pred.weights.calibration
    fam = pred.family
    if ProposalFamily(kind) is ProposalFamily.SCORING:
        center = (w / w.sum()) @ residuals_cal.values
        return ProjectionFamily(fam.grid, fam.directions, fam.kind, fam.seed, None, center)
    n_fpca = 0 if fam.eigenvalues is None else len(fam.eigenvalues)
    if fam.kind in (ProjectionKind.FPCA, ProjectionKind.RFPCA) and n_fpca >= m:
        return fam.head(m)
    lam, d, mu = weighted_fpca(residuals_cal.values, w, residuals_cal.grid.cell_weights, m)
    return ProjectionFamily(residuals_cal.grid, d, ProjectionKind.FPCA, None, lam, mu)


def sample_ensemble(pred: CalibratedPredictor, residuals_cal: FunctionSet, m: int = 20,
                    n_s: int = 500, max_proposals: Optional[int] = None, seed=0,
                    proposal=ProposalFamily.LOCAL_FPCA, block: Optional[int] = None,
                    strict: bool = True) -> PredictionEnsemble:
    """Rejection-sample ``n_s`` members of the prediction set.

    Proposals are generated in a fixed order from ``seed`` and tested in
    that order, so the accepted ensemble does not depend on how the work is
    split.  When ``max_proposals`` (default ``100 * n_s``) runs out first,
    :class:`AcceptanceStalled` is raised carrying the partial ensemble, unless
    ``strict`` is false, in which case the partial ensemble is returned.
    """
    if m < 1 or n_s < 1:
        raise ValueError("m and n_s must be at least 1")
    if len(residuals_cal) != pred.weights.n:
        raise ShapeMismatch("calibration residuals do not match the predictor's weights")
    max_proposals = 100 * n_s if max_proposals is None else int(max_proposals)
    block = block or max(n_s, 256)
    fam = proposal_family(pred, residuals_cal, min(m, residuals_cal.grid.size), proposal)
    proj = project(fam, residuals_cal)
    order = np.argsort(proj, axis=-1, kind="stable")
    atoms = np.take_along_axis(proj, order, axis=-1)
    cdf = _finite_cdf(pred.weights.calibration[order])
    rng = np.random.default_rng(seed)
    base = pred.prediction.values
    kept = []
    n_kept = n_prop = 0
    while n_kept < n_s and n_prop < max_proposals:
        size = min(block, max_proposals - n_prop)
        u = rng.uniform(_TINY, 1.0, size=(size, fam.n_phi))
        g = base + _assemble(fam, _quantiles(atoms, cdf, u), fam.center)
        ok = pred.residual_depths(g - base) >= pred.q
        hits = np.flatnonzero(ok)
        need = n_s - n_kept
        if len(hits) >= need:
            hits = hits[:need]
            n_prop += int(hits[-1]) + 1
        else:
            n_prop += size
        kept.append(g[hits])
        n_kept += len(hits)
    members = FunctionSet(pred.grid, np.concatenate(kept) if kept else np.empty((0, pred.grid.size)))
    ens = PredictionEnsemble(members, n_prop)
    if n_kept < n_s:
        msg = (f"accepted {n_kept} of {n_s} after {n_prop} proposals "
               f"(rate {ens.acceptance_rate:.2e})")
        if strict:
            raise AcceptanceStalled(msg, ensemble=ens, rate=ens.acceptance_rate)
        log.warning(msg)
    return ens


def to_band(e: PredictionEnsemble) -> PredictionBand:
    """Pointwise min and max over the ensemble members."""
    if e.n_accepted < 1:
        raise EmptyEnsemble("cannot form a band from an empty ensemble")
    v = e.members.values
    grid = e.members.grid
    return PredictionBand(FunctionSample(grid, v.min(axis=0)), FunctionSample(grid, v.max(axis=0)))
