"""Projection families: finite sets of linear functionals on a grid.

A family stores one direction vector per functional; the functional acts on
a function through the quadrature inner product
``phi_k(r) = sum_i w_i d_k[i] r[i]``.  Directions are normalized to unit
weighted L2 norm, so projecting a direction onto itself gives 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import FunctionSample, FunctionSet, Grid, check_same_grid
from .exceptions import DegenerateCovariance, ShapeMismatch, Unsupported

__all__ = [
    "ProjectionKind",
    "ProjectionFamily",
    "build_random",
    "build_fpca",
    "build_wavelet",
    "build_hybrid",
    "project",
    "weighted_fpca",
    "weighted_fpca_batch",
]

# primal (p x p) eigensolver up to this many grid points, dual (n x n) above
_PRIMAL_MAX_POINTS = 512


class ProjectionKind(str, enum.Enum):
    RAND = "Rand"
    FPCA = "FPCA"
    WAVE = "Wave"
    RFPCA = "RFPCA"
    RWAVE = "RWave"


@dataclass(frozen=True, eq=False)
class ProjectionFamily:
    """Unit-norm directions on a shared grid.

    ``eigenvalues`` and ``center`` are only populated for FPCA-derived
    families: the explained variances of the leading components and the
    weighted mean the covariance was centred on.
    """

    grid: Grid
    directions: np.ndarray
    kind: ProjectionKind
    seed: Optional[int] = None
    eigenvalues: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        d = np.array(self.directions, dtype=np.float64, order="C", copy=True)
        if d.ndim != 2 or d.shape[1] != self.grid.size or d.shape[0] < 1:
            raise ShapeMismatch(f"directions must be (n_phi >= 1, {self.grid.size}), got {d.shape}")
        d.flags.writeable = False
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "kind", ProjectionKind(self.kind))
        for name in ("eigenvalues", "center"):
            v = getattr(self, name)
            if v is not None:
                v = np.array(v, dtype=np.float64, order="C", copy=True)
                v.flags.writeable = False
                object.__setattr__(self, name, v)

    @property
    def n_phi(self) -> int:
        return self.directions.shape[0]

    def weighted_norms(self) -> np.ndarray:
        return np.sqrt((self.directions**2) @ self.grid.cell_weights)

    def head(self, m: int) -> "ProjectionFamily":
        """The first ``m`` directions as a family of the same kind."""
        if not 1 <= m <= self.n_phi:
            raise ValueError(f"cannot take {m} of {self.n_phi} directions")
        ev = None if self.eigenvalues is None else self.eigenvalues[: min(m, len(self.eigenvalues))]
        return ProjectionFamily(self.grid, self.directions[:m], self.kind, self.seed, ev, self.center)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.value,
            "seed": self.seed,
            "directions": self.directions.tolist(),
        }
        if self.eigenvalues is not None:
            out["eigenvalues"] = self.eigenvalues.tolist()
        if self.center is not None:
            out["center"] = self.center.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict, grid: Grid) -> "ProjectionFamily":
        return cls(
            grid,
            np.asarray(d["directions"], dtype=np.float64),
            ProjectionKind(d["kind"]),
            d.get("seed"),
            d.get("eigenvalues"),
            d.get("center"),
        )


def _normalize(directions: np.ndarray, cell_weights: np.ndarray) -> np.ndarray:
    norms = np.sqrt((directions**2) @ cell_weights)
    return directions / norms[..., None]


def _fix_signs(directions: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of every direction made positive
    idx = np.argmax(np.abs(directions), axis=-1)
    pivot = np.take_along_axis(directions, idx[..., None], axis=-1)
    return directions * np.where(pivot < 0, -1.0, 1.0)


def random_directions(grid: Grid, n: int, seed) -> np.ndarray:
    """``n`` isotropic Gaussian directions normalized to unit weighted norm."""
    if n == 0:
        return np.empty((0, grid.size))
    rng = np.random.default_rng(seed)
    return _normalize(rng.standard_normal((n, grid.size)), grid.cell_weights)


def build_random(grid: Grid, n_phi: int, seed: int) -> ProjectionFamily:
    if n_phi < 1:
        raise ValueError("n_phi must be at least 1")
    return ProjectionFamily(grid, random_directions(grid, n_phi, seed), ProjectionKind.RAND, seed)


def _haar_supports(n_points: int):
    """Half-open index ranges of the Haar wavelets, coarse to fine, left to right."""
    supports = []
    level = [(0, n_points)]
    while level:
        nxt = []
        for a, b in level:
            if b - a >= 2:
                m = a + (b - a) // 2
                supports.append((a, m, b))
                nxt.extend([(a, m), (m, b)])
        level = nxt
    return supports


def build_wavelet(grid: Grid, n_phi: int) -> ProjectionFamily:
    """Leading Haar basis vectors: the scaling function, then wavelets.

    On grids whose size is not a power of two the dyadic splits are rounded
    down, and each wavelet is balanced against the quadrature weights so it
    stays orthogonal to constants.
    """
    if not grid.is_1d:
        raise Unsupported("the Haar family is only defined on 1D grids")
    if not 1 <= n_phi <= grid.size:
        raise ValueError(f"n_phi must be in [1, {grid.size}]")
    w = grid.cell_weights
    rows = [np.ones(grid.size)]
    for a, m, b in _haar_supports(grid.size):
        if len(rows) >= n_phi:
            break
        v = np.zeros(grid.size)
        v[a:m] = 1.0 / w[a:m].sum()
        v[m:b] = -1.0 / w[m:b].sum()
        rows.append(v)
    return ProjectionFamily(grid, _normalize(np.array(rows[:n_phi]), w), ProjectionKind.WAVE)


def _complete_basis(v: np.ndarray, n_total: int) -> np.ndarray:
    """Extend orthonormal rows ``v`` (k x p) to ``n_total`` orthonormal rows."""
    k, p = v.shape
    if k >= n_total:
        return v[:n_total]
    q, _ = np.linalg.qr(np.vstack([v, np.eye(p)]).T)
    extra = q[:, k:n_total].T
    return np.vstack([v, extra])


def weighted_fpca(values: np.ndarray, weights: np.ndarray, cell_weights: np.ndarray,
                  n_phi: int, method: str = "auto"):
    """Leading components of a weighted covariance operator.

    Parameters
    ----------
    values : (n, p) array
        Functions on a grid.
    weights : (n,) array
        Nonnegative sample weights, not all zero.
    cell_weights : (p,) array
        Quadrature weights of the grid.
    n_phi : int
        Number of components.
    method : {'auto', 'primal', 'dual'}
        ``primal`` decomposes the p x p operator, ``dual`` the n x n Gram
        matrix; ``auto`` picks primal for grids up to 512 points.

    Returns
    -------
    eigenvalues : (n_phi,) array, nonincreasing
    directions : (n_phi, p) array, unit weighted norm
    mean : (p,) array, the weighted mean
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    n, p = values.shape
    if method == "auto":
        method = "primal" if p <= _PRIMAL_MAX_POINTS else "dual"
    if method == "primal":
        ev, d, mu = weighted_fpca_batch(values, weights[None, :], cell_weights, n_phi)
        return ev[0], d[0], mu[0]
    if method != "dual":
        raise ValueError(f"unknown method {method!r}")

    wt, mu = _normalized_weights_and_mean(values, weights[None, :])
    wt, mu = wt[0], mu[0]
    sqrt_cw = np.sqrt(cell_weights)
    a = np.sqrt(wt)[:, None] * (values - mu) * sqrt_cw
    gram = a @ a.T
    lam, u = np.linalg.eigh(gram)
    lam, u = lam[::-1], u[:, ::-1]
    _check_spread(lam[:1], values, wt)
    keep = lam > lam[0] * 1e-12
    v = (a.T @ u[:, keep]) / np.sqrt(lam[keep])
    v = _complete_basis(v.T, n_phi)
    lam = np.concatenate([lam[keep], np.zeros(max(0, n_phi - keep.sum()))])[:n_phi]
    d = _fix_signs(v / sqrt_cw)
    return lam, d, mu


def _normalized_weights_and_mean(values, weights):
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0) or weights.shape[-1] != values.shape[0]:
        raise ValueError("weights must be nonnegative with one entry per sample")
    total = weights.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise DegenerateCovariance("sample weights sum to zero")
    wt = weights / total
    return wt, wt @ values


def _check_spread(top_eigenvalues, values, wt):
    scale = float(wt @ (values**2).sum(axis=-1))
    if scale == 0 or top_eigenvalues[0] <= 1e-12 * scale:
        raise DegenerateCovariance("all residuals coincide; no principal direction exists")


def weighted_fpca_batch(values: np.ndarray, weights: np.ndarray, cell_weights: np.ndarray,
                        n_phi: int):
    """Primal weighted FPCA for a batch of weight vectors sharing the same data.

    ``weights`` has shape ``(B, n)``; outputs carry a leading batch axis.
    """
    values = np.asarray(values, dtype=np.float64)
    n, p = values.shape
    if not 1 <= n_phi <= p:
        raise ValueError(f"n_phi must be in [1, {p}]")
    wt, mu = _normalized_weights_and_mean(values, weights)
    sqrt_cw = np.sqrt(cell_weights)
    # E_w[x x^T] - mu mu^T for every weight vector from one product with the outer products
    xs = values * sqrt_cw
    ms = mu * sqrt_cw
    outer = (xs[:, :, None] * xs[:, None, :]).reshape(n, p * p)
    cov = (wt @ outer).reshape(-1, p, p) - ms[:, :, None] * ms[:, None, :]
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    lam, v = np.linalg.eigh(cov)
    lam = lam[:, ::-1][:, :n_phi]
    v = v[:, :, ::-1][:, :, :n_phi]
    scale = wt @ (values**2 @ cell_weights)
    if np.any(scale == 0) or np.any(lam[:, 0] <= 1e-12 * scale):
        raise DegenerateCovariance("all residuals coincide; no principal direction exists")
    d = _fix_signs(np.swapaxes(v, 1, 2) / sqrt_cw)
    return lam, d, mu


def build_fpca(residuals: FunctionSet, weights, n_phi: int) -> ProjectionFamily:
    """Top ``n_phi`` eigenfunctions of the weighted residual covariance."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(residuals),):
        raise ShapeMismatch("need one weight per residual")
    if not 1 <= n_phi <= residuals.grid.size:
        raise ValueError(f"n_phi must be in [1, {residuals.grid.size}]")
    lam, d, mu = weighted_fpca(residuals.values, weights, residuals.grid.cell_weights, n_phi)
    return ProjectionFamily(residuals.grid, d, ProjectionKind.FPCA, None, lam, mu)


_HYBRID_KIND = {
    ProjectionKind.FPCA: ProjectionKind.RFPCA,
    ProjectionKind.RFPCA: ProjectionKind.RFPCA,
    ProjectionKind.WAVE: ProjectionKind.RWAVE,
    ProjectionKind.RWAVE: ProjectionKind.RWAVE,
    ProjectionKind.RAND: ProjectionKind.RAND,
}


def build_hybrid(base: ProjectionFamily, grid: Grid, n_rand: int, seed: int) -> ProjectionFamily:
    """Append ``n_rand`` random unit directions to ``base``."""
    check_same_grid(base.grid, grid)
    if n_rand < 0:
        raise ValueError("n_rand must be nonnegative")
    if n_rand == 0:
        return base
    d = np.vstack([base.directions, random_directions(grid, n_rand, seed)])
    return ProjectionFamily(grid, d, _HYBRID_KIND[base.kind], seed, base.eigenvalues, base.center)


def project(family: ProjectionFamily, fs: Union[FunctionSet, FunctionSample]) -> np.ndarray:
    """Scores ``phi_k(r_t)``: shape ``(n_phi, n_samples)`` for a set, ``(n_phi,)`` for a sample."""
    check_same_grid(family.grid, fs.grid)
    weighted = family.directions * family.grid.cell_weights
    if isinstance(fs, FunctionSample):
        return weighted @ fs.values
    return weighted @ fs.values.T
