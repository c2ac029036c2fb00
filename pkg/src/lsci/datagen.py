"""Synthetic functional regression and autoregression datasets.

Three heteroskedastic Gaussian-process tasks share the mean
``mu_t(x) = 2 sin(t) sin(2 pi x)`` and noise scale
``sigma_t = 0.1 (1.25 + sin(t))`` with ``t`` in ``[-2 pi, 2 pi]``:

* ``Reg1D``: ``f = mu_t + 0.1 GP``, ``g = (f * beta) + sigma_t GP`` with the
  5-tap kernel ``beta = [-2, -1, 0, 1, 2]``.
* ``AR1D``: a functional time series ``g_t = mu_t + sigma_t GP`` paired as
  ``(g_{t-1}, g_t)``.
* ``ARSphere2D``: the same series on a 32 x 64 latitude-longitude grid, the
  latitude playing the role of ``x``.

1D noise is a random combination of the first 21 Fourier basis functions
with independent ``N(0, 1/k)`` coefficients.  On the sphere a tapered double
Fourier basis stands in for spherical harmonics.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import FunctionSample, FunctionSet, Grid
from .io import (
    dump_json,
    read_function_set,
    read_grid,
    read_matrix_csv,
    write_function_set,
    write_grid,
    write_matrix_csv,
)

__all__ = [
    "Task",
    "PairedSet",
    "SynthDataset",
    "BETA_TAPS",
    "SIGMA_X",
    "mean_function",
    "sigma_t",
    "fourier_basis",
    "gen_gp_noise_1d",
    "gp_noise_1d",
    "sphere_basis",
    "gp_noise_sphere",
    "convolve_taps",
    "gen_reg1d",
    "gen_ar1d",
    "gen_ar_sphere2d",
    "generate",
    "save_dataset",
    "load_dataset",
]

BETA_TAPS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
SIGMA_X = 0.1
N_FOURIER = 21
T_RANGE = (-2 * np.pi, 2 * np.pi)


class Task(str, enum.Enum):
    REG1D = "Reg1D"
    AR1D = "AR1D"
    AR_SPHERE2D = "ARSphere2D"


@dataclass(frozen=True, eq=False)
class PairedSet:
    """Input/target function pairs with the index ``t`` and true noise scale of each target."""

    f: FunctionSet
    g: FunctionSet
    t: np.ndarray
    sigma: np.ndarray

    def __len__(self) -> int:
        return len(self.g)


@dataclass(frozen=True, eq=False)
class SynthDataset:
    task: Task
    grid: Grid
    train: PairedSet
    cal: PairedSet
    test: PairedSet

    @property
    def true_sigma(self) -> np.ndarray:
        """Noise scale of every target, train then calibration then test."""
        return np.concatenate([self.train.sigma, self.cal.sigma, self.test.sigma])

    def splits(self):
        return {"train": self.train, "cal": self.cal, "test": self.test}


def sigma_t(t):
    return 0.1 * (1.25 + np.sin(t))


def _x_coordinate(grid: Grid) -> np.ndarray:
    if grid.is_1d:
        return grid.points
    return (grid.points[:, 0] + 90.0) / 180.0


def mean_function(t, grid: Grid) -> np.ndarray:
    """``2 sin(t) sin(2 pi x)`` for each ``t``; shape ``(len(t), grid.size)``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    x = _x_coordinate(grid)
    return 2.0 * np.sin(t)[:, None] * np.sin(2.0 * np.pi * x)[None, :]


def fourier_basis(x, n_basis: int = N_FOURIER) -> np.ndarray:
    """Orthonormal Fourier basis on [0, 1]: 1, then sqrt(2) sin / cos pairs by frequency."""
    x = np.asarray(x, dtype=np.float64)
    rows = [np.ones_like(x)]
    freq = 1
    while len(rows) < n_basis:
        rows.append(np.sqrt(2.0) * np.sin(2 * np.pi * freq * x))
        if len(rows) < n_basis:
            rows.append(np.sqrt(2.0) * np.cos(2 * np.pi * freq * x))
        freq += 1
    return np.array(rows)


def gp_noise_1d(grid: Grid, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws of ``sum_k c_k b_k`` with ``c_k ~ N(0, 1/k)``, ``k = 1..21``."""
    basis = fourier_basis(grid.points)
    sd = 1.0 / np.sqrt(np.arange(1, N_FOURIER + 1))
    return (rng.standard_normal((n, N_FOURIER)) * sd) @ basis


def gen_gp_noise_1d(grid: Grid, seed) -> FunctionSample:
    if not grid.is_1d:
        raise ValueError("1D GP noise needs a 1D grid")
    return FunctionSample(grid, gp_noise_1d(grid, 1, np.random.default_rng(seed))[0])


def sphere_basis(grid: Grid, n_lat_modes: int = 16, n_lon_modes: int = 32):
    """Tapered double Fourier basis on a lat-lon grid and the degree of each mode.

    Mode ``(a, m)`` is ``cos(a theta)`` times ``cos(m phi)`` / ``sin(m phi)``
    with ``theta`` the colatitude; modes with ``m > 0`` carry a
    ``sin(theta)^m`` taper so they vanish at the poles.  Returns the
    ``(n_modes, p)`` basis and the total degree ``a + m`` per mode.
    """
    theta = np.deg2rad(90.0 - grid.points[:, 0])
    phi = np.deg2rad(grid.points[:, 1])
    rows, degree = [], []
    for a in range(n_lat_modes):
        lat_part = np.cos(a * theta)
        rows.append(lat_part)
        degree.append(a)
        for m in range(1, n_lon_modes):
            taper = lat_part * np.sin(theta) ** m
            rows.append(taper * np.cos(m * phi))
            rows.append(taper * np.sin(m * phi))
            degree.extend([a + m, a + m])
    return np.array(rows), np.array(degree)


def gp_noise_sphere(grid: Grid, n: int, rng: np.random.Generator, basis=None) -> np.ndarray:
    """Smooth random fields with ``N(0, (1 + l)^-3)`` coefficients per total degree ``l``.

    Fields are rescaled so their area-weighted mean variance is 1.
    """
    b, deg = basis if basis is not None else sphere_basis(grid)
    sd = (1.0 + deg) ** -1.5
    scale = np.sqrt(grid.cell_weights @ ((sd[:, None] * b) ** 2).sum(axis=0))
    return (rng.standard_normal((n, len(sd))) * sd) @ b / scale


def convolve_taps(values, taps=BETA_TAPS) -> np.ndarray:
    """Sliding-window sum ``g[i] = sum_j taps[j] f[i + j - h]`` with zero-padded ends."""
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    taps = np.asarray(taps, dtype=np.float64)
    h = len(taps) // 2
    padded = np.pad(values, ((0, 0), (h, h)))
    p = values.shape[1]
    out = np.zeros_like(values)
    for j, c in enumerate(taps):
        if c:
            out += c * padded[:, j:j + p]
    return out


def _reg_split(grid, n, rng):
    t = rng.uniform(*T_RANGE, size=n)
    f = mean_function(t, grid) + SIGMA_X * gp_noise_1d(grid, n, rng)
    sig = sigma_t(t)
    g = convolve_taps(f) + sig[:, None] * gp_noise_1d(grid, n, rng)
    return PairedSet(FunctionSet(grid, f, t), FunctionSet(grid, g, t), t, sig)


def _split_rngs(seed, k=3):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def gen_reg1d(n_train: int = 1000, n_cal: int = 1000, n_test: int = 1000, seed=0,
              grid: Optional[Grid] = None) -> SynthDataset:
    """Heteroskedastic functional regression through a 5-tap convolution."""
    if min(n_train, n_cal, n_test) < 1:
        raise ValueError("every split needs at least one sample")
    grid = grid or Grid.interval(64)
    rngs = _split_rngs(seed)
    parts = [_reg_split(grid, n, r) for n, r in zip((n_train, n_cal, n_test), rngs)]
    return SynthDataset(Task.REG1D, grid, *parts)


def _ar_split(grid, n_total, rng, noise):
    t = np.linspace(*T_RANGE, n_total)
    sig = sigma_t(t)
    series = mean_function(t, grid) + sig[:, None] * noise(n_total, rng)
    return PairedSet(
        FunctionSet(grid, series[:-1], t[1:]),
        FunctionSet(grid, series[1:], t[1:]),
        t[1:],
        sig[1:],
    )


def gen_ar1d(n_total: int = 1001, seed=0, grid: Optional[Grid] = None) -> SynthDataset:
    """Three independent series of ``n_total`` functions, paired as ``(g_{t-1}, g_t)``."""
    if n_total < 3:
        raise ValueError("each series needs at least 3 functions")
    grid = grid or Grid.interval(64)

    def noise(n, rng):
        return gp_noise_1d(grid, n, rng)

    parts = [_ar_split(grid, n_total, r, noise) for r in _split_rngs(seed)]
    return SynthDataset(Task.AR1D, grid, *parts)


def gen_ar_sphere2d(n_total: int = 1001, seed=0, grid: Optional[Grid] = None) -> SynthDataset:
    """Spherical analogue of :func:`gen_ar1d` on a lat-lon grid."""
    if n_total < 3:
        raise ValueError("each series needs at least 3 functions")
    grid = grid or Grid.latlon(32, 64)
    basis = sphere_basis(grid)

    def noise(n, rng):
        return gp_noise_sphere(grid, n, rng, basis)

    parts = [_ar_split(grid, n_total, r, noise) for r in _split_rngs(seed)]
    return SynthDataset(Task.AR_SPHERE2D, grid, *parts)


def generate(task, seed=0, n_train: int = 1000, n_cal: int = 1000, n_test: int = 1000) -> SynthDataset:
    """Build any task by name; AR tasks use ``n + 1`` functions per split."""
    task = Task(task)
    if task is Task.REG1D:
        return gen_reg1d(n_train, n_cal, n_test, seed)
    if len({n_train, n_cal, n_test}) != 1:
        raise ValueError("autoregressive tasks generate equally sized splits")
    if task is Task.AR1D:
        return gen_ar1d(n_cal + 1, seed)
    return gen_ar_sphere2d(n_cal + 1, seed)


SPLITS = ("train", "cal", "test")


def save_dataset(ds: SynthDataset, out_dir, seed=None) -> None:
    """Write ``grid.json``, ``<split>_f.csv`` / ``<split>_g.csv`` (``t`` as the
    leading column), ``true_sigma.csv`` (train, cal, test in order) and
    ``meta.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_grid(ds.grid, out / "grid.json")
    for name, part in ds.splits().items():
        write_function_set(part.f, out / f"{name}_f.csv")
        write_function_set(part.g, out / f"{name}_g.csv")
    write_matrix_csv(ds.true_sigma[:, None], out / "true_sigma.csv")
    meta = {"task": ds.task.value, "seed": seed,
            "sizes": {name: len(part) for name, part in ds.splits().items()}}
    dump_json(meta, out / "meta.json")


def load_dataset(path) -> SynthDataset:
    path = Path(path)
    with open(path / "meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    grid = read_grid(path / "grid.json")
    sigma = read_matrix_csv(path / "true_sigma.csv").ravel()
    parts, start = [], 0
    for name in SPLITS:
        f = read_function_set(path / f"{name}_f.csv", grid)
        g = read_function_set(path / f"{name}_g.csv", grid)
        n = meta["sizes"][name]
        t = g.index_labels if g.index_labels is not None else np.full(n, np.nan)
        parts.append(PairedSet(f, g, t, sigma[start:start + n]))
        start += n
    return SynthDataset(Task(meta["task"]), grid, *parts)
