"""Replicated benchmark runs: data, base model, calibration, bands, metrics.

A run draws a fresh synthetic dataset per replicate, fits the base model on
the training split, and evaluates every method on the test split in residual
space.  Rows are written per replicate as they finish; the summary
aggregates mean and two-standard-deviation error bars across replicates.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..basemodel import fit_ridge, persistence, residuals
from ..conformal import LSCIConfig
from ..datagen import SynthDataset, Task, generate
from ..depth import DepthKind
from ..io import dump_json
from ..localize import Localizer, LocalizerKind, select_bandwidth
from ..pipeline import evaluate_lsci
from ..projections import ProjectionKind
from .baselines import baseline_conf_l2, baseline_conf_modulated, baseline_supr
from .metrics import band_width, distance_correlation, inside_fraction

__all__ = [
    "MethodSpec",
    "BenchmarkConfig",
    "EvalReport",
    "BenchmarkResult",
    "run_benchmark",
    "evaluate_method",
    "table1a_methods",
    "table1b_methods",
    "table2_methods",
    "default_delta",
]

log = logging.getLogger(__name__)

BASELINES = {
    "Conf1": baseline_conf_l2,
    "Conf2": baseline_conf_modulated,
    "Supr": baseline_supr,
}
METRICS = ("coverage", "risk", "dCR", "median_width", "dCW", "coverage_gap_bound_mean")


@dataclass(frozen=True)
class MethodSpec:
    """One row of a results table.

    ``kind`` is ``LSCI`` or a baseline name (``Conf1``, ``Conf2``, ``Supr``).
    For LSCI, a ``lam_grid`` with more than one value selects the bandwidth
    by cross validation on the calibration split of every replicate.
    """

    name: str
    kind: str = "LSCI"
    config: Optional[LSCIConfig] = None
    lam_grid: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind != "LSCI" and self.kind not in BASELINES:
            raise ValueError(f"unknown method kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "config": None if self.config is None else self.config.to_dict(),
            "lam_grid": list(self.lam_grid),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MethodSpec":
        cfg = d.get("config")
        return cls(d["name"], d.get("kind", "LSCI"),
                   None if cfg is None else LSCIConfig.from_dict(cfg),
                   tuple(float(x) for x in d.get("lam_grid", ())))


def default_delta(task) -> float:
    return 0.001 if Task(task) is Task.AR_SPHERE2D else 0.01


@dataclass(frozen=True)
class BenchmarkConfig:
    """Settings of a benchmark run.

    ``n_samples`` is the ensemble size behind each LSCI band; 0 evaluates
    coverage only.  ``max_test`` evaluates ``max_test`` evenly spaced test
    pairs of every replicate.  Replicate ``r`` uses seed ``seed + r`` for both the
    data and the LSCI randomness.
    """

    task: Task = Task.REG1D
    methods: Tuple[MethodSpec, ...] = ()
    replicates: int = 20
    seed: int = 0
    alpha: float = 0.1
    delta: Optional[float] = None
    n_samples: int = 1000
    m: int = 20
    n_train: int = 1000
    n_cal: int = 1000
    n_test: int = 1000
    max_test: Optional[int] = None
    base_model: str = "auto"
    threads: int = 1
    cv_folds: int = 5

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.delta is not None and not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        if self.replicates < 1 or self.m < 1 or self.n_samples < 0:
            raise ValueError("replicates and m must be >= 1, n_samples >= 0")
        if self.max_test is not None and self.max_test < 1:
            raise ValueError("max_test must be at least 1")

    @property
    def effective_delta(self) -> float:
        return default_delta(self.task) if self.delta is None else self.delta

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "methods": [m.to_dict() for m in self.methods],
            "replicates": self.replicates,
            "seed": self.seed,
            "alpha": self.alpha,
            "delta": self.delta,
            "n_samples": self.n_samples,
            "m": self.m,
            "n_train": self.n_train,
            "n_cal": self.n_cal,
            "n_test": self.n_test,
            "max_test": self.max_test,
            "base_model": self.base_model,
            "threads": self.threads,
            "cv_folds": self.cv_folds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkConfig":
        d = dict(d)
        d["methods"] = tuple(MethodSpec.from_dict(m) for m in d.get("methods", ()))
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass(eq=False)
class EvalReport:
    """Metrics of one method on one replicate.

    Band metrics (risk, dCR, median_width, dCW) are NaN when no bands were
    built.  ``per_sample`` holds ``inside_fraction``, ``width``, ``covered``
    and ``true_sigma`` per test point when they exist.
    """

    risk: float
    mean_marginal_coverage: float
    median_width: float
    dCR: float
    dCW: float
    coverage_gap_bound_mean: float
    per_sample: Dict[str, np.ndarray] = field(default_factory=dict)
    bandwidth: Optional[float] = None
    acceptance_rate: Optional[float] = None

    def metrics(self) -> Dict[str, float]:
        return {
            "coverage": self.mean_marginal_coverage,
            "risk": self.risk,
            "dCR": self.dCR,
            "median_width": self.median_width,
            "dCW": self.dCW,
            "coverage_gap_bound_mean": self.coverage_gap_bound_mean,
        }


@dataclass(eq=False)
class BenchmarkResult:
    config: BenchmarkConfig
    rows: List[dict]
    reports: Dict[Tuple[str, int], EvalReport]
    summary: dict
    failures: List[dict]

    def cell(self, method: str, metric: str = "coverage") -> dict:
        return self.summary["methods"][method][metric]


def table1a_methods(n_phi: int = 20, lam: float = 1.0) -> Tuple[MethodSpec, ...]:
    """Every projection family crossed with every depth, L2 localizer."""
    out = []
    for proj in ProjectionKind:
        for depth in DepthKind:
            cfg = LSCIConfig(projection=proj, depth=depth, n_phi=n_phi,
                             localizer=Localizer(LocalizerKind.L2, lam))
            out.append(MethodSpec(f"{proj.value}/{depth.value}", "LSCI", cfg))
    return tuple(out)


def table1b_methods(lams: Sequence[float] = (1, 2, 3, 4, 5), n_phi: int = 20) -> Tuple[MethodSpec, ...]:
    """Every localizer at every bandwidth, FPCA projections and Tukey depth."""
    out = []
    for kind in LocalizerKind:
        for lam in lams:
            cfg = LSCIConfig(n_phi=n_phi, localizer=Localizer(kind, float(lam)))
            out.append(MethodSpec(f"{kind.value}/lam={lam:g}", "LSCI", cfg))
    return tuple(out)


def table2_methods(lam_grid: Sequence[float] = (0.5, 1.0, 2.0, 4.0)) -> Tuple[MethodSpec, ...]:
    """The three band baselines and four LSCI variants (Tukey depth throughout).

    LSCI1/2 use 20 local FPCs; LSCI3/4 use 100 directions, split evenly
    between local FPCs and random directions so that 1D grids with fewer
    than 100 points can hold them.
    """
    grid = tuple(float(x) for x in lam_grid)
    variants = [
        ("LSCI1", ProjectionKind.FPCA, 20, LocalizerKind.L2),
        ("LSCI2", ProjectionKind.FPCA, 20, LocalizerKind.LINF),
        ("LSCI3", ProjectionKind.RFPCA, 100, LocalizerKind.L2),
        ("LSCI4", ProjectionKind.RFPCA, 100, LocalizerKind.LINF),
    ]
    out = [MethodSpec(name, name) for name in ("Conf1", "Conf2", "Supr")]
    for name, proj, n_phi, loc in variants:
        cfg = LSCIConfig(projection=proj, n_phi=n_phi, localizer=Localizer(loc, grid[0]))
        out.append(MethodSpec(name, "LSCI", cfg, grid))
    return tuple(out)


def _base_model(ds: SynthDataset, kind: str):
    if kind == "auto":
        kind = "persistence" if ds.task is Task.AR_SPHERE2D else "ridge"
    if kind == "ridge":
        return fit_ridge(ds.train.f, ds.train.g, h=2, rho=0.0)
    if kind == "persistence":
        return persistence()
    raise ValueError(f"unknown base model {kind!r}")


def _report(in_set, true_sigma, lower=None, upper=None, targets=None, cell_weights=None,
            delta=0.01, gap=None, bandwidth=None, acceptance=None) -> EvalReport:
    cov = float(np.mean(in_set))
    gap_mean = float(np.nanmean(gap)) if gap is not None and np.any(np.isfinite(gap)) else float("nan")
    per = {"in_set": np.asarray(in_set, dtype=bool), "true_sigma": np.asarray(true_sigma)}
    if lower is None:
        nan = float("nan")
        return EvalReport(nan, cov, nan, nan, nan, gap_mean, per, bandwidth, acceptance)
    frac = inside_fraction(lower, upper, targets, cell_weights)
    widths = band_width(lower, upper)
    covered = frac >= 1.0 - delta
    per.update(inside_fraction=frac, width=widths, covered=covered)
    return EvalReport(
        risk=float(covered.mean()),
        mean_marginal_coverage=cov,
        median_width=float(np.median(widths)),
        dCR=distance_correlation(covered.astype(np.float64), true_sigma),
        dCW=distance_correlation(widths, true_sigma),
        coverage_gap_bound_mean=gap_mean,
        per_sample=per,
        bandwidth=bandwidth,
        acceptance_rate=acceptance,
    )


def evaluate_method(spec: MethodSpec, f_cal, res_cal, f_test, res_test, true_sigma,
                    alpha: float, delta: float, seed: int, n_samples: int = 1000, m: int = 20,
                    cv_folds: int = 5) -> EvalReport:
    """Score one method on prepared calibration and test residuals."""
    grid = res_cal.grid
    if spec.kind in BASELINES:
        rule = BASELINES[spec.kind](res_cal, alpha)
        zero = np.zeros_like(res_test.values)
        lower, upper = rule.bounds(zero)
        in_set = rule.contains(res_test.values)
        return _report(in_set, true_sigma, lower, upper, res_test.values, grid.cell_weights, delta)
    cfg = spec.config if spec.config is not None else LSCIConfig()
    cfg = replace(cfg, alpha=alpha, seed=int(seed))
    if len(spec.lam_grid) > 1:
        lam = select_bandwidth(f_cal, res_cal, cfg.localizer, spec.lam_grid, alpha, config=cfg,
                               n_folds=cv_folds, seed=int(seed))
        cfg = replace(cfg, localizer=cfg.localizer.with_bandwidth(lam))
    elif len(spec.lam_grid) == 1:
        cfg = replace(cfg, localizer=cfg.localizer.with_bandwidth(spec.lam_grid[0]))
    out = evaluate_lsci(f_cal, res_cal, f_test, res_test, cfg, n_samples=n_samples, m=m,
                        delta=delta)
    lam = cfg.localizer.bandwidth
    if not n_samples:
        return _report(out["in_set"], true_sigma, gap=out["gap_bound"], bandwidth=lam)
    return _report(out["in_set"], true_sigma, out["lower"], out["upper"], res_test.values,
                   grid.cell_weights, delta, out["gap_bound"], lam,
                   float(np.mean(out["acceptance"])))


def _run_replicate(cfg: BenchmarkConfig, r: int):
    seed = cfg.seed + r
    ds = generate(cfg.task, seed, cfg.n_train, cfg.n_cal, cfg.n_test)
    model = _base_model(ds, cfg.base_model)
    res_cal = residuals(model, ds.cal.f, ds.cal.g)
    res_test = residuals(model, ds.test.f, ds.test.g)
    f_test = ds.test.f
    sigma = ds.test.sigma
    if cfg.max_test is not None and cfg.max_test < len(f_test):
        # evenly spaced, so a time-ordered test split is not cut to one stretch
        keep = np.unique(np.linspace(0, len(f_test) - 1, int(cfg.max_test)).round().astype(int))
        f_test, res_test, sigma = f_test[keep], res_test[keep], sigma[keep]
    reports, failures = {}, []
    for spec in cfg.methods:
        try:
            reports[spec.name] = evaluate_method(
                spec, ds.cal.f, res_cal, f_test, res_test, sigma, cfg.alpha,
                cfg.effective_delta, seed, cfg.n_samples, cfg.m, cfg.cv_folds)
        except Exception as exc:  # one failed cell must not sink the run
            log.exception("replicate %d, method %s failed", r, spec.name)
            failures.append({"replicate": r, "method": spec.name, "error": repr(exc)})
    return seed, reports, failures


def _aggregate(values: List[float]) -> dict:
    v = np.array([x for x in values if x is not None and np.isfinite(x)], dtype=np.float64)
    if len(v) == 0:
        return {"mean": None, "sd": None, "err2": None, "n": 0}
    sd = float(v.std(ddof=1)) if len(v) > 1 else 0.0
    return {"mean": float(v.mean()), "sd": sd, "err2": 2.0 * sd, "n": int(len(v))}


def _summarize(cfg: BenchmarkConfig, rows: List[dict], failures: List[dict]) -> dict:
    methods = {}
    for spec in cfg.methods:
        mine = [row for row in rows if row["method"] == spec.name]
        cell = {k: _aggregate([row[k] for row in mine]) for k in METRICS}
        cell["replicates_ok"] = len(mine)
        cell["replicates_failed"] = sum(1 for f in failures if f["method"] == spec.name)
        methods[spec.name] = cell
    return {"task": cfg.task.value, "alpha": cfg.alpha, "delta": cfg.effective_delta,
            "replicates": cfg.replicates, "config": cfg.to_dict(), "methods": methods,
            "n_failed": len(failures)}


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def run_benchmark(cfg: BenchmarkConfig, out_dir=None) -> BenchmarkResult:
    """Run every method on every replicate and aggregate the results.

    With ``out_dir`` set, ``results.csv`` gets one row per method and
    replicate (written as each replicate completes, in replicate order) and
    ``summary.json`` the aggregated table.
    """
    if not cfg.methods:
        raise ValueError("no methods to benchmark")
    rows, failures, reports = [], [], {}
    writer = handle = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        handle = open(out_dir / "results.csv", "w", newline="", encoding="utf-8")
        writer = csv.DictWriter(handle, ["task", "method", "replicate", "seed", "bandwidth",
                                         *METRICS])
        writer.writeheader()
    try:
        run = lambda r: _run_replicate(cfg, r)  # noqa: E731
        if cfg.threads > 1:
            pool = ThreadPoolExecutor(max_workers=cfg.threads)
            results = pool.map(run, range(cfg.replicates))
        else:
            pool = None
            results = map(run, range(cfg.replicates))
        for r, (seed, reps, fails) in enumerate(results):
            failures.extend(fails)
            for spec in cfg.methods:
                if spec.name not in reps:
                    continue
                rep = reps[spec.name]
                reports[(spec.name, r)] = rep
                row = {"task": cfg.task.value, "method": spec.name, "replicate": r, "seed": seed,
                       "bandwidth": rep.bandwidth, **rep.metrics()}
                rows.append(row)
                if writer is not None:
                    writer.writerow({k: _clean(v) for k, v in row.items()})
            if handle is not None:
                handle.flush()
            log.info("replicate %d of %d done", r + 1, cfg.replicates)
        if pool is not None:
            pool.shutdown()
    finally:
        if handle is not None:
            handle.close()
    summary = _summarize(cfg, rows, failures)
    summary["failures"] = failures
    if out_dir is not None:
        dump_json(summary, out_dir / "summary.json")
    return BenchmarkResult(cfg, rows, reports, summary, failures)
