"""Metrics, conformal band baselines and the replicated benchmark harness."""

from .baselines import (
    BandRule,
    baseline_conf_l2,
    baseline_conf_modulated,
    baseline_supr,
    conformal_quantile,
    conformal_rank,
)
from .benchmark import (
    BenchmarkConfig,
    BenchmarkResult,
    EvalReport,
    MethodSpec,
    default_delta,
    evaluate_method,
    run_benchmark,
    table1a_methods,
    table1b_methods,
    table2_methods,
)
from .metrics import band_width, distance_correlation, inside_fraction, marginal_coverage, risk, width

__all__ = [
    "BandRule",
    "baseline_conf_l2",
    "baseline_conf_modulated",
    "baseline_supr",
    "conformal_quantile",
    "conformal_rank",
    "BenchmarkConfig",
    "BenchmarkResult",
    "EvalReport",
    "MethodSpec",
    "default_delta",
    "evaluate_method",
    "run_benchmark",
    "table1a_methods",
    "table1b_methods",
    "table2_methods",
    "band_width",
    "distance_correlation",
    "inside_fraction",
    "marginal_coverage",
    "risk",
    "width",
]
