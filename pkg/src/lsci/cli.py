"""Command-line front end: ``lsci gen | calibrate | predict | benchmark | report``.

Settings come from built-in defaults, then an optional JSON file given with
``--config``, then command-line flags, each layer overriding the previous.
The seed falls back to the ``LSCI_SEED`` environment variable when neither
the flags nor the config file set it.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional

from .basemodel import fit_ridge, load_external, persistence, predict_set
from .conformal import CalibratedPredictor, LSCIConfig, calibrate
from .core import FunctionSet
from .datagen import Task, generate, load_dataset, save_dataset
from .depth import DepthKind
from .eval import BenchmarkConfig, MethodSpec, default_delta, run_benchmark
from .eval.benchmark import table1a_methods, table1b_methods, table2_methods
from .eval.metrics import band_width, inside_fraction
from .exceptions import AcceptanceStalled, LSCIError
from .io import dump_json, write_matrix_csv
from .localize import Localizer, LocalizerKind, select_bandwidth
from .projections import ProjectionKind
from .sampler import sample_ensemble, to_band

log = logging.getLogger("lsci")

SEED_ENV = "LSCI_SEED"


@dataclass
class RunConfig:
    """Every setting a subcommand may read; see ``lsci <cmd> --help``."""

    task: str = Task.REG1D.value
    alpha: float = 0.1
    delta: Optional[float] = None
    localizer: str = LocalizerKind.L2.value
    lam: float = 1.0
    lam_grid: List[float] = field(default_factory=list)
    projection: str = ProjectionKind.FPCA.value
    n_phi: int = 20
    n_rand: Optional[int] = None
    depth: str = DepthKind.TUKEY.value
    knockoff_scale: float = 0.05
    m: int = 20
    n_s: int = 500
    max_proposals: Optional[int] = None
    seed: Optional[int] = None
    replicates: int = 20
    n_train: int = 1000
    n_cal: int = 1000
    n_test: int = 1000
    max_test: Optional[int] = None
    base_model: str = "auto"
    external: Optional[str] = None
    table: str = "2"
    threshold_rank: str = "coverage"
    threads: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.delta is not None and not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        if min(self.n_phi, self.m) < 1 or self.n_s < 0:
            raise ValueError("n_phi and m must be at least 1, n_s nonnegative")

    def lsci_config(self) -> LSCIConfig:
        return LSCIConfig(
            projection=self.projection, n_phi=self.n_phi, n_rand=self.n_rand, depth=self.depth,
            localizer=Localizer(self.localizer, self.lam), alpha=self.alpha,
            knockoff_scale=self.knockoff_scale, seed=self.resolved_seed,
            threshold_rank=self.threshold_rank,
        )

    @property
    def resolved_seed(self) -> int:
        if self.seed is not None:
            return int(self.seed)
        return int(os.environ.get(SEED_ENV, "0"))

    @property
    def resolved_threads(self) -> int:
        return int(self.threads) if self.threads else (os.cpu_count() or 1)


_FIELDS = {f.name for f in fields(RunConfig)}


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the ``--config`` JSON document, then explicit flags."""
    values = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        unknown = set(doc) - _FIELDS - {"methods"}
        if unknown:
            log.warning("ignoring unknown config fields: %s", ", ".join(sorted(unknown)))
        values.update({k: v for k, v in doc.items() if k in _FIELDS})
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return RunConfig(**values)


# ---------------------------------------------------------------- parsing

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--seed", type=int, help=f"global seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--threads", type=int, help="worker threads (default: all cores)")


def _add_lsci(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=float)
    p.add_argument("--projection", choices=[k.value for k in ProjectionKind])
    p.add_argument("--n-phi", dest="n_phi", type=int)
    p.add_argument("--n-rand", dest="n_rand", type=int)
    p.add_argument("--depth", choices=[k.value for k in DepthKind])
    p.add_argument("--localizer", choices=[k.value for k in LocalizerKind])
    p.add_argument("--lam", type=float, help="localizer bandwidth")
    p.add_argument("--lam-grid", dest="lam_grid", type=float, nargs="+",
                   help="bandwidths to cross-validate over")
    p.add_argument("--knockoff-scale", dest="knockoff_scale", type=float)
    p.add_argument("--threshold-rank", dest="threshold_rank",
                   choices=["coverage", "paper_literal"])
    p.add_argument("--base-model", dest="base_model",
                   choices=["auto", "ridge", "persistence", "external"])
    p.add_argument("--external",
                   help="directory holding cal_pred.csv and test_pred.csv for --base-model external")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsci", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset directory")
    _add_common(p)
    p.add_argument("--task", choices=[t.value for t in Task])
    p.add_argument("--n-train", dest="n_train", type=int)
    p.add_argument("--n-cal", dest="n_cal", type=int)
    p.add_argument("--n-test", dest="n_test", type=int)
    p.add_argument("--out", required=True, help="dataset directory")

    p = sub.add_parser("calibrate", help="calibrate LSCI for one test input")
    _add_common(p)
    _add_lsci(p)
    p.add_argument("--data", required=True, help="dataset directory from `lsci gen`")
    p.add_argument("--index", type=int, default=0, help="row of the test split")
    p.add_argument("--out", required=True, help="predictor JSON path")

    p = sub.add_parser("predict", help="sample an ensemble and band for one test input")
    _add_common(p)
    _add_lsci(p)
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--predictor", help="reuse a predictor JSON from `lsci calibrate`")
    p.add_argument("--n-s", dest="n_s", type=int, help="ensemble size")
    p.add_argument("--m", type=int, help="local FPCs used by the proposals")
    p.add_argument("--max-proposals", dest="max_proposals", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("benchmark", help="replicated benchmark of a results table")
    _add_common(p)
    p.add_argument("--task", choices=[t.value for t in Task])
    p.add_argument("--table", choices=["1a", "1b", "2", "custom"],
                   help="method set; custom reads `methods` specs from --config")
    p.add_argument("--replicates", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--n-s", dest="n_s", type=int, help="ensemble size per band (0: coverage only)")
    p.add_argument("--m", type=int)
    p.add_argument("--lam-grid", dest="lam_grid", type=float, nargs="+")
    p.add_argument("--max-test", dest="max_test", type=int,
                   help="evaluate this many evenly spaced test pairs per replicate")
    p.add_argument("--n-cal", dest="n_cal", type=int)
    p.add_argument("--n-test", dest="n_test", type=int)
    p.add_argument("--out", required=True, help="results directory")

    p = sub.add_parser("report", help="render a benchmark summary as a table")
    p.add_argument("--results", required=True, help="directory holding summary.json")
    p.add_argument("--metrics", nargs="+",
                   default=["coverage", "risk", "dCR", "median_width", "dCW"])
    p.add_argument("--out", help="write table.csv and table.json here (default: --results)")
    return parser


# ---------------------------------------------------------------- commands

def cmd_gen(args, rc: RunConfig) -> int:
    seed = rc.resolved_seed
    ds = generate(rc.task, seed, rc.n_train, rc.n_cal, rc.n_test)
    save_dataset(ds, args.out, seed)
    print(f"wrote {rc.task} dataset (seed {seed}) to {args.out}")
    return 0


def _base_model(ds, rc: RunConfig):
    kind = rc.base_model
    if kind == "auto":
        kind = "persistence" if ds.task is Task.AR_SPHERE2D else "ridge"
    if kind == "ridge":
        return fit_ridge(ds.train.f, ds.train.g, h=2, rho=0.0)
    return persistence()


def _cal_and_test_predictions(ds, rc: RunConfig):
    """Base-model predictions for the calibration and test inputs.

    ``--base-model external`` reads them from ``cal_pred.csv`` and
    ``test_pred.csv`` in the ``--external`` directory, row-aligned with the
    dataset splits.
    """
    if rc.base_model == "external":
        if not rc.external:
            raise ValueError("--base-model external needs --external DIR")
        src = Path(rc.external)
        return (predict_set(load_external(src / "cal_pred.csv", ds.grid), ds.cal.f),
                predict_set(load_external(src / "test_pred.csv", ds.grid), ds.test.f))
    model = _base_model(ds, rc)
    return predict_set(model, ds.cal.f), predict_set(model, ds.test.f)


def _calibrated(args, rc: RunConfig, stored=None):
    ds = load_dataset(args.data)
    if not 0 <= args.index < len(ds.test):
        raise ValueError(f"--index {args.index} outside the test split (size {len(ds.test)})")
    pred_cal, pred_test = _cal_and_test_predictions(ds, rc)
    res_cal = FunctionSet(ds.grid, ds.cal.g.values - pred_cal.values)
    if stored is not None:
        with open(stored, encoding="utf-8") as fh:
            return ds, res_cal, CalibratedPredictor.from_dict(json.load(fh))
    cfg = rc.lsci_config()
    if len(rc.lam_grid) > 1:
        lam = select_bandwidth(ds.cal.f, res_cal, cfg.localizer, rc.lam_grid, rc.alpha,
                               config=cfg, seed=cfg.seed)
        log.info("cross-validated bandwidth %g", lam)
        cfg = replace(cfg, localizer=cfg.localizer.with_bandwidth(lam))
    pred = calibrate(res_cal, ds.cal.f, ds.test.f[args.index], pred_test[args.index], cfg,
                     key=args.index)
    return ds, res_cal, pred


def _predictor_summary(pred: CalibratedPredictor) -> dict:
    w = pred.weights
    bound = None
    if w.localizer.kind is not LocalizerKind.KNN:
        bound = pred.coverage_gap_bound()
    return {
        "q": pred.q,
        "lambda": w.localizer.bandwidth,
        "localizer": w.localizer.kind.value,
        "alpha": pred.alpha,
        "coverage_gap_bound": bound,
        "effective_sample_size": w.effective_size,
    }


def cmd_calibrate(args, rc: RunConfig) -> int:
    _, _, pred = _calibrated(args, rc)
    doc = pred.to_dict()
    doc["summary"] = _predictor_summary(pred)
    doc["index"] = args.index
    dump_json(doc, args.out)
    print(json.dumps(doc["summary"], sort_keys=True))
    return 0


def cmd_predict(args, rc: RunConfig) -> int:
    if rc.n_s < 1:
        raise ValueError("predict needs an ensemble size of at least 1")
    ds, res_cal, pred = _calibrated(args, rc, stored=args.predictor)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = [rc.resolved_seed, int(args.index), 1]
    try:
        ens = sample_ensemble(pred, res_cal, m=rc.m, n_s=rc.n_s, max_proposals=rc.max_proposals,
                              seed=seed)
    except AcceptanceStalled as exc:
        log.error("%s", exc)
        if exc.ensemble is not None and exc.ensemble.n_accepted:
            exc.ensemble.to_csv(out / "ensemble.csv")
        return 1
    band = to_band(ens)
    write_matrix_csv(pred.prediction.values[None, :], out / "prediction.csv")
    band.to_csv(out / "band.csv")
    ens.to_csv(out / "ensemble.csv")
    target = ds.test.g[args.index]
    delta = rc.delta if rc.delta is not None else default_delta(ds.task)
    frac = float(inside_fraction(band.lower.values, band.upper.values, target.values,
                                 ds.grid.cell_weights))
    side = _predictor_summary(pred)
    side.update({
        "index": args.index,
        "n_s": rc.n_s,
        "n_accepted": ens.n_accepted,
        "n_proposed": ens.n_proposed,
        "acceptance_rate": ens.acceptance_rate,
        "delta": delta,
        "inside_fraction": frac,
        "covered": frac >= 1.0 - delta,
        "in_set": bool(pred.depth_of(target) >= pred.q),
        "target_depth": pred.depth_of(target),
        "width": float(band_width(band.lower.values, band.upper.values)),
        "config": pred.config.to_dict() if pred.config is not None else None,
    })
    dump_json(side, out / "predict.json")
    print(json.dumps({k: side[k] for k in ("q", "lambda", "acceptance_rate", "covered")},
                     sort_keys=True))
    return 0


def _benchmark_methods(rc: RunConfig, doc: dict):
    if rc.table == "1a":
        return table1a_methods(n_phi=rc.n_phi, lam=rc.lam)
    if rc.table == "1b":
        return table1b_methods(n_phi=rc.n_phi)
    if rc.table == "2":
        return table2_methods(rc.lam_grid or (0.5, 1.0, 2.0, 4.0))
    specs = doc.get("methods") or []
    if not specs or not all(isinstance(s, dict) for s in specs):
        raise ValueError("--table custom needs a list of method objects under `methods` in --config")
    return tuple(MethodSpec.from_dict(s) for s in specs)


def cmd_benchmark(args, rc: RunConfig) -> int:
    doc = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    methods = _benchmark_methods(rc, doc)
    if args.n_s is not None or "n_s" in doc:
        n_samples = rc.n_s
    else:
        # Tables 1a and 1b report coverage only; bands need larger ensembles
        n_samples = 0 if rc.table in ("1a", "1b") else 1000
    cfg = BenchmarkConfig(
        task=rc.task, methods=methods, replicates=rc.replicates, seed=rc.resolved_seed,
        alpha=rc.alpha, delta=rc.delta, n_samples=n_samples,
        m=rc.m, n_train=rc.n_train, n_cal=rc.n_cal, n_test=rc.n_test, max_test=rc.max_test,
        base_model=rc.base_model if rc.base_model != "external" else "auto",
        threads=rc.resolved_threads,
    )
    result = run_benchmark(cfg, args.out)
    for name, cell in result.summary["methods"].items():
        c = cell["coverage"]
        if c["mean"] is not None:
            print(f"{name:24s} coverage {c['mean']:.3f} +- {c['err2']:.3f}")
    if result.failures:
        log.error("%d method/replicate cells failed; see summary.json", len(result.failures))
        return 1
    return 0


def _fmt(cell) -> str:
    if not cell or cell.get("mean") is None:
        return "-"
    return f"{cell['mean']:.3f} ± {cell['err2']:.3f}"


def cmd_report(args) -> int:
    src = Path(args.results)
    with open(src / "summary.json", encoding="utf-8") as fh:
        summary = json.load(fh)
    out = Path(args.out) if args.out else src
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, cell in summary["methods"].items():
        row = {"method": name}
        for m in args.metrics:
            c = cell.get(m) or {}
            row[m] = c.get("mean")
            row[f"{m}_err2"] = c.get("err2")
        rows.append(row)
    with open(out / "table.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, ["method"] + [k for m in args.metrics for k in (m, f"{m}_err2")])
        w.writeheader()
        w.writerows(rows)
    dump_json({"task": summary.get("task"), "metrics": args.metrics, "rows": rows},
              out / "table.json")
    head = "| method | " + " | ".join(args.metrics) + " |"
    print(f"task: {summary.get('task')}  replicates: {summary.get('replicates')}")
    print(head)
    print("|" + "---|" * (len(args.metrics) + 1))
    for name, cell in summary["methods"].items():
        print(f"| {name} | " + " | ".join(_fmt(cell.get(m)) for m in args.metrics) + " |")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args)
        rc = load_run_config(args)
        try:
            Task(rc.task)
        except ValueError:
            parser.error(f"unknown task {rc.task!r}")
        handler = {"gen": cmd_gen, "calibrate": cmd_calibrate, "predict": cmd_predict,
                   "benchmark": cmd_benchmark}[args.command]
        return handler(args, rc)
    except (LSCIError, ValueError, OSError) as exc:
        print(f"lsci {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
