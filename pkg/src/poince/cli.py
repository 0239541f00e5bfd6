"""Experiment runner: replication sweeps over design sizes and estimators.

A single JSON config describes the model (built-in name or CSV data file),
the input marginals, the estimator variants, the degree policy, design
sizes, replication count and seeds. Results are written as one CSV row per
(estimator, input, design size, replication) with a fixed header, plus a
long-format summary (median, quartiles, whiskers, mean, std) suitable for
boxplot-style tabulation.

Replications are pure functions of (config, replication index); they can
run in parallel worker processes and still produce byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import models
from .design import lhs_maximin, mc_sample, subsample_without_replacement
from .errors import ConfigError, PoinceError
from .expansion import (ExpansionSetup, average_der_expansions,
                        eval_surrogate, fit_constant_residual, fit_poince,
                        fit_poince_der, fit_projection_mc)
from .marginals import Marginal, prepare_input
from .poincare1d import DEFAULT_GRID_N, build_basis
from .sensitivity import report_from_expansion, total_variance

ESTIMATORS = ("poince-lars", "poince-der-lars", "poince-der-avg",
              "poince-mc", "poince-der-mc")
RESULT_HEADER = ("estimator", "input", "N", "replication", "S1", "Stot",
                 "D", "Dtot", "D1", "dgsm", "dgsm_ub", "relmse",
                 "p_star", "n_active")
SUMMARY_METRICS = ("S1", "Stot", "D", "Dtot", "D1", "dgsm", "dgsm_ub",
                   "relmse")
_MC_SEED_OFFSET = 1_000_003
_VAL_SEED_OFFSET = 2_000_003


@dataclass
class ExperimentConfig:
    model: str                              # 'dyke' or a CSV path
    input_names: List[str]
    marginals: List[Marginal]
    estimators: List[str]
    design_sizes: List[int]
    replications: int
    seed: int
    p_min: int = 1
    p_max: int = 5
    adaptive: bool = True
    q: float = 1.0
    mc_degree: int = 2
    validation_n: int = 0
    grid_n: int = DEFAULT_GRID_N
    lhs_restarts: int = 50
    fd_rel_step: float = 1e-6
    output_dir: str = "out"

    @property
    def p_range(self) -> List[int]:
        if not self.adaptive:
            return [self.p_max]
        return list(range(self.p_min, self.p_max + 1))

    def validate(self):
        if self.replications < 1:
            raise ConfigError("replication count must be >= 1")
        if not self.design_sizes or any(n < 1 for n in self.design_sizes):
            raise ConfigError("design sizes must be positive")
        if not self.estimators:
            raise ConfigError("estimator list must be nonempty")
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown:
            raise ConfigError(f"unknown estimators {unknown}; "
                              f"choose from {list(ESTIMATORS)}")
        if not 0 < self.q <= 1:
            raise ConfigError("hyperbolic exponent q must lie in (0, 1]")
        if self.p_min < 0 or self.p_max < self.p_min:
            raise ConfigError("need 0 <= p_min <= p_max")
        if len(self.marginals) != len(self.input_names):
            raise ConfigError("one marginal is needed per input name")


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        doc = json.load(fh)
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> ExperimentConfig:
    model = doc.get("model", "dyke")
    if isinstance(model, dict):
        model = model.get("data_file")
        if not model:
            raise ConfigError("model object must carry a 'data_file' entry")
    if "inputs" in doc:
        names, margs = [], []
        for spec in doc["inputs"]:
            names.append(spec["name"])
            bounds = spec.get("bounds")
            if bounds is not None:
                bounds = (-math.inf if bounds[0] is None else float(bounds[0]),
                          math.inf if bounds[1] is None else float(bounds[1]))
            margs.append(Marginal(spec["family"], spec["params"], bounds))
    elif model == "dyke":
        names = list(models.DYKE_INPUT_NAMES)
        margs = models.dyke_marginals()
    else:
        raise ConfigError("config requires an 'inputs' section "
                          "for non-built-in models")
    degree = doc.get("degree", {})
    cfg = ExperimentConfig(
        model=model,
        input_names=names,
        marginals=margs,
        estimators=list(doc.get("estimators", ["poince-lars"])),
        design_sizes=[int(n) for n in doc.get("design_sizes", [100])],
        replications=int(doc.get("replications", 1)),
        seed=int(doc.get("seed", 0)),
        p_min=int(degree.get("p_min", degree.get("p", 1))),
        p_max=int(degree.get("p_max", degree.get("p", 5))),
        adaptive=bool(degree.get("adaptive", True)),
        q=float(degree.get("q", 1.0)),
        mc_degree=int(doc.get("mc_degree", 2)),
        validation_n=int(doc.get("validation_n", 0)),
        grid_n=int(doc.get("grid_n", DEFAULT_GRID_N)),
        lhs_restarts=int(doc.get("lhs_restarts", 50)),
        fd_rel_step=float(doc.get("fd_rel_step", 1e-6)),
        output_dir=str(doc.get("output_dir", "out")),
    )
    cfg.validate()
    return cfg


class _RunContext:
    """Per-process state shared by all replications of one experiment."""

    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        self.needs_der = any(e.startswith("poince-der") for e in cfg.estimators)
        self.data: Optional[models.TabularData] = None
        if cfg.model == "dyke":
            self.model_fn = models.dyke_cost
        else:
            self.data = models.load_tabular(cfg.model, cfg.input_names)
            if self.needs_der and not self.data.has_derivatives:
                raise ConfigError(
                    "derivative-based estimators requested but the data file "
                    "carries no dy_<input> columns")
            if max(cfg.design_sizes) > self.data.n:
                raise ConfigError("design size exceeds the data pool")
            self.model_fn = None
        cache: dict = {}
        self.setup = ExpansionSetup.create(
            cfg.marginals, cfg.p_range, q=cfg.q, grid_n=cfg.grid_n,
            names=cfg.input_names, basis_cache=cache,
            extra_degrees=[cfg.mc_degree] if self._wants_mc() else ())
        self.model_marginals = [inp.model for inp in self.setup.inputs]

    def _wants_mc(self) -> bool:
        return any(e in ("poince-mc", "poince-der-mc")
                   for e in self.cfg.estimators)

    def gradient_fn(self, x):
        if self.cfg.model == "dyke":
            return models.dyke_gradient(x, self.model_marginals,
                                        self.cfg.fd_rel_step)
        raise ConfigError("no gradient evaluator for data-file models")


def _row(estimator, name, n, rep, report_row, relmse_val, p_star, n_active):
    return {
        "estimator": estimator, "input": name, "N": n, "replication": rep,
        "S1": report_row["S1"], "Stot": report_row["Stot"],
        "D": report_row["D"], "Dtot": report_row["Dtot"],
        "D1": report_row["D1"], "dgsm": report_row["dgsm"],
        "dgsm_ub": report_row["dgsm_ub"], "relmse": relmse_val,
        "p_star": p_star, "n_active": n_active,
    }


def _relmse_on(surrogate_exp, x_val, y_val) -> float:
    if x_val is None:
        return math.nan
    var = float(np.var(y_val))
    if var <= 0:
        return math.nan
    pred = eval_surrogate(surrogate_exp, x_val)
    return float(np.mean((y_val - pred) ** 2) / var)


def run_replication(ctx: _RunContext, n: int, rep: int) -> List[dict]:
    cfg = ctx.cfg
    rep_seed = cfg.seed + rep
    names = cfg.input_names
    d = len(names)
    mc_needed = ctx._wants_mc()

    # training data (and an independent validation sample when requested)
    x_val = y_val = None
    if ctx.data is None:
        design = lhs_maximin(ctx.model_marginals, n, rep_seed,
                             cfg.lhs_restarts, names=names)
        x_tr = design.X
        y_tr = ctx.model_fn(x_tr)
        dy_tr = ctx.gradient_fn(x_tr) if ctx.needs_der else None
        if mc_needed:
            mc_design = mc_sample(ctx.model_marginals, n,
                                  rep_seed + _MC_SEED_OFFSET, names=names)
            x_mc = mc_design.X
            y_mc = ctx.model_fn(x_mc)
            dy_mc = ctx.gradient_fn(x_mc) if ctx.needs_der else None
        if cfg.validation_n > 0:
            val = mc_sample(ctx.model_marginals, cfg.validation_n,
                            rep_seed + _VAL_SEED_OFFSET, names=names)
            x_val = val.X
            y_val = ctx.model_fn(x_val)
    else:
        idx = subsample_without_replacement(ctx.data.n, n, rep_seed)
        x_tr = ctx.data.X[idx]
        y_tr = ctx.data.y[idx]
        dy_tr = ctx.data.dY[idx] if ctx.needs_der else None
        x_mc, y_mc = x_tr, y_tr
        dy_mc = dy_tr
        if cfg.validation_n > 0:
            rest = np.setdiff1d(np.arange(ctx.data.n), idx)
            if rest.size:
                take = min(cfg.validation_n, rest.size)
                rng = np.random.default_rng(rep_seed + _VAL_SEED_OFFSET)
                pick = rng.choice(rest, size=take, replace=False)
                x_val, y_val = ctx.data.X[pick], ctx.data.y[pick]

    rows: List[dict] = []
    der_fits = avg_exp = avg_surrogate = None

    def der_pipeline(x, y, dy):
        fits = [fit_poince_der(ctx.setup, x, dy[:, i], i) for i in range(d)]
        avg = average_der_expansions(fits)
        surr = fit_constant_residual(avg, x, y)
        return fits, avg, surr

    for estimator in cfg.estimators:
        if estimator == "poince-lars":
            exp = fit_poince(ctx.setup, x_tr, y_tr)
            report = report_from_expansion(exp, source="coefficients")
            rel = _relmse_on(exp, x_val, y_val)
            for i, rr in enumerate(report.rows()):
                rows.append(_row(estimator, names[i], n, rep, rr, rel,
                                 exp.p_star, exp.n_active))
        elif estimator in ("poince-der-lars", "poince-der-avg"):
            if der_fits is None:
                der_fits, avg_exp, avg_surrogate = der_pipeline(
                    x_tr, y_tr, dy_tr)
            d_avg = total_variance(avg_exp)
            rel = _relmse_on(avg_surrogate, x_val, y_val)
            if estimator == "poince-der-lars":
                report = report_from_expansion(avg_exp, total_var=d_avg,
                                               source="coefficients",
                                               per_input=der_fits)
                for i, rr in enumerate(report.rows()):
                    rows.append(_row(estimator, names[i], n, rep, rr, rel,
                                     der_fits[i].p_star,
                                     der_fits[i].n_active))
            else:
                report = report_from_expansion(avg_exp, total_var=d_avg,
                                               source="coefficients")
                for i, rr in enumerate(report.rows()):
                    rows.append(_row(estimator, names[i], n, rep, rr, rel,
                                     avg_exp.p_star, avg_exp.n_active))
        elif estimator == "poince-mc":
            exp = fit_projection_mc(ctx.setup, x_mc, y_mc, cfg.mc_degree)
            d_emp = float(np.var(y_mc))
            report = report_from_expansion(exp, total_var=d_emp,
                                           source="empirical")
            rel = _relmse_on(exp, x_val, y_val)
            for i, rr in enumerate(report.rows()):
                rows.append(_row(estimator, names[i], n, rep, rr, rel,
                                 cfg.mc_degree, exp.n_active))
        elif estimator == "poince-der-mc":
            fits = [fit_projection_mc(ctx.setup, x_mc, dy_mc[:, i],
                                      cfg.mc_degree, deriv_dim=i)
                    for i in range(d)]
            avg = average_der_expansions(fits)
            surr = fit_constant_residual(avg, x_mc, y_mc)
            d_emp = float(np.var(y_mc))
            report = report_from_expansion(avg, total_var=d_emp,
                                           source="empirical",
                                           per_input=fits)
            rel = _relmse_on(surr, x_val, y_val)
            for i, rr in enumerate(report.rows()):
                rows.append(_row(estimator, names[i], n, rep, rr, rel,
                                 cfg.mc_degree, fits[i].n_active))
    return rows


_WORKER_CTX: Optional[_RunContext] = None


def _worker_init(doc: dict):
    global _WORKER_CTX
    _WORKER_CTX = _RunContext(config_from_dict(doc))


def _worker_task(args):
    n, rep = args
    return run_replication(_WORKER_CTX, n, rep)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if math.isnan(f):
        return "nan"
    return format(f, ".12g")


def write_rows(path, rows: Sequence[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_HEADER)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in RESULT_HEADER])


def run_experiment(cfg: ExperimentConfig, config_doc: dict,
                   jobs: int = 1) -> Path:
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(n, rep) for n in cfg.design_sizes
             for rep in range(cfg.replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init,
                                 initargs=(config_doc,)) as pool:
            chunks = list(pool.map(_worker_task, tasks))
    else:
        ctx = _RunContext(cfg)
        chunks = [run_replication(ctx, n, rep) for n, rep in tasks]
    rows = [row for chunk in chunks for row in chunk]
    result_path = out_dir / "results.csv"
    write_rows(result_path, rows)
    summary_path = out_dir / "summary.csv"
    summarize_file(result_path, summary_path)
    return result_path


# -- summaries ---------------------------------------------------------------

def _stats(values: np.ndarray) -> dict:
    vals = values[~np.isnan(values)]
    if vals.size == 0:
        return {k: math.nan for k in ("median", "q1", "q3", "whisker_lo",
                                      "whisker_hi", "mean", "std")} | {"count": 0}
    q1, med, q3 = np.percentile(vals, [25, 50, 75])
    iqr = q3 - q1
    in_lo = vals[vals >= q1 - 1.5 * iqr]
    in_hi = vals[vals <= q3 + 1.5 * iqr]
    return {
        "median": float(med), "q1": float(q1), "q3": float(q3),
        "whisker_lo": float(in_lo.min()) if in_lo.size else float(vals.min()),
        "whisker_hi": float(in_hi.max()) if in_hi.size else float(vals.max()),
        "mean": float(vals.mean()),
        "std": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
        "count": int(vals.size),
    }


def read_results(path) -> List[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = dict(raw)
            for k in RESULT_HEADER:
                if k in ("estimator", "input"):
                    continue
                row[k] = float(raw[k])
            rows.append(row)
    return rows


def summarize_file(results_path, summary_path) -> Path:
    rows = read_results(results_path)
    if not rows:
        raise ConfigError(f"no result rows in {results_path}")
    groups: Dict[tuple, List[dict]] = {}
    order: List[tuple] = []
    for row in rows:
        key = (row["estimator"], row["input"], row["N"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    header = ["estimator", "input", "N", "metric", "median", "q1", "q3",
              "whisker_lo", "whisker_hi", "mean", "std", "count"]
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for key in order:
            grp = groups[key]
            for metric in SUMMARY_METRICS:
                vals = np.array([g[metric] for g in grp], dtype=float)
                st = _stats(vals)
                w.writerow([key[0], key[1], _fmt(key[2]), metric]
                           + [_fmt(st[h]) for h in header[4:]])
    return Path(summary_path)


# -- marginal spec parsing for `basis dump` ----------------------------------

def parse_marginal_spec(spec: str) -> Marginal:
    """Parse 'family:p1,p2[:lo,hi]', e.g. 'gumbel:1013,558:500,3000'."""
    parts = spec.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError(
            "marginal spec must look like 'family:p1,p2[,...][:lo,hi]'")
    family = parts[0]
    params = [float(v) for v in parts[1].split(",") if v]
    bounds = None
    if len(parts) == 3:
        lo, hi = parts[2].split(",")
        bounds = (-math.inf if lo in ("-inf", "") else float(lo),
                  math.inf if hi in ("inf", "") else float(hi))
    return Marginal(family, params, bounds)


def basis_dump(spec: str, p_max: int, grid_n: int, out_path) -> Path:
    prepared = prepare_input(parse_marginal_spec(spec))
    b = build_basis(prepared.standard, p_max, grid_n)
    b.dump_csv(out_path)
    return Path(out_path)


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poince",
        description="Spectral-expansion global sensitivity analysis runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment in a JSON config")
    p_run.add_argument("config", help="path to the experiment config")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="worker processes for replications")
    p_run.add_argument("--out", default=None,
                       help="override the config output directory")

    p_sum = sub.add_parser("summarize", help="summarize a results CSV")
    p_sum.add_argument("results", help="path to results.csv")
    p_sum.add_argument("--out", default=None, help="summary CSV path")

    p_basis = sub.add_parser("basis", help="spectral basis utilities")
    p_basis.add_argument("action", choices=["dump"])
    p_basis.add_argument("spec",
                         help="marginal spec 'family:p1,p2[:lo,hi]'")
    p_basis.add_argument("--order", type=int, default=8,
                         help="largest basis order to dump")
    p_basis.add_argument("--grid-n", type=int, default=DEFAULT_GRID_N)
    p_basis.add_argument("--out", default="basis.csv")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            with open(args.config) as fh:
                doc = json.load(fh)
            if args.seed is not None:
                doc["seed"] = args.seed
            if args.out is not None:
                doc["output_dir"] = args.out
            cfg = config_from_dict(doc)
            path = run_experiment(cfg, doc, jobs=max(1, args.jobs))
            print(f"results written to {path}")
        elif args.command == "summarize":
            out = args.out or str(Path(args.results).with_name("summary.csv"))
            path = summarize_file(args.results, out)
            print(f"summary written to {path}")
        elif args.command == "basis":
            path = basis_dump(args.spec, args.order, args.grid_n, args.out)
            print(f"basis dump written to {path}")
    except (PoinceError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
