"""Experiment runner.

Usage::

    acczofw run --config experiment.cfg [--workers 4] [--seed 7]
    acczofw compare --budget 200000 out/AccSZOFW_UniGE_0.csv out/PlainZOFW_UniGE_0.csv
    acczofw gen-data --synthetic n=2000 d=50 noise=0.1 --seed 0 --out train.libsvm

The config is a flat ``key = value`` file; ``#`` starts a comment. See
``CONFIG_KEYS`` for the recognised keys and their defaults.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Preset, SeededRng, make_schedule
from .dataio import (
    DataError,
    load_images,
    load_libsvm,
    read_trace_csv,
    serialize_libsvm,
    split,
    synthesize_classification,
    write_trace_csv,
)
from .lmo import L1Ball
from .oracle import LinearSoftmaxModel, attack_problem, correntropy_problem
from .solvers import (
    GapMode,
    Mode,
    RunTrace,
    SolverConfig,
    Variant,
    fw_gap,
    iterations_for_budget,
    run_solver,
)

log = logging.getLogger("acczofw")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4

CONFIG_KEYS = {
    "problem": "robust_classification",  # or "attack"
    "dataset": "synthetic",  # or a LIBSVM path
    "synthetic_n": "2000",
    "synthetic_d": "50",
    "synthetic_noise": "0.1",
    "data_seed": "0",
    "train_fraction": "0.5",
    "sigma": "10",
    "theta": "10",
    "model": "synthetic",  # or a model file path
    "images": "synthetic",  # or an image file path
    "epsilon": "0.3",
    "n_images": "20",
    "classes": "10",
    "image_side": "8",
    "solvers": "AccSZOFW_UniGE",
    "preset": "Experiment_RobustClassification",
    "T": "1000",  # or "auto" with query_budget
    "mode": "Stochastic",
    "eval_every": "10",
    "gap": "true",  # true | coo | none
    "seeds": "0",
    "query_budget": "",
    "output_dir": "out",
}

BASELINE_ALIASES = {
    "PlainZOFW_baseline": "uni",
    "PlainZOFW_UniGE": "uni",
    "PlainZOFW_CooGE": "coo",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict
    solvers: tuple
    seeds: tuple
    query_budget: int | None
    output_dir: Path

    def __getitem__(self, key):
        return self.values[key]


def parse_config_text(text: str) -> dict:
    values = dict(CONFIG_KEYS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def build_config(values: dict, seed_override: int | None = None) -> ExperimentConfig:
    solvers = tuple(s.strip() for s in values["solvers"].split(",") if s.strip())
    if not solvers:
        raise ConfigError("at least one solver is required")
    for s in solvers:
        if s not in BASELINE_ALIASES and s not in Variant.__members__:
            raise ConfigError(f"unknown solver {s!r}")
    try:
        seeds = tuple(int(s) for s in values["seeds"].split(",") if s.strip())
    except ValueError:
        raise ConfigError("seeds must be comma-separated integers") from None
    if seed_override is not None:
        seeds = (seed_override,)
    if not seeds:
        raise ConfigError("at least one seed is required")
    if values["problem"] not in ("robust_classification", "attack"):
        raise ConfigError(f"unknown problem {values['problem']!r}")
    if values["gap"] not in ("true", "coo", "none"):
        raise ConfigError("gap must be true, coo or none")
    try:
        Preset(values["preset"])
        Mode(values["mode"])
        budget = int(values["query_budget"]) if values["query_budget"] else None
        if values["T"] != "auto":
            if int(values["T"]) < 1:
                raise ValueError("T must be positive")
        elif budget is None:
            raise ConfigError("T = auto requires query_budget")
        for key in ("synthetic_n", "synthetic_d", "data_seed", "eval_every",
                    "n_images", "classes", "image_side"):
            int(values[key])
        for key in ("synthetic_noise", "train_fraction", "sigma", "theta", "epsilon"):
            float(values[key])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if budget is not None and budget < 1:
        raise ConfigError("query_budget must be positive")
    out = Path(os.environ.get("OUTPUT_DIR") or values["output_dir"])
    return ExperimentConfig(values, solvers, seeds, budget, out)


def load_config(path, seed_override: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    return build_config(parse_config_text(text), seed_override)


def build_problem(values: dict):
    """Problem, constraint set and start point described by ``values``."""
    data_rng = SeededRng(int(values["data_seed"]))
    if values["problem"] == "robust_classification":
        if values["dataset"] == "synthetic":
            ds = synthesize_classification(int(values["synthetic_n"]), int(values["synthetic_d"]),
                                           float(values["synthetic_noise"]), data_rng)
        else:
            ds = load_libsvm(values["dataset"])
        train, _ = split(ds, float(values["train_fraction"]), data_rng)
        p = correntropy_problem(train.features, train.labels, float(values["sigma"]))
        cset = L1Ball(float(values["theta"]), p.d)
        return p, cset, np.zeros(p.d)

    model_rng, image_rng = data_rng.split(2)
    if values["model"] == "synthetic":
        side, K = int(values["image_side"]), int(values["classes"])
        d = side * side
        model = LinearSoftmaxModel(model_rng.standard_normal((K, d)), model_rng.standard_normal(K))
    else:
        model = LinearSoftmaxModel.load(values["model"])
    if values["images"] == "synthetic":
        count = int(values["n_images"])
        images = image_rng.gen.uniform(0.0, 1.0, (count, model.d))
        labels = model.predict(images)  # correctly classified by construction
    else:
        images, labels = load_images(values["images"])
    p, cset = attack_problem(model, images, labels, float(values["epsilon"]))
    return p, cset, np.zeros(p.d)


def solver_config(name: str, values: dict, d: int, n: int, budget: int | None) -> SolverConfig:
    preset = values["preset"]
    if name in BASELINE_ALIASES:
        variant, est = Variant.PlainZOFW_baseline, BASELINE_ALIASES[name]
    else:
        variant, est = Variant(name), "uni"
    star = variant in (Variant.AccSZOFWStar_CooGE, Variant.AccSZOFWStar_UniGE)
    if variant is Variant.AccZOFW:
        mode = Mode.FiniteSum
    elif star or variant is Variant.AccSZOFW_UniGE:
        mode = Mode.Stochastic
    else:
        mode = Mode(values["mode"])
    uni = variant.uses_uni or (variant is Variant.PlainZOFW_baseline and est == "uni")

    def schedule(T):
        return make_schedule(preset, T, d, n, star=star, estimator="uni" if uni else "coo")

    gap = {"true": GapMode.TrueGradient, "coo": GapMode.CooGEFull, "none": None}[values["gap"]]
    cfg = SolverConfig(variant, schedule(1000), mode=mode, eval_every=int(values["eval_every"]),
                       gap_mode=gap, query_budget=budget, baseline_estimator=est)
    T = iterations_for_budget(cfg, d, n, budget) if values["T"] == "auto" else int(values["T"])
    return cfg.with_(schedule=schedule(T))


def _run_one(values: dict, solver: str, seed: int, budget: int | None):
    p, cset, start = build_problem(values)
    cfg = solver_config(solver, values, p.d, p.n, budget)
    if cfg.gap_mode is GapMode.TrueGradient and p.true_gradient is None:
        cfg = cfg.with_(gap_mode=None)
    trace = run_solver(p, cset, cfg, start, rng=seed)
    final_gap = fw_gap(p, cset, trace.final_z) if p.true_gradient is not None else None
    return cfg.label, seed, trace, final_gap


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> dict:
    """Run every (solver, seed) pair, write traces and ``summary.csv``.

    Returns the summary as ``{label: {"runs": [...], "median": {...}, ...}}``.
    """
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg.values, s, seed, cfg.query_budget) for s in cfg.solvers for seed in cfg.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, *zip(*jobs)))
    else:
        results = [_run_one(*job) for job in jobs]

    summary: dict = {}
    for label, seed, trace, final_gap in results:
        path = cfg.output_dir / f"{label}_{seed}.csv"
        with open(path, "w", newline="") as fh:
            write_trace_csv(trace, fh)
        log.info("%s seed=%s loss=%s queries=%d", label, seed, trace.final_loss, trace.total_queries)
        runs = summary.setdefault(label, {"runs": []})["runs"]
        if all(r["seed"] != seed for r in runs):
            runs.append({"seed": seed, "final_loss": trace.final_loss, "final_gap": final_gap,
                         "queries": trace.total_queries, "diag_queries": trace.total_diag_queries,
                         "iterations": len(trace) and trace.records[-1].t + 1})

    fields = ["final_loss", "final_gap", "queries", "diag_queries", "iterations"]
    for entry in summary.values():
        for stat, fn in (("median", statistics.median), ("mean", statistics.fmean),
                         ("std", statistics.pstdev)):
            entry[stat] = {}
            for f in fields:
                vals = [r[f] for r in entry["runs"] if r[f] is not None]
                entry[stat][f] = fn(vals) if vals else None

    with open(cfg.output_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["solver", "seed", *fields])
        for label, entry in summary.items():
            rows = [(r["seed"], r) for r in entry["runs"]]
            rows += [(stat, entry[stat]) for stat in ("median", "mean", "std")]
            for seed, r in rows:
                w.writerow([label, seed, *("" if r[f] is None else format(r[f], ".17g") for f in fields)])
    return summary


def compare_at_budget(traces: list[RunTrace], budget: int) -> list[tuple[str, float]]:
    """Rank traces by their loss at the last record within ``budget`` queries."""
    scored = []
    for trace in traces:
        within = [r for r in trace.records if r.queries <= budget and r.loss is not None]
        if not within:
            raise ValueError(f"trace {trace.solver!r} has no record within {budget} queries")
        scored.append((trace.solver, within[-1].loss))
    return sorted(scored, key=lambda item: item[1])


def _parse_synthetic(tokens: list[str]) -> dict:
    spec = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or key not in ("n", "d", "noise"):
            raise ConfigError(f"bad synthetic spec token {tok!r}; expected n=, d=, noise=")
        spec[key] = value
    try:
        return {"n": int(spec.get("n", 1000)), "d": int(spec.get("d", 20)),
                "noise": float(spec.get("noise", 0.0))}
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acczofw", description=__doc__.split("\n\n")[0])
    parser.add_argument("--workers", type=int, default=1, help="parallel (solver, seed) runs")
    parser.add_argument("--seed", type=int, default=None, help="override seeds")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    run.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    cmp_ = sub.add_parser("compare", help="rank trace files at a query budget")
    cmp_.add_argument("--budget", type=int, required=True)
    cmp_.add_argument("traces", nargs="+")

    gen = sub.add_parser("gen-data", help="write a synthetic LIBSVM dataset")
    gen.add_argument("--synthetic", nargs="+", required=True, metavar="KEY=VALUE")
    gen.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    gen.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    seed = args.seed
    try:
        if args.command == "run":
            cfg = load_config(args.config, seed)
            summary = run_experiment(cfg, workers=max(1, args.workers))
            for label, entry in summary.items():
                print(f"{label}: median final loss {entry['median']['final_loss']}")
        elif args.command == "compare":
            traces = [read_trace_csv(path, solver=Path(path).stem) for path in args.traces]
            for rank, (name, loss) in enumerate(compare_at_budget(traces, args.budget), 1):
                print(f"{rank} {name} {loss:.17g}")
        else:
            spec = _parse_synthetic(args.synthetic)
            ds = synthesize_classification(spec["n"], spec["d"], spec["noise"],
                                           SeededRng(seed if seed is not None else 0))
            Path(args.out).write_text(serialize_libsvm(ds))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("run failed")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
