"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence or
exhausted measurement budget.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .accuracy_model import load_table, synthetic
from .adaptation import AdaptationConfig, tune_lambda
from .device_sim import (
    LENOVO,
    S5E,
    TABA,
    RooflineDevice,
    SyntheticDeviceFamilySpec,
    generate_family,
    roofline_predictor,
    simulate_genes,
)
from .errors import BudgetExhausted, DataError, LengthMismatch, OneProxyError
from .evo_search import EvoConfig, sweep_tradeoff
from .latency_model import LatencyPredictor, MeasurementSample, MeasurementSet, fit, read_measurements, write_measurements
from .monotonicity import estimate_srcc, select_proxy, srcc, srcc_matrix
from .pareto import write_front_csv, write_front_svg
from .pipeline import load_run_config, one_proxy_nas, write_outputs
from .search_space import enumerate_genes, load_space

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BUDGET = 0, 1, 2, 3
PRESET_DEVICES = {d.device_id: d for d in (S5E, TABA, LENOVO)}

log = logging.getLogger("oneproxy")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _device(ref: str) -> RooflineDevice:
    if ref in PRESET_DEVICES:
        return PRESET_DEVICES[ref]
    return RooflineDevice.load(ref)


def _common(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d if suppress else 0, help="random seed")
    p.add_argument("--workers", type=int, default=d if suppress else 1, help="worker threads")
    p.add_argument("--out-dir", default=d if suppress else ".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oneproxy", description="Latency-monotonicity tools for hardware-aware NAS.")
    parser.add_argument("--version", action="version", version=__version__)
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _common(p, suppress=True)
        return p

    p = add("srcc", "SRCC between two measurement CSVs")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--space", default="cell")
    p.add_argument("--sample-size", type=int, default=None)
    p.add_argument("--runs", type=int, default=1000)

    p = add("matrix", "pairwise SRCC matrix of a multi-device latency CSV")
    p.add_argument("table")
    p.add_argument("--space", default="cell")
    p.add_argument("--threshold", type=float, default=0.9)

    p = add("simulate", "roofline latencies of sampled or all genotypes")
    p.add_argument("--device", required=True, help="preset id (S5e, TabA, Lenovo) or profile JSON")
    p.add_argument("--space", default="cell")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--samples", type=int, default=100)
    g.add_argument("--all", action="store_true")

    p = add("family", "write synthetic device-family predictors")
    p.add_argument("spec")

    p = add("fit", "fit an operator-level predictor from measurements")
    p.add_argument("measurements")
    p.add_argument("--space", default="cell")

    p = add("adapt", "adapt a proxy predictor to target measurements")
    p.add_argument("proxy")
    p.add_argument("measurements")
    p.add_argument("--space", default="cell")
    p.add_argument("--validation-count", type=int, default=20)
    p.add_argument("--train-count", type=int, default=None)

    p = add("search", "evolutionary trade-off sweep on a predictor")
    p.add_argument("--space", default="cell")
    p.add_argument("--predictor", required=True, help="predictor JSON or device preset/profile")
    p.add_argument("--accuracy", default=None, help="accuracy CSV; synthetic if omitted")
    p.add_argument("--evo", default=None, help="evolution config JSON")
    p.add_argument("--t-grid", type=float, nargs="+", default=None)
    p.add_argument("--latency-grid", type=float, nargs="+", default=None)

    p = add("pipeline", "run the full transfer pipeline from a run-config JSON")
    p.add_argument("config")

    p = add("ingest", "validate measurement or accuracy CSVs")
    p.add_argument("files", nargs="+")
    p.add_argument("--space", default="cell")
    p.add_argument("--kind", choices=["measurements", "accuracy"], default="measurements")
    return parser


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _predictor(ref: str, space) -> LatencyPredictor:
    if ref in PRESET_DEVICES or ref.endswith(".device.json"):
        return roofline_predictor(_device(ref), space)
    doc = json.loads(Path(ref).read_text(encoding="utf-8"))
    if "peak_gflops" in doc:
        return roofline_predictor(RooflineDevice.from_dict(doc), space)
    return LatencyPredictor.from_dict(doc)


def cmd_srcc(args) -> int:
    space = load_space(args.space)
    a = read_measurements(args.a, space)
    b = read_measurements(args.b, space)
    lb = {space.key(s.genotype): s.latency_ms for s in b.samples}
    pairs = [(s.latency_ms, lb[space.key(s.genotype)]) for s in a.samples if space.key(s.genotype) in lb]
    if len(pairs) < 2:
        raise LengthMismatch("the two files share fewer than 2 genotypes")
    x, y = np.array(pairs).T
    print(srcc(x, y))
    if args.sample_size:
        est = estimate_srcc(x, y, args.sample_size, args.runs, seed=args.seed, workers=args.workers)
        print(f"sampled mean {est.mean} std {est.std_dev} (n={est.sample_size}, runs={est.runs})")
    return EXIT_OK


def cmd_matrix(args) -> int:
    space = load_space(args.space)
    by_dev: dict[str, dict] = {}
    with open(args.table, newline="", encoding="utf-8") as fh:
        devices = sorted({row["device_id"] for row in csv.DictReader(fh)})
    for dev in devices:
        mset = read_measurements(args.table, space, dev)
        by_dev[dev] = {space.key(s.genotype): s.latency_ms for s in mset.samples}
    common = sorted(set.intersection(*(set(v) for v in by_dev.values()))) if by_dev else []
    table = [[by_dev[d][k] for k in common] for d in devices]
    M = srcc_matrix(table, devices)
    path = _out(args) / "srcc_matrix.csv"
    M.to_csv(path)
    print(f"proxy {select_proxy(M, args.threshold)}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    space = load_space(args.space)
    dev = _device(args.device)
    if args.all:
        G = enumerate_genes(space)
    else:
        rng = np.random.default_rng(args.seed)
        G = np.unique(space.canonical_genes(space.sample_genes(rng, args.samples)), axis=0)
    lat = simulate_genes(dev, space, G)
    mset = MeasurementSet(dev.device_id, tuple(
        MeasurementSample(space.from_genes(g), float(v)) for g, v in zip(G, lat)))
    path = _out(args) / f"latency_{dev.device_id}.csv"
    write_measurements(path, mset, space)
    print(f"wrote {len(mset)} rows to {path}")
    return EXIT_OK


def cmd_family(args) -> int:
    spec_path = Path(args.spec)
    spec = SyntheticDeviceFamilySpec.from_dict(json.loads(spec_path.read_text(encoding="utf-8")),
                                               root=spec_path.parent)
    out = _out(args)
    for i, pred in enumerate(generate_family(spec)):
        pred.save(out / f"member_{i}.json")
    print(f"wrote {spec.member_count} predictors to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    space = load_space(args.space)
    pred = fit(read_measurements(args.measurements, space), space)
    path = _out(args) / "predictor.json"
    pred.save(path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_adapt(args) -> int:
    space = load_space(args.space)
    proxy = _predictor(args.proxy, space)
    mset = read_measurements(args.measurements, space)
    cfg = AdaptationConfig(validation_count=args.validation_count, train_count=args.train_count,
                           workers=args.workers)
    lam, params, score = tune_lambda(proxy, mset, cfg, space, seed=args.seed)
    path = _out(args) / "adaptation.json"
    params.save(path)
    print(f"lambda {lam} validation srcc {score} nnz {params.nnz}")
    if not params.converged:
        print("solver did not converge", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_search(args) -> int:
    space = load_space(args.space)
    pred = _predictor(args.predictor, space)
    acc = load_table(args.accuracy, space) if args.accuracy else synthetic(space)
    evo = EvoConfig()
    if args.evo:
        evo = EvoConfig.from_dict(json.loads(Path(args.evo).read_text(encoding="utf-8")))
    evo = replace(evo, seed=args.seed, workers=args.workers)
    front = sweep_tradeoff(space, acc, pred.as_fn(space), evo, t_grid=args.t_grid,
                           latency_grid=args.latency_grid)
    out = _out(args)
    write_front_csv(out / "front.csv", front, space)
    write_front_svg(out / "front.svg", list(front), list(front), "predicted front")
    print(f"front of {len(front)} written to {out / 'front.csv'}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    run = load_run_config(args.config, seed=args.seed_given, workers=args.workers)
    result = one_proxy_nas(run.state, run.target, run.pipeline)
    write_outputs(_out(args), result, run.state.space)
    rep = result.report
    print(f"branch {rep.branch} measurements {rep.measurement_count} front {rep.front_size}")
    if rep.budget_exhausted:
        print("measurement budget exhausted", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_ingest(args) -> int:
    space = load_space(args.space)
    for f in args.files:
        if args.kind == "accuracy":
            n = len(load_table(f, space).table)
        else:
            n = len(read_measurements(f, space))
        print(f"{f}: {n} rows ok")
    return EXIT_OK


COMMANDS = {
    "srcc": cmd_srcc,
    "matrix": cmd_matrix,
    "simulate": cmd_simulate,
    "family": cmd_family,
    "fit": cmd_fit,
    "adapt": cmd_adapt,
    "search": cmd_search,
    "pipeline": cmd_pipeline,
    "ingest": cmd_ingest,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    # the pipeline's own config seed applies unless --seed is passed
    args.seed_given = args.seed if any(a == "--seed" or a.startswith("--seed=") for a in argv) else None
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except BudgetExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (OneProxyError, DataError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
