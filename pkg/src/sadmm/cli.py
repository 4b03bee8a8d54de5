"""Command-line front end.

Subcommands: prepare-graph, train, bench, grid-eta, check-bounds.
Exit codes: 0 success, 1 failed check or diverged run, 2 I/O or parse error.

Any flag can also come from a --config file of flat `key=value` lines (keys
are the long flag names, hyphens or underscores both accepted); explicit
flags win over the file.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import (
    ALGO_POLICY,
    ExperimentSpec,
    default_eta_grid,
    grid_search_eta,
    load_problem,
    make_bound_check_instance,
    resolve_eta,
    run_experiment,
)
from .data import ParseError, build_graph_precision, load_libsvm, save_edges, write_metrics_csv
from .diagnostics import (
    check_adaptive_metric_bound,
    check_convergence_bound,
    check_diag_metric_minimizer,
    check_full_metric_minimizer,
    solve_reference,
)
from .solver import RunConfig, SolverDivergedError, run


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=False, help="LIBSVM-format dataset file")
    p.add_argument("--edges", default=None, help="edge-list file (default: precision heuristic)")
    p.add_argument("--algo", choices=sorted(ALGO_POLICY), default="ada-diag")
    p.add_argument("--epochs", type=float, default=2.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=None, help="constant step size (default: pinned table or grid search; sadmm: 1/(gamma t) schedule)")
    p.add_argument("--a", type=float, default=1.0, help="metric smoothing term")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--eval-every", type=int, default=0, help="record metrics every N iterations (0: final only)")
    p.add_argument("--deterministic", action="store_true", help="full-gradient mode (no sampling)")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--split-seed", type=int, default=1)
    p.add_argument("--normalize", action="store_true", help="max-abs feature scaling fitted on train")
    p.add_argument("--no-timing", action="store_true", help="write 0.0 wall times (byte-reproducible CSVs)")
    p.add_argument("--config", default=None, help="flat key=value file supplying defaults for any flag")


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ParseError(f"{path}: line {ln}: expected key=value")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config_file(args: argparse.Namespace, argv: list[str]) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    file_values = _load_config_file(args.config)
    explicit = {tok.split("=")[0].lstrip("-").replace("-", "_") for tok in argv if tok.startswith("--")}
    bool_flags = {"deterministic", "normalize", "no_timing"}
    int_flags = {"seed", "repeats", "eval_every", "split_seed", "max_edges"}
    float_flags = {"epochs", "beta", "eta", "a", "rho", "train_fraction", "shrinkage", "threshold"}
    for key, raw in file_values.items():
        if key in explicit or not hasattr(args, key):
            continue
        if key in bool_flags:
            value = raw.lower() in ("1", "true", "yes", "on")
        elif key in int_flags:
            value = int(raw)
        elif key in float_flags:
            value = float(raw)
        else:
            value = raw
        setattr(args, key, value)
    return args


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    if not args.dataset:
        raise ParseError("--dataset is required (flag or config file)")
    cfg = RunConfig(
        beta=args.beta,
        eta=args.eta,
        a=args.a,
        epochs=args.epochs,
        seed=args.seed,
        eval_every=args.eval_every,
        deterministic_full_gradient=args.deterministic,
        rho=args.rho,
        measure_time=not args.no_timing,
    )
    return ExperimentSpec(
        dataset_path=args.dataset,
        algo=args.algo,
        config=cfg,
        edges_path=args.edges,
        repeats=args.repeats,
        train_fraction=args.train_fraction,
        split_seed=args.split_seed,
        normalize=args.normalize,
        out_dir=args.out_dir,
    )


def _cmd_prepare_graph(args: argparse.Namespace) -> int:
    data = load_libsvm(args.dataset)
    graph = build_graph_precision(
        data, shrinkage=args.shrinkage, threshold=args.threshold, max_edges=args.max_edges
    )
    save_edges(graph, args.out)
    print(f"wrote {graph.m} edges over {graph.dim} features to {args.out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    problem = load_problem(spec)
    eta = resolve_eta(spec, problem)
    cfg = replace(spec.config, eta=eta)
    state, records = run(
        problem.train, problem.test, problem.graph, problem.params, cfg, ALGO_POLICY[spec.algo]
    )
    final = records[-1]
    print(
        f"{spec.algo} on {Path(spec.dataset_path).stem}: iter {final.iter} "
        f"objective(avg) {final.objective_avg:.6f} objective(last) {final.objective_last:.6f} "
        f"test error(avg) {final.test_error_avg:.4f}"
    )
    for warning in state.stats.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{Path(spec.dataset_path).stem}_{spec.algo}_seed{cfg.seed}.csv"
        write_metrics_csv(records, str(path))
        print(f"metrics written to {path}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    summary = run_experiment(_spec_from_args(args))
    print(summary.table_row())
    print(
        f"  eta: {summary.eta}  objective(last-iterate) mean {summary.objective_last_mean:.6f}  "
        f"test error(last) mean {summary.test_error_last_mean:.4f}"
    )
    for path in summary.csv_paths:
        print(f"  csv: {path}")
    return 0


def _cmd_grid_eta(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    grid = tuple(float(x) for x in args.grid.split(",")) if args.grid else default_eta_grid()
    result = grid_search_eta(spec, grid)
    for eta, score in result.scores:
        print(f"eta {eta:<10g} validation objective {score:.6f}")
    print(f"best eta: {result.best_eta}")
    return 0


def _cmd_check_bounds(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    reports = []

    g_small = rng.normal(size=(3, 5))
    reports.append(check_diag_metric_minimizer(g_small, c=2.0, n_candidates=args.prop1_candidates, seed=args.seed))
    g_full = rng.normal(size=(6, 4))
    reports.append(check_full_metric_minimizer(g_full, c=3.0, n_candidates=args.prop2_candidates, seed=args.seed))

    data, graph, params = make_bound_check_instance(seed=args.seed)
    for policy, algo in (("diag", "ada-diag"), ("full", "ada-full")):
        cfg = RunConfig(eta=0.5, epochs=2.0, seed=args.seed, measure_time=False)
        state, _ = run(data, data, graph, params, cfg, policy)
        reports.append(check_adaptive_metric_bound(state))

    reference = solve_reference(data, graph, params)
    for policy in ("identity", "diag", "full"):
        reports.append(
            check_convergence_bound(
                data, graph, params, policy, eta=0.5, rho=args.rho, reference=reference
            )
        )

    ok = True
    for report in reports:
        print(report)
        ok = ok and report.passed
    print(f"\n{'all checks passed' if ok else 'CHECKS FAILED'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sadmm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-graph", help="build an edge-list file from feature correlations")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--shrinkage", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--max-edges", type=int, default=None)
    p.set_defaults(fn=_cmd_prepare_graph)

    p = sub.add_parser("train", help="single run, prints the final metrics")
    _add_run_flags(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("bench", help="repeated seeded runs with mean/std summary")
    _add_run_flags(p)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("grid-eta", help="held-out search for the constant step size")
    _add_run_flags(p)
    p.add_argument("--grid", default=None, help="comma-separated step sizes (default 2^-5..2^5)")
    p.set_defaults(fn=_cmd_grid_eta)

    p = sub.add_parser("check-bounds", help="run the bound-verification diagnostics suite")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--prop1-candidates", type=int, default=100_000)
    p.add_argument("--prop2-candidates", type=int, default=10_000)
    p.set_defaults(fn=_cmd_check_bounds)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config_file(args, argv)
        return args.fn(args)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
