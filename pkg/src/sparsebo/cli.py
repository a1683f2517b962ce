"""Command-line entry point: optimization runs, the quasi-random baseline,
the model-fit comparison, and a per-iteration runtime table.

Layout under --out:

    <out>/problems/<problem-key>.json     shared problem spec, reused on rerun
    <out>/<run-id>/manifest.json          resolved configuration + timestamps
    <out>/<run-id>/rep-<r>.records        one JSON record per iteration
    <out>/<run-id>/summary.csv            per-iteration stats across replications
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, persist
from .benchmarks import BenchmarkProblem, load_problem_spec, make_problem, save_problem_spec
from .driver import (
    BoConfig,
    ReplicationFailure,
    child_seed,
    fit_diagnose,
    replicate,
    sobol_baseline,
)
from .gp import EvaluationHistory
from .nuts import NutsConfig
from .sobol import sobol_points

_HARTMANN_INIT = 20
_DEFAULT_INIT = 10


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", required=True,
                   help="branin | branin100 | hartmann6 | rosenbrock | rotated-hartmann")
    p.add_argument("--dim", type=int, default=100, help="ambient dimension (default 100)")
    p.add_argument("--dp", type=int, default=6,
                   help="projection dimension for rotated-hartmann (default 6)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs", help="output directory (default runs/)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsebo",
        description="High-dimensional Bayesian optimization with a shrinkage-prior GP surrogate",
    )
    parser.add_argument("--version", action="version", version=f"sparsebo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="optimize a benchmark problem")
    _add_problem_flags(run)
    run.add_argument("--budget", type=int, default=50, help="total evaluation budget")
    run.add_argument("--init", type=int, default=None,
                     help="initial quasi-random budget (default 10; 20 for Hartmann problems)")
    run.add_argument("--alpha", type=float, default=0.1)
    run.add_argument("--inference", choices=("nuts", "map"), default="nuts")
    run.add_argument("--kernel", choices=("rbf", "matern52"), default="rbf")
    run.add_argument("--nuts-budget", choices=("default", "reduced"), default="default")
    run.add_argument("--reps", type=int, default=1)
    run.add_argument("--jobs", type=int, default=1)

    sob = sub.add_parser("sobol", help="quasi-random search baseline")
    _add_problem_flags(sob)
    sob.add_argument("--budget", type=int, default=50)
    sob.add_argument("--reps", type=int, default=1)

    diag = sub.add_parser("fit-diagnose", help="compare MLE / weak-prior / shrinkage-prior fits")
    _add_problem_flags(diag)
    diag.add_argument("--train-n", type=int, default=50)
    diag.add_argument("--test-n", type=int, default=100)
    diag.add_argument("--kernel", choices=("rbf", "matern52"), default="rbf")
    diag.add_argument("--alpha", type=float, default=0.1)
    diag.add_argument("--nuts-budget", choices=("default", "reduced"), default="default")

    bench = sub.add_parser("bench-table", help="per-iteration runtime table for each method")
    _add_problem_flags(bench)
    bench.add_argument("--budget", type=int, default=15)
    bench.add_argument("--init", type=int, default=None)
    return parser


def _problem_key(args) -> str:
    key = f"{args.problem.lower()}-D{args.dim}"
    if args.problem.lower().startswith("rotated"):
        key += f"-dp{args.dp}"
    return f"{key}-s{args.seed}"


def _resolve_problem(args) -> tuple[BenchmarkProblem, Path]:
    problems_dir = Path(args.out) / "problems"
    problems_dir.mkdir(parents=True, exist_ok=True)
    spec_path = problems_dir / f"{_problem_key(args)}.json"
    if spec_path.exists():
        return load_problem_spec(spec_path), spec_path
    problem = make_problem(args.problem, dim=args.dim, projection_dim=args.dp, seed=args.seed)
    save_problem_spec(problem, spec_path)
    return problem, spec_path


def _default_init(args) -> int:
    if getattr(args, "init", None):
        return args.init
    return _HARTMANN_INIT if "hartmann" in args.problem.lower() else _DEFAULT_INIT


def _nuts_config(args) -> NutsConfig:
    return NutsConfig.reduced() if args.nuts_budget == "reduced" else NutsConfig()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_run_outputs(run_dir: Path, manifest: dict, results) -> int:
    run_dir.mkdir(parents=True, exist_ok=True)
    failures = []
    traces = []
    for r, result in enumerate(results):
        if isinstance(result, ReplicationFailure):
            failures.append((r, result))
            continue
        persist.write_records(run_dir / f"rep-{r}.records", result)
        traces.append(result.incumbents())
    if traces:
        persist.write_summary_csv(run_dir / "summary.csv", persist.summary_rows(traces))
    manifest["finished_at"] = _now()
    persist.write_manifest(run_dir / "manifest.json", manifest)
    for r, failure in failures:
        print(f"error: replication {r} (seed {failure.seed}): {failure.error}", file=sys.stderr)
    if failures:
        return 1
    print(f"wrote {len(traces)} replication(s) to {run_dir}")
    return 0


def _cmd_run(args) -> int:
    problem, spec_path = _resolve_problem(args)
    init = _default_init(args)
    config = BoConfig(
        initial_budget=init,
        total_budget=args.budget,
        alpha=args.alpha,
        inference=args.inference,
        nuts_config=_nuts_config(args),
        kernel=args.kernel,
        seed=args.seed,
    )
    run_id = (
        f"{problem.name}_{args.inference}_{args.kernel}_{args.nuts_budget}"
        f"_T{args.budget}_m{init}_s{args.seed}"
    )
    manifest = {
        "tool": "sparsebo",
        "version": __version__,
        "subcommand": "run",
        "run_id": run_id,
        "config": dataclasses.asdict(config),
        "problem_spec_file": str(spec_path),
        "problem": problem.to_spec(),
        "seed": args.seed,
        "reps": args.reps,
        "env": {
            "dimension": problem.dim,
            "initial_budget": init,
            "total_budget": args.budget,
        },
        "started_at": _now(),
    }
    results = replicate(problem, config, reps=args.reps, base_seed=args.seed, jobs=args.jobs)
    return _write_run_outputs(Path(args.out) / run_id, manifest, results)


def _cmd_sobol(args) -> int:
    problem, spec_path = _resolve_problem(args)
    run_id = f"{problem.name}_sobol_T{args.budget}_s{args.seed}"
    manifest = {
        "tool": "sparsebo",
        "version": __version__,
        "subcommand": "sobol",
        "run_id": run_id,
        "config": {"total_budget": args.budget},
        "problem_spec_file": str(spec_path),
        "problem": problem.to_spec(),
        "seed": args.seed,
        "reps": args.reps,
        "env": {"dimension": problem.dim, "total_budget": args.budget},
        "started_at": _now(),
    }
    results = [sobol_baseline(problem, args.budget, seed=args.seed + r) for r in range(args.reps)]
    return _write_run_outputs(Path(args.out) / run_id, manifest, results)


def _sample_history(problem, n, seed) -> EvaluationHistory:
    x = sobol_points(n, problem.dim, seed=seed)
    y = np.array([problem.evaluate(row) for row in x])
    return EvaluationHistory(x, y)


def _cmd_fit_diagnose(args) -> int:
    problem, _ = _resolve_problem(args)
    train = _sample_history(problem, args.train_n, child_seed(args.seed, 41))
    test = _sample_history(problem, args.test_n, child_seed(args.seed, 43))
    report = fit_diagnose(
        train, test, kernel=args.kernel, alpha=args.alpha,
        nuts_config=_nuts_config(args), seed=args.seed,
    )
    out_dir = Path(args.out) / f"{problem.name}_fit-diagnose_s{args.seed}"
    out_dir.mkdir(parents=True, exist_ok=True)
    persist.write_manifest(out_dir / "report.json", report)
    print(f"{'model':<8} {'test_ll':>12} {'rmse':>10} {'mean_rev':>9}")
    for name, metrics in report.items():
        if "error" in metrics:
            print(f"{name:<8} failed: {metrics['error']}")
        else:
            print(
                f"{name:<8} {metrics['test_log_likelihood']:>12.3f} "
                f"{metrics['rmse_std']:>10.4f} {metrics['mean_reversion_fraction']:>9.2f}"
            )
    return 0


def _cmd_bench_table(args) -> int:
    problem, _ = _resolve_problem(args)
    init = _default_init(args)
    methods = [
        ("nuts-default", BoConfig(init, args.budget, nuts_config=NutsConfig(), seed=args.seed)),
        ("nuts-reduced", BoConfig(init, args.budget, nuts_config=NutsConfig.reduced(), seed=args.seed)),
        ("map", BoConfig(init, args.budget, inference="map", seed=args.seed)),
        ("sobol", None),
    ]
    rows = []
    for name, config in methods:
        start = time.perf_counter()
        if config is None:
            record = sobol_baseline(problem, args.budget, seed=args.seed)
            per_iter = (time.perf_counter() - start) / args.budget
        else:
            results = replicate(problem, config, reps=1, base_seed=args.seed)
            record = results[0]
            if isinstance(record, ReplicationFailure):
                print(f"error: {name}: {record.error}", file=sys.stderr)
                return 1
            loop = [rec.wall_time_s for rec in record.iterations[init:]]
            per_iter = float(np.mean(loop)) if loop else 0.0
        rows.append((name, per_iter, record.y_min))
    print(f"{'method':<14} {'sec/iteration':>14} {'best_value':>12}")
    for name, per_iter, best in rows:
        print(f"{name:<14} {per_iter:>14.2f} {best:>12.4f}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"bench-table_{problem.name}_s{args.seed}.csv", "w") as fh:
        fh.write("method,sec_per_iteration,best_value\n")
        for name, per_iter, best in rows:
            fh.write(f"{name},{per_iter!r},{best!r}\n")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sobol": _cmd_sobol,
    "fit-diagnose": _cmd_fit_diagnose,
    "bench-table": _cmd_bench_table,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        parser.exit(2, f"{parser.prog}: error: {exc}\n")
    except Exception as exc:  # noqa: BLE001 - surface runtime failures as exit 1
        print(f"{parser.prog}: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
