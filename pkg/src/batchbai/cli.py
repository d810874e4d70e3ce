"""Command-line interface: instance generation, complexity reports, design
solves, experiment sweeps, ratings ingestion, and result summaries."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    ExperimentSpec,
    gen_basis_linear,
    gen_example,
    load_ratings_csv,
    run_experiment,
    summarize_results_dir,
)
from .complexity import batch_complexity_mab
from .core import (
    LinearInstance,
    gap_profile,
    instance_to_dict,
    load_instance,
    save_instance,
)
from .linbandit import batch_complexity_linear
from .optdesign import difference_set, solve_design


def _cmd_gen(args) -> int:
    if args.linear:
        instance = gen_basis_linear(args.n, args.example, args.noise_sd)
    else:
        instance = gen_example(args.example, args.n, args.noise_sd)
    save_instance(instance, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_complexity(args) -> int:
    instance = load_instance(args.instance)
    if args.linear:
        if not isinstance(instance, LinearInstance):
            print("--linear requires an instance of kind 'linear'", file=sys.stderr)
            return 2
        report = batch_complexity_linear(instance, tol=args.tol)
    else:
        report = batch_complexity_mab(gap_profile(instance))
    Path(args.out).write_text(json.dumps(report.to_dict(include_trace=args.trace), indent=2))
    print(f"wrote {args.out}")
    return 0


def _cmd_design(args) -> int:
    instance = load_instance(args.instance)
    if not isinstance(instance, LinearInstance):
        print("design requires an instance of kind 'linear'", file=sys.stderr)
        return 2
    X = instance.arms_array
    if args.subset == "all":
        subset = list(range(instance.n))
    else:
        subset = sorted({int(tok) for tok in args.subset.split(",")})
    if len(subset) < 2:
        print("subset must name at least two arms", file=sys.stderr)
        return 2
    design = solve_design(X, difference_set(X[subset]), tol=args.tol,
                          max_iters=args.max_iters)
    payload = {
        "lambda": [float(v) for v in design.lam],
        "rho": design.rho,
        "iterations": design.iterations,
        "gap_certificate": design.gap_certificate,
    }
    Path(args.out).write_text(json.dumps(payload, indent=2))
    print(f"wrote {args.out}")
    return 0


def _cmd_run(args) -> int:
    payload = json.loads(Path(args.spec).read_text())
    spec = ExperimentSpec.from_dict(payload, base_dir=Path(args.spec).parent)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, _ = run_experiment(spec, out_dir=out_dir, workers=args.workers)
    for row in rows:
        print(
            f"{row.algo} bc={row.beta_conf:g} bs={row.beta_sample:g} "
            f"bg={row.beta_grid:g} d={row.delta:g}: "
            f"samples {row.mean_samples:.1f}, batches {row.mean_batches:.2f}, "
            f"success {row.success_rate:.2f}"
        )
    print(f"wrote {out_dir / 'aggregate.csv'}")
    return 0


def _cmd_ingest(args) -> int:
    arms, movie_ids = load_ratings_csv(args.csv, args.top_k, args.cap)
    save_instance(arms, args.out)
    if args.labels_out:
        Path(args.labels_out).write_text(json.dumps(movie_ids))
    print(f"wrote {args.out} ({arms.n} arms)")
    return 0


def _cmd_report(args) -> int:
    rows = summarize_results_dir(args.in_dir, args.out)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="batchbai",
        description="Batched best-arm identification toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a benchmark instance")
    p.add_argument("--example", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--linear", action="store_true",
                   help="emit the basis-arm linear counterpart")
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("complexity", help="deterministic batch-complexity report")
    p.add_argument("--instance", required=True)
    p.add_argument("--linear", action="store_true",
                   help="use the design-based linear recursion")
    p.add_argument("--trace", action="store_true",
                   help="include the full budget/threshold-set sequences")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_complexity)

    p = sub.add_parser("design", help="solve the optimal design for an arm subset")
    p.add_argument("--instance", required=True)
    p.add_argument("--subset", default="all",
                   help="'all' or comma-separated arm indices")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("run", help="run a replicated experiment sweep")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("ingest-ratings", help="build empirical arms from a ratings CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--top-k", type=int, default=1000)
    p.add_argument("--cap", type=int, default=50)
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out", default=None,
                   help="optional JSON file mapping arm index to movie id")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("report", help="re-aggregate trace files into a summary CSV")
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
