"""Instance generators, the ratings-file loader, and the replicated
experiment runner with CSV aggregation.

Generator tier sizes are rounded for general n (sizes floored, the
instance padded with mean-0 arms to exactly n); the emitted instance always
carries its exact realized means, so downstream complexity reports are
self-consistent with what was actually run.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import (
    EmpiricalArms,
    Instance,
    LinearInstance,
    MabInstance,
    RunTrace,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    trace_to_dict,
)
from .linbandit import RageConfig, run_is_rage
from .mab import BudgetExhaustedError, SeConfig, run_is_se

__all__ = [
    "gen_example",
    "gen_basis_linear",
    "load_ratings_csv",
    "ExperimentSpec",
    "AggregateRow",
    "run_experiment",
    "write_aggregate_csv",
    "summarize_results_dir",
    "AGGREGATE_FIELDS",
]

AGGREGATE_FIELDS = [
    "algo",
    "beta_conf",
    "beta_sample",
    "beta_grid",
    "delta",
    "n",
    "mean_samples",
    "var_samples",
    "mean_batches",
    "var_batches",
    "success_rate",
    "replications",
]

MAB_ALGORITHMS = ("se", "is-se")
LINEAR_ALGORITHMS = ("rage", "is-rage")


def gen_example(which: int, n: int, noise_sd: float = 1.0) -> MabInstance:
    """Benchmark family ``which`` in {1, 2, 3} with n arms; best arm first.

    1: best at 1/2, n-2 arms at 0, one arm at 1/2 - 1/sqrt(n).
    2: best at 1/2, a bulk at 0, and one arm per gap 1/4, 1/8, ... down to
       the final arm at gap 1/sqrt(n).
    3: geometric tiers: ~(3n-2)/4 arms at gap 1/2, a quarter as many at 1/4,
       and so on, ending with one arm at gap 1/sqrt(n).
    """
    if which not in (1, 2, 3):
        raise ValueError("example must be 1, 2, or 3")
    if n < 3:
        raise ValueError("need n >= 3 for the example patterns")
    closest = 0.5 - 1.0 / math.sqrt(n)
    if which == 1:
        means = [0.5] + [0.0] * (n - 2) + [closest]
        return MabInstance(tuple(means), noise_sd)
    if which == 2:
        singles = []
        k = 2
        while 2.0**-k > 1.0 / math.sqrt(n):
            singles.append(0.5 - 2.0**-k)
            k += 1
        zeros = n - 2 - len(singles)
        if zeros < 1:
            raise ValueError(f"n={n} too small for the example-2 pattern")
        means = [0.5] + [0.0] * zeros + singles + [closest]
        return MabInstance(tuple(means), noise_sd)
    # geometric tiers
    x = (3 * n - 2) // 4
    tiers: list[tuple[float, int]] = []
    k = 1
    while True:
        size = x // 4 ** (k - 1)
        if size < 1 or 2.0**-k <= 1.0 / math.sqrt(n):
            break
        tiers.append((2.0**-k, size))
        k += 1
    if not tiers:
        raise ValueError(f"n={n} too small for the example-3 pattern")
    count = 2 + sum(s for _, s in tiers)
    adjust = n - count
    gap0, size0 = tiers[0]
    if size0 + adjust < 1:
        raise ValueError(f"n={n} incompatible with the example-3 tier pattern")
    tiers[0] = (gap0, size0 + adjust)
    means = [0.5]
    for gap, size in tiers:
        means += [0.5 - gap] * size
    means.append(closest)
    return MabInstance(tuple(means), noise_sd)


def gen_basis_linear(n: int, which: int = 1, noise_sd: float = 1.0) -> LinearInstance:
    """Standard-basis arm set in dimension n with the example means as theta."""
    means = gen_example(which, n, noise_sd).means
    arms = tuple(tuple(np.eye(n)[i]) for i in range(n))
    return LinearInstance(arms, means, noise_sd)


def load_ratings_csv(path: str | Path, top_k: int, per_arm_cap: int) -> tuple[EmpiricalArms, list[int]]:
    """Empirical arms from a ratings file (header userId,movieId,rating,timestamp).

    Keeps the ``top_k`` movies by rating count (ties: smaller movieId), with
    each arm's pool the movie's first ``per_arm_cap`` ratings in file order,
    negated. Returns the arm set plus the movie id per arm.
    """
    if top_k < 2:
        raise ValueError("top_k must be at least 2")
    if per_arm_cap < 1:
        raise ValueError("per_arm_cap must be at least 1")
    counts: dict[int, int] = {}
    firsts: dict[int, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("ratings file is empty") from None
        cols = [c.strip() for c in header]
        try:
            movie_col = cols.index("movieId")
            rating_col = cols.index("rating")
        except ValueError:
            raise ValueError(
                "ratings file must carry a userId,movieId,rating,timestamp header"
            ) from None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                movie = int(row[movie_col])
                rating = float(row[rating_col])
            except (IndexError, ValueError) as exc:
                raise ValueError(f"malformed ratings row at line {lineno}: {row!r}") from exc
            counts[movie] = counts.get(movie, 0) + 1
            pool = firsts.setdefault(movie, [])
            if len(pool) < per_arm_cap:
                pool.append(-rating)
    if len(counts) < top_k:
        raise ValueError(f"only {len(counts)} movies present, need top_k={top_k}")
    ranked = sorted(counts, key=lambda m: (-counts[m], m))[:top_k]
    pools = tuple(tuple(firsts[m]) for m in ranked)
    return EmpiricalArms(pools), [int(m) for m in ranked]


@dataclass(frozen=True)
class ExperimentSpec:
    """A sweep: one instance, one algorithm, a config grid, seeded replications."""

    instance: Instance
    algorithm: str
    beta_confs: tuple[float, ...] = (1.0,)
    beta_samples: tuple[float, ...] = (1.0,)
    beta_grids: tuple[float, ...] = (4.0,)
    deltas: tuple[float, ...] = (0.1,)
    replications: int = 10
    seed: int = 0
    max_batches: int = 64
    design_tol: float = 1e-4

    def __post_init__(self):
        if self.algorithm not in MAB_ALGORITHMS + LINEAR_ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not (self.beta_confs and self.beta_grids and self.deltas and self.beta_samples):
            raise ValueError("config grid must be nonempty")
        if self.algorithm in LINEAR_ALGORITHMS and not isinstance(self.instance, LinearInstance):
            raise ValueError(f"{self.algorithm} requires a linear instance")

    @classmethod
    def from_dict(cls, payload: dict, base_dir: str | Path | None = None) -> "ExperimentSpec":
        src = payload["instance"]
        if "path" in src:
            path = Path(src["path"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            instance = load_instance(path)
        elif "generator" in src:
            g = src["generator"]
            if g.get("linear", False):
                instance = gen_basis_linear(
                    g.get("n"), g.get("example", 1), g.get("noise_sd", 1.0)
                )
            else:
                instance = gen_example(g.get("example", 1), g.get("n"), g.get("noise_sd", 1.0))
        else:
            instance = instance_from_dict(src)
        grid = payload.get("grid", {})
        return cls(
            instance=instance,
            algorithm=payload["algorithm"],
            beta_confs=tuple(grid.get("beta_conf", [1.0])),
            beta_samples=tuple(grid.get("beta_sample", [1.0])),
            beta_grids=tuple(grid.get("beta_grid", [4.0])),
            deltas=tuple(grid.get("delta", [0.1])),
            replications=int(payload.get("replications", 10)),
            seed=int(payload.get("seed", 0)),
            max_batches=int(payload.get("max_batches", 64)),
            design_tol=float(payload.get("design_tol", 1e-4)),
        )

    def grid_points(self) -> list[tuple[float, float, float, float]]:
        """(beta_conf, beta_sample, beta_grid, delta) combinations to run."""
        samples = (0.0,) if self.algorithm in ("se", "rage") else self.beta_samples
        return list(product(self.beta_confs, samples, self.beta_grids, self.deltas))


@dataclass
class AggregateRow:
    """Mean/variance summary of one grid point across replications."""

    algo: str
    beta_conf: float
    beta_sample: float
    beta_grid: float
    delta: float
    n: int
    mean_samples: float
    var_samples: float
    mean_batches: float
    var_batches: float
    success_rate: float
    replications: int

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in AGGREGATE_FIELDS}


def config_id(algo: str, point: tuple[float, float, float, float]) -> str:
    bc, bs, bg, dl = point
    return f"{algo}_bc{bc:g}_bs{bs:g}_bg{bg:g}_d{dl:g}"


def _run_single(args) -> tuple[str, int, RunTrace]:
    instance, algorithm, point, rep, seed, max_batches, design_tol = args
    bc, bs, bg, dl = point
    try:
        if algorithm in MAB_ALGORITHMS:
            cfg = SeConfig(beta_conf=bc, beta_sample=bs, beta_grid=bg, delta=dl,
                           max_batches=max_batches)
            trace = run_is_se(instance, cfg, seed, replication=rep)
        else:
            cfg = RageConfig(beta_conf=bc, beta_sample=bs, beta_grid=bg, delta=dl,
                             max_batches=max_batches, design_tol=design_tol)
            trace = run_is_rage(instance, cfg, seed, replication=rep)
    except BudgetExhaustedError as exc:
        trace = exc.trace  # partial trace, success already False
    return config_id(algorithm, point), rep, trace


def _variance(values: Iterable[float]) -> float:
    vals = np.asarray(list(values), dtype=float)
    if vals.size < 2:
        return 0.0
    return float(np.var(vals, ddof=1))


def aggregate_traces(algo: str, point: tuple[float, float, float, float], n: int,
                     traces: list[RunTrace]) -> AggregateRow:
    samples = [t.total_samples for t in traces]
    batch_counts = [t.total_batches for t in traces]
    successes = [bool(t.success) for t in traces]
    bc, bs, bg, dl = point
    return AggregateRow(
        algo=algo,
        beta_conf=bc,
        beta_sample=bs,
        beta_grid=bg,
        delta=dl,
        n=n,
        mean_samples=float(np.mean(samples)),
        var_samples=_variance(samples),
        mean_batches=float(np.mean(batch_counts)),
        var_batches=_variance(batch_counts),
        success_rate=float(np.mean(successes)),
        replications=len(traces),
    )


def run_experiment(spec: ExperimentSpec, out_dir: str | Path | None = None,
                   workers: int | None = None) -> tuple[list[AggregateRow], dict]:
    """Run the sweep; returns aggregate rows plus traces keyed (config_id, rep).

    Replications use sub-streams derived from (seed, replication, batch), so
    execution order and parallelism cannot change any result. When
    ``out_dir`` is given, per-run trace JSON files and aggregate.csv are
    written there.
    """
    jobs = [
        (spec.instance, spec.algorithm, point, rep, spec.seed, spec.max_batches,
         spec.design_tol)
        for point in spec.grid_points()
        for rep in range(spec.replications)
    ]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_single, jobs))
    else:
        results = [_run_single(job) for job in jobs]
    traces: dict[tuple[str, int], RunTrace] = {}
    for cid, rep, trace in results:
        traces[(cid, rep)] = trace
    rows = []
    for point in spec.grid_points():
        cid = config_id(spec.algorithm, point)
        group = [traces[(cid, rep)] for rep in range(spec.replications)]
        rows.append(aggregate_traces(spec.algorithm, point, spec.instance.n, group))
    if out_dir is not None:
        out = Path(out_dir)
        (out / "traces").mkdir(parents=True, exist_ok=True)
        for point in spec.grid_points():
            cid = config_id(spec.algorithm, point)
            bc, bs, bg, dl = point
            for rep in range(spec.replications):
                payload = {
                    "run_id": f"{cid}_rep{rep}",
                    "algo": spec.algorithm,
                    "config": {"beta_conf": bc, "beta_sample": bs, "beta_grid": bg,
                               "delta": dl},
                    "n": spec.instance.n,
                    "replication": rep,
                    "trace": trace_to_dict(traces[(cid, rep)]),
                }
                (out / "traces" / f"{cid}_rep{rep}.json").write_text(
                    json.dumps(payload)
                )
        write_aggregate_csv(rows, out / "aggregate.csv")
        (out / "instance.json").write_text(json.dumps(instance_to_dict(spec.instance)))
    return rows, traces


def write_aggregate_csv(rows: list[AggregateRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=AGGREGATE_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_dict())


def summarize_results_dir(in_dir: str | Path, out_csv: str | Path) -> list[AggregateRow]:
    """Re-aggregate every per-run trace file under ``in_dir`` into one CSV."""
    groups: dict[tuple, list[dict]] = {}
    for path in sorted(Path(in_dir).rglob("*.json")):
        try:
            payload = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            continue
        if not isinstance(payload, dict) or "trace" not in payload:
            continue
        cfg = payload.get("config", {})
        key = (
            payload.get("algo", "?"),
            (cfg.get("beta_conf"), cfg.get("beta_sample"), cfg.get("beta_grid"),
             cfg.get("delta")),
            payload.get("n", 0),
        )
        groups.setdefault(key, []).append(payload["trace"])
    rows = []
    for (algo, point, n), items in sorted(groups.items(), key=lambda kv: repr(kv[0])):
        samples = [t["total_samples"] for t in items]
        batch_counts = [t["total_batches"] for t in items]
        successes = [bool(t.get("success")) for t in items]
        bc, bs, bg, dl = point
        rows.append(
            AggregateRow(
                algo=algo,
                beta_conf=bc,
                beta_sample=bs,
                beta_grid=bg,
                delta=dl,
                n=n,
                mean_samples=float(np.mean(samples)),
                var_samples=_variance(samples),
                mean_batches=float(np.mean(batch_counts)),
                var_batches=_variance(batch_counts),
                success_rate=float(np.mean(successes)),
                replications=len(items),
            )
        )
    write_aggregate_csv(rows, out_csv)
    return rows
