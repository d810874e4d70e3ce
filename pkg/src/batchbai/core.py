"""Bandit instances, reward environments, and run-trace records.

Arms are identified by their integer index into the instance's arm list.
Instances are immutable after construction; all randomness flows through
numpy generators derived deterministically from a top-level 64-bit seed,
one independent sub-stream per (replication, batch) pair, so replications
can run in any order (or in parallel) without changing results.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence, Union

import numpy as np

__all__ = [
    "InvalidArmError",
    "NonUniqueBestError",
    "MabInstance",
    "GapProfile",
    "LinearInstance",
    "EmpiricalArms",
    "BatchRecord",
    "RunTrace",
    "pull",
    "sample_rewards",
    "gap_profile",
    "batch_rng",
    "instance_to_dict",
    "instance_from_dict",
    "save_instance",
    "load_instance",
    "trace_to_dict",
    "trace_csv_fieldnames",
    "trace_csv_rows",
]


class InvalidArmError(KeyError):
    """An arm identifier does not exist on the instance."""


class NonUniqueBestError(ValueError):
    """No single arm attains the maximum mean."""


def _unique_argmax(values: np.ndarray) -> int:
    best = int(np.argmax(values))
    if int(np.count_nonzero(values == values[best])) != 1:
        raise NonUniqueBestError("expected exactly one arm with the maximum mean")
    return best


def _check_arm(arm: int, n: int) -> int:
    arm = int(arm)
    if not 0 <= arm < n:
        raise InvalidArmError(f"arm {arm} not in [0, {n})")
    return arm


@dataclass(frozen=True)
class MabInstance:
    """Gaussian bandit ground truth: reward for arm i is N(means[i], noise_sd**2)."""

    means: tuple[float, ...]
    noise_sd: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "noise_sd", float(self.noise_sd))
        if len(self.means) < 2:
            raise ValueError("an instance needs at least two arms")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        _unique_argmax(np.asarray(self.means))

    @property
    def n(self) -> int:
        return len(self.means)

    @cached_property
    def best_arm(self) -> int:
        return _unique_argmax(np.asarray(self.means))


@dataclass(frozen=True)
class GapProfile:
    """Suboptimality gaps of an instance with a unique best arm.

    ``deltas`` is sorted ascending, so ``deltas[0]`` is the smallest gap;
    ``arm_gaps`` keeps the arm -> gap association for per-arm diagnostics.
    """

    deltas: tuple[float, ...]
    best_index: int
    arm_gaps: dict[int, float]

    def __post_init__(self):
        if not self.deltas:
            raise ValueError("a gap profile needs at least one suboptimal arm")
        if any(d <= 0 for d in self.deltas):
            raise NonUniqueBestError("all gaps must be strictly positive")
        if list(self.deltas) != sorted(self.deltas):
            raise ValueError("deltas must be sorted ascending")
        if len(self.arm_gaps) != len(self.deltas):
            raise ValueError("arm_gaps must cover every suboptimal arm exactly once")

    @property
    def n(self) -> int:
        return len(self.deltas) + 1

    @property
    def min_gap(self) -> float:
        return self.deltas[0]


@dataclass(frozen=True)
class LinearInstance:
    """Linear bandit ground truth: reward for arm x is x @ theta_star + noise.

    Arm vectors must have Euclidean norm <= 1. The arm set may be rank
    deficient; all downstream design computations operate within its span.
    """

    arms: tuple[tuple[float, ...], ...]
    theta_star: tuple[float, ...]
    noise_sd: float = 1.0

    def __post_init__(self):
        arms = tuple(tuple(float(v) for v in row) for row in self.arms)
        theta = tuple(float(v) for v in self.theta_star)
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "noise_sd", float(self.noise_sd))
        if len(arms) < 2:
            raise ValueError("an instance needs at least two arms")
        if any(len(row) != len(theta) for row in arms):
            raise ValueError("arm dimension must match theta_star")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        X = np.asarray(arms, dtype=float)
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms > 1.0 + 1e-9):
            raise ValueError("arm vectors must have Euclidean norm <= 1")
        if not np.any(norms > 0):
            raise ValueError("arm set must span a subspace of dimension >= 1")
        _unique_argmax(X @ np.asarray(theta))

    @property
    def n(self) -> int:
        return len(self.arms)

    @property
    def d(self) -> int:
        return len(self.theta_star)

    @cached_property
    def arms_array(self) -> np.ndarray:
        X = np.asarray(self.arms, dtype=float)
        X.setflags(write=False)
        return X

    @cached_property
    def theta_array(self) -> np.ndarray:
        t = np.asarray(self.theta_star, dtype=float)
        t.setflags(write=False)
        return t

    @cached_property
    def means(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.arms_array @ self.theta_array)

    @cached_property
    def best_arm(self) -> int:
        return _unique_argmax(np.asarray(self.means))


@dataclass(frozen=True)
class EmpiricalArms:
    """Arms backed by observed reward pools; a pull draws uniformly with replacement."""

    pools: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        pools = tuple(tuple(float(v) for v in p) for p in self.pools)
        object.__setattr__(self, "pools", pools)
        if len(pools) < 2:
            raise ValueError("an instance needs at least two arms")
        if any(len(p) == 0 for p in pools):
            raise ValueError("every reward pool must be nonempty")

    @property
    def n(self) -> int:
        return len(self.pools)

    @cached_property
    def means(self) -> tuple[float, ...]:
        return tuple(float(np.mean(p)) for p in self.pools)

    @cached_property
    def best_arm(self) -> int | None:
        """Pool-mean argmax, or None when the maximum is tied."""
        try:
            return _unique_argmax(np.asarray(self.means))
        except NonUniqueBestError:
            return None


Instance = Union[MabInstance, LinearInstance, EmpiricalArms]


@dataclass
class BatchRecord:
    """Per-batch log of one elimination round."""

    batch_index: int
    budget: float
    pulls_per_arm: dict[int, int]
    empirical_means: dict[int, float]
    gap_estimates: dict[int, float]
    eliminated: frozenset[int]
    survivors: frozenset[int]

    def __post_init__(self):
        if self.batch_index < 1:
            raise ValueError("batch_index starts at 1")
        if not self.survivors:
            raise ValueError("survivor set cannot be empty")
        if self.eliminated & self.survivors:
            raise ValueError("eliminated and surviving arms must be disjoint")

    @property
    def total_pulls(self) -> int:
        return int(sum(self.pulls_per_arm.values()))


@dataclass
class RunTrace:
    """Full record of one algorithm run."""

    batches: list[BatchRecord]
    returned_arm: int | None
    total_samples: int
    total_batches: int
    seed: int
    success: bool | None

    def __post_init__(self):
        if self.total_batches != len(self.batches):
            raise ValueError("total_batches must equal the number of batch records")
        if self.total_samples != sum(b.total_pulls for b in self.batches):
            raise ValueError("total_samples must equal the summed batch pulls")


def batch_rng(seed: int, replication: int, batch: int) -> np.random.Generator:
    """Independent generator for one (replication, batch) cell under a root seed."""
    entropy = int(seed) & 0xFFFFFFFFFFFFFFFF
    ss = np.random.SeedSequence(entropy, spawn_key=(int(replication), int(batch)))
    return np.random.default_rng(ss)


def sample_rewards(instance: Instance, arm: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` i.i.d. rewards for one arm, advancing ``rng`` deterministically."""
    arm = _check_arm(arm, instance.n)
    if isinstance(instance, (MabInstance, LinearInstance)):
        return rng.normal(instance.means[arm], instance.noise_sd, size)
    if isinstance(instance, EmpiricalArms):
        pool = np.asarray(instance.pools[arm], dtype=float)
        return pool[rng.integers(0, pool.size, size=size)]
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


def pull(instance: Instance, arm: int, rng: np.random.Generator) -> float:
    """Single reward draw for ``arm``."""
    return float(sample_rewards(instance, arm, 1, rng)[0])


def gap_profile(instance: Instance | Sequence[float]) -> GapProfile:
    """Suboptimality gaps, sorted ascending, for an instance or raw mean list.

    Raises NonUniqueBestError when the maximum mean is tied.
    """
    if isinstance(instance, (MabInstance, LinearInstance, EmpiricalArms)):
        means = np.asarray(instance.means, dtype=float)
    else:
        means = np.asarray(instance, dtype=float)
    if means.ndim != 1 or means.size < 2:
        raise ValueError("need a one-dimensional list of at least two means")
    best = _unique_argmax(means)
    arm_gaps = {
        int(i): float(means[best] - means[i]) for i in range(means.size) if i != best
    }
    deltas = tuple(sorted(arm_gaps.values()))
    return GapProfile(deltas=deltas, best_index=best, arm_gaps=arm_gaps)


# --- serialization -----------------------------------------------------------

def instance_to_dict(instance: Instance) -> dict:
    if isinstance(instance, MabInstance):
        return {"kind": "mab", "means": list(instance.means), "noise_sd": instance.noise_sd}
    if isinstance(instance, LinearInstance):
        return {
            "kind": "linear",
            "arms": [list(a) for a in instance.arms],
            "theta_star": list(instance.theta_star),
            "noise_sd": instance.noise_sd,
        }
    if isinstance(instance, EmpiricalArms):
        return {"kind": "empirical", "pools": [list(p) for p in instance.pools]}
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


def instance_from_dict(payload: dict) -> Instance:
    kind = payload.get("kind")
    if kind == "mab":
        return MabInstance(tuple(payload["means"]), float(payload.get("noise_sd", 1.0)))
    if kind == "linear":
        return LinearInstance(
            tuple(tuple(row) for row in payload["arms"]),
            tuple(payload["theta_star"]),
            float(payload.get("noise_sd", 1.0)),
        )
    if kind == "empirical":
        return EmpiricalArms(tuple(tuple(p) for p in payload["pools"]))
    raise ValueError(f"unknown instance kind: {kind!r}")


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance)))


def load_instance(path: str | Path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def _record_to_dict(record: BatchRecord) -> dict:
    out = {
        "batch_index": record.batch_index,
        "budget": record.budget,
        "pulls_per_arm": {str(k): int(v) for k, v in record.pulls_per_arm.items()},
        "empirical_means": {str(k): float(v) for k, v in record.empirical_means.items()},
        "gap_estimates": {str(k): float(v) for k, v in record.gap_estimates.items()},
        "eliminated": sorted(record.eliminated),
        "survivors": sorted(record.survivors),
    }
    for extra in ("n_pulls", "rho"):
        if hasattr(record, extra):
            out[extra] = getattr(record, extra)
    if hasattr(record, "design_weights"):
        out["design_weights"] = {str(k): float(v) for k, v in record.design_weights.items()}
    if hasattr(record, "theta_hat"):
        out["theta_hat"] = [float(v) for v in record.theta_hat]
    return out


def trace_to_dict(trace: RunTrace) -> dict:
    return {
        "batches": [_record_to_dict(b) for b in trace.batches],
        "returned_arm": trace.returned_arm,
        "total_samples": trace.total_samples,
        "total_batches": trace.total_batches,
        "seed": trace.seed,
        "success": trace.success,
    }


def trace_csv_fieldnames(linear: bool = False) -> list[str]:
    fields = ["run_id", "batch", "L_r", "pulls_per_arm_total", "eliminated_count", "survivors"]
    if linear:
        fields += ["N_r", "rho_r", "theta_hat"]
    return fields


def trace_csv_rows(trace: RunTrace, run_id: str) -> list[dict]:
    """One CSV row per batch; linear batches carry the extra design columns."""
    rows = []
    for rec in trace.batches:
        row = {
            "run_id": run_id,
            "batch": rec.batch_index,
            "L_r": rec.budget,
            "pulls_per_arm_total": rec.total_pulls,
            "eliminated_count": len(rec.eliminated),
            "survivors": ";".join(str(a) for a in sorted(rec.survivors)),
        }
        if hasattr(rec, "n_pulls"):
            row["N_r"] = rec.n_pulls
            row["rho_r"] = rec.rho
            row["theta_hat"] = ";".join(f"{v:.12g}" for v in rec.theta_hat)
        rows.append(row)
    return rows
