"""Deterministic batch-complexity calculators for gap-based instances.

These run the idealized adaptive-grid recursion on true gaps: budgets
quadruple each step and additionally absorb, per remaining arm, the summed
inverse-squared gaps of every arm already past the elimination threshold
C / sqrt(Lbar) with C = 15*sqrt(2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import GapProfile, NonUniqueBestError, gap_profile

__all__ = [
    "ELIM_CONSTANT",
    "POTENTIAL_WEIGHT",
    "GROWTH_BASE",
    "ComplexityReport",
    "h_index",
    "batch_complexity_mab",
    "potential_sequence",
]

ELIM_CONSTANT = 15.0 * math.sqrt(2.0)  # threshold constant C
POTENTIAL_WEIGHT = 450.0  # C**2, the per-arm weight in the potential
GROWTH_BASE = 451.0 / 450.0  # guaranteed potential growth when U stalls

_MAX_STEPS = 100_000


@dataclass
class ComplexityReport:
    """Output of a batch-complexity recursion.

    ``bound_value`` is the proven upper bound on ``r_instance``:
    alpha + log_{451/450}(450 H / n) for the multi-armed recursion, and the
    design-based analogue for the linear one.
    """

    h_instance: float
    r_instance: int
    alpha: int
    bound_value: float
    lbar_sequence: list[float]
    u_sequence: list[frozenset[int]]

    def to_dict(self, include_trace: bool = False) -> dict:
        out = {
            "h_instance": self.h_instance,
            "r_instance": self.r_instance,
            "alpha": self.alpha,
            "bound_value": self.bound_value,
        }
        if include_trace:
            out["lbar_sequence"] = list(self.lbar_sequence)
            out["u_sequence"] = [sorted(u) for u in self.u_sequence]
        return out


def _as_profile(profile: GapProfile | Sequence[float]) -> GapProfile:
    if isinstance(profile, GapProfile):
        return profile
    deltas = [float(d) for d in profile]
    if any(d <= 0 for d in deltas):
        raise NonUniqueBestError("all gaps must be strictly positive")
    # synthesize means so raw gap lists reuse the instance path
    return gap_profile([0.0] + [-d for d in deltas])


def h_index(profile: GapProfile | Sequence[float]) -> float:
    """Sum of inverse squared gaps (the instance sample-complexity scale)."""
    prof = _as_profile(profile)
    return float(sum(1.0 / d**2 for d in prof.deltas))


def _recursion(prof: GapProfile) -> tuple[list[float], list[frozenset[int]]]:
    """Run the adaptive-budget recursion; returns (Lbar_1..Lbar_R, U_1..U_R)."""
    arms = sorted(prof.arm_gaps)
    gaps = {a: prof.arm_gaps[a] for a in arms}
    all_subopt = frozenset(arms)
    lbar = 1.0
    u_prev: frozenset[int] = frozenset()
    lbars: list[float] = []
    us: list[frozenset[int]] = []
    n = prof.n
    for _ in range(_MAX_STEPS):
        bonus = sum(1.0 / gaps[a] ** 2 for a in u_prev) / (n - len(u_prev))
        lbar = 4.0 * lbar + bonus
        u = frozenset(a for a in arms if gaps[a] >= ELIM_CONSTANT / math.sqrt(lbar))
        lbars.append(lbar)
        us.append(u)
        if u == all_subopt:
            return lbars, us
        u_prev = u
    raise RuntimeError("recursion failed to terminate (should be impossible)")


def batch_complexity_mab(profile: GapProfile | Sequence[float]) -> ComplexityReport:
    """Steps of the adaptive-budget recursion until every gap clears the threshold."""
    prof = _as_profile(profile)
    lbars, us = _recursion(prof)
    r_instance = len(lbars)
    # count change points U_r != U_{r+1} over r = 0..R-1, with U_0 empty
    chain = [frozenset()] + us
    alpha = sum(1 for a, b in zip(chain, chain[1:]) if a != b)
    h = h_index(prof)
    bound = alpha + math.log(POTENTIAL_WEIGHT * h / prof.n) / math.log(GROWTH_BASE)
    return ComplexityReport(
        h_instance=h,
        r_instance=r_instance,
        alpha=alpha,
        bound_value=bound,
        lbar_sequence=lbars,
        u_sequence=us,
    )


def potential_sequence(profile: GapProfile | Sequence[float]) -> list[float]:
    """Potential H_r = Lbar_r * (n - |U_r|) + sum_{j in U_r} 450 / Delta_j^2.

    Returned for r = 0..R along the recursion; H_0 = n. The sequence is
    nondecreasing and grows by at least a factor 451/450 on every step where
    U does not change.
    """
    prof = _as_profile(profile)
    lbars, us = _recursion(prof)
    gaps = prof.arm_gaps
    n = prof.n
    out = [float(n)]  # Lbar_0 = 1, U_0 empty
    for lbar, u in zip(lbars, us):
        out.append(lbar * (n - len(u)) + sum(POTENTIAL_WEIGHT / gaps[a] ** 2 for a in u))
    return out
