"""Transductive G-optimal design: difference sets, a Frank-Wolfe solver for
the minimax design problem, integer rounding with a factor-2 guarantee, and
the gap-weighted instance functional for linear best-arm identification.

All quadratic forms are taken on the span of the measurement arms; test
vectors outside that span raise instead of silently returning infinities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import LinearInstance, NonUniqueBestError

__all__ = [
    "DegenerateSetError",
    "UnreachableDirectionError",
    "InsufficientBudgetError",
    "RoundingFailureError",
    "Design",
    "Allocation",
    "difference_set",
    "starred_difference_set",
    "solve_design",
    "max_design_norm",
    "round_design",
    "psi_star",
]


class DegenerateSetError(ValueError):
    """Difference set requested for fewer than two vectors."""


class UnreachableDirectionError(ValueError):
    """A test vector lies outside the span of the measurement arms."""


class InsufficientBudgetError(ValueError):
    """Rounding budget N does not exceed the ambient dimension."""


class RoundingFailureError(RuntimeError):
    """The factor-2 rounding guarantee could not be met within the repair budget."""


@dataclass
class Design:
    """Simplex weights with the achieved worst-case normalized variance.

    ``rho`` is the objective value at ``lam`` (always an upper bound on the
    true optimum); ``gap_certificate`` is the stationarity residual at
    termination: the relative objective decrease over the trailing
    iteration window.
    """

    lam: np.ndarray
    rho: float
    iterations: int
    gap_certificate: float
    history: list[float] | None = None


@dataclass
class Allocation:
    """Integer pull counts per measurement arm, summing to ``total``."""

    counts: np.ndarray
    total: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=int)
        if int(self.counts.sum()) != int(self.total):
            raise ValueError("counts must sum to the total budget")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")

    def as_dict(self) -> dict[int, int]:
        return {int(i): int(c) for i, c in enumerate(self.counts) if c > 0}


def difference_set(vectors: np.ndarray) -> np.ndarray:
    """All ordered pairwise differences x - x' of distinct rows, deduplicated."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.shape[0] < 2:
        raise DegenerateSetError("need at least two vectors to form differences")
    diffs = (V[:, None, :] - V[None, :, :]).reshape(-1, V.shape[1])
    keep = np.any(diffs != 0.0, axis=1)
    return np.unique(diffs[keep], axis=0)


def starred_difference_set(vectors: np.ndarray, best_index: int) -> np.ndarray:
    """Differences from the distinguished row: {x_best - x for the other rows}."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.shape[0] < 2:
        raise DegenerateSetError("need at least two vectors to form differences")
    mask = np.ones(V.shape[0], dtype=bool)
    mask[best_index] = False
    return V[best_index] - V[mask]


def _span_basis(X: np.ndarray) -> np.ndarray:
    """Orthonormal basis (d x r) of the row span of X."""
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        raise ValueError("measurement arms are all zero")
    rank = int(np.sum(s > s[0] * 1e-12))
    return vt[:rank].T


def _project_tests(A: np.ndarray, basis: np.ndarray) -> np.ndarray:
    As = A @ basis
    residual = A - As @ basis.T
    scale = np.maximum(1.0, np.linalg.norm(A, axis=1))
    bad = np.linalg.norm(residual, axis=1) > 1e-8 * scale
    if np.any(bad):
        raise UnreachableDirectionError(
            f"{int(bad.sum())} test vector(s) lie outside the span of the arms"
        )
    return As


_STALL_WINDOW = 50  # iterations over which progress is measured


def _solve_design_impl(X: np.ndarray, A: np.ndarray, tol: float, max_iters: int,
                       track_history: bool) -> Design:
    basis = _span_basis(X)
    Xs = X @ basis
    As = _project_tests(A, basis)
    n = Xs.shape[0]
    lam = np.full(n, 1.0 / n)
    info = Xs.T @ (lam[:, None] * Xs)

    def evaluate(mat):
        sol = np.linalg.solve(mat, As.T)  # r x m
        vals = np.einsum("ij,ji->i", As, sol)
        j = int(np.argmax(vals))
        scores = (Xs @ sol[:, j]) ** 2
        return float(vals[j]), int(np.argmax(scores))

    values: list[float] = []
    envelope: list[float] = []
    best_f = math.inf
    best_lam = lam
    residual = math.inf
    iterations = 0
    for k in range(1, max_iters + 1):
        iterations = k
        f, i = evaluate(info)
        values.append(f)
        if f < best_f:
            best_f, best_lam = f, lam.copy()
        envelope.append(best_f)
        # progress of the returned (best-so-far) value; the raw iterate
        # zig-zags between active test directions and would stall the check
        if k > _STALL_WINDOW:
            residual = (envelope[-_STALL_WINDOW - 1] - best_f) / best_f
            if residual < tol:
                break
        step = 2.0 / (k + 2.0)
        lam = (1.0 - step) * lam
        lam[i] += step
        info = (1.0 - step) * info + step * np.outer(Xs[i], Xs[i])
    return Design(
        best_lam.copy(),
        best_f,
        iterations,
        residual if residual != math.inf else math.inf,
        values if track_history else None,
    )


@lru_cache(maxsize=4096)
def _solve_design_cached(x_bytes, x_shape, a_bytes, a_shape, tol, max_iters):
    X = np.frombuffer(x_bytes).reshape(x_shape)
    A = np.frombuffer(a_bytes).reshape(a_shape)
    return _solve_design_impl(X, A, tol, max_iters, track_history=False)


def solve_design(X: np.ndarray, A: np.ndarray, tol: float = 1e-4,
                 max_iters: int = 10_000, track_history: bool = False) -> Design:
    """Minimize max_{y in A} y' M(lam)^{-1} y over simplex weights on the rows of X.

    Frank-Wolfe from the uniform design with step 2/(k+2): each iteration
    finds the worst test direction and moves weight toward the arm most
    aligned with it. Terminates when the relative objective decrease over
    the trailing iteration window drops below ``tol``, or at ``max_iters``;
    the best iterate seen is returned.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        raise ValueError("test set must be nonempty")
    if A.shape[1] != X.shape[1]:
        raise ValueError("test vectors and arms must share a dimension")
    if track_history:
        return _solve_design_impl(X, A, tol, max_iters, track_history=True)
    cached = _solve_design_cached(
        X.tobytes(), X.shape, A.tobytes(), A.shape, float(tol), int(max_iters)
    )
    return Design(cached.lam.copy(), cached.rho, cached.iterations, cached.gap_certificate)


def max_design_norm(X: np.ndarray, weights: np.ndarray, Y: np.ndarray) -> float:
    """max_{y in Y} y' (sum_x w_x x x')^+ y, infinite off the allocation's span.

    ``weights`` may be simplex weights or integer counts; the information
    matrix is used unnormalized either way.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    w = np.asarray(weights, dtype=float)
    info = X.T @ (w[:, None] * X)
    evals, evecs = np.linalg.eigh(info)
    top = float(evals[-1])
    if top <= 0:
        return math.inf
    keep = evals > top * 1e-12
    proj = Y @ evecs
    null_energy = np.sum(proj[:, ~keep] ** 2, axis=1)
    norms_sq = np.sum(Y**2, axis=1)
    vals = np.sum(proj[:, keep] ** 2 / evals[keep], axis=1)
    vals[null_energy > 1e-10 * np.maximum(norms_sq, 1e-300)] = math.inf
    return float(np.max(vals))


def round_design(lam: np.ndarray, N: int, X: np.ndarray, Y: np.ndarray,
                 repair_budget: int | None = None) -> Allocation:
    """Integer allocation of N pulls approximating the continuous design.

    Largest-remainder apportionment of N * lam, then a post-hoc check of the
    factor-2 guarantee max_y ||y||^2 over the counts matrix <= (2/N) * the
    continuous value; on violation single pulls are moved greedily to
    whichever arm shrinks the left side most. Raises RoundingFailureError
    if the guarantee still fails after the repair budget (default N moves).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    lam = np.asarray(lam, dtype=float)
    N = int(N)
    d = X.shape[1]
    if N <= d:
        raise InsufficientBudgetError(f"budget N={N} must exceed the dimension d={d}")
    scaled = N * lam
    counts = np.floor(scaled).astype(int)
    shortfall = N - int(counts.sum())
    if shortfall > 0:
        order = np.argsort(-(scaled - counts), kind="stable")
        counts[order[:shortfall]] += 1
    target = 2.0 / N * max_design_norm(X, lam, Y)
    lhs = max_design_norm(X, counts, Y)
    if lhs <= target * (1.0 + 1e-9):
        return Allocation(counts, N)
    budget = N if repair_budget is None else int(repair_budget)
    n = X.shape[0]
    for _ in range(budget):
        best_lhs, best_move = lhs, None
        for src in range(n):
            if counts[src] == 0:
                continue
            counts[src] -= 1
            for dst in range(n):
                if dst == src:
                    continue
                counts[dst] += 1
                trial = max_design_norm(X, counts, Y)
                if trial < best_lhs:
                    best_lhs, best_move = trial, (src, dst)
                counts[dst] -= 1
            counts[src] += 1
        if best_move is None:
            break
        src, dst = best_move
        counts[src] -= 1
        counts[dst] += 1
        lhs = best_lhs
        if lhs <= target * (1.0 + 1e-9):
            return Allocation(counts, N)
    raise RoundingFailureError(
        f"factor-2 rounding guarantee unmet: achieved {lhs:.6g} > target {target:.6g}"
    )


def psi_star(instance: LinearInstance, tol: float = 1e-4, max_iters: int = 10_000) -> float:
    """Gap-weighted minimax design value of the instance (evaluator-side only).

    Minimizes over simplex weights the worst ratio
    ||x_best - x||^2_{M(lam)^{-1}} / gap(x)^2 across suboptimal arms, which
    equals a plain design solve on the gap-rescaled difference vectors.
    Requires the hidden parameter vector, so it is never available to the
    learning algorithms.
    """
    X = instance.arms_array
    means = np.asarray(instance.means)
    best = instance.best_arm
    gaps = means[best] - means
    others = [i for i in range(instance.n) if i != best]
    if any(gaps[i] <= 0 for i in others):
        raise NonUniqueBestError("all suboptimal gaps must be strictly positive")
    directions = np.stack([(X[best] - X[i]) / gaps[i] for i in others])
    return float(solve_design(X, directions, tol=tol, max_iters=max_iters).rho)
