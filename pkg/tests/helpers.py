"""Shared fixtures-in-spirit: random instance generators and brute-force oracles."""
from __future__ import annotations

import numpy as np

from batchbai import LinearInstance, MabInstance

# Small enough that mean + ZERO_NOISE * z == mean exactly in float64, while
# still satisfying the noise_sd > 0 invariant: an exact zero-noise limit.
ZERO_NOISE = 1e-300


def random_gaps(rng: np.random.Generator, max_n: int = 50, lo: float = 0.05,
                hi: float = 1.0) -> list[float]:
    n = int(rng.integers(2, max_n + 1))
    return sorted(float(g) for g in rng.uniform(lo, hi, size=n - 1))


def random_mab(rng: np.random.Generator, max_n: int = 20, noise_sd: float = 1.0) -> MabInstance:
    gaps = random_gaps(rng, max_n=max_n, lo=0.1, hi=1.0)
    return MabInstance(tuple([1.0] + [1.0 - g for g in gaps]), noise_sd)


def random_linear(rng: np.random.Generator, d: int, gap_lo: float = 0.15,
                  gap_hi: float = 0.7, noise_sd: float = 1.0) -> LinearInstance | None:
    """Unit-ball arms with the smallest gap rescaled into [gap_lo, gap_hi]."""
    n = int(rng.integers(d + 1, 2 * d + 3))
    X = rng.normal(size=(n, d))
    X /= np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1.0)
    theta = rng.normal(size=d)
    means = X @ theta
    gaps = means.max() - means
    positive = gaps[gaps > 1e-9]
    if positive.size != n - 1:
        return None  # tied best arm; caller redraws
    theta *= float(rng.uniform(gap_lo, gap_hi)) / float(positive.min())
    try:
        return LinearInstance(tuple(map(tuple, X)), tuple(theta), noise_sd)
    except ValueError:
        return None


def grid_minimax_value(X: np.ndarray, A: np.ndarray, step: float = 0.01) -> float:
    """Brute-force simplex grid search for min over weights of the worst
    normalized variance; independent of the package solver (3 arms only)."""
    X = np.asarray(X, dtype=float)
    A = np.asarray(A, dtype=float)
    if X.shape[0] != 3:
        raise ValueError("grid oracle is written for exactly three arms")
    best = np.inf
    ticks = np.arange(0.0, 1.0 + step / 2, step)
    norms_sq = np.sum(A**2, axis=1)
    for l1 in ticks:
        for l2 in ticks:
            l3 = 1.0 - l1 - l2
            if l3 < -1e-12:
                continue
            lam = np.array([l1, l2, max(l3, 0.0)])
            info = X.T @ (lam[:, None] * X)
            evals, evecs = np.linalg.eigh(info)
            if evals[-1] <= 0:
                continue
            keep = evals > evals[-1] * 1e-12
            proj = A @ evecs
            if np.any(np.sum(proj[:, ~keep] ** 2, axis=1) > 1e-10 * np.maximum(norms_sq, 1e-300)):
                continue
            value = float(np.max(np.sum(proj[:, keep] ** 2 / evals[keep], axis=1)))
            best = min(best, value)
    return best


def quad_form_oracle(info: np.ndarray, Y: np.ndarray) -> float:
    """max_y y' pinv(info) y via numpy's pinv, with an explicit range check."""
    pinv = np.linalg.pinv(info)
    vals = np.einsum("ij,jk,ik->i", Y, pinv, Y)
    residual = Y - Y @ pinv @ info
    off_range = np.linalg.norm(residual, axis=1) > 1e-6 * np.maximum(
        np.linalg.norm(Y, axis=1), 1e-300
    )
    vals = np.where(off_range, np.inf, vals)
    return float(np.max(vals))
