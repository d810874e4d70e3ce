import math

import numpy as np
import pytest

from batchbai import (
    DegenerateSetError,
    InsufficientBudgetError,
    LinearInstance,
    NonUniqueBestError,
    RoundingFailureError,
    UnreachableDirectionError,
    difference_set,
    gen_basis_linear,
    max_design_norm,
    psi_star,
    round_design,
    solve_design,
    starred_difference_set,
)
from helpers import grid_minimax_value, quad_form_oracle


class TestDifferenceSets:
    def test_two_basis_vectors(self):
        diffs = difference_set(np.eye(2))
        assert {tuple(v) for v in diffs} == {(1.0, -1.0), (-1.0, 1.0)}

    def test_counting_bound(self):
        rng = np.random.default_rng(0)
        V = rng.normal(size=(5, 3))
        assert difference_set(V).shape[0] <= 5 * 4

    def test_duplicate_vectors_are_merged(self):
        V = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.5], [0.0, 0.0]])
        diffs = difference_set(V)
        # e.g. e2 - 0.5*e2 coincides with 0.5*e2 - 0
        assert diffs.shape[0] < 12

    def test_starred_variant_size(self):
        V = np.eye(4)
        starred = starred_difference_set(V, 0)
        assert starred.shape == (3, 4)
        assert {tuple(v) for v in starred} == {
            (1.0, -1.0, 0.0, 0.0),
            (1.0, 0.0, -1.0, 0.0),
            (1.0, 0.0, 0.0, -1.0),
        }

    def test_degenerate(self):
        with pytest.raises(DegenerateSetError):
            difference_set(np.eye(2)[:1])


class TestSolveDesign:
    @pytest.mark.parametrize("n", [3, 4, 6])
    def test_basis_difference_value(self, n):
        design = solve_design(np.eye(n), difference_set(np.eye(n)))
        assert design.rho == pytest.approx(2 * n, rel=0.02)

    def test_two_arm_single_direction(self):
        design = solve_design(np.eye(2), np.array([[1.0, -1.0]]))
        assert design.rho == pytest.approx(4.0, rel=1e-6)
        assert design.lam == pytest.approx([0.5, 0.5], abs=1e-6)

    def test_single_unit_arm_direction(self):
        design = solve_design(np.eye(3), np.array([[1.0, 0.0, 0.0]]))
        assert design.rho == pytest.approx(1.0, rel=1e-3)

    def test_matches_independent_grid_search(self):
        rng = np.random.default_rng(1)
        for _ in range(3):
            X = rng.normal(size=(3, 2))
            X /= np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1.0)
            A = difference_set(X)
            assert solve_design(X, A).rho == pytest.approx(
                grid_minimax_value(X, A, step=0.01), rel=0.02
            )

    def test_subset_monotonicity(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            X = rng.normal(size=(6, 3))
            X /= np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1.0)
            A = difference_set(X)
            sub = A[rng.choice(A.shape[0], size=max(1, A.shape[0] // 3), replace=False)]
            assert solve_design(X, sub).rho <= solve_design(X, A).rho * (1 + 1e-6)

    def test_unreachable_direction(self):
        X = np.eye(3)[:2]  # spans the xy plane
        with pytest.raises(UnreachableDirectionError):
            solve_design(X, np.array([[0.0, 0.0, 1.0]]))

    def test_rank_deficient_arms_fine_within_span(self):
        X = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 0.0]])
        design = solve_design(X, np.array([[1.0, -1.0, 0.0]]))
        assert math.isfinite(design.rho)

    def test_objective_descends_up_to_step_tolerance(self):
        # the 2/(k+2) schedule admits f_{k+1} <= f_k / (1 - step_k); the run
        # must end below its start and respect that per-step envelope
        rng = np.random.default_rng(3)
        for _ in range(5):
            X = rng.normal(size=(6, 3))
            X /= np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1.0)
            design = solve_design(X, difference_set(X), track_history=True)
            h = design.history
            assert h[-1] <= h[0] * (1 + 1e-12)
            for k in range(len(h) - 1):
                step = 2.0 / ((k + 1) + 2.0)
                assert h[k + 1] <= h[k] / (1.0 - step) * (1 + 1e-9)
            assert design.rho == pytest.approx(min(h))

    def test_empty_test_set_rejected(self):
        with pytest.raises(ValueError):
            solve_design(np.eye(2), np.empty((0, 2)))


class TestRounding:
    def test_exact_proportionality(self):
        alloc = round_design(np.full(4, 0.25), 8, np.eye(4), difference_set(np.eye(4)))
        assert list(alloc.counts) == [2, 2, 2, 2]
        assert alloc.total == 8

    def test_zero_weight_arm_can_get_zero(self):
        X = np.eye(3)
        lam = np.array([0.5, 0.5, 0.0])
        alloc = round_design(lam, 10, X, np.array([[1.0, -1.0, 0.0]]))
        assert alloc.counts[2] == 0

    def test_factor_two_guarantee_random_triples(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            d = int(rng.integers(2, 9))
            n = int(rng.integers(d + 1, 2 * d + 3))
            X = rng.normal(size=(n, d))
            X /= np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1.0)
            lam = rng.dirichlet(np.ones(n))
            Y = difference_set(X)
            N = 10 * d
            alloc = round_design(lam, N, X, Y)
            # verified with an independent pseudo-inverse implementation
            lhs = quad_form_oracle(X.T @ (alloc.counts[:, None] * X), Y)
            rhs = 2.0 / N * quad_form_oracle(X.T @ (lam[:, None] * X), Y)
            assert lhs <= rhs * (1 + 1e-6)

    def test_insufficient_budget(self):
        with pytest.raises(InsufficientBudgetError):
            round_design(np.full(3, 1 / 3), 3, np.eye(3), difference_set(np.eye(3)))

    def test_repair_fixes_skewed_apportionment(self):
        # floor+remainder puts all 3 pulls on arm 0, which cannot measure
        # e1 - e2; the repair must move one pull across
        X = np.eye(2)
        lam = np.array([0.99, 0.01])
        Y = np.array([[1.0, -1.0]])
        alloc = round_design(lam, 3, X, Y)
        assert alloc.counts[1] >= 1
        lhs = max_design_norm(X, alloc.counts, Y)
        rhs = 2.0 / 3 * max_design_norm(X, lam, Y)
        assert lhs <= rhs

    def test_rounding_failure_surfaces(self):
        X = np.eye(2)
        lam = np.array([0.99, 0.01])
        Y = np.array([[1.0, -1.0]])
        with pytest.raises(RoundingFailureError):
            round_design(lam, 3, X, Y, repair_budget=0)


class TestPsiStar:
    def test_two_basis_arms(self):
        inst = LinearInstance(((1.0, 0.0), (0.0, 1.0)), (1.0, 0.0))
        assert psi_star(inst) == pytest.approx(4.0, rel=1e-6)

    def test_scaling_is_inverse_quadratic(self):
        # gaps scale linearly with the parameter, the functional divides by
        # the squared gap, and the norms are unchanged
        inst1 = LinearInstance(((1.0, 0.0), (0.0, 1.0)), (0.5, 0.0))
        inst2 = LinearInstance(((1.0, 0.0), (0.0, 1.0)), (1.5, 0.0))
        assert psi_star(inst1) == pytest.approx(9 * psi_star(inst2), rel=1e-6)

    def test_permutation_invariance(self):
        base = gen_basis_linear(4, 1, 1.0)
        perm = [2, 0, 3, 1]
        arms = tuple(tuple(np.eye(4)[perm[i]]) for i in range(4))
        theta = np.zeros(4)
        for i, m in enumerate(base.means):
            theta[i] = m
        shuffled = LinearInstance(
            tuple(base.arms[p] for p in perm),
            base.theta_star,
            1.0,
        )
        assert psi_star(shuffled) == pytest.approx(psi_star(base), rel=1e-9)

    def test_lower_bound_via_starred_set(self):
        rng = np.random.default_rng(5)
        from helpers import random_linear

        for _ in range(5):
            inst = random_linear(rng, 3)
            if inst is None:
                continue
            X = inst.arms_array
            prof_gaps = [
                inst.means[inst.best_arm] - m
                for i, m in enumerate(inst.means)
                if i != inst.best_arm
            ]
            rho_star = solve_design(X, starred_difference_set(X, inst.best_arm)).rho
            assert psi_star(inst) >= rho_star / max(prof_gaps) ** 2 * (1 - 1e-6)

    def test_matches_grid_search_on_small_basis(self):
        inst = gen_basis_linear(3, 1, 1.0)
        X = inst.arms_array
        means = np.asarray(inst.means)
        best = inst.best_arm
        directions = np.stack(
            [(X[best] - X[i]) / (means[best] - means[i]) for i in range(3) if i != best]
        )
        oracle = grid_minimax_value(X, directions, step=0.01)
        assert psi_star(inst) == pytest.approx(oracle, rel=0.02)

    def test_tied_best_rejected(self):
        with pytest.raises(NonUniqueBestError):
            LinearInstance(((1.0, 0.0), (0.0, 1.0), (0.7, 0.3)), (0.5, 0.5))
