import math

import numpy as np
import pytest

from batchbai import (
    NonUniqueBestError,
    batch_complexity_mab,
    gap_profile,
    gen_example,
    h_index,
    potential_sequence,
)
from batchbai.complexity import GROWTH_BASE, POTENTIAL_WEIGHT
from helpers import random_gaps


class TestHIndex:
    def test_single_gap(self):
        assert h_index([0.5]) == 4.0

    def test_two_gaps(self):
        assert h_index([0.5, 1.0]) == 5.0

    def test_family_one_at_100(self):
        # 98 gaps of 1/2 plus one gap of 1/10: 98*4 + 100
        prof = gap_profile(gen_example(1, 100))
        assert h_index(prof) == pytest.approx(492.0)

    def test_zero_gap_rejected(self):
        with pytest.raises(NonUniqueBestError):
            h_index([0.0, 0.5])


class TestRecursion:
    def test_two_arm_unit_gap(self):
        report = batch_complexity_mab([1.0])
        assert report.lbar_sequence == [4.0, 16.0, 64.0, 256.0, 1024.0]
        assert report.r_instance == 5
        assert report.alpha == 1
        assert report.u_sequence[-1] == frozenset({1})

    def test_family_one_plateaus(self):
        # constant-batch family: the recursion value stops moving in n
        big = batch_complexity_mab(gap_profile(gen_example(1, 65536))).r_instance
        bigger = batch_complexity_mab(gap_profile(gen_example(1, 262144))).r_instance
        assert big == bigger

    def test_family_three_keeps_growing(self):
        # geometric-tier family: grows with log n, unlike family one
        r1_small = batch_complexity_mab(gap_profile(gen_example(1, 4096))).r_instance
        r1_big = batch_complexity_mab(gap_profile(gen_example(1, 262144))).r_instance
        r3_small = batch_complexity_mab(gap_profile(gen_example(3, 4096))).r_instance
        r3_big = batch_complexity_mab(gap_profile(gen_example(3, 262144))).r_instance
        assert r3_big - r3_small >= 2
        assert r1_big - r1_small == 0
        assert r3_big - r1_big >= 2

    def test_hand_values_for_family_one(self):
        # frozen from hand-executing the recursion (bulk crosses at Lbar=4096,
        # then the bonus term adds (n-2)*4/2 per step)
        assert batch_complexity_mab(gap_profile(gen_example(1, 64))).r_instance == 8
        assert batch_complexity_mab(gap_profile(gen_example(1, 4096))).r_instance == 11


@pytest.fixture(scope="module")
def reports():
    rng = np.random.default_rng(2024)
    return [batch_complexity_mab(random_gaps(rng)) for _ in range(200)]


class TestRecursionInvariants:

    def test_budget_ratio_at_least_four(self, reports):
        for rep in reports:
            seq = [1.0] + rep.lbar_sequence
            assert all(b >= 4.0 * a for a, b in zip(seq, seq[1:]))

    def test_threshold_sets_monotone(self, reports):
        for rep in reports:
            for a, b in zip(rep.u_sequence, rep.u_sequence[1:]):
                assert a <= b

    def test_alpha_bounds(self, reports):
        for rep in reports:
            n = len(rep.u_sequence[-1]) + 1
            assert rep.alpha <= rep.r_instance
            assert rep.alpha <= n - 1

    def test_bound_value_holds(self, reports):
        for rep in reports:
            assert rep.r_instance <= rep.bound_value

    def test_grid_bound(self, reports):
        rng = np.random.default_rng(77)
        for _ in range(100):
            gaps = random_gaps(rng)
            rep = batch_complexity_mab(gaps)
            fallback = math.ceil(math.log(POTENTIAL_WEIGHT / gaps[0] ** 2, 4)) + 1
            assert rep.r_instance <= fallback


class TestPotential:
    def test_starts_at_n(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            gaps = random_gaps(rng)
            seq = potential_sequence(gaps)
            assert seq[0] == len(gaps) + 1

    def test_monotone_and_growth_when_stalled(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            gaps = random_gaps(rng)
            rep = batch_complexity_mab(gaps)
            seq = potential_sequence(gaps)
            assert len(seq) == rep.r_instance + 1
            chain = [frozenset()] + rep.u_sequence
            for r in range(len(seq) - 1):
                assert seq[r + 1] >= seq[r] * (1 - 1e-12)
                if chain[r] == chain[r + 1]:
                    assert seq[r + 1] >= GROWTH_BASE * seq[r] * (1 - 1e-12)
