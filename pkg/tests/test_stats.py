import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairprobe.errors import EmptySample, TooFewSamples
from fairprobe.stats import (
    compare,
    joint_significance,
    mann_whitney_u,
    vargha_delaney_a12,
)


def exact_p_oracle(a, b):
    """Independent enumeration over all splits of the pooled sample."""
    pooled = list(a) + list(b)
    n1 = len(a)
    # fractional ranks with midrank ties
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    observed = sum(ranks[: len(a)])
    mean = sum(ranks) * n1 / len(pooled)
    dev = abs(observed - mean)
    extreme = total = 0
    for combo in itertools.combinations(range(len(pooled)), n1):
        total += 1
        if abs(sum(ranks[i] for i in combo) - mean) >= dev - 1e-9:
            extreme += 1
    return extreme / total


class TestMannWhitney:
    def test_identical_samples_not_significant(self):
        assert mann_whitney_u([3, 3, 3, 3], [3, 3, 3, 3]) >= 0.05

    def test_disjoint_ranges_exact_closed_form(self):
        a = list(range(1, 11))
        b = list(range(11, 21))
        p = mann_whitney_u(a, b)
        # only the two extreme splits are at least as deviant
        assert p == pytest.approx(2 / math.comb(20, 10))
        assert p < 0.001

    def test_two_sided_symmetry_exact(self):
        a = [1.0, 4.0, 2.5, 7.0]
        b = [3.0, 3.0, 8.0, 0.5, 6.0]
        assert mann_whitney_u(a, b) == pytest.approx(mann_whitney_u(b, a))

    def test_matches_enumeration_oracle_with_ties(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            a = rng.integers(0, 4, 5).tolist()
            b = rng.integers(0, 4, 5).tolist()
            assert mann_whitney_u(a, b) == pytest.approx(exact_p_oracle(a, b))

    def test_normal_approximation_branch(self):
        rng = np.random.default_rng(1)
        a = rng.normal(0, 1, 30).tolist()
        b = rng.normal(1.2, 1, 30).tolist()
        p = mann_whitney_u(a, b)
        assert 0.0 <= p <= 1.0 and p < 0.05
        assert p == pytest.approx(mann_whitney_u(b, a))

    def test_normal_branch_identical_values(self):
        assert mann_whitney_u([5.0] * 20, [5.0] * 20) == 1.0

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            mann_whitney_u([1.0], [2.0, 3.0])


class TestA12:
    def test_equal_multisets_half(self):
        x = [1.0, 2.0, 5.0]
        assert vargha_delaney_a12(x, list(x)) == 0.5

    def test_total_dominance_one(self):
        assert vargha_delaney_a12([5, 6, 7], [1, 2, 3]) == 1.0

    def test_counted_example(self):
        # exhaustive comparison: one win (3 > 2), two ties
        a, b = [1, 2, 3], [2, 3, 4]
        wins = sum(x > y for x in a for y in b)
        ties = sum(x == y for x in a for y in b)
        assert (wins, ties) == (1, 2)
        assert vargha_delaney_a12(a, b) == pytest.approx((1 + 0.5 * 2) / 9)

    @given(
        st.lists(st.integers(0, 8), min_size=1, max_size=12),
        st.lists(st.integers(0, 8), min_size=1, max_size=12),
    )
    @settings(max_examples=100, deadline=None)
    def test_complement_identity(self, a, b):
        assert vargha_delaney_a12(a, b) + vargha_delaney_a12(b, a) == pytest.approx(1.0)

    def test_empty_sample(self):
        with pytest.raises(EmptySample):
            vargha_delaney_a12([], [1.0])


class TestJointRule:
    def test_truth_table_boundaries(self):
        assert joint_significance(0.01, 0.70) == (True, "better")
        assert joint_significance(0.01, 0.50) == (False, "none")
        assert joint_significance(0.20, 0.90) == (False, "none")

    def test_thresholds_inclusive(self):
        assert joint_significance(0.049, 0.56) == (True, "better")
        assert joint_significance(0.049, 0.44) == (True, "worse")
        assert joint_significance(0.05, 0.60) == (False, "none")

    def test_compare_separated_samples(self):
        result = compare([5, 6, 7, 8, 9], [0, 1, 2, 0, 1])
        assert result.significant and result.direction == "better"
        assert result.a12 == 1.0

    def test_compare_identical_samples(self):
        result = compare([2, 2, 3, 3], [2, 2, 3, 3])
        assert not result.significant and result.direction == "none"

    def test_direction_antisymmetric(self):
        a = [5, 6, 7, 8, 9]
        b = [0, 1, 2, 0, 1]
        assert compare(a, b).direction == "better"
        assert compare(b, a).direction == "worse"
