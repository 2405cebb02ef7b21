import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from brakesim.stats import mann_whitney_u


def brute_force_u_and_p(sample_a, sample_b):
    """Oracle: enumerate every assignment of the combined values to group A.

    U counts pairs with a > b (ties at half weight); the two-sided p-value is
    the fraction of assignments at least as far from the mean n_a*n_b/2.
    """
    def u_of(a, b):
        u = 0.0
        for x in a:
            for y in b:
                if x > y:
                    u += 1.0
                elif x == y:
                    u += 0.5
        return u

    combined = list(sample_a) + list(sample_b)
    n_a = len(sample_a)
    u_obs = u_of(sample_a, sample_b)
    center = n_a * (len(combined) - n_a) / 2.0
    total = 0
    extreme = 0
    for idx in itertools.combinations(range(len(combined)), n_a):
        chosen = set(idx)
        a = [combined[i] for i in idx]
        b = [combined[i] for i in range(len(combined)) if i not in chosen]
        total += 1
        if abs(u_of(a, b) - center) >= abs(u_obs - center) - 1e-12:
            extreme += 1
    return u_obs, extreme / total


class TestKnownValues:
    def test_fully_separated_three_vs_three(self):
        # All 20 assignments enumerable by hand: only U=0 and U=9 are at
        # least as extreme, so p = 2/20.
        u, p = mann_whitney_u([1, 2, 3], [4, 5, 6])
        assert u == 0.0
        assert p == pytest.approx(0.1, abs=1e-12)

    def test_identical_samples(self):
        u, p = mann_whitney_u([2.0, 2.0, 2.0], [2.0, 2.0, 2.0])
        assert u == pytest.approx(4.5)
        assert p == pytest.approx(1.0)

    def test_nine_vs_ten_separated(self):
        # Group sizes of the hardware study; full separation gives
        # p = 2 / C(19, 9) which is far below 0.001.
        a = list(range(1, 10))
        b = list(range(11, 21))
        u, p = mann_whitney_u(a, b)
        assert u == 0.0
        assert p == pytest.approx(2 / math.comb(19, 9), rel=1e-9)
        assert p < 0.001

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            mann_whitney_u([], [1.0])
        with pytest.raises(ValueError):
            mann_whitney_u([1.0], [])


class TestExactMatchesBruteForce:
    @pytest.mark.parametrize("n_a,n_b", [(n_a, n_b)
                                         for n_a in range(1, 12)
                                         for n_b in range(1, 12)
                                         if n_a + n_b <= 12])
    def test_all_sizes_up_to_combined_twelve(self, n_a, n_b):
        # Deterministic pseudo-data with repeats so ties are exercised.
        values = [((7 * i) % 5) + 0.5 * ((3 * i) % 2) for i in range(n_a + n_b)]
        a, b = values[:n_a], values[n_a:]
        u_expect, p_expect = brute_force_u_and_p(a, b)
        u, p = mann_whitney_u(a, b)
        assert u == pytest.approx(u_expect, abs=1e-12)
        assert p == pytest.approx(p_expect, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=5),
       st.lists(st.integers(0, 6), min_size=1, max_size=5))
def test_exact_against_oracle_random(a, b):
    u_expect, p_expect = brute_force_u_and_p(a, b)
    u, p = mann_whitney_u(a, b)
    assert u == pytest.approx(u_expect, abs=1e-12)
    assert p == pytest.approx(p_expect, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=15),
       st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=15))
def test_symmetry_and_range(a, b):
    u_ab, p_ab = mann_whitney_u(a, b)
    u_ba, p_ba = mann_whitney_u(b, a)
    assert 0.0 <= p_ab <= 1.0
    assert p_ab == pytest.approx(p_ba, abs=1e-9)
    assert u_ab + u_ba == pytest.approx(len(a) * len(b), abs=1e-9)


def test_large_sample_normal_approximation():
    a = [float(i) for i in range(15)]
    b = [float(i) + 30.0 for i in range(15)]
    u, p = mann_whitney_u(a, b)
    assert u == 0.0
    assert p < 1e-4
    _, p_same = mann_whitney_u(a, a)
    assert p_same == pytest.approx(1.0, abs=1e-9)
