"""Mann-Whitney U rank test.

Small-sample comparisons (combined n <= 20) get an exact two-sided p-value
from the permutation distribution of U, computed by dynamic programming over
tie groups so tied observations are handled exactly. Larger samples fall back
to the normal approximation with tie correction and continuity correction.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from typing import Sequence

EXACT_MAX_COMBINED_N = 20


def _midranks(values: Sequence[float]) -> list[float]:
    """Ascending ranks starting at 1, ties sharing the mean rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _u_statistic(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    n_a = len(sample_a)
    ranks = _midranks(list(sample_a) + list(sample_b))
    rank_sum_a = sum(ranks[:n_a])
    return rank_sum_a - n_a * (n_a + 1) / 2.0


def _exact_two_sided_p(values: Sequence[float], n_a: int, u_observed: float) -> float:
    """Exact p via the doubled-U distribution over all group assignments.

    Groups the combined multiset by value and counts, for every way of
    assigning ``n_a`` observations to sample A, the doubled U statistic
    2U = sum_i [2 k_i B_{<i} + k_i (m_i - k_i)] where k_i of the m_i copies
    of value i go to A and B_{<i} counts B-assigned copies of smaller values.
    """
    counts = [m for _, m in sorted(Counter(values).items())]
    n_total = len(values)
    n_b = n_total - n_a

    # state: (a_used, b_used, doubled_u) -> number of assignments
    states: dict[tuple[int, int, int], int] = {(0, 0, 0): 1}
    for m in counts:
        next_states: dict[tuple[int, int, int], int] = defaultdict(int)
        for (a_used, b_used, du), ways in states.items():
            for k in range(0, min(m, n_a - a_used) + 1):
                if b_used + (m - k) > n_b:
                    continue
                du_new = du + 2 * k * b_used + k * (m - k)
                next_states[(a_used + k, b_used + m - k, du_new)] += ways * math.comb(m, k)
        states = dict(next_states)

    total = 0
    extreme = 0
    center = n_a * n_b  # doubled mean of U
    observed_dev = abs(round(2 * u_observed) - center)
    for (a_used, _b_used, du), ways in states.items():
        if a_used != n_a:
            continue
        total += ways
        if abs(du - center) >= observed_dev:
            extreme += ways
    assert total == math.comb(n_total, n_a)
    return extreme / total


def _normal_two_sided_p(values: Sequence[float], n_a: int, u_observed: float) -> float:
    n_total = len(values)
    n_b = n_total - n_a
    tie_sizes = Counter(values).values()
    tie_term = sum(t**3 - t for t in tie_sizes) / (n_total * (n_total - 1))
    variance = n_a * n_b / 12.0 * ((n_total + 1) - tie_term)
    if variance <= 0:
        return 1.0
    mean = n_a * n_b / 2.0
    deviation = max(abs(u_observed - mean) - 0.5, 0.0)  # continuity correction
    z = deviation / math.sqrt(variance)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def mann_whitney_u(sample_a: Sequence[float], sample_b: Sequence[float]) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test.

    Returns ``(u, p)`` where ``u`` counts pairs with a > b (ties at half
    weight). Exact permutation p-value when the combined sample size is at
    most 20, normal approximation with tie and continuity corrections above.
    """
    if len(sample_a) == 0 or len(sample_b) == 0:
        raise ValueError("both samples must be non-empty")
    values = list(sample_a) + list(sample_b)
    u_observed = _u_statistic(sample_a, sample_b)
    if len(values) <= EXACT_MAX_COMBINED_N:
        p = _exact_two_sided_p(values, len(sample_a), u_observed)
    else:
        p = _normal_two_sided_p(values, len(sample_a), u_observed)
    return u_observed, p
