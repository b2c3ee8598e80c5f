"""Ball counting and sampling: every DP answer gets a brute-force twin.

The brute-force routes here enumerate Z_k^d (or a box of Z^d) directly and
never share code with the convolution tables they check.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from replearn.balls import (
    InteriorReport,
    build_ball_table,
    exact_shell_counts,
    interior_statistics,
    l1_ball_bound,
    l1_ball_count,
    randrange_exact,
    sample_uniform_wrap_ball,
    sample_wrap_ball_offset,
    shell_count_by_zeros,
    shell_ratios,
    wrap_ball_count,
)
from replearn.domain import Params
from replearn.errors import UsageError
from replearn.rng import substream
from replearn.stats import chi_square_gof

ALPHA = 1e-3


def brute_wrap_ball(d: int, radius: int, k: int) -> int:
    total = 0
    for v in itertools.product(range(k), repeat=d):
        if sum(min(b, k - b) for b in v) <= radius:
            total += 1
    return total


def brute_shell_by_zeros(d: int, z: int, t: int, box: int) -> int:
    total = 0
    for x in itertools.product(range(-box, box + 1), repeat=d):
        if sum(abs(c) for c in x) == t and sum(c == 0 for c in x) == z:
            total += 1
    return total


@pytest.mark.parametrize("d,r,expect", [(1, 3, 7), (2, 2, 13), (3, 2, 25), (2, 0, 1)])
def test_l1_ball_count_frozen(d, r, expect):
    assert l1_ball_count(d, r) == expect


@pytest.mark.parametrize("d", [1, 2, 3])
def test_l1_ball_count_vs_brute(d):
    for r in range(5):
        count = sum(
            1
            for x in itertools.product(range(-r, r + 1), repeat=d)
            if sum(abs(c) for c in x) <= r
        )
        assert l1_ball_count(d, r) == count


def test_l1_ball_bound_dominates():
    for d in range(1, 5):
        for r in range(1, 7):
            assert l1_ball_count(d, r) <= l1_ball_bound(d, r)
    with pytest.raises(UsageError):
        l1_ball_bound(2, 0)


@pytest.mark.parametrize("d,k", [(1, 5), (1, 7), (2, 5), (2, 7), (3, 5), (3, 7)])
def test_wrap_ball_count_vs_brute(d, k):
    for radius in range(5):
        assert wrap_ball_count(d, radius, k) == brute_wrap_ball(d, radius, k)


def test_wrap_ball_saturates():
    # radius >= d * floor(k/2) covers all of Z_k^d
    assert wrap_ball_count(2, 4, 5) == 25
    assert wrap_ball_count(3, 9, 7) == 343
    assert wrap_ball_count(1, 3, 5) == 5


def test_shell_count_by_zeros_formula():
    assert shell_count_by_zeros(2, 1, 2) == 4   # (+-2, 0) and (0, +-2)
    assert shell_count_by_zeros(2, 0, 2) == 4   # (+-1, +-1)
    assert shell_count_by_zeros(3, 3, 0) == 1
    assert shell_count_by_zeros(3, 2, 0) == 0
    for d in (1, 2, 3):
        for t in range(5):
            for z in range(d + 1):
                assert shell_count_by_zeros(d, z, t) == brute_shell_by_zeros(
                    d, z, t, box=t
                )


def test_exact_shell_counts_unconstrained():
    assert exact_shell_counts(2, 4) == [1, 4, 8, 12, 16]
    # capped at k: coordinate magnitudes stop at floor(k/2)
    capped = exact_shell_counts(2, 4, k=5)
    for t, c in enumerate(capped):
        want = sum(
            1
            for x in itertools.product(range(-2, 3), repeat=2)
            if abs(x[0]) + abs(x[1]) == t
        )
        assert c == want


def test_build_ball_table_consistent():
    table = build_ball_table(3, 6, 7)
    assert table.total == wrap_ball_count(3, 6, 7)
    assert list(table.cumulative) == list(np.cumsum(table.counts))
    rows = list(table.csv_rows())
    assert rows[0][0] == 0 and rows[-1][1] == table.counts[-1]


def test_shell_ratios_monotone_past_2d():
    for d, z in [(2, 0), (3, 0), (3, 1), (4, 2)]:
        for ratio in shell_ratios(d, z, 2 * d, 2 * d + 8):
            assert ratio >= 1
    assert shell_ratios(1, 0, 2, 4) == [Fraction(1), Fraction(1)]


def test_randrange_exact_basics():
    rng = substream(101, 0)
    assert randrange_exact(rng, 1) == 0
    draws = [randrange_exact(rng, 6) for _ in range(6000)]
    assert set(draws) == set(range(6))
    counts = np.bincount(draws, minlength=6)
    _, _, p = chi_square_gof(counts, np.full(6, 1 / 6))
    assert p > ALPHA
    with pytest.raises(UsageError):
        randrange_exact(rng, 0)


def test_randrange_exact_deterministic():
    a = [randrange_exact(substream(7, 3), 1000) for _ in range(1)]
    b = [randrange_exact(substream(7, 3), 1000) for _ in range(1)]
    assert a == b


def offset_index(delta, k):
    code = 0
    for c in delta:
        code = code * k + int(c) % k
    return code


def test_sampler_uniform_small_ball():
    # 13-point ball, radius within the cap
    d, radius, k = 2, 2, 5
    rng = substream(55, 0)
    members = sorted(
        offset_index(x, k)
        for x in itertools.product(range(-2, 3), repeat=d)
        if abs(x[0]) + abs(x[1]) <= radius
    )
    lookup = {code: i for i, code in enumerate(members)}
    counts = np.zeros(len(members), dtype=np.int64)
    for _ in range(50_000):
        delta = sample_wrap_ball_offset(d, radius, k, rng)
        assert int(np.abs(delta).sum()) <= radius
        counts[lookup[offset_index(delta, k)]] += 1
    _, _, p = chi_square_gof(counts, np.full(len(members), 1 / len(members)))
    assert p > ALPHA


def test_sampler_uniform_saturated_ball():
    # radius above the cap exercises the backward-scan route; ball = Z_5^2
    d, radius, k = 2, 4, 5
    rng = substream(56, 0)
    counts = np.zeros(k**d, dtype=np.int64)
    for _ in range(25_000):
        delta = sample_wrap_ball_offset(d, radius, k, rng)
        assert np.all(np.abs(delta) <= k // 2)
        counts[offset_index(delta, k)] += 1
    assert np.all(counts > 0)
    _, _, p = chi_square_gof(counts, np.full(k**d, 1 / k**d))
    assert p > ALPHA


def test_sample_uniform_wrap_ball_recentred():
    params = Params(d=2, k=7, epsilon=0.2, rho=0.1, delta=0.05, n=4)
    rng = substream(57, 0)
    center = (3, 6)
    for _ in range(200):
        v = sample_uniform_wrap_ball(center, 2, params, rng)
        dist = sum(min((a - b) % 7, (b - a) % 7) for a, b in zip(v, center))
        assert dist <= 2


def brute_small_count(d, radius, k, s_small):
    cap = k // 2
    joint = [[0] * (d + 1) for _ in range(radius + 1)]
    for x in itertools.product(range(-min(cap, radius), min(cap, radius) + 1), repeat=d):
        t = sum(abs(c) for c in x)
        if t <= radius:
            c = sum(abs(v) <= s_small for v in x)
            joint[t][c] += 1
    return joint


def test_small_count_distribution_vs_brute():
    from replearn.balls import _small_count_distribution

    for d, k, radius, s_small in [(2, 7, 3, 1), (1, 5, 2, 0), (3, 5, 4, 1), (2, 5, 4, 2)]:
        assert _small_count_distribution(d, radius, k, s_small) == brute_small_count(
            d, radius, k, s_small
        )


def test_interior_statistics_report_only():
    # k far below the 384/(eps*rho) gate: numbers reported, nothing asserted
    params = Params(d=2, k=401, epsilon=0.2, rho=0.1, delta=0.05, n=10)
    report = interior_statistics(
        params, radius=params.radius, gamma=0.25, beta=1e-3,
        trials=500, rng=substream(70, 0),
    )
    assert isinstance(report, InteriorReport)
    assert not report.smallnorm_gated and not report.fewsmall_gated
    assert 0.0 <= report.norm_prob_exact <= 1.0
    assert report.norm_ci[0] <= report.norm_prob_hat <= report.norm_ci[1]
    assert report.q == math.ceil(0.2 * 0.25 * 401 / 96)


def test_interior_statistics_gated_scale():
    # k clears 384/(eps*rho) = 19200, so both bounds are live assertions
    params = Params(d=2, k=38501, epsilon=0.2, rho=0.1, delta=0.05, n=10)
    report = interior_statistics(
        params, radius=params.radius, gamma=0.25, beta=1e-4,
        trials=400, rng=substream(71, 0),
    )
    assert report.smallnorm_gated and report.fewsmall_gated
    assert report.smallnorm_holds and report.fewsmall_holds
    assert report.norm_prob_exact >= 1 - 0.25
    assert report.small_tail_exact <= report.rho_quarter


def test_interior_statistics_rejects_bad_inputs():
    params = Params(d=2, k=401, epsilon=0.2, rho=0.1, delta=0.05, n=10)
    with pytest.raises(UsageError):
        interior_statistics(params, radius=5, gamma=1.5, beta=1e-3,
                            trials=10, rng=substream(0, 0))
    with pytest.raises(UsageError):
        interior_statistics(params, radius=5, gamma=0.2, beta=0.0,
                            trials=10, rng=substream(0, 0))
