"""Exact counting and uniform sampling for l1 balls, plain and wrap-around.

Counts are exact arbitrary-precision integers throughout.  The wrap-around
ball lives in Z_k^d under the coordinatewise cyclic metric: each coordinate
contributes one point at distance 0 and two points at each distance
1..floor(k/2) (k is an odd prime, so there is never a single antipode).

The uniform sampler is exact as well: it draws arbitrary-precision uniform
integers from the generator's byte stream and inverts the count tables, so
its law is the uniform law on the ball, not a float approximation of it.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .domain import Params
from .errors import UsageError, VerificationError
from .stats import wilson_interval


def l1_ball_count(d: int, r: int) -> int:
    """|{x in Z^d : ||x||_1 <= r}| as an exact integer.

    Closed form: sum over i of 2^i C(d,i) C(r,i), counting vectors by the
    number i of nonzero coordinates.
    """
    if d < 1 or r < 0:
        raise UsageError(f"need d >= 1 and r >= 0, got d={d}, r={r}")
    return sum((1 << i) * math.comb(d, i) * math.comb(r, i) for i in range(d + 1))


def l1_ball_bound(d: int, r: int) -> int:
    """The crude bound 6^d r^2 (valid for r >= 1)."""
    if r < 1:
        raise UsageError("the 6^d r^2 bound is only stated for r >= 1")
    return 6**d * r * r


def shell_count_by_zeros(d: int, z: int, t: int) -> int:
    """Number of x in Z^d with ||x||_1 = t and exactly z zero coordinates.

    Equals 2^(d-z) C(d,z) C(t-1, d-z-1) for t >= 1; for t = 0 only the
    all-zero vector (z = d) exists.
    """
    if not 0 <= z <= d:
        raise UsageError(f"z={z} outside [0, {d}]")
    if t == 0:
        return 1 if z == d else 0
    if z == d:
        return 0
    return (1 << (d - z)) * math.comb(d, z) * math.comb(t - 1, d - z - 1)


@lru_cache(maxsize=256)
def _shell_counts_cached(d: int, radius: int, k: int | None) -> tuple[int, ...]:
    cap = radius if k is None else min(k // 2, radius)
    counts = [0] * (radius + 1)
    counts[0] = 1
    for _ in range(d):
        prefix = [0] * (radius + 2)
        for t in range(radius + 1):
            prefix[t + 1] = prefix[t] + counts[t]
        nxt = [0] * (radius + 1)
        for t in range(radius + 1):
            lo = max(0, t - cap)
            nxt[t] = counts[t] + 2 * (prefix[t] - prefix[lo])
        counts = nxt
    return tuple(counts)


def exact_shell_counts(d: int, radius: int, k: int | None = None) -> list[int]:
    """counts[t] = number of offset vectors at l1 norm exactly t, t = 0..radius.

    With ``k`` set, coordinates are capped at floor(k/2) (the wrap metric);
    with ``k`` None the lattice is unbounded and the cap never binds.
    One convolution per coordinate via prefix sums, O(d * radius).
    """
    if d < 1 or radius < 0:
        raise UsageError(f"need d >= 1 and radius >= 0, got d={d}, radius={radius}")
    return list(_shell_counts_cached(d, radius, k))


@dataclass(frozen=True)
class BallTable:
    """Exact per-distance counts for a ball, with cumulative sums."""

    d: int
    radius: int
    k: int | None
    counts: tuple[int, ...]
    cumulative: tuple[int, ...]

    @property
    def total(self) -> int:
        return self.cumulative[-1]

    def csv_rows(self):
        """Rows (t, count, cumulative) for the documented shell CSV."""
        return [(t, c, cum) for t, (c, cum) in
                enumerate(zip(self.counts, self.cumulative))]


@lru_cache(maxsize=256)
def build_ball_table(d: int, radius: int, k: int | None = None) -> BallTable:
    counts = _shell_counts_cached(d, radius, k)
    cum = []
    acc = 0
    for c in counts:
        acc += c
        cum.append(acc)
    return BallTable(d, radius, k, counts, tuple(cum))


def wrap_ball_count(d: int, radius: int, k: int) -> int:
    """|{v in Z_k^d : nu(0, v) <= radius}| as an exact integer."""
    if k < 3:
        raise UsageError(f"k must be >= 3, got {k}")
    return build_ball_table(d, radius, k).total


def shell_ratios(d: int, z: int, t_lo: int, t_hi: int) -> list[Fraction]:
    """Consecutive shell-count ratios B^z_{t+1} / B^z_t for t in [t_lo, t_hi).

    The ratios are at least 1 once t >= 2d; callers assert that regime.
    """
    out = []
    for t in range(t_lo, t_hi):
        a = shell_count_by_zeros(d, z, t)
        b = shell_count_by_zeros(d, z, t + 1)
        if a == 0:
            raise UsageError(f"shell count vanishes at t={t} (z={z}); ratio undefined")
        out.append(Fraction(b, a))
    return out


def randrange_exact(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in [0, n) by rejection on the generator's byte stream."""
    if n <= 0:
        raise UsageError("empty range")
    if n == 1:
        return 0
    nbits = (n - 1).bit_length()
    nbytes = (nbits + 7) // 8
    excess = nbytes * 8 - nbits
    while True:
        v = int.from_bytes(rng.bytes(nbytes), "big") >> excess
        if v < n:
            return v


def _draw_from_cumulative(rng: np.random.Generator, cumulative) -> int:
    """Index t with probability (cumulative[t] - cumulative[t-1]) / total."""
    v = randrange_exact(rng, cumulative[-1])
    return bisect_right(cumulative, v)


@lru_cache(maxsize=4096)
def _zero_count_cumulative(d: int, t: int) -> tuple[int, ...]:
    """Cumulative weights over the zero count z = 0..d-1 at norm exactly t >= 1."""
    cum = []
    acc = 0
    for z in range(d):
        acc += shell_count_by_zeros(d, z, t)
        cum.append(acc)
    return tuple(cum)


def _split_norm_by_support(rng, d: int, t: int) -> np.ndarray:
    """Uniform vector of Z^d with ||.||_1 = t (no cap), via the shell identity.

    Draws the zero count z proportional to shell_count_by_zeros, places the
    support uniformly, splits t into positive parts by uniform cut points,
    and signs each part with a fair bit.
    """
    if t == 0:
        return np.zeros(d, dtype=np.int64)
    z = _draw_from_cumulative(rng, _zero_count_cumulative(d, t))
    j = d - z
    support = rng.permutation(d)[:j]
    if j == 1:
        parts = np.array([t], dtype=np.int64)
    else:
        cuts = np.sort(rng.choice(t - 1, size=j - 1, replace=False) + 1)
        parts = np.diff(np.concatenate(([0], cuts, [t])))
    out = np.zeros(d, dtype=np.int64)
    signs = rng.integers(0, 2, size=j)
    out[support] = np.where(signs == 1, parts, -parts)
    return out


def sample_wrap_ball_offset(d: int, radius: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Exact uniform offset vector with wrap norm at most ``radius``.

    Entries lie in [-floor(k/2), floor(k/2)].  When radius <= floor(k/2) the
    cap never binds and the draw goes through the support-splitting route;
    otherwise a per-coordinate backward scan over the dimension tables is
    used (only reachable at micro scale, where it is cheap).
    """
    cap = k // 2
    table = build_ball_table(d, radius, k)
    t = _draw_from_cumulative(rng, table.cumulative)
    if radius <= cap:
        return _split_norm_by_support(rng, d, t)
    out = np.zeros(d, dtype=np.int64)
    for i in range(d):
        rem = d - 1 - i
        if rem == 0:
            s = t
        else:
            tail = _shell_counts_cached(rem, radius, k)
            cum = []
            acc = 0
            for s_val in range(min(cap, t) + 1):
                acc += (1 if s_val == 0 else 2) * tail[t - s_val]
                cum.append(acc)
            s = _draw_from_cumulative(rng, cum)
        if s > 0:
            out[i] = s if rng.integers(0, 2) else -s
        t -= s
    return out


def sample_uniform_wrap_ball(center, radius: int, params: Params, rng: np.random.Generator):
    """Uniform member of the wrap ball around ``center`` as a hypothesis index."""
    delta = sample_wrap_ball_offset(params.d, radius, params.k, rng)
    return tuple(int((c + e) % params.k) for c, e in zip(center, delta))


def _small_count_distribution(d: int, radius: int, k: int, s_small: int) -> list[list[int]]:
    """joint[t][c] = offsets with norm t and exactly c coordinates of magnitude <= s_small.

    Same convolution as ``exact_shell_counts`` with the per-coordinate
    generating function split by the smallness cutoff.  Exact integers.
    """
    cap = min(k // 2, radius)
    joint = [[0] * (d + 1) for _ in range(radius + 1)]
    joint[0][0] = 1
    lo_small = min(s_small, cap)
    for _ in range(d):
        prefix = [[0] * (d + 1) for _ in range(radius + 2)]
        for t in range(radius + 1):
            row_p, row_j = prefix[t], joint[t]
            prefix[t + 1] = [row_p[c] + row_j[c] for c in range(d + 1)]
        nxt = [[0] * (d + 1) for _ in range(radius + 1)]
        for t in range(radius + 1):
            for c in range(d + 1):
                acc = 0
                if c >= 1:
                    # this coordinate small: magnitude 0 plus +-1..+-lo_small
                    lo = max(0, t - lo_small)
                    acc += joint[t][c - 1] + 2 * (prefix[t][c - 1] - prefix[lo][c - 1])
                if cap > lo_small:
                    # this coordinate large: magnitudes lo_small+1..cap
                    hi = t - lo_small - 1
                    if hi >= 0:
                        lo = max(0, t - cap)
                        acc += 2 * (prefix[hi + 1][c] - prefix[lo][c])
                nxt[t][c] = acc
        joint = nxt
    return joint


@dataclass(frozen=True)
class InteriorReport:
    """Interior statistics of the acceptance ball at one parameter point."""

    d: int
    k: int
    radius: int
    gamma: float
    beta: float
    trials: int
    q: int
    norm_threshold: int
    norm_prob_exact: float
    norm_prob_hat: float
    norm_ci: tuple[float, float]
    small_cutoff: int
    small_bound: float
    small_tail_exact: float
    small_tail_hat: float
    small_tail_ci: tuple[float, float]
    smallnorm_gated: bool
    fewsmall_gated: bool
    rho_quarter: float

    @property
    def smallnorm_holds(self) -> bool:
        return self.norm_prob_exact >= 1.0 - self.gamma

    @property
    def fewsmall_holds(self) -> bool:
        return self.small_tail_exact <= self.rho_quarter


def interior_statistics(
    params: Params,
    radius: int,
    gamma: float,
    beta: float,
    trials: int,
    rng: np.random.Generator,
) -> InteriorReport:
    """Norm and small-coordinate statistics of a uniform acceptance-ball offset.

    Estimates, for Delta uniform on the radius-``radius`` wrap ball,
    (a) Pr[||Delta||_1 <= radius - q] with q = ceil(eps*gamma*k/96), and
    (b) the tail of |{a : |Delta_a| < beta*k/2}| beyond
    2304 d beta / eps + 3 ln(4/rho).

    Both probabilities are also computed exactly from the count tables.  The
    bounds are asserted only when their preconditions hold
    (k >= 384/(eps*rho); gamma in [rho/4, 1/2] for (a), beta*k >= 1 for (b)),
    otherwise the report carries the numbers without judgment.
    """
    if not (0.0 < gamma < 1.0) or beta <= 0 or trials < 1 or radius < 0:
        raise UsageError("interior_statistics: bad gamma, beta, trials, or radius")
    d, k, eps, rho = params.d, params.k, params.epsilon, params.rho
    q = math.ceil(eps * gamma * k / 96)
    threshold = radius - q
    table = build_ball_table(d, radius, k)
    total = table.total
    norm_exact = Fraction(table.cumulative[threshold] if threshold >= 0 else 0, total)

    s_small = math.ceil(beta * k / 2) - 1
    bound = 2304 * d * beta / eps + 3 * math.log(4 / rho)
    joint = _small_count_distribution(d, radius, k, s_small)
    c_min = math.floor(bound) + 1
    tail = sum(joint[t][c] for t in range(radius + 1) for c in range(c_min, d + 1))
    tail_exact = Fraction(tail, total)

    norm_hits = 0
    small_hits = 0
    for _ in range(trials):
        delta = sample_wrap_ball_offset(d, radius, k, rng)
        if int(np.abs(delta).sum()) <= threshold:
            norm_hits += 1
        if int((np.abs(delta) <= s_small).sum()) > bound:
            small_hits += 1

    gate_k = k >= 384 / (eps * rho)
    smallnorm_gated = gate_k and (rho / 4 <= gamma <= 0.5)
    fewsmall_gated = gate_k and (beta * k >= 1)

    report = InteriorReport(
        d=d,
        k=k,
        radius=radius,
        gamma=gamma,
        beta=beta,
        trials=trials,
        q=q,
        norm_threshold=threshold,
        norm_prob_exact=float(norm_exact),
        norm_prob_hat=norm_hits / trials,
        norm_ci=wilson_interval(norm_hits, trials),
        small_cutoff=s_small,
        small_bound=bound,
        small_tail_exact=float(tail_exact),
        small_tail_hat=small_hits / trials,
        small_tail_ci=wilson_interval(small_hits, trials),
        smallnorm_gated=smallnorm_gated,
        fewsmall_gated=fewsmall_gated,
        rho_quarter=rho / 4,
    )
    if smallnorm_gated and norm_exact < 1 - Fraction(gamma):
        raise VerificationError(
            f"interior norm mass {float(norm_exact):.6g} below 1-gamma={1-gamma:.6g} "
            f"at d={d}, k={k}, radius={radius}"
        )
    if fewsmall_gated and tail_exact > Fraction(rho) / 4:
        raise VerificationError(
            f"small-coordinate tail {float(tail_exact):.6g} above rho/4={rho/4:.6g} "
            f"at d={d}, k={k}, beta={beta}"
        )
    return report
