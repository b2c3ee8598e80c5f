"""Cayley-graph machinery on Z_k^d with generator set {-1,0,1}^d.

Everything here treats the graph whose vertices are d-tuples mod k and whose
edges connect u to u+z for each generator z (z = 0 giving one self-loop per
vertex).  The closed-form spectrum, edge/expansion counts, the tail indicator
statistics, rank-over-F_k experiments, and the signed-sum concentration
estimates all live in this module.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ResourceLimitError, UsageError, VerificationError
from .stats import wilson_interval

# Per-sample work touches all 3^d generators; above this the estimators refuse.
GENERATOR_LIMIT = 10**6

# Dense eigendecomposition oracle handles a k^d x k^d matrix.
DENSE_ORACLE_LIMIT = 2000

# Full enumeration of Z_k^d for the independence check.
ENUMERATION_LIMIT = 10**5


@lru_cache(maxsize=32)
def _generator_tuple(d: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.product((-1, 0, 1), repeat=d))


def generators(d: int) -> np.ndarray:
    """All 3^d generator vectors as an int64 array, balanced-ternary order.

    Row 0 is (-1,...,-1) and the middle row is the zero vector; the ordering
    is fixed so that indicator bit vectors line up across calls.
    """
    if d < 1:
        raise UsageError(f"d must be >= 1, got {d}")
    if 3**d > GENERATOR_LIMIT:
        raise ResourceLimitError(
            f"generator set has 3^{d} = {3**d} elements, limit {GENERATOR_LIMIT}"
        )
    return np.array(_generator_tuple(d), dtype=np.int64)


@dataclass(frozen=True)
class CayleyInstance:
    """The wrap-around graph on [k]^d with one edge per signed unit box step."""

    d: int
    k: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise UsageError(f"d must be >= 1, got {self.d}")
        if self.k < 2:
            raise UsageError(f"k must be >= 2, got {self.k}")

    @property
    def generator_count(self) -> int:
        return 3**self.d

    @property
    def vertex_count(self) -> int:
        return self.k**self.d

    def generator_matrix(self) -> np.ndarray:
        return generators(self.d)


def analytic_eigenvalue(v, d: int, k: int) -> float:
    """Closed-form eigenvalue of the adjacency operator at frequency v.

    lambda_v = |Z| - 2 * sum over generators z of sin^2(pi * <v,z> / k),
    with inner products reduced to representatives in [0, k).
    """
    vec = np.asarray(v, dtype=np.int64)
    if vec.shape != (d,):
        raise UsageError(f"frequency vector must have shape ({d},), got {vec.shape}")
    return float(analytic_eigenvalues_batch(vec[None, :], d, k)[0])


def analytic_eigenvalues_batch(vs: np.ndarray, d: int, k: int) -> np.ndarray:
    """Vectorized analytic_eigenvalue over the rows of vs."""
    zs = generators(d)
    products = np.mod(np.asarray(vs, dtype=np.int64) @ zs.T, k)
    sines = np.sin(np.pi * products / k)
    return float(3**d) - 2.0 * np.sum(sines * sines, axis=1)


def _all_vertices(d: int, k: int) -> np.ndarray:
    """All k^d tuples in lex order as an int64 array (axis 0 slowest)."""
    grids = np.meshgrid(*([np.arange(k, dtype=np.int64)] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


@dataclass(frozen=True)
class SpectrumReport:
    """Analytic spectrum with an optional dense-oracle comparison."""

    d: int
    k: int
    analytic_sorted: tuple[float, ...]
    dense_sorted: tuple[float, ...] | None
    max_abs_deviation: float | None
    gram_deviation: float | None
    trace: float
    histogram_counts: tuple[int, ...]
    histogram_edges: tuple[float, ...]

    @property
    def generator_count(self) -> int:
        return 3**self.d

    def csv_rows(self):
        """Yield (index, eigenvalue) rows, descending order."""
        for i, lam in enumerate(self.analytic_sorted):
            yield i, lam


def spectrum_report(d: int, k: int, histogram_bins: int = 20) -> SpectrumReport:
    """Analytic spectrum of the full graph, no dense comparison.

    Gated only by the vertex count: all k^d frequencies are evaluated.
    """
    count = k**d
    if count > ENUMERATION_LIMIT:
        raise ResourceLimitError(
            f"spectrum enumerates k^d = {count} frequencies, limit {ENUMERATION_LIMIT}"
        )
    lams = analytic_eigenvalues_batch(_all_vertices(d, k), d, k)
    lams_sorted = np.sort(lams)[::-1]
    counts, edges = np.histogram(lams, bins=histogram_bins)
    return SpectrumReport(
        d=d,
        k=k,
        analytic_sorted=tuple(float(x) for x in lams_sorted),
        dense_sorted=None,
        max_abs_deviation=None,
        gram_deviation=None,
        trace=float(np.sum(lams)),
        histogram_counts=tuple(int(c) for c in counts),
        histogram_edges=tuple(float(e) for e in edges),
    )


def eigen_check(d: int, k: int, tolerance: float = 1e-9) -> SpectrumReport:
    """Dense-oracle validation of the closed-form spectrum at micro scale.

    Builds the k^d x k^d 0/1 adjacency matrix explicitly, eigendecomposes it
    numerically, and compares the sorted multiset against the analytic values.
    Also checks that the exponential eigenvectors
    chi_v(w) = k^(-d/2) * exp(2*pi*i*<v,w>/k) form an orthonormal family.
    """
    count = k**d
    if count > DENSE_ORACLE_LIMIT:
        raise ResourceLimitError(
            f"dense oracle needs a {count}x{count} matrix, limit {DENSE_ORACLE_LIMIT}"
        )
    vertices = _all_vertices(d, k)
    # v - u per pair; a pair is adjacent iff every coordinate difference is
    # 0, 1, or k-1 mod k.
    diffs = np.mod(vertices[:, None, :] - vertices[None, :, :], k)
    near = (diffs == 0) | (diffs == 1) | (diffs == k - 1)
    adjacency = np.all(near, axis=2).astype(np.float64)
    dense = np.linalg.eigvalsh(adjacency)[::-1]

    analytic = np.sort(analytic_eigenvalues_batch(vertices, d, k))[::-1]
    max_dev = float(np.max(np.abs(dense - analytic)))
    if max_dev > tolerance:
        raise VerificationError(
            f"analytic spectrum deviates from dense oracle by {max_dev:.3e} "
            f"at d={d}, k={k} (tolerance {tolerance:.1e})"
        )

    phases = np.mod(vertices @ vertices.T, k)
    chi = np.exp(2j * np.pi * phases / k) / math.sqrt(float(count))
    gram = chi @ chi.conj().T
    gram_dev = float(np.max(np.abs(gram - np.eye(count))))
    if gram_dev > tolerance:
        raise VerificationError(
            f"eigenvector family is not orthonormal: Gram deviation {gram_dev:.3e}"
        )

    lams = np.sort(analytic_eigenvalues_batch(vertices, d, k))[::-1]
    counts, edges = np.histogram(lams, bins=20)
    return SpectrumReport(
        d=d,
        k=k,
        analytic_sorted=tuple(float(x) for x in lams),
        dense_sorted=tuple(float(x) for x in dense),
        max_abs_deviation=max_dev,
        gram_deviation=gram_dev,
        trace=float(np.sum(lams)),
        histogram_counts=tuple(int(c) for c in counts),
        histogram_edges=tuple(float(e) for e in edges),
    )


def _encode_vertices(points: np.ndarray, k: int) -> np.ndarray:
    """Flat base-k codes for rows of points (coordinates already in [0,k))."""
    codes = np.zeros(points.shape[0], dtype=np.int64)
    for j in range(points.shape[1]):
        codes = codes * k + points[:, j]
    return codes


def internal_edge_count(points, d: int, k: int) -> int:
    """Directed edges (u, v) with both endpoints in the given set.

    Each vertex contributes its self-loop once (the zero generator).  The
    input may be any iterable of d-tuples; duplicates are rejected.
    """
    pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points,
                     dtype=np.int64)
    if pts.ndim != 2 or pts.shape[1] != d:
        raise UsageError(f"point set must be m x {d}, got shape {pts.shape}")
    if pts.shape[0] == 0:
        raise UsageError("point set must be nonempty")
    pts = np.mod(pts, k)
    codes = _encode_vertices(pts, k)
    if np.unique(codes).size != codes.size:
        raise UsageError("point set contains duplicates")
    zs = generators(d)

    member = set(int(c) for c in codes)
    total = 0
    # Chunk the m x 3^d neighbor table to bound peak memory.
    chunk = max(1, 4_000_000 // max(1, zs.shape[0]))
    for start in range(0, pts.shape[0], chunk):
        block = pts[start:start + chunk]
        neighbors = np.mod(block[:, None, :] + zs[None, :, :], k)
        flat = neighbors.reshape(-1, d)
        ncodes = _encode_vertices(flat, k)
        total += sum(1 for c in ncodes if int(c) in member)
    return total


def expansion_ratio(points, d: int, k: int) -> float:
    """Fraction of directed edges out of the set that stay inside it."""
    pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points,
                     dtype=np.int64)
    internal = internal_edge_count(pts, d, k)
    return internal / (pts.shape[0] * 3**d)


def tail_interval(k: int) -> range:
    """The contiguous residue window of length floor(k/2) starting after k/4."""
    lo = k // 4 + 1
    return range(lo, lo + k // 2)


@dataclass(frozen=True)
class TailIndicator:
    """Per-generator bits for one frequency u: bit z is 1 iff <u,z> leaves I."""

    d: int
    k: int
    u: tuple[int, ...]
    bits: tuple[int, ...]

    @property
    def interval(self) -> range:
        return tail_interval(self.k)

    @property
    def total(self) -> int:
        return sum(self.bits)


def tail_indicator(u, d: int, k: int) -> TailIndicator:
    """Evaluate every X_z bit for the given u."""
    vec = np.asarray(u, dtype=np.int64)
    if vec.shape != (d,):
        raise UsageError(f"u must have shape ({d},), got {vec.shape}")
    bits = _indicator_bits_batch(vec[None, :], d, k)[0]
    return TailIndicator(
        d=d, k=k,
        u=tuple(int(x) % k for x in vec),
        bits=tuple(int(b) for b in bits),
    )


def _indicator_bits_batch(us: np.ndarray, d: int, k: int) -> np.ndarray:
    zs = generators(d)
    products = np.mod(np.asarray(us, dtype=np.int64) @ zs.T, k)
    lo = k // 4 + 1
    hi = lo + k // 2 - 1
    inside = (products >= lo) & (products <= hi)
    return (~inside).astype(np.int64)


def indicator_sum(u, d: int, k: int) -> int:
    """Number of generators z whose inner product with u falls outside I."""
    return tail_indicator(u, d, k).total


def indicator_sums_batch(us: np.ndarray, d: int, k: int) -> np.ndarray:
    return np.sum(_indicator_bits_batch(us, d, k), axis=1)


def indicator_mean_exact(d: int, k: int) -> Fraction:
    """E[sum_z X_z] for uniform u, exactly.

    The zero generator always contributes 1; for any fixed nonzero z the
    inner product is uniform on Z_k (k prime), so z contributes 1 - |I|/k.
    """
    size = 3**d
    return 1 + (size - 1) * (1 - Fraction(k // 2, k))


@dataclass(frozen=True)
class TailMomentReport:
    """Monte Carlo tail probability and central moment for the indicator sum."""

    d: int
    k: int
    r: int
    trials: int
    tail_hits: int
    p_hat: float
    p_lo: float
    p_hi: float
    moment_hat: float
    mean_exact: Fraction
    implication_checked: int
    implication_violations: int
    r_in_valid_range: bool
    statement_bound: float
    proof_bound: float

    @property
    def generator_count(self) -> int:
        return 3**self.d

    def csv_row(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "r": self.r,
            "trials": self.trials,
            "p_hat": self.p_hat,
            "p_lo": self.p_lo,
            "p_hi": self.p_hi,
            "moment_hat": self.moment_hat,
            "mean_exact": float(self.mean_exact),
            "implication_checked": self.implication_checked,
            "implication_violations": self.implication_violations,
        }


def _moment_reference_bounds(d: int, size: int, r: int) -> tuple[float, float]:
    # Two constants circulate for the same expression; both are recorded for
    # comparison only and neither is asserted anywhere.
    base = (size**r) * (math.log(d) ** d) * (d ** (-d / 2)) if d >= 2 else math.inf
    return (113.0**d) * base, (150.0**d) * base


def tail_and_moment_estimate(
    d: int,
    k: int,
    r: int,
    trials: int,
    rng: np.random.Generator,
    chunk: int = 4096,
) -> TailMomentReport:
    """Sample uniform frequencies and estimate the indicator-sum statistics.

    Reports the tail probability p = Pr[sum_z X_z >= (42/50)|Z|] with a
    Wilson interval, the r-th central moment about the exact mean, and a
    pointwise check that every sampled u with lambda_u > (46/50)|Z| lands in
    the tail event.  The trailing reference bounds are recorded but never
    asserted; r must be even.
    """
    if r < 2 or r % 2 != 0:
        raise UsageError(f"moment order must be a positive even integer, got {r}")
    if trials < 1:
        raise UsageError(f"trials must be >= 1, got {trials}")
    size = 3**d
    if size > GENERATOR_LIMIT:
        raise ResourceLimitError(
            f"per-sample work is 3^{d} = {size}, limit {GENERATOR_LIMIT}"
        )

    mean_exact = indicator_mean_exact(d, k)
    mean_float = float(mean_exact)
    # tail threshold (42/50)|Z| compared exactly on integers: 50*S >= 42*|Z|
    tail_num = 42 * size
    premise_level = (46 / 50) * size

    tail_hits = 0
    checked = 0
    violations = 0
    moment_chunks: list[float] = []
    done = 0
    per_chunk = max(1, min(chunk, 4_000_000 // size))
    while done < trials:
        m = min(per_chunk, trials - done)
        us = rng.integers(0, k, size=(m, d), dtype=np.int64)
        bits = _indicator_bits_batch(us, d, k)
        sums = np.sum(bits, axis=1)
        tail_hits += int(np.sum(50 * sums >= tail_num))

        lams = analytic_eigenvalues_batch(us, d, k)
        premise = lams > premise_level
        checked += int(np.sum(premise))
        violations += int(np.sum(premise & (50 * sums < tail_num)))

        deviations = sums.astype(np.float64) - mean_float
        moment_chunks.append(float(np.sum(deviations**r)))
        done += m

    moment_hat = math.fsum(moment_chunks) / trials
    p_hat = tail_hits / trials
    p_lo, p_hi = wilson_interval(tail_hits, trials)

    if d >= 2:
        log3d = math.log(d, 3)
        r_ok = (d / (2 * log3d)) <= r <= (d / log3d)
    else:
        r_ok = False
    statement_bound, proof_bound = _moment_reference_bounds(d, size, r)

    return TailMomentReport(
        d=d,
        k=k,
        r=r,
        trials=trials,
        tail_hits=tail_hits,
        p_hat=p_hat,
        p_lo=p_lo,
        p_hi=p_hi,
        moment_hat=moment_hat,
        mean_exact=mean_exact,
        implication_checked=checked,
        implication_violations=violations,
        r_in_valid_range=r_ok,
        statement_bound=statement_bound,
        proof_bound=proof_bound,
    )


def exact_tail_probability(d: int, k: int) -> Fraction:
    """Enumerate all k^d frequencies and count the tail event exactly."""
    count = k**d
    if count > ENUMERATION_LIMIT:
        raise ResourceLimitError(
            f"exact tail enumerates k^d = {count} frequencies, limit {ENUMERATION_LIMIT}"
        )
    us = _all_vertices(d, k)
    sums = indicator_sums_batch(us, d, k)
    size = 3**d
    hits = int(np.sum(50 * sums >= 42 * size))
    return Fraction(hits, count)


def rank_mod_k(matrix, k: int) -> int:
    """Rank of an integer matrix over the field of k elements, k prime.

    Plain Gaussian elimination with exact integer arithmetic mod k; pivots
    are inverted with pow(pivot, -1, k).
    """
    if k < 2:
        raise UsageError(f"k must be >= 2, got {k}")
    rows = np.array(np.mod(np.asarray(matrix, dtype=np.int64), k), dtype=np.int64)
    if rows.ndim != 2:
        raise UsageError(f"matrix must be 2-dimensional, got ndim {rows.ndim}")
    m, n = rows.shape
    rank = 0
    for col in range(n):
        if rank == m:
            break
        pivot_row = -1
        for i in range(rank, m):
            if rows[i, col] % k != 0:
                pivot_row = i
                break
        if pivot_row < 0:
            continue
        rows[[rank, pivot_row]] = rows[[pivot_row, rank]]
        inv = pow(int(rows[rank, col]), -1, k)
        rows[rank] = (rows[rank] * inv) % k
        below = rows[rank + 1:, col].copy()
        rows[rank + 1:] = (rows[rank + 1:] - below[:, None] * rows[rank][None, :]) % k
        rank += 1
    return rank


@dataclass(frozen=True)
class LowRankReport:
    """Fraction of random generator tuples with deficient rank."""

    d: int
    r: int
    k: int
    trials: int
    threshold: int
    hits: int
    fraction: float
    fraction_lo: float
    fraction_hi: float
    reference_fraction: float
    reference_fraction_proof: float


def low_rank_fraction_estimate(
    d: int,
    r: int,
    k: int,
    trials: int,
    rng: np.random.Generator,
) -> LowRankReport:
    """Monte Carlo rank statistics for r-tuples of uniform generator vectors.

    Draws Y as an r x d matrix with i.i.d. entries uniform on {-1,0,1} and
    counts how often rank(Y) over F_k drops to r - log3(d) or below.  The
    reference fractions (d^(-d/2)/d and its (d/2)-variant) are reported for
    context only; they are vacuous at small d.
    """
    if r < 1 or r > d:
        raise UsageError(f"need 1 <= r <= d, got r={r}, d={d}")
    if trials < 1:
        raise UsageError(f"trials must be >= 1, got {trials}")
    threshold = math.floor(r - math.log(d, 3)) if d >= 2 else r - 1
    hits = 0
    for _ in range(trials):
        y = rng.integers(-1, 2, size=(r, d), dtype=np.int64)
        if rank_mod_k(y, k) <= threshold:
            hits += 1
    frac = hits / trials
    lo, hi = wilson_interval(hits, trials)
    ref = (d ** (-d / 2)) / d if d >= 2 else math.inf
    ref_proof = ((d / 2) ** (-d / 2)) / d if d >= 2 else math.inf
    return LowRankReport(
        d=d, r=r, k=k, trials=trials, threshold=threshold, hits=hits,
        fraction=frac, fraction_lo=lo, fraction_hi=hi,
        reference_fraction=ref, reference_fraction_proof=ref_proof,
    )


def littlewood_offord_bound(s: int, k: int) -> float:
    """Anticoncentration ceiling for a signed sum of s nonzero coefficients."""
    return min(0.5, 1.0 / k + math.exp(-s / 8) + math.sqrt(32.0 / s))


def littlewood_offord_exact(x, y: int, k: int) -> Fraction:
    """Pr[sum eps_i x_i = y mod k] for eps uniform on {-1,0,1}^s, exactly.

    Convolution over Z_k with integer counts; total mass 3^s.
    """
    coeffs = [int(c) % k for c in x]
    if not coeffs:
        raise UsageError("coefficient list must be nonempty")
    if any(c == 0 for c in coeffs):
        raise UsageError("all coefficients must be nonzero mod k")
    counts = [0] * k
    counts[0] = 1
    for c in coeffs:
        nxt = [0] * k
        for v, mass in enumerate(counts):
            if mass:
                nxt[(v - c) % k] += mass
                nxt[v] += mass
                nxt[(v + c) % k] += mass
        counts = nxt
    return Fraction(counts[y % k], 3 ** len(coeffs))


@dataclass(frozen=True)
class LittlewoodOffordReport:
    s: int
    k: int
    y: int
    estimate: float
    bound: float
    exact: bool
    trials: int
    sigma: float


# Exact convolution above this many sign patterns falls back to Monte Carlo.
LO_EXACT_LIMIT = 10**6


def littlewood_offord_estimate(
    x,
    y: int,
    k: int,
    trials: int,
    rng: np.random.Generator | None = None,
) -> LittlewoodOffordReport:
    """Hit probability of a target residue by a random signed sum.

    Exact via convolution when 3^s is small enough, Monte Carlo otherwise;
    either way the result is checked against the anticoncentration ceiling
    (with a 3-sigma allowance in the sampled case).
    """
    coeffs = [int(c) % k for c in x]
    if not coeffs:
        raise UsageError("coefficient list must be nonempty")
    if any(c == 0 for c in coeffs):
        raise UsageError("all coefficients must be nonzero mod k")
    s = len(coeffs)
    bound = littlewood_offord_bound(s, k)

    if 3**s <= LO_EXACT_LIMIT:
        exact_p = littlewood_offord_exact(coeffs, y, k)
        estimate = float(exact_p)
        sigma = 0.0
        if exact_p > Fraction(bound):
            raise VerificationError(
                f"exact hit probability {estimate:.6g} exceeds ceiling {bound:.6g} "
                f"at s={s}, k={k}"
            )
        return LittlewoodOffordReport(
            s=s, k=k, y=y % k, estimate=estimate, bound=bound,
            exact=True, trials=0, sigma=sigma,
        )

    if rng is None:
        raise UsageError(f"3^{s} exceeds the exact limit; an rng is required")
    if trials < 1:
        raise UsageError(f"trials must be >= 1, got {trials}")
    arr = np.array(coeffs, dtype=np.int64)
    hits = 0
    done = 0
    chunk = max(1, 2_000_000 // s)
    while done < trials:
        m = min(chunk, trials - done)
        eps = rng.integers(-1, 2, size=(m, s), dtype=np.int64)
        sums = np.mod(eps @ arr, k)
        hits += int(np.sum(sums == (y % k)))
        done += m
    estimate = hits / trials
    sigma = math.sqrt(max(estimate * (1 - estimate), 1.0 / trials) / trials)
    if estimate > bound + 3 * sigma:
        raise VerificationError(
            f"sampled hit probability {estimate:.6g} exceeds ceiling {bound:.6g} "
            f"by more than 3 sigma ({sigma:.2e}) at s={s}, k={k}"
        )
    return LittlewoodOffordReport(
        s=s, k=k, y=y % k, estimate=estimate, bound=bound,
        exact=False, trials=trials, sigma=sigma,
    )


@dataclass(frozen=True)
class IndependenceVerdict:
    """Outcome of the exact product-form check for inner products."""

    d: int
    k: int
    precondition_ok: bool
    independent: bool | None
    max_count_gap: int


def inner_product_independence_check(y_vectors, d: int, k: int) -> IndependenceVerdict:
    """Exact joint-distribution factorization test over all of Z_k^d.

    For y_1 outside the span of the remaining vectors, <y_1, v> must be
    independent of the tuple of remaining inner products when v is uniform.
    The check enumerates every v and compares integer counts:
    joint * k^d == marginal_1 * marginal_rest, exactly.
    """
    ys = np.asarray(y_vectors, dtype=np.int64)
    if ys.ndim != 2 or ys.shape[1] != d or ys.shape[0] < 2:
        raise UsageError(
            f"need at least two vectors of length {d}, got shape {ys.shape}"
        )
    count = k**d
    if count > ENUMERATION_LIMIT:
        raise ResourceLimitError(
            f"independence check enumerates k^d = {count}, limit {ENUMERATION_LIMIT}"
        )
    rest = ys[1:]
    rank_rest = rank_mod_k(rest, k)
    rank_all = rank_mod_k(ys, k)
    if rank_all == rank_rest:
        # y_1 lies in the span of the others; independence is not claimed.
        return IndependenceVerdict(
            d=d, k=k, precondition_ok=False, independent=None, max_count_gap=0,
        )

    vs = _all_vertices(d, k)
    first = np.mod(vs @ ys[0], k)
    rest_products = np.mod(vs @ rest.T, k)
    rest_codes = _encode_vertices(rest_products, k)

    joint: dict[tuple[int, int], int] = {}
    marg_first = [0] * k
    marg_rest: dict[int, int] = {}
    for a, code in zip(first.tolist(), rest_codes.tolist()):
        joint[(a, code)] = joint.get((a, code), 0) + 1
        marg_first[a] += 1
        marg_rest[code] = marg_rest.get(code, 0) + 1

    max_gap = 0
    ok = True
    for a in range(k):
        for code, mr in marg_rest.items():
            lhs = joint.get((a, code), 0) * count
            rhs = marg_first[a] * mr
            gap = abs(lhs - rhs)
            if gap:
                ok = False
                max_gap = max(max_gap, gap)
    return IndependenceVerdict(
        d=d, k=k, precondition_ok=True, independent=ok, max_count_gap=max_gap,
    )
