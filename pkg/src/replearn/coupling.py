"""Majorization coupling and the label-preserving random-step sampler.

Given a hypothesis index u, a sign pattern, and a labeled sample, the axes
whose unit step leaves every sample label unchanged form the candidate set P.
Stepping along a uniformly-thinned subset of P keeps labels intact; thinning
|P| down to the law Binomial(d, 2/3) through a majorization coupling makes
the step direction uniform over {-1,0,1}^d in the regimes where the size law
of |P| is CDF-dominated by the binomial.  This module builds the coupling,
runs the sampler, and measures how uniform and independent the result is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .balls import randrange_exact
from .domain import LabeledSample, Params
from .errors import DominanceError, ResourceLimitError, UsageError, VerificationError
from .rng import mix64_array
from .stats import chi_square_gof, chi_square_independence, tv_distance

# Quantization denominator for sampling coupling rows; rows are rounded to
# integer weights summing to this, a TV perturbation below 1e-15 per row.
ROW_SCALE = 1 << 53

DEFAULT_PRE_TRIALS = 100_000


@dataclass(frozen=True)
class CouplingMatrix:
    """Lower-triangular transition kernel from one size law onto another.

    Row i gives the conditional law of the target size given source size i;
    entry (i, j) is defined for j <= i only.
    """

    rows: tuple[tuple[Fraction, ...], ...]

    @property
    def size(self) -> int:
        return len(self.rows)

    def entry(self, i: int, j: int) -> Fraction:
        if not (0 <= j <= i < self.size):
            raise UsageError(f"entry ({i},{j}) outside the lower triangle")
        return self.rows[i][j]

    def check_properties(self, x, y, tolerance: float = 1e-9) -> None:
        """Assert the three kernel properties against the given laws."""
        xs = [Fraction(v) for v in x]
        ys = [Fraction(v) for v in y]
        scale = sum(xs)
        for i, row in enumerate(self.rows):
            for j, p in enumerate(row):
                if p < 0 or p > 1:
                    raise VerificationError(
                        f"entry ({i},{j}) = {float(p):.6g} outside [0,1]"
                    )
            gap = abs(float(sum(row) - 1))
            if gap > tolerance:
                raise VerificationError(f"row {i} sums to 1 off by {gap:.3e}")
        for j in range(self.size):
            pushed = sum(xs[i] * self.rows[i][j] for i in range(j, self.size))
            gap = abs(float(pushed - ys[j]))
            if gap > tolerance * max(1.0, float(scale)):
                raise VerificationError(
                    f"pushforward mass at {j} is {float(pushed):.6g}, "
                    f"expected {float(ys[j]):.6g}"
                )


def majorization_coupling(x, y) -> CouplingMatrix:
    """Greedy coupling of a dominated size law x onto a dominating law y.

    Both inputs are nonnegative vectors of equal length and equal total mass
    (they are normalized internally, so raw counts work).  Dominance means
    every prefix sum of x is at most the matching prefix sum of y.  The top
    row is filled greedily from its diagonal entry downward, the consumed
    mass is subtracted from y, and the recursion descends one row; a zero
    source entry yields a uniform row, which carries no mass and only keeps
    the kernel total.  All arithmetic is exact rational.
    """
    xs = [Fraction(v) for v in x]
    ys = [Fraction(v) for v in y]
    if len(xs) != len(ys) or not xs:
        raise UsageError(
            f"laws must be nonempty and equal length, got {len(xs)} and {len(ys)}"
        )
    if any(v < 0 for v in xs) or any(v < 0 for v in ys):
        raise UsageError("laws must be nonnegative")
    total_x, total_y = sum(xs), sum(ys)
    if total_x == 0 or total_y == 0:
        raise UsageError("laws must have positive total mass")
    xs = [v / total_x for v in xs]
    ys = [v / total_y for v in ys]
    prefix_x = prefix_y = Fraction(0)
    for t in range(len(xs) - 1):
        prefix_x += xs[t]
        prefix_y += ys[t]
        if prefix_x > prefix_y:
            raise UsageError(
                f"dominance fails at prefix {t}: "
                f"{float(prefix_x):.6g} > {float(prefix_y):.6g}"
            )

    m = len(xs)
    rows: list[tuple[Fraction, ...]] = [()] * m
    remaining = list(ys)
    for i in range(m - 1, 0, -1):
        if xs[i] == 0:
            rows[i] = tuple([Fraction(1, i + 1)] * (i + 1))
            continue
        row = [Fraction(0)] * (i + 1)
        row[i] = remaining[i] / xs[i]
        tail = row[i]
        for j in range(i - 1, -1, -1):
            row[j] = min(remaining[j] / xs[i], 1 - tail)
            tail += row[j]
        for j in range(i + 1):
            remaining[j] -= xs[i] * row[j]
        rows[i] = tuple(row)
    rows[0] = (Fraction(1),)

    matrix = CouplingMatrix(rows=tuple(rows))
    matrix.check_properties(xs, ys)
    return matrix


def binomial_two_thirds_law(d: int) -> tuple[Fraction, ...]:
    """Exact law of Binomial(d, 2/3) as fractions over 3^d."""
    if d < 1:
        raise UsageError(f"d must be >= 1, got {d}")
    denom = 3**d
    return tuple(
        Fraction(math.comb(d, j) * 2**j, denom) for j in range(d + 1)
    )


def boundary_positions(center: int, sign: int, k: int) -> tuple[int, int]:
    """The two residues on one axis whose label flips under a signed step.

    For a +1 step from transition position c the flips are at c and
    c + floor(k/2); for a -1 step they sit one below, at c - 1 and
    c - 1 + floor(k/2), all mod k.
    """
    if sign not in (-1, 1):
        raise UsageError(f"sign must be -1 or +1, got {sign}")
    base = center % k if sign == 1 else (center - 1) % k
    return base, (base + k // 2) % k


def candidate_direction_set(u, signs, sample: LabeledSample, params: Params):
    """Axes whose single signed step changes no label of the sample.

    Axis a belongs to the set exactly when no sample point on axis a sits at
    either of that axis's two boundary residues.
    """
    uu = tuple(int(c) % params.k for c in u)
    ss = tuple(int(s) for s in signs)
    if len(uu) != params.d or len(ss) != params.d:
        raise UsageError(
            f"u and signs must have length {params.d}, "
            f"got {len(uu)} and {len(ss)}"
        )
    if any(s not in (-1, 1) for s in ss):
        raise UsageError("signs must be -1 or +1")
    blocked = [False] * params.d
    for a, b in zip(sample.axes.tolist(), sample.positions.tolist()):
        if blocked[a]:
            continue
        if b in boundary_positions(uu[a], ss[a], params.k):
            blocked[a] = True
    return tuple(a for a in range(params.d) if not blocked[a])


def _candidate_mask_batch(
    us: np.ndarray,
    signs: np.ndarray,
    axes: np.ndarray,
    positions: np.ndarray,
    k: int,
) -> np.ndarray:
    """(B,d) boolean mask of surviving axes for B independent trials."""
    trials, d = us.shape
    mask = np.zeros((trials, d), dtype=bool)
    if axes.shape[1] == 0:
        return ~mask
    centers = np.take_along_axis(us, axes, axis=1)
    step_signs = np.take_along_axis(signs, axes, axis=1)
    base = np.where(step_signs == 1, centers, centers - 1) % k
    hit = (positions == base) | (positions == (base + k // 2) % k)
    rows = np.broadcast_to(np.arange(trials)[:, None], axes.shape)
    np.logical_or.at(mask, (rows[hit], axes[hit]), True)
    return ~mask


@dataclass(frozen=True)
class StepCoupling:
    """Pre-pass size law, target binomial law, and the coupling between them."""

    d: int
    k: int
    n: int
    pre_trials: int
    size_counts: tuple[int, ...]
    size_law: tuple[Fraction, ...]
    target_law: tuple[Fraction, ...]
    matrix: CouplingMatrix
    row_cumulative: np.ndarray
    regime_ok: bool
    regime_threshold: float
    dkw_margin: float

    def draw_target_size(self, source_size: int, rng: np.random.Generator) -> int:
        """One target size from the quantized row of the coupling."""
        v = randrange_exact(rng, ROW_SCALE)
        return int(np.searchsorted(self.row_cumulative[source_size], v, side="right"))


def estimate_size_law(
    params: Params,
    trials: int,
    rng: np.random.Generator,
    n: int | None = None,
) -> tuple[int, ...]:
    """Histogram of |P| over uniform (u, signs, sample point set).

    Labels play no role in the candidate set, so points are drawn directly.
    Returns raw counts indexed by size 0..d.
    """
    if trials < 1:
        raise UsageError(f"trials must be >= 1, got {trials}")
    count_n = params.n if n is None else n
    counts = np.zeros(params.d + 1, dtype=np.int64)
    chunk = max(1, 2_000_000 // max(1, count_n * 2 + params.d))
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        us = rng.integers(0, params.k, size=(m, params.d), dtype=np.int64)
        signs = 2 * rng.integers(0, 2, size=(m, params.d), dtype=np.int64) - 1
        axes = rng.integers(0, params.d, size=(m, count_n), dtype=np.int64)
        positions = rng.integers(0, params.k, size=(m, count_n), dtype=np.int64)
        mask = _candidate_mask_batch(us, signs, axes, positions, params.k)
        sizes = np.sum(mask, axis=1)
        counts += np.bincount(sizes, minlength=params.d + 1)
        done += m
    return tuple(int(c) for c in counts)


def regime_threshold(d: int, n: int) -> float:
    """Smallest k for which the thinning argument's stated gate holds."""
    return 4 * n / (math.log(81 / 80) * d)


def _quantize_rows(matrix: CouplingMatrix) -> np.ndarray:
    """Integer-weight cumulative rows summing to ROW_SCALE, for fast draws."""
    m = matrix.size
    out = np.zeros((m, m), dtype=np.uint64)
    for i, row in enumerate(matrix.rows):
        weights = [int(p * ROW_SCALE) for p in row]
        deficit = ROW_SCALE - sum(weights)
        # Park the rounding residue on the heaviest entry.
        weights[max(range(len(weights)), key=lambda j: row[j])] += deficit
        cum = np.cumsum(np.array(weights, dtype=np.uint64))
        out[i, : i + 1] = cum
        out[i, i + 1 :] = ROW_SCALE
    return out


def build_step_coupling(
    params: Params,
    rng: np.random.Generator,
    n: int | None = None,
    pre_trials: int = DEFAULT_PRE_TRIALS,
) -> StepCoupling:
    """Estimate the size law of |P| and couple it onto Binomial(d, 2/3).

    Aborts with DominanceError when the empirical CDF of |P| exceeds the
    binomial CDF anywhere: proceeding would bias the thinned step.  The
    error carries the violating prefixes and the regime check on k; the DKW
    sampling margin for the pre-pass is reported alongside so borderline
    violations can be judged against estimation noise.
    """
    if params.k % 2 == 0:
        raise UsageError("k must be odd")
    count_n = params.n if n is None else n
    counts = estimate_size_law(params, pre_trials, rng, n=count_n)
    total = sum(counts)
    size_law = tuple(Fraction(c, total) for c in counts)
    target_law = binomial_two_thirds_law(params.d)

    threshold = regime_threshold(params.d, count_n)
    regime_ok = params.k >= threshold
    dkw = math.sqrt(math.log(2 / 0.05) / (2 * pre_trials))

    violations = []
    cdf_p = cdf_q = Fraction(0)
    for t in range(params.d):
        cdf_p += size_law[t]
        cdf_q += target_law[t]
        if cdf_p > cdf_q:
            violations.append((t, float(cdf_p), float(cdf_q)))
    if violations:
        worst = max(violations, key=lambda v: v[1] - v[2])
        raise DominanceError(
            f"size law of the candidate set is not CDF-dominated by "
            f"Binomial({params.d}, 2/3): at prefix {worst[0]} the empirical "
            f"CDF is {worst[1]:.4f} vs {worst[2]:.4f} "
            f"(pre-pass {pre_trials} draws, DKW margin {dkw:.4f}; regime gate "
            f"k >= {threshold:.1f} {'holds' if regime_ok else 'fails'} at "
            f"k={params.k}, n={count_n})",
            violations=violations,
            regime_ok=regime_ok,
        )

    matrix = majorization_coupling(size_law, target_law)
    return StepCoupling(
        d=params.d,
        k=params.k,
        n=count_n,
        pre_trials=pre_trials,
        size_counts=counts,
        size_law=size_law,
        target_law=target_law,
        matrix=matrix,
        row_cumulative=_quantize_rows(matrix),
        regime_ok=regime_ok,
        regime_threshold=threshold,
        dkw_margin=dkw,
    )


@dataclass(frozen=True)
class StepOutcome:
    """One thinned step: endpoints, direction, and the sets that shaped it."""

    u: tuple[int, ...]
    v: tuple[int, ...]
    direction: tuple[int, ...]
    candidate_axes: tuple[int, ...]
    kept_axes: tuple[int, ...]
    signs: tuple[int, ...]


def random_step(
    u,
    sample: LabeledSample,
    params: Params,
    rng: np.random.Generator,
    coupling: StepCoupling | None = None,
) -> StepOutcome:
    """Draw signs, form the candidate set, thin it, and step.

    The thinning target comes from the coupling row for |P|; the dropped
    axes are chosen uniformly without replacement.  Label preservation is
    re-verified on the sample before returning.  When no prebuilt coupling
    is supplied, one is estimated from a fresh pre-pass using the same rng.
    """
    if coupling is None:
        coupling = build_step_coupling(params, rng, n=sample.axes.shape[0])
    uu = tuple(int(c) % params.k for c in u)
    signs = tuple(int(s) for s in (2 * rng.integers(0, 2, size=params.d) - 1))
    candidates = candidate_direction_set(uu, signs, sample, params)
    target = coupling.draw_target_size(len(candidates), rng)
    keep = sorted(
        int(i)
        for i in rng.permutation(np.array(candidates, dtype=np.int64))[:target]
    )
    direction = tuple(
        signs[a] if a in set(keep) else 0 for a in range(params.d)
    )
    v = tuple((uu[a] + direction[a]) % params.k for a in range(params.d))
    for a, b, lab in zip(
        sample.axes.tolist(), sample.positions.tolist(), sample.labels.tolist()
    ):
        before = int((b - uu[a]) % params.k < params.half_length)
        after = int((b - v[a]) % params.k < params.half_length)
        if before != after:
            raise VerificationError(
                f"step flipped the label of point ({a},{b}): {before} -> {after}"
            )
        del lab
    return StepOutcome(
        u=uu,
        v=v,
        direction=direction,
        candidate_axes=candidates,
        kept_axes=tuple(keep),
        signs=signs,
    )


def _draw_target_sizes_batch(
    coupling: StepCoupling, sizes: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    draws = rng.integers(0, ROW_SCALE, size=sizes.shape[0], dtype=np.uint64)
    out = np.zeros_like(sizes)
    for s in range(coupling.d + 1):
        sel = sizes == s
        if np.any(sel):
            out[sel] = np.searchsorted(
                coupling.row_cumulative[s], draws[sel], side="right"
            )
    return out


@dataclass(frozen=True)
class StepBatch:
    """Aggregated arrays from a block of independent thinned steps."""

    us: np.ndarray
    vs: np.ndarray
    candidate_counts: np.ndarray
    kept_counts: np.ndarray
    sample_buckets: np.ndarray


def run_step_trials(
    params: Params,
    trials: int,
    rng: np.random.Generator,
    coupling: StepCoupling,
    n: int | None = None,
    buckets: int = 16,
) -> StepBatch:
    """Vectorized block of thinned steps with fresh (u, signs, S) per trial.

    Verifies label preservation on every trial exactly, then discards the
    samples, keeping only a hash bucket per sample for independence tests.
    """
    if trials < 1:
        raise UsageError(f"trials must be >= 1, got {trials}")
    d, k = params.d, params.k
    count_n = params.n if n is None else n

    us = rng.integers(0, k, size=(trials, d), dtype=np.int64)
    signs = 2 * rng.integers(0, 2, size=(trials, d), dtype=np.int64) - 1
    axes = rng.integers(0, d, size=(trials, count_n), dtype=np.int64)
    positions = rng.integers(0, k, size=(trials, count_n), dtype=np.int64)

    mask = _candidate_mask_batch(us, signs, axes, positions, k)
    sizes = np.sum(mask, axis=1)
    targets = _draw_target_sizes_batch(coupling, sizes, rng)

    # Uniform subset of each candidate set: random priorities, keep the
    # `targets` smallest among candidate axes.
    priorities = rng.random((trials, d))
    priorities[~mask] = np.inf
    order = np.argsort(priorities, axis=1)
    ranks = np.empty_like(order)
    np.put_along_axis(
        ranks, order, np.broadcast_to(np.arange(d), (trials, d)).copy(), axis=1
    )
    kept = mask & (ranks < targets[:, None])

    vs = (us + signs * kept) % k

    before = np.take_along_axis(us, axes, axis=1)
    after = np.take_along_axis(vs, axes, axis=1)
    lab_before = (positions - before) % k < params.half_length
    lab_after = (positions - after) % k < params.half_length
    bad = lab_before != lab_after
    if np.any(bad):
        t_idx = int(np.argmax(np.any(bad, axis=1)))
        raise VerificationError(
            f"step flipped a label in trial {t_idx}: "
            f"u={tuple(us[t_idx])}, v={tuple(vs[t_idx])}"
        )

    codes = np.zeros(trials, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j in range(count_n):
            codes = mix64_array(
                codes * np.uint64(k * d + 1)
                ^ (axes[:, j].astype(np.uint64) * np.uint64(k)
                   + positions[:, j].astype(np.uint64))
            )
    sample_buckets = (codes % np.uint64(buckets)).astype(np.int64)

    return StepBatch(
        us=us,
        vs=vs,
        candidate_counts=sizes,
        kept_counts=np.sum(kept, axis=1),
        sample_buckets=sample_buckets,
    )


def _flat_codes(points: np.ndarray, k: int) -> np.ndarray:
    codes = np.zeros(points.shape[0], dtype=np.int64)
    for j in range(points.shape[1]):
        codes = codes * k + points[:, j]
    return codes


@dataclass(frozen=True)
class StepVerification:
    """Distributional report for the thinned-step sampler."""

    d: int
    k: int
    n: int
    trials: int
    buckets: int
    tv_direction: float
    tv_v_binned: float
    tv_u_binned: float
    chi2_stat: float
    chi2_dof: int
    chi2_pvalue: float
    kept_counts: tuple[int, ...]
    regime_ok: bool
    regime_threshold: float

    def csv_row(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "n": self.n,
            "trials": self.trials,
            "buckets": self.buckets,
            "tv_direction": self.tv_direction,
            "tv_v_binned": self.tv_v_binned,
            "tv_u_binned": self.tv_u_binned,
            "chi2_stat": self.chi2_stat,
            "chi2_dof": self.chi2_dof,
            "chi2_pvalue": self.chi2_pvalue,
            "regime_ok": int(self.regime_ok),
            "regime_threshold": self.regime_threshold,
        }


def verify_step_distribution(
    params: Params,
    trials: int,
    rng: np.random.Generator,
    n: int | None = None,
    buckets: int = 16,
    pre_trials: int = DEFAULT_PRE_TRIALS,
    coupling: StepCoupling | None = None,
    chunk: int = 200_000,
) -> StepVerification:
    """Measure uniformity of v - u and independence of v from the sample.

    Tabulates the exact direction histogram over {-1,0,1}^d, residue-class
    bins of u and v over flat codes mod `buckets`, and the contingency of
    the v bin against a sample hash bucket.  Requires d <= 10 so the
    direction table stays small, and k^d < 2^62 so flat codes fit.
    """
    if params.d > 10:
        raise ResourceLimitError(
            f"direction table needs 3^d cells; d={params.d} exceeds 10"
        )
    if params.d * math.log2(params.k) >= 62:
        raise ResourceLimitError(
            f"flat codes need k^d < 2^62, got k={params.k}, d={params.d}"
        )
    if coupling is None:
        coupling = build_step_coupling(params, rng, n=n, pre_trials=pre_trials)
    count_n = params.n if n is None else n

    d, k = params.d, params.k
    direction_counts = np.zeros(3**d, dtype=np.int64)
    v_bins = np.zeros(buckets, dtype=np.int64)
    u_bins = np.zeros(buckets, dtype=np.int64)
    table = np.zeros((buckets, buckets), dtype=np.int64)
    kept_hist = np.zeros(d + 1, dtype=np.int64)

    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        batch = run_step_trials(params, m, rng, coupling, n=count_n, buckets=buckets)
        diff = (batch.vs - batch.us) % k
        steps = np.where(diff == k - 1, -1, diff)  # now in {-1,0,1}
        codes = np.zeros(m, dtype=np.int64)
        for j in range(d):
            codes = codes * 3 + (steps[:, j] + 1)
        direction_counts += np.bincount(codes, minlength=3**d)

        v_codes = _flat_codes(batch.vs, k) % buckets
        u_codes = _flat_codes(batch.us, k) % buckets
        v_bins += np.bincount(v_codes, minlength=buckets)
        u_bins += np.bincount(u_codes, minlength=buckets)
        np.add.at(table, (v_codes, batch.sample_buckets), 1)
        kept_hist += np.bincount(batch.kept_counts, minlength=d + 1)
        done += m

    uniform_dirs = np.full(3**d, 1.0 / 3**d)
    tv_dir = tv_distance(direction_counts, uniform_dirs)

    # Residue classes of flat codes mod `buckets` are near-balanced but not
    # exactly; compare against the true class sizes.
    total_codes = k**d
    class_sizes = np.array(
        [total_codes // buckets + (1 if b < total_codes % buckets else 0)
         for b in range(buckets)],
        dtype=np.float64,
    )
    class_probs = class_sizes / total_codes
    tv_v = tv_distance(v_bins, class_probs)
    tv_u = tv_distance(u_bins, class_probs)

    stat, dof, pvalue = chi_square_independence(table)

    return StepVerification(
        d=d,
        k=k,
        n=count_n,
        trials=trials,
        buckets=buckets,
        tv_direction=tv_dir,
        tv_v_binned=tv_v,
        tv_u_binned=tv_u,
        chi2_stat=stat,
        chi2_dof=dof,
        chi2_pvalue=pvalue,
        kept_counts=tuple(int(c) for c in kept_hist),
        regime_ok=coupling.regime_ok,
        regime_threshold=coupling.regime_threshold,
    )


def empty_sample_size_check(
    params: Params, trials: int, rng: np.random.Generator
) -> tuple[float, int, float]:
    """Chi-square of the thinned size law against Binomial(d, 2/3), S empty.

    With no sample points every axis survives, so the thinned size law must
    match the binomial target exactly up to sampling noise.
    """
    coupling = build_step_coupling(params, rng, n=0, pre_trials=1000)
    batch = run_step_trials(params, trials, rng, coupling, n=0)
    observed = np.bincount(batch.kept_counts, minlength=params.d + 1)
    probs = np.array([float(p) for p in binomial_two_thirds_law(params.d)])
    return chi_square_gof(observed, probs)
