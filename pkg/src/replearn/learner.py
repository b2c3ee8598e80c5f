"""The replicable learner and its derandomized mode machinery.

Two stages:

1. ``estimate_transitions`` reads off, per axis, the observed 0-to-1 label
   transition of the cyclic interval (the empirical interval start).

2. ``replicable_learn`` rounds that estimate to the hypothesis of minimum
   keyed priority inside the acceptance ball around it.  Sorting all
   hypotheses by priority is a shared shuffle; taking the argmin over the
   ball is "the first accepted element" of that shuffle without ever
   materializing it.  Two runs sharing a key that land in each other's
   acceptance balls therefore output the same hypothesis.

The mode machinery enumerates every equiprobable ordered sample at micro
scale and tabulates the learner's exact output distribution with rational
arithmetic.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .balls import wrap_ball_count
from .domain import LabeledSample, Params, labeling_of
from .errors import ResourceLimitError, UsageError
from .rng import priority_columns

DEFAULT_BALL_CAP = 10**8

# Above this many members the learner stops materializing ball offsets and
# falls back to streaming enumeration (slower, same outputs).
_MATERIALIZE_LIMIT = 4_000_000


@dataclass(frozen=True)
class SharedKey:
    """128-bit key of the shared priority function."""

    value: int

    def __post_init__(self):
        if not 0 <= self.value < 1 << 128:
            raise UsageError("SharedKey must be a 128-bit integer")

    @property
    def lo(self) -> int:
        return self.value & ((1 << 64) - 1)

    @property
    def hi(self) -> int:
        return self.value >> 64

    @classmethod
    def from_rng(cls, rng: np.random.Generator) -> "SharedKey":
        words = rng.integers(0, 1 << 64, size=2, dtype=np.uint64)
        return cls((int(words[0]) << 64) | int(words[1]))


def _transitions_from_lists(axes, positions, labels, params: Params) -> tuple[int, ...]:
    """Reference transition scan over plain Python sequences.

    Per axis: unique observed positions (first occurrence wins on duplicate
    labels), sorted; the estimate is the position labeled 1 whose cyclic
    predecessor among the observed positions is labeled 0.  An axis without
    both labels present estimates 0.
    """
    k = params.k
    out = []
    for a in range(params.d):
        seen: dict[int, int] = {}
        for ax, pos, lab in zip(axes, positions, labels):
            if ax == a:
                seen.setdefault(int(pos) % k, int(lab))
        ps = sorted(seen)
        ls = [seen[p] for p in ps]
        if not ps or all(v == ls[0] for v in ls):
            out.append(0)
            continue
        hits = [p for j, p in enumerate(ps) if ls[j] == 1 and ls[j - 1] == 0]
        if len(hits) > 1:
            warnings.warn(
                f"axis {a}: {len(hits)} label transitions observed; taking the first",
                stacklevel=3,
            )
        out.append(hits[0])
    return tuple(out)


def estimate_transitions(sample: LabeledSample, params: Params) -> tuple[int, ...]:
    """Empirical interval start per axis (see module docstring)."""
    return _transitions_from_lists(sample.axes, sample.positions, sample.labels, params)


def estimate_transitions_batch(
    axes: np.ndarray, positions: np.ndarray, labels: np.ndarray, params: Params
) -> np.ndarray:
    """Vectorized ``estimate_transitions`` over a (B, n) batch of samples.

    Matches the reference implementation exactly; equality is property-tested.
    Returns an int64 array of shape (B, d).
    """
    b, n = axes.shape
    d, k = params.d, params.k
    if n == 0:
        return np.zeros((b, d), dtype=np.int64)
    rows = np.repeat(np.arange(b, dtype=np.int64), n)
    keys = (rows * d + axes.ravel()) * k + (positions.ravel() % k)
    uk, first = np.unique(keys, return_index=True)
    lab = labels.ravel()[first].astype(np.int8)
    pos = uk % k
    gid = uk // k

    starts = np.flatnonzero(np.r_[True, gid[1:] != gid[:-1]])
    ends = np.r_[starts[1:], len(uk)]
    prev = np.empty_like(lab)
    prev[1:] = lab[:-1]
    prev[starts] = lab[ends - 1]

    trans = (lab == 1) & (prev == 0)
    t_idx = np.flatnonzero(trans)
    uniq_g, first_t = np.unique(gid[t_idx], return_index=True)
    if len(t_idx) > len(uniq_g):
        warnings.warn(
            f"{len(t_idx) - len(uniq_g)} extra label transitions in batch; taking the first per axis",
            stacklevel=2,
        )
    out = np.zeros(b * d, dtype=np.int64)
    out[uniq_g] = pos[t_idx[first_t]]
    return out.reshape(b, d)


def _offset_stream(d: int, radius: int, coord_cap: int):
    """All offset vectors with l1 norm <= radius, lexicographic order."""
    if d == 0:
        yield ()
        return
    c = min(coord_cap, radius)
    for v in range(-c, c + 1):
        for rest in _offset_stream(d - 1, radius - abs(v), coord_cap):
            yield (v,) + rest


@lru_cache(maxsize=64)
def _ball_offsets(d: int, radius: int, k: int) -> np.ndarray:
    arr = np.array(list(_offset_stream(d, radius, k // 2)), dtype=np.int64)
    arr.setflags(write=False)
    return arr


def _check_ball_cap(params: Params, radius: int, cap: int) -> int:
    size = wrap_ball_count(params.d, radius, params.k)
    if size > cap:
        raise ResourceLimitError(
            f"acceptance ball has {size} members; raise the cap (currently {cap}) to proceed"
        )
    return size


def enumerate_acceptance_ball(center, radius: int, params: Params, cap: int = DEFAULT_BALL_CAP):
    """Yield ball members around ``center`` in lexicographic offset order.

    The ball always contains its center (offset zero).  Estimated size is
    checked against ``cap`` before any enumeration happens.
    """
    _check_ball_cap(params, radius, cap)
    k = params.k
    for off in _offset_stream(params.d, radius, k // 2):
        yield tuple((c + o) % k for c, o in zip(center, off))


def _lex_smallest(rows: np.ndarray) -> int:
    """Index of the lexicographically smallest row (few rows; plain scan)."""
    best = 0
    for i in range(1, len(rows)):
        if tuple(rows[i]) < tuple(rows[best]):
            best = i
    return best


def _argmin_streaming(center, params: Params, key: SharedKey, radius: int):
    """Ball argmin without materializing offsets; used past the array limit."""
    k = params.k
    best = None
    for off in _offset_stream(params.d, radius, k // 2):
        cand = tuple((c + o) % k for c, o in zip(center, off))
        cols = [np.array([c], dtype=np.uint64) for c in cand]
        pr = int(priority_columns(np.uint64(key.lo), np.uint64(key.hi), cols)[0])
        item = (pr, cand)
        if best is None or item < best:
            best = item
    return best[1]


def replicable_learn_batch(
    centers: np.ndarray,
    params: Params,
    keys_lo: np.ndarray,
    keys_hi: np.ndarray,
    radius: int | None = None,
    ball_cap: int = DEFAULT_BALL_CAP,
) -> np.ndarray:
    """Priority argmin over the acceptance ball for a batch of centers.

    ``centers`` is (B, d); ``keys_lo``/``keys_hi`` are (B,) uint64 halves of
    each trial's shared key.  Returns (B, d) chosen indices.  Ties on the
    64-bit priority are broken toward the lexicographically smallest index.
    """
    k = params.k
    radius = params.radius if radius is None else radius
    size = _check_ball_cap(params, radius, ball_cap)
    if size > _MATERIALIZE_LIMIT:
        out = np.empty((centers.shape[0], params.d), dtype=np.int64)
        for i in range(centers.shape[0]):
            key = SharedKey((int(keys_hi[i]) << 64) | int(keys_lo[i]))
            out[i] = _argmin_streaming(tuple(centers[i]), params, key, radius)
        return out
    offsets = _ball_offsets(params.d, radius, k)
    bsz = centers.shape[0]
    out = np.empty((bsz, params.d), dtype=np.int64)
    chunk = max(1, _MATERIALIZE_LIMIT // max(1, size))
    lo = np.asarray(keys_lo, dtype=np.uint64)
    hi = np.asarray(keys_hi, dtype=np.uint64)
    for s in range(0, bsz, chunk):
        e = min(bsz, s + chunk)
        cols = [
            ((centers[s:e, j, None] + offsets[None, :, j]) % k).astype(np.uint64)
            for j in range(params.d)
        ]
        pr = priority_columns(lo[s:e, None], hi[s:e, None], cols)
        amin = np.argmin(pr, axis=1)
        rows = np.arange(e - s)
        pick = offsets[amin]
        ties = (pr == pr[rows, amin][:, None]).sum(axis=1)
        for r in np.flatnonzero(ties > 1):
            tied = np.flatnonzero(pr[r] == pr[r, amin[r]])
            members = (centers[s + r] + offsets[tied]) % k
            pick[r] = offsets[tied[_lex_smallest(members)]]
        out[s:e] = (centers[s:e] + pick) % k
    return out


def replicable_learn(
    sample: LabeledSample,
    params: Params,
    key: SharedKey,
    ball_cap: int = DEFAULT_BALL_CAP,
) -> tuple[int, ...]:
    """Output of the derandomized learner on one sample under one key."""
    center = estimate_transitions(sample, params)
    return learn_from_transitions(center, params, key, ball_cap)


def learn_from_transitions(
    center, params: Params, key: SharedKey, ball_cap: int = DEFAULT_BALL_CAP
) -> tuple[int, ...]:
    """Rounding stage alone: ball argmin around an already-estimated center."""
    radius = params.radius
    centers = np.asarray(center, dtype=np.int64)[None, :]
    lo = np.array([key.lo], dtype=np.uint64)
    hi = np.array([key.hi], dtype=np.uint64)
    out = replicable_learn_batch(centers, params, lo, hi, radius, ball_cap)
    return tuple(int(x) for x in out[0])


@dataclass(frozen=True)
class ModeResult:
    """Exact output distribution of the learner for one target hypothesis."""

    target: tuple[int, ...]
    distribution: dict
    mode_labeling: tuple[int, ...]
    mode_probability: Fraction


def exact_mode(params: Params, target, key: SharedKey) -> ModeResult:
    """Exact learner output law over all (d*k)^n equiprobable ordered samples.

    Gated at (d*k)^n <= 10^7.  The distribution maps full labelings (bit
    tuples over X in axis-major order) to exact rational probabilities; the
    mode breaks probability ties toward the lexicographically smallest
    labeling.
    """
    d, k, n = params.d, params.k, params.n
    dk = d * k
    if dk**n > 10**7:
        raise ResourceLimitError(f"(d*k)^n = {dk**n} exceeds the 10^7 exact-mode gate")
    point_axis = [p // k for p in range(dk)]
    point_pos = [p % k for p in range(dk)]
    point_label = [
        int((point_pos[p] - target[point_axis[p]]) % k < params.half_length) for p in range(dk)
    ]
    center_counts: dict[tuple[int, ...], int] = {}
    for sample in itertools.product(range(dk), repeat=n):
        axes = [point_axis[p] for p in sample]
        pos = [point_pos[p] for p in sample]
        labs = [point_label[p] for p in sample]
        b = _transitions_from_lists(axes, pos, labs, params)
        center_counts[b] = center_counts.get(b, 0) + 1
    total = dk**n
    distribution: dict[tuple[int, ...], Fraction] = {}
    for b, count in center_counts.items():
        out = learn_from_transitions(b, params, key)
        f = labeling_of(out, params)
        distribution[f] = distribution.get(f, Fraction(0)) + Fraction(count, total)
    mode = min(((-p, f) for f, p in distribution.items()))
    return ModeResult(
        target=tuple(int(x) for x in target),
        distribution=distribution,
        mode_labeling=mode[1],
        mode_probability=-mode[0],
    )


@dataclass
class ModeClasses:
    """Partition of accurate hypotheses by the mode of the learner's output."""

    params: Params
    class_map: dict
    modes: dict
    retained: list
    dropped: list

    def class_sizes(self) -> dict:
        return {f: len(v) for f, v in self.class_map.items()}

    def size_bound_report(self) -> dict:
        """Check sizes against (6 eps k)^d where that bound applies.

        The bound is only claimed for eps*k >= 2 and d >= 8; outside that
        regime the report carries the numbers with ``ok`` set to None.
        """
        p = self.params
        bound = (6 * p.epsilon * p.k) ** p.d
        gated = p.epsilon * p.k >= 2 and p.d >= 8
        max_size = max((len(v) for v in self.class_map.values()), default=0)
        return {
            "bound": bound,
            "gated": gated,
            "max_class_size": max_size,
            "ok": (max_size <= bound) if gated else None,
        }


def build_mode_classes(params: Params, key: SharedKey) -> ModeClasses:
    """Group every hypothesis by its learner mode; keep the accurate ones.

    A hypothesis u is retained when its mode labeling disagrees with u on at
    most an epsilon fraction of X (compared exactly in rationals).  Gated at
    k^d <= 10^4 targets.
    """
    d, k = params.d, params.k
    if k**d > 10**4:
        raise ResourceLimitError(f"k^d = {k**d} exceeds the 10^4 mode-classes gate")
    eps = Fraction(params.epsilon)
    class_map: dict[tuple[int, ...], list] = {}
    modes: dict[tuple[int, ...], tuple[int, ...]] = {}
    retained, dropped = [], []
    for u in itertools.product(range(k), repeat=d):
        res = exact_mode(params, u, key)
        f = res.mode_labeling
        modes[u] = f
        g = labeling_of(u, params)
        disagreements = sum(1 for x, y in zip(f, g) if x != y)
        if Fraction(disagreements, d * k) <= eps:
            retained.append(u)
            class_map.setdefault(f, []).append(u)
        else:
            dropped.append(u)
    return ModeClasses(params=params, class_map=class_map, modes=modes, retained=retained, dropped=dropped)
