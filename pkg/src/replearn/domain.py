"""Problem domain: wrap-around interval hypotheses on [d] x Z_k.

The instance space is X = [d] x Z_k (axis, position), with d axes and a prime
cycle length k.  A hypothesis is indexed by a d-vector i over Z_k and labels
point (a, b) positive exactly when (b - i_a) mod k < floor(k/2), i.e. each
axis carries a half-cycle interval starting at i_a.  The data distribution is
uniform over X throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

Point = tuple[int, int]
HypothesisIndex = tuple[int, ...]


def is_prime(m: int) -> bool:
    """Deterministic trial-division primality check (fine at this scale)."""
    if m < 2:
        return False
    if m % 2 == 0:
        return m == 2
    f = 3
    while f * f <= m:
        if m % f == 0:
            return False
        f += 2
    return True


def choose_prime_k(target: int) -> int:
    """Smallest prime >= max(3, target).

    The result is always < 2 * max(3, target) (Bertrand), so a doubling
    search is never needed.
    """
    m = max(3, int(target))
    while not is_prime(m):
        m += 1
    return m


@dataclass(frozen=True)
class Params:
    """Instance parameters shared across the learner and the harness.

    ``epsilon`` is the accuracy target, ``rho`` the replicability target,
    ``delta`` the failure budget, ``n`` the sample size.  ``radius_fraction``
    scales the acceptance-ball radius (default 1/4 of epsilon*k*d) and
    ``beta_constant`` scales the transition-accuracy recipe; both are exposed
    knobs rather than hard-coded constants.
    """

    d: int
    k: int
    epsilon: float
    rho: float
    delta: float
    n: int
    beta_constant: float = 1.0
    radius_fraction: float = 0.25

    def __post_init__(self):
        if self.d < 1:
            raise UsageError(f"d must be >= 1, got {self.d}")
        if self.k < 3 or not is_prime(self.k):
            raise UsageError(f"k must be a prime >= 3, got {self.k}")
        for name in ("epsilon", "rho", "delta"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise UsageError(f"{name} must lie in (0, 1), got {v}")
        if self.n < 0:
            raise UsageError(f"n must be >= 0, got {self.n}")
        if self.beta_constant <= 0:
            raise UsageError(f"beta_constant must be positive, got {self.beta_constant}")
        if not (0.0 < self.radius_fraction <= 1.0):
            raise UsageError(
                f"radius_fraction must lie in (0, 1], got {self.radius_fraction}"
            )

    @property
    def half_length(self) -> int:
        """Interval length floor(k/2); the number of positive positions per axis."""
        return self.k // 2

    @property
    def domain_size(self) -> int:
        return self.d * self.k

    @property
    def radius(self) -> int:
        """Acceptance-ball radius floor(epsilon * k * d * radius_fraction)."""
        return math.floor(self.epsilon * self.k * self.d * self.radius_fraction)


def wrap_distance(x: int, y: int, k: int) -> int:
    """Cyclic distance min((x-y) mod k, (y-x) mod k)."""
    t = (x - y) % k
    return min(t, k - t)


def tuple_distance(u, v, k: int) -> int:
    """Coordinatewise sum of wrap distances (the metric called nu here)."""
    if len(u) != len(v):
        raise UsageError(f"length mismatch: {len(u)} vs {len(v)}")
    return sum(wrap_distance(a, b, k) for a, b in zip(u, v))


def evaluate_hypothesis(index, point: Point, params: Params) -> int:
    """Label of ``point`` under the hypothesis at ``index`` (0 or 1)."""
    a, b = point
    if not (0 <= a < params.d):
        raise UsageError(f"axis {a} outside [0, {params.d})")
    return int((b - index[a]) % params.k < params.half_length)


def evaluate_batch(index, axes: np.ndarray, positions: np.ndarray, params: Params) -> np.ndarray:
    """Vectorized labels of (axes, positions) arrays under one hypothesis."""
    start = np.asarray(index, dtype=np.int64)[axes]
    return ((positions - start) % params.k < params.half_length).astype(np.int8)


def labeling_of(index, params: Params) -> tuple[int, ...]:
    """Full labeling as a bit tuple over X in axis-major order.

    Position (a, b) sits at flat slot a*k + b.  This is the canonical key
    used by the mode machinery; every hypothesis has exactly d*floor(k/2)
    ones, and distinct indices give distinct labelings.
    """
    k, m = params.k, params.half_length
    bits = []
    for a in range(params.d):
        s = index[a] % k
        row = [0] * k
        for t in range(m):
            row[(s + t) % k] = 1
        bits.extend(row)
    return tuple(bits)


def exact_error(u, v, params: Params) -> float:
    """Disagreement mass between two hypotheses under the uniform distribution.

    Two half-cycle intervals at offset t disagree on 2*min(t, k-t) positions,
    so the error is 2*nu(u, v) / (k*d) exactly.
    """
    return 2 * tuple_distance(u, v, params.k) / (params.k * params.d)


def error_vs_labeling(f, u, params: Params) -> float:
    """Disagreement mass between an arbitrary labeling and hypothesis ``u``.

    ``f`` is a bit sequence over X in the same axis-major order as
    ``labeling_of``.
    """
    if len(f) != params.domain_size:
        raise UsageError(f"labeling has length {len(f)}, expected {params.domain_size}")
    g = labeling_of(u, params)
    return sum(1 for x, y in zip(f, g) if x != y) / params.domain_size


@dataclass(frozen=True)
class LabeledSample:
    """Ordered training set held as parallel arrays (axes, positions, labels)."""

    axes: np.ndarray
    positions: np.ndarray
    labels: np.ndarray
    k: int = field(default=0)  # retained for repr/debugging only

    def __post_init__(self):
        if not (len(self.axes) == len(self.positions) == len(self.labels)):
            raise UsageError("axes, positions, labels must have equal length")

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def points(self) -> list[tuple[Point, int]]:
        """The sample as an ordered list of ((axis, position), label) pairs."""
        return [
            ((int(a), int(b)), int(y))
            for a, b, y in zip(self.axes, self.positions, self.labels)
        ]

    @classmethod
    def from_points(cls, pairs, k: int = 0) -> "LabeledSample":
        axes = np.array([p[0][0] for p in pairs], dtype=np.int64)
        pos = np.array([p[0][1] for p in pairs], dtype=np.int64)
        labels = np.array([p[1] for p in pairs], dtype=np.int8)
        return cls(axes, pos, labels, k)

    @classmethod
    def labeled_by(cls, target, axes, positions, params: Params) -> "LabeledSample":
        """Sample with labels computed from ``target`` (consistent by construction)."""
        axes = np.asarray(axes, dtype=np.int64)
        positions = np.asarray(positions, dtype=np.int64)
        labels = evaluate_batch(target, axes, positions, params)
        return cls(axes, positions, labels, params.k)

    def verify_labels(self, target, params: Params) -> bool:
        """True when every label matches the target hypothesis."""
        want = evaluate_batch(target, self.axes, self.positions, params)
        return bool(np.array_equal(want, self.labels))


def sample_training_set(params: Params, target, rng: np.random.Generator) -> LabeledSample:
    """n i.i.d. uniform points of X labeled by the target hypothesis."""
    axes = rng.integers(0, params.d, size=params.n, dtype=np.int64)
    positions = rng.integers(0, params.k, size=params.n, dtype=np.int64)
    return LabeledSample.labeled_by(target, axes, positions, params)


def sample_training_batch(
    params: Params, targets: np.ndarray, rng: np.random.Generator, n: int | None = None
):
    """Batch of training sets, one per row of ``targets``.

    Returns (axes, positions, labels) arrays of shape (B, n).  Used by the
    harness hot paths; semantically one ``sample_training_set`` per row.
    """
    b = targets.shape[0]
    n = params.n if n is None else n
    axes = rng.integers(0, params.d, size=(b, n), dtype=np.int64)
    positions = rng.integers(0, params.k, size=(b, n), dtype=np.int64)
    start = np.take_along_axis(targets, axes, axis=1)
    labels = ((positions - start) % params.k < params.half_length).astype(np.int8)
    return axes, positions, labels
