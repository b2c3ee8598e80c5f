"""Monte Carlo experiment runner for the replicable interval learner.

Runs paired learner executions with shared keys over derived substreams,
estimates the disagreement rate and the exact-error profile, sweeps
parameter grids into CSV, and provides the sample-size recipe helpers.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import isotonic_regression

from .domain import Params, choose_prime_k, tuple_distance
from .errors import ResourceLimitError, UsageError
from .learner import (
    DEFAULT_BALL_CAP,
    SharedKey,
    estimate_transitions_batch,
    replicable_learn_batch,
)
from .rng import (
    ROLE_KEY,
    ROLE_SAMPLE1,
    ROLE_SAMPLE2,
    ROLE_TARGET,
    substream,
)
from .stats import wilson_interval

CSV_HEADER = (
    "d,k,epsilon,rho_target,delta,n,radius,trials,rho_hat,rho_lo,rho_hi,"
    "err_rate,mean_err,median_err,ball_cap_hits,master_seed"
)

# Trials per vectorized block inside run_replication_experiment.
TRIAL_CHUNK = 256


def replication_beta(params: Params) -> float:
    """Off-boundary mass parameter from the replicability recipe.

    beta = beta_constant * min(eps*rho / sqrt(d*ln(2/rho)), eps*rho / ln(4/rho)).
    """
    e, r, d = params.epsilon, params.rho, params.d
    return params.beta_constant * min(
        e * r / math.sqrt(d * math.log(2 / r)),
        e * r / math.log(4 / r),
    )


def suggested_sample_size(params: Params, c_n: float = 1.0) -> int:
    """Sample-size recipe n = ceil(c_n * d * ln(d/rho) / beta)."""
    beta = replication_beta(params)
    return math.ceil(c_n * params.d * math.log(params.d / params.rho) / beta)


@dataclass(frozen=True)
class ExperimentConfig:
    """A replication experiment: base parameters plus optional sweep axes."""

    params: Params
    trials: int = 100
    master_seed: int = 0
    out: str | None = None
    sweep_n: tuple[int, ...] = ()
    sweep_epsilon: tuple[float, ...] = ()
    sweep_rho: tuple[float, ...] = ()
    sweep_d: tuple[int, ...] = ()
    sweep_k: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise UsageError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.master_seed < 2**64:
            raise UsageError("master_seed must fit in 64 bits")

    def grid(self) -> list[Params]:
        """All grid points, rightmost axis (n) varying fastest.

        Empty sweep axes default to the base parameter value; sweep_k
        entries are targets rounded up to the next usable prime.
        """
        base = self.params
        ds = self.sweep_d or (base.d,)
        ks = tuple(choose_prime_k(t) for t in self.sweep_k) or (base.k,)
        eps = self.sweep_epsilon or (base.epsilon,)
        rhos = self.sweep_rho or (base.rho,)
        ns = self.sweep_n or (base.n,)
        return [
            replace(base, d=d, k=k, epsilon=e, rho=r, n=n)
            for d, k, e, r, n in itertools.product(ds, ks, eps, rhos, ns)
        ]


_PARAM_KEYS = {
    "d": int,
    "k": int,
    "epsilon": float,
    "rho": float,
    "delta": float,
    "n": int,
    "beta_constant": float,
    "radius_fraction": float,
}
_CONFIG_KEYS = {
    "trials": int,
    "master_seed": int,
    "out": str,
}
_SWEEP_KEYS = {
    "sweep_n": int,
    "sweep_epsilon": float,
    "sweep_rho": float,
    "sweep_d": int,
    "sweep_k": int,
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat key=value lines into an ExperimentConfig.

    Blank lines and '#' comments are skipped; unknown keys are rejected.
    Required keys: d, k, epsilon, rho, n.  delta defaults to 0.05.  Sweep
    values are comma-separated.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key in values:
            raise UsageError(f"line {lineno}: duplicate key {key!r}")
        known = key in _PARAM_KEYS or key in _CONFIG_KEYS or key in _SWEEP_KEYS
        if not known:
            raise UsageError(f"line {lineno}: unknown key {key!r}")
        values[key] = val.strip()

    missing = [k for k in ("d", "k", "epsilon", "rho", "n") if k not in values]
    if missing:
        raise UsageError(f"missing required keys: {', '.join(missing)}")

    def convert(key, conv, raw):
        try:
            return conv(raw)
        except ValueError as exc:
            raise UsageError(f"key {key!r}: cannot parse {raw!r}") from exc

    pkw = {}
    for key, conv in _PARAM_KEYS.items():
        if key in values:
            pkw[key] = convert(key, conv, values[key])
    pkw.setdefault("delta", 0.05)
    params = Params(**pkw)

    ckw = {}
    for key, conv in _CONFIG_KEYS.items():
        if key in values:
            ckw[key] = convert(key, conv, values[key])
    for key, conv in _SWEEP_KEYS.items():
        if key in values:
            parts = [p for p in values[key].split(",") if p.strip()]
            ckw[key] = tuple(convert(key, conv, p.strip()) for p in parts)
    return ExperimentConfig(params=params, **ckw)


@dataclass(frozen=True)
class ReplicationReport:
    """Aggregate outcome of paired learner runs at one parameter point."""

    params: Params
    trials: int
    master_seed: int
    disagreements: int
    rho_hat: float
    rho_lo: float
    rho_hi: float
    err_rate: float
    mean_err: float
    median_err: float
    ball_cap_hits: int = 0
    agreements: np.ndarray | None = field(default=None, repr=False)
    errors: np.ndarray | None = field(default=None, repr=False)

    def csv_row(self) -> str:
        p = self.params
        cells = [
            str(p.d),
            str(p.k),
            _fmt(p.epsilon),
            _fmt(p.rho),
            _fmt(p.delta),
            str(p.n),
            str(p.radius),
            str(self.trials),
            _fmt(self.rho_hat),
            _fmt(self.rho_lo),
            _fmt(self.rho_hi),
            _fmt(self.err_rate),
            _fmt(self.mean_err),
            _fmt(self.median_err),
            str(self.ball_cap_hits),
            str(self.master_seed),
        ]
        return ",".join(cells)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _errors_batch(outputs: np.ndarray, targets: np.ndarray, params: Params) -> np.ndarray:
    diff = np.abs(outputs - targets)
    nu = np.sum(np.minimum(diff, params.k - diff), axis=1)
    return 2.0 * nu / (params.k * params.d)


def _run_trial_chunk(
    params: Params,
    seed: int,
    start: int,
    stop: int,
    ball_cap: int,
    agreements: np.ndarray,
    errors: np.ndarray,
) -> None:
    """Run trials [start, stop) and write into disjoint output slices."""
    d, k, n = params.d, params.k, params.n
    m = stop - start
    targets = np.zeros((m, d), dtype=np.int64)
    keys_lo = np.zeros(m, dtype=np.uint64)
    keys_hi = np.zeros(m, dtype=np.uint64)
    axes1 = np.zeros((m, n), dtype=np.int64)
    pos1 = np.zeros((m, n), dtype=np.int64)
    axes2 = np.zeros((m, n), dtype=np.int64)
    pos2 = np.zeros((m, n), dtype=np.int64)
    for i in range(m):
        t = start + i
        targets[i] = substream(seed, t, ROLE_TARGET).integers(0, k, size=d)
        key = SharedKey.from_rng(substream(seed, t, ROLE_KEY))
        keys_lo[i], keys_hi[i] = key.lo, key.hi
        g1 = substream(seed, t, ROLE_SAMPLE1)
        axes1[i] = g1.integers(0, d, size=n)
        pos1[i] = g1.integers(0, k, size=n)
        g2 = substream(seed, t, ROLE_SAMPLE2)
        axes2[i] = g2.integers(0, d, size=n)
        pos2[i] = g2.integers(0, k, size=n)

    labels1 = (
        (pos1 - np.take_along_axis(targets, axes1, axis=1)) % k
        < params.half_length
    ).astype(np.int64)
    labels2 = (
        (pos2 - np.take_along_axis(targets, axes2, axis=1)) % k
        < params.half_length
    ).astype(np.int64)

    centers1 = estimate_transitions_batch(axes1, pos1, labels1, params)
    centers2 = estimate_transitions_batch(axes2, pos2, labels2, params)
    out1 = replicable_learn_batch(centers1, params, keys_lo, keys_hi,
                                  ball_cap=ball_cap)
    out2 = replicable_learn_batch(centers2, params, keys_lo, keys_hi,
                                  ball_cap=ball_cap)

    agreements[start:stop] = np.all(out1 == out2, axis=1)
    errors[2 * start : 2 * stop : 2] = _errors_batch(out1, targets, params)
    errors[2 * start + 1 : 2 * stop : 2] = _errors_batch(out2, targets, params)


def run_replication_experiment(
    config: ExperimentConfig,
    ball_cap: int = DEFAULT_BALL_CAP,
    threads: int = 1,
) -> ReplicationReport:
    """Paired learner runs with shared keys; disagreement and error stats.

    Per trial: a uniform target index, a fresh shared key, and two
    independent samples, all from substreams of (master_seed, trial, role).
    The learner runs once per sample with the same key; the trial's
    agreement bit compares the two output tuples exactly.  Chunks of trials
    are independent and run on a thread pool when threads > 1; results are
    identical either way because every trial derives its own streams.
    """
    params = config.params
    trials = config.trials
    seed = config.master_seed
    if threads < 1:
        raise UsageError(f"threads must be >= 1, got {threads}")

    agreements = np.zeros(trials, dtype=bool)
    errors = np.zeros(2 * trials, dtype=np.float64)
    spans = [
        (start, min(start + TRIAL_CHUNK, trials))
        for start in range(0, trials, TRIAL_CHUNK)
    ]
    if threads == 1 or len(spans) == 1:
        for start, stop in spans:
            _run_trial_chunk(params, seed, start, stop, ball_cap,
                             agreements, errors)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_run_trial_chunk, params, seed, start, stop,
                            ball_cap, agreements, errors)
                for start, stop in spans
            ]
            for future in futures:
                future.result()

    disagreements = int(trials - np.count_nonzero(agreements))
    rho_hat = disagreements / trials
    rho_lo, rho_hi = wilson_interval(disagreements, trials)
    err_rate = float(np.mean(errors > params.epsilon))
    return ReplicationReport(
        params=params,
        trials=trials,
        master_seed=seed,
        disagreements=disagreements,
        rho_hat=rho_hat,
        rho_lo=rho_lo,
        rho_hi=rho_hi,
        err_rate=err_rate,
        mean_err=float(np.mean(errors)),
        median_err=float(np.median(errors)),
        ball_cap_hits=0,
        agreements=agreements,
        errors=errors,
    )


def _cap_hit_row(params: Params, trials: int, seed: int) -> str:
    cells = [
        str(params.d),
        str(params.k),
        _fmt(params.epsilon),
        _fmt(params.rho),
        _fmt(params.delta),
        str(params.n),
        str(params.radius),
        str(trials),
        "nan",
        "nan",
        "nan",
        "nan",
        "nan",
        "nan",
        str(trials),
        str(seed),
    ]
    return ",".join(cells)


def sweep_experiments(
    config: ExperimentConfig,
    out_path: str | None = None,
    resume: bool = False,
    ball_cap: int = DEFAULT_BALL_CAP,
    threads: int = 1,
) -> list[str]:
    """One replication row per grid point, written incrementally.

    Every point runs with the shared master seed, so a one-point grid
    reproduces run_replication_experiment exactly and reruns are
    byte-identical.  Points whose acceptance ball exceeds the cap are
    recorded as full-cap rows with nan statistics instead of aborting the
    sweep.  With resume=True, an existing output file's complete rows are
    kept and the sweep continues after them.
    """
    points = config.grid()
    path = out_path if out_path is not None else config.out

    done = 0
    handle = None
    if path is not None:
        if resume and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                lines = fh.read().splitlines()
            if not lines or lines[0] != CSV_HEADER:
                raise UsageError(
                    f"cannot resume {path}: header does not match the schema"
                )
            done = len([ln for ln in lines[1:] if ln])
            if done > len(points):
                raise UsageError(
                    f"cannot resume {path}: has {done} rows for a "
                    f"{len(points)}-point grid"
                )
            handle = open(path, "a", encoding="utf-8")
        else:
            handle = open(path, "w", encoding="utf-8")
            handle.write(CSV_HEADER + "\n")
            handle.flush()

    rows: list[str] = []
    try:
        for index, point in enumerate(points):
            if index < done:
                continue
            point_config = replace(config, params=point,
                                   sweep_n=(), sweep_epsilon=(), sweep_rho=(),
                                   sweep_d=(), sweep_k=())
            try:
                report = run_replication_experiment(point_config, ball_cap=ball_cap,
                                                    threads=threads)
                row = report.csv_row()
            except ResourceLimitError:
                row = _cap_hit_row(point, config.trials, config.master_seed)
            rows.append(row)
            if handle is not None:
                handle.write(row + "\n")
                handle.flush()
    finally:
        if handle is not None:
            handle.close()
    return rows


def trend_violations(
    ns, rho_hats, ci_half_widths
) -> tuple[np.ndarray, bool]:
    """Distance of each point from the best non-increasing fit.

    Fits an isotonic non-increasing curve to rho_hat over n and reports the
    absolute residuals; the trend passes when every residual stays under
    twice that point's confidence half-width.
    """
    ns = np.asarray(ns, dtype=np.float64)
    if np.any(np.diff(ns) <= 0):
        raise UsageError("sample sizes must be strictly increasing")
    y = np.asarray(rho_hats, dtype=np.float64)
    widths = np.asarray(ci_half_widths, dtype=np.float64)
    if y.shape != ns.shape or widths.shape != ns.shape:
        raise UsageError("ns, rho_hats, ci_half_widths must align")
    fit = isotonic_regression(y, increasing=False).x
    residuals = np.abs(fit - y)
    return residuals, bool(np.all(residuals < 2 * widths))
