"""Small statistical helpers used by the verification reports."""

from __future__ import annotations

import numpy as np
from scipy.stats import chi2

from .errors import UsageError

# Standard normal quantile at 0.975; Wilson intervals below are 95% two-sided.
Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise UsageError("wilson_interval needs trials > 0")
    if not 0 <= successes <= trials:
        raise UsageError(f"successes {successes} outside [0, {trials}]")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def tv_distance(counts: np.ndarray, probs: np.ndarray) -> float:
    """Total variation distance between empirical counts and a target law."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise UsageError("tv_distance needs a nonempty sample")
    probs = np.asarray(probs, dtype=np.float64)
    return 0.5 * float(np.abs(counts / total - probs).sum())


def _merge_small_bins(observed, expected, min_expected):
    """Merge adjacent bins until every expected count reaches the floor."""
    obs_out, exp_out = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        if exp_out:
            obs_out[-1] += acc_o
            exp_out[-1] += acc_e
        else:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
    return np.array(obs_out), np.array(exp_out)


def chi_square_gof(
    observed: np.ndarray, probs: np.ndarray, min_expected: float = 5.0
) -> tuple[float, int, float]:
    """Chi-square goodness of fit of counts against a reference law.

    Bins with expected count below ``min_expected`` are merged with their
    neighbors first.  Returns (statistic, dof, p_value); dof 0 (a single
    merged bin) yields p = 1.
    """
    observed = np.asarray(observed, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if observed.shape != probs.shape:
        raise UsageError("observed and probs must align")
    total = observed.sum()
    expected = probs * total
    obs, exp = _merge_small_bins(observed, expected, min_expected)
    dof = len(obs) - 1
    if dof <= 0:
        return 0.0, 0, 1.0
    stat = float(((obs - exp) ** 2 / exp).sum())
    return stat, dof, float(chi2.sf(stat, dof))


def chi_square_independence(table: np.ndarray) -> tuple[float, int, float]:
    """Chi-square test of independence on a 2-way contingency table."""
    table = np.asarray(table, dtype=np.float64)
    total = table.sum()
    if total <= 0:
        raise UsageError("empty contingency table")
    row = table.sum(axis=1, keepdims=True)
    col = table.sum(axis=0, keepdims=True)
    expected = row @ col / total
    mask = expected > 0
    stat = float(((table - expected)[mask] ** 2 / expected[mask]).sum())
    dof = (np.count_nonzero(row) - 1) * (np.count_nonzero(col) - 1)
    if dof <= 0:
        return 0.0, 0, 1.0
    return stat, dof, float(chi2.sf(stat, dof))
