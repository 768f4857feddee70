"""Map-quality metrics against a cross-run reference map, plus Mann-Whitney U.

All four metrics compare one run's dense fitness map ``m`` (NaN = unfilled
cell) against the reference map ``M`` — the cellwise best fitness any run of
any treatment ever achieved:

* global performance — best of m / best of M;
* global reliability — mean of m/M over all reference-valid cells, counting
  unfilled cells of m as 0;
* precision        — the same ratio averaged only over cells m filled;
* coverage         — fraction of ever-filled cells that m filled.

Reference cells whose best-known fitness is ≤ 0 make the ratio m/M
meaningless (0/0, or sign inversion when fitness can be negative, as the
arm's can), so they are excluded from both the numerator and denominator of
reliability and precision; coverage and global performance are unaffected.
The excluded count is surfaced so reports can disclose it.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np


def reference_map(maps: Sequence[np.ndarray]) -> np.ndarray:
    """Cellwise maximum over filled entries; NaN where no map filled the cell."""
    if not maps:
        raise ValueError("need at least one map")
    arrays = [np.asarray(m, dtype=float) for m in maps]
    shape = arrays[0].shape
    for m in arrays:
        if m.shape != shape:
            raise ValueError(f"map shape {m.shape} does not match {shape}")
    stacked = np.stack(arrays)
    with warnings.catch_warnings():
        # cells unfilled in every map are NaN in all contributors; nanmax's
        # all-NaN warning is that exact, intended case
        warnings.simplefilter("ignore", category=RuntimeWarning)
        out = np.nanmax(stacked, axis=0)
    return out


def _valid_reference(M: np.ndarray) -> np.ndarray:
    return np.isfinite(M) & (M > 0)


def excluded_reference_cells(M: np.ndarray) -> int:
    """Reference cells dropped from reliability/precision (fitness ≤ 0)."""
    return int(np.count_nonzero(np.isfinite(M) & ~_valid_reference(M)))


def global_reliability(m: np.ndarray, M: np.ndarray) -> float:
    """Mean of m/M over reference-valid cells; unfilled cells of m count as 0."""
    m, M = _check_pair(m, M)
    valid = _valid_reference(M)
    n = int(valid.sum())
    if n == 0:
        raise ValueError("reference map has no usable (positive-fitness) cells")
    both = valid & np.isfinite(m)
    return float(np.sum(m[both] / M[both]) / n)


def precision(m: np.ndarray, M: np.ndarray) -> Optional[float]:
    """Mean of m/M over the cells m itself filled; None for an empty map
    (averaging over zero cells is undefined, and 0 would look like a bad map
    rather than no map)."""
    m, M = _check_pair(m, M)
    both = _valid_reference(M) & np.isfinite(m)
    n = int(both.sum())
    if n == 0:
        return None
    return float(np.sum(m[both] / M[both]) / n)


def coverage(m: np.ndarray, M: np.ndarray) -> float:
    """Filled cells of m / cells ever filled by anyone (presence, not value)."""
    m, M = _check_pair(m, M)
    attainable = int(np.isfinite(M).sum())
    if attainable == 0:
        raise ValueError("reference map is empty")
    return float(np.isfinite(m).sum() / attainable)


def global_performance(m: np.ndarray, M: np.ndarray) -> Optional[float]:
    """Best fitness in m / best anywhere in M; None for an empty map."""
    m, M = _check_pair(m, M)
    if not np.isfinite(m).any():
        return None
    best_ref = float(np.nanmax(M))
    if best_ref <= 0:
        return None
    return float(np.nanmax(m) / best_ref)


def _check_pair(m, M) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(m, dtype=float)
    M = np.asarray(M, dtype=float)
    if m.shape != M.shape:
        raise ValueError(f"map shape {m.shape} does not match reference {M.shape}")
    return m, M


@dataclass(frozen=True)
class MetricsRecord:
    """The four metrics for one run; absent values are None (empty map)."""

    treatment: str
    seed: int
    global_performance: Optional[float]
    global_reliability: float
    precision: Optional[float]
    coverage: float


def compute_metrics(treatment: str, seed: int, m: np.ndarray, M: np.ndarray) -> MetricsRecord:
    return MetricsRecord(
        treatment=treatment,
        seed=seed,
        global_performance=global_performance(m, M),
        global_reliability=global_reliability(m, M),
        precision=precision(m, M),
        coverage=coverage(m, M),
    )


# ---------------------------------------------------------------------------
# Mann-Whitney U (two-tailed), exact by enumeration for small samples

EXACT_SIZE_LIMIT = 12  # combined |a|+|b| up to which "auto" enumerates exactly


def mann_whitney_u(
    a: Sequence[float], b: Sequence[float], method: str = "auto"
) -> tuple[float, float]:
    """U statistic (for sample ``a``) and two-tailed p.

    Ranks use midranks for ties.  ``method="auto"`` enumerates the exact
    permutation distribution when |a|+|b| ≤ 12 and otherwise applies the
    normal approximation with tie and continuity corrections; "exact" and
    "approx" force a branch (exact works at any size, it just gets slow).
    Two-tailed p is the probability of |U − μ| at least as large as observed.
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if not a or not b:
        raise ValueError("both samples need at least one observation")
    if method not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown method {method!r}")
    n, m = len(a), len(b)
    ranks, tie_sizes = _midranks(a + b)
    u_a = sum(ranks[: len(a)]) - n * (n + 1) / 2.0
    if method == "exact" or (method == "auto" and n + m <= EXACT_SIZE_LIMIT):
        p = (
            _exact_p_tiefree(u_a, n, m)
            if not tie_sizes
            else _exact_p_tied(ranks, n, u_a)
        )
    else:
        p = _approx_p(u_a, n, m, tie_sizes)
    return u_a, min(max(p, math.nextafter(0.0, 1.0)), 1.0)


def _midranks(values: list[float]) -> tuple[list[float], list[int]]:
    """Ranks (1-based, ties averaged) plus the sizes of tie groups > 1."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    tie_sizes = []
    at = 0
    while at < len(order):
        end = at
        while end + 1 < len(order) and values[order[end + 1]] == values[order[at]]:
            end += 1
        mid = (at + end) / 2.0 + 1.0
        for k in range(at, end + 1):
            ranks[order[k]] = mid
        if end > at:
            tie_sizes.append(end - at + 1)
        at = end + 1
    return ranks, tie_sizes


@lru_cache(maxsize=None)
def _u_counts(n: int, m: int) -> tuple[int, ...]:
    """Distribution of U over all C(n+m, n) tie-free arrangements.

    Classical recurrence: the largest observation belongs to either sample,
    contributing m to U when it belongs to the first.
    """
    if n == 0 or m == 0:
        return (1,)
    with_last = _u_counts(n - 1, m)  # largest value in sample a: U gains m
    without = _u_counts(n, m - 1)
    size = n * m + 1
    out = [0] * size
    for u, c in enumerate(with_last):
        out[u + m] += c
    for u, c in enumerate(without):
        out[u] += c
    return tuple(out)


def _exact_p_tiefree(u_obs: float, n: int, m: int) -> float:
    counts = _u_counts(n, m)
    mu = n * m / 2.0
    dist = abs(u_obs - mu)
    total = sum(counts)
    hits = sum(c for u, c in enumerate(counts) if abs(u - mu) >= dist - 1e-9)
    return hits / total


def _exact_p_tied(ranks: list[float], n: int, u_obs: float) -> float:
    """Enumerate all assignments of the pooled (tied) ranks to sample a.

    Doubled ranks are integers, so the comparison is exact arithmetic.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    total_n = len(ranks)
    m = total_n - n
    mu2 = n * m  # 2 * mu
    base2 = n * (n + 1)  # 2 * n(n+1)/2
    obs_dist = abs((sum(doubled[:n]) - base2) - mu2)
    hits = 0
    total = 0
    for combo in itertools.combinations(range(total_n), n):
        u2 = sum(doubled[i] for i in combo) - base2
        total += 1
        if abs(u2 - mu2) >= obs_dist:
            hits += 1
    return hits / total


def _approx_p(u_obs: float, n: int, m: int, tie_sizes: list[int]) -> float:
    N = n + m
    mu = n * m / 2.0
    tie_term = sum(t**3 - t for t in tie_sizes) / (N * (N - 1)) if N > 1 else 0.0
    var = n * m / 12.0 * ((N + 1) - tie_term)
    if var <= 0:  # every observation identical
        return 1.0
    z = (abs(u_obs - mu) - 0.5) / math.sqrt(var)
    if z < 0:
        z = 0.0
    return math.erfc(z / math.sqrt(2.0))
