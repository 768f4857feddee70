"""Directed-graph modularity and its greedy agglomerative maximization.

Modularity of a partition of a digraph with m edges:

    Q = (1/m) * sum_ij [ A_ij - k_i_in * k_j_out / m ] * delta(c_i, c_j)

Working with edge fractions E = A/m and per-node fractions
ain = in-degree/m, aout = out-degree/m this becomes

    Q = sum_over_modules ( E_cc - Ain_c * Aout_c )

where E_cc is the fraction of edges inside module c and Ain_c/Aout_c the
summed node fractions.  The maximizer is approximated greedily: start with
one module per node and repeatedly apply the merge with the largest positive
ΔQ until none remains.  This is the hot inner loop of the retina descriptor
(called once per evaluation), so the merge loop is JIT-compiled with numba
when available; the same function body runs as plain Python otherwise.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def _greedy_merge(E: np.ndarray, ain: np.ndarray, aout: np.ndarray, labels: np.ndarray) -> float:
    """Merge modules in-place until no positive ΔQ remains; return final Q.

    ``E`` is the module-pair edge-fraction matrix (modified in place),
    ``ain``/``aout`` the per-module degree fractions, ``labels`` the
    node → module assignment (updated as modules merge).
    """
    n = E.shape[0]
    active = np.ones(n, dtype=np.bool_)
    q = 0.0
    for i in range(n):
        q += E[i, i] - ain[i] * aout[i]
    while True:
        best = 0.0
        bi = -1
        bj = -1
        for i in range(n):
            if not active[i]:
                continue
            for j in range(i + 1, n):
                if not active[j]:
                    continue
                delta = E[i, j] + E[j, i] - ain[i] * aout[j] - ain[j] * aout[i]
                if delta > best:
                    best = delta
                    bi = i
                    bj = j
        if bi < 0:
            break
        E[bi, bi] += E[bj, bj] + E[bi, bj] + E[bj, bi]
        for k in range(n):
            if active[k] and k != bi and k != bj:
                E[bi, k] += E[bj, k]
                E[k, bi] += E[k, bj]
        ain[bi] += ain[bj]
        aout[bi] += aout[bj]
        active[bj] = False
        for k in range(labels.shape[0]):
            if labels[k] == bj:
                labels[k] = bi
        q += best
    return q


def greedy_modularity(adjacency: np.ndarray) -> tuple[float, np.ndarray]:
    """Best partition quality found by greedy merging, plus the partition.

    ``adjacency[i, j]`` nonzero means a directed edge i→j.  An edgeless graph
    has modularity 0 by definition (the formula's 1/m is otherwise undefined
    and such graphs have no modular structure).  Returns ``(Q, labels)`` with
    labels renumbered 0..k-1 in first-appearance order.
    """
    A = np.asarray(adjacency, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {A.shape}")
    n = A.shape[0]
    m = A.sum()
    labels = np.arange(n, dtype=np.int64)
    if m == 0 or n == 0:
        return 0.0, labels
    E = A / m
    ain = E.sum(axis=0)
    aout = E.sum(axis=1)
    q = float(_greedy_merge(E, ain, aout, labels))
    # canonical renumbering so equal partitions compare equal
    remap: dict[int, int] = {}
    out = np.empty(n, dtype=np.int64)
    for i, lab in enumerate(labels):
        out[i] = remap.setdefault(int(lab), len(remap))
    return q, out


def partition_modularity(adjacency: np.ndarray, labels: np.ndarray) -> float:
    """Q of a given partition; the direct formula, used as the test oracle's scorer."""
    A = np.asarray(adjacency, dtype=float)
    m = A.sum()
    if m == 0:
        return 0.0
    labels = np.asarray(labels)
    q = 0.0
    kin = A.sum(axis=0)
    kout = A.sum(axis=1)
    for mod in np.unique(labels):
        members = labels == mod
        q += A[np.ix_(members, members)].sum() / m
        q -= (kin[members].sum() / m) * (kout[members].sum() / m)
    return float(q)
