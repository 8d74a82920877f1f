"""Pure-Python versions of the enumeration kernels.

Each function mirrors ``_ckernels.pyx`` statement for statement so both
backends visit candidates in the same order and break ties identically.
"""
from math import log2

import numpy as np


def two_level_si(labels, n_blocks, degree, src, dst, weight, total):
    """Structural information of root -> blocks -> singleton leaves."""
    vol = [0.0] * n_blocks
    inner = [0.0] * n_blocks
    for i in range(len(labels)):
        vol[labels[i]] += degree[i]
    for e in range(len(src)):
        b = labels[src[e]]
        if b == labels[dst[e]]:
            inner[b] += 2.0 * weight[e]
    si = 0.0
    for b in range(n_blocks):
        if vol[b] > 0.0:
            cut = vol[b] - inner[b]
            if cut > 0.0:
                si -= cut / total * log2(vol[b] / total)
    for i in range(len(labels)):
        if degree[i] > 0.0:
            si -= degree[i] / total * log2(degree[i] / vol[labels[i]])
    return si


def best_two_level_partition(n, degree, src, dst, weight):
    """Exhaustively search set partitions (restricted growth strings) of ``n`` nodes.

    Returns ``(labels, si, visited)`` for the first partition, in enumeration
    order, whose value is within 1e-12 of the minimum.
    """
    degree = [float(x) for x in degree]
    src = [int(x) for x in src]
    dst = [int(x) for x in dst]
    weight = [float(x) for x in weight]
    total = sum(degree)
    a = [0] * n
    m = [0] * n  # m[i] = max(a[0..i])
    best = list(a)
    best_si = two_level_si(a, 1, degree, src, dst, weight, total)
    visited = 1
    while True:
        i = n - 1
        while i > 0 and a[i] > m[i - 1]:
            i -= 1
        if i == 0:
            break
        a[i] += 1
        m[i] = max(m[i - 1], a[i])
        for j in range(i + 1, n):
            a[j] = 0
            m[j] = m[i]
        si = two_level_si(a, m[n - 1] + 1, degree, src, dst, weight, total)
        visited += 1
        if si < best_si - 1e-12:
            best_si = si
            best = list(a)
    return np.array(best, dtype=np.int64), best_si, visited


def subset_conductances(adj):
    """Conductance of every vertex subset encoded as a bitmask.

    Entry ``mask`` is NaN when either side of the cut has zero volume.  Self-loops
    add to volume but never to the cut.
    """
    adj = np.asarray(adj, dtype=np.float64)
    n = adj.shape[0]
    deg = adj.sum(axis=1).tolist()
    rows = adj.tolist()
    total = sum(deg)
    size = 1 << n
    vol = [0.0] * size
    cut = [0.0] * size
    out = np.full(size, np.nan)
    for mask in range(1, size):
        low = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << low)
        inside = 0.0
        row = rows[low]
        r = rest
        while r:
            j = (r & -r).bit_length() - 1
            inside += row[j]
            r ^= 1 << j
        vol[mask] = vol[rest] + deg[low]
        cut[mask] = cut[rest] + deg[low] - row[low] - 2.0 * inside
        other = total - vol[mask]
        if vol[mask] > 0.0 and other > 0.0:
            out[mask] = cut[mask] / min(vol[mask], other)
    return out
