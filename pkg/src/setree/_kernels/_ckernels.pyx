# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled enumeration kernels; see ``_pykernels`` for the reference logic."""
import numpy as np

from libc.math cimport log2, NAN
from libc.stdlib cimport malloc, free


cdef double _two_level_si(const long* labels, long n, long n_blocks,
                          const double* degree, const long* src, const long* dst,
                          const double* weight, long n_edges, double total,
                          double* vol, double* inner) noexcept nogil:
    cdef long i, b, e
    cdef double si = 0.0, cut
    for b in range(n_blocks):
        vol[b] = 0.0
        inner[b] = 0.0
    for i in range(n):
        vol[labels[i]] += degree[i]
    for e in range(n_edges):
        b = labels[src[e]]
        if b == labels[dst[e]]:
            inner[b] += 2.0 * weight[e]
    for b in range(n_blocks):
        if vol[b] > 0.0:
            cut = vol[b] - inner[b]
            if cut > 0.0:
                si -= cut / total * log2(vol[b] / total)
    for i in range(n):
        if degree[i] > 0.0:
            si -= degree[i] / total * log2(degree[i] / vol[labels[i]])
    return si


def two_level_si(labels, long n_blocks, degree, src, dst, weight, double total):
    cdef const long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef const double[::1] deg = np.ascontiguousarray(degree, dtype=np.float64)
    cdef const long[::1] s = np.ascontiguousarray(src, dtype=np.int64)
    cdef const long[::1] d = np.ascontiguousarray(dst, dtype=np.int64)
    cdef const double[::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef double[::1] vol = np.zeros(max(n_blocks, 1))
    cdef double[::1] inner = np.zeros(max(n_blocks, 1))
    cdef long n_edges = s.shape[0]
    return _two_level_si(&lab[0], lab.shape[0], n_blocks, &deg[0],
                         &s[0] if n_edges else NULL, &d[0] if n_edges else NULL,
                         &w[0] if n_edges else NULL, n_edges, total, &vol[0], &inner[0])


def best_two_level_partition(long n, degree, src, dst, weight):
    cdef const double[::1] deg = np.ascontiguousarray(degree, dtype=np.float64)
    cdef const long[::1] s = np.ascontiguousarray(src, dtype=np.int64)
    cdef const long[::1] d = np.ascontiguousarray(dst, dtype=np.int64)
    cdef const double[::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef long n_edges = s.shape[0]
    cdef long[::1] a = np.zeros(n, dtype=np.int64)
    cdef long[::1] m = np.zeros(n, dtype=np.int64)
    cdef long[::1] best = np.zeros(n, dtype=np.int64)
    cdef double[::1] vol = np.zeros(n)
    cdef double[::1] inner = np.zeros(n)
    cdef double total = 0.0, si, best_si
    cdef long i, j, visited = 1
    cdef const long* sp = &s[0] if n_edges else NULL
    cdef const long* dp = &d[0] if n_edges else NULL
    cdef const double* wp = &w[0] if n_edges else NULL
    for i in range(n):
        total += deg[i]
    with nogil:
        best_si = _two_level_si(&a[0], n, 1, &deg[0], sp, dp, wp, n_edges, total,
                                &vol[0], &inner[0])
        while True:
            i = n - 1
            while i > 0 and a[i] > m[i - 1]:
                i -= 1
            if i == 0:
                break
            a[i] += 1
            m[i] = m[i - 1] if m[i - 1] > a[i] else a[i]
            for j in range(i + 1, n):
                a[j] = 0
                m[j] = m[i]
            si = _two_level_si(&a[0], n, m[n - 1] + 1, &deg[0], sp, dp, wp, n_edges,
                               total, &vol[0], &inner[0])
            visited += 1
            if si < best_si - 1e-12:
                best_si = si
                for j in range(n):
                    best[j] = a[j]
    return np.asarray(best).copy(), best_si, visited


def subset_conductances(adj):
    cdef const double[:, ::1] A = np.ascontiguousarray(adj, dtype=np.float64)
    cdef long n = A.shape[0]
    cdef long size = 1 << n
    cdef double[::1] deg = np.zeros(n)
    cdef double[::1] vol = np.zeros(size)
    cdef double[::1] cut = np.zeros(size)
    out_arr = np.full(size, np.nan)
    cdef double[::1] out = out_arr
    cdef double total = 0.0, inside, other
    cdef long mask, low, rest, r, j, i
    for i in range(n):
        for j in range(n):
            deg[i] += A[i, j]
        total += deg[i]
    with nogil:
        for mask in range(1, size):
            low = 0
            while not (mask >> low) & 1:
                low += 1
            rest = mask ^ (1 << low)
            inside = 0.0
            r = rest
            j = 0
            while r:
                if r & 1:
                    inside += A[low, j]
                r >>= 1
                j += 1
            vol[mask] = vol[rest] + deg[low]
            cut[mask] = cut[rest] + deg[low] - A[low, low] - 2.0 * inside
            other = total - vol[mask]
            if vol[mask] > 0.0 and other > 0.0:
                out[mask] = cut[mask] / (vol[mask] if vol[mask] < other else other)
    return out_arr
