# cython: language_level=3
"""Compiled kernels for graph traversal and BPR training.

Every function here has a pure-Python twin in ``_pykernels`` with the same
signature and bit-identical results; ``seqrec_audit.kernels`` picks one at
import time.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log1p
from libc.stdlib cimport free, malloc

cnp.import_array()


cdef inline int _bsearch(const int[::1] indices, long lo, long hi, int target) noexcept nogil:
    cdef long mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if indices[mid] < target:
            lo = mid + 1
        else:
            hi = mid
    return lo


def khop(const long long[::1] indptr, const int[::1] indices, int anchor, int k, long cap):
    """Breadth-first k-hop expansion from ``anchor``.

    Returns ``(items, hops)`` ordered by hop, then ascending item index. The
    anchor is never reported. ``cap <= 0`` disables the per-hop cap.
    """
    cdef int n = indptr.shape[0] - 1
    if anchor < 0 or anchor >= n or k < 1:
        return np.empty(0, dtype=np.int32), np.empty(0, dtype=np.int32)

    cdef cnp.ndarray[cnp.int32_t, ndim=1] dist_arr = np.zeros(n, dtype=np.int32)
    cdef int[::1] dist = dist_arr
    cdef list out_items = []
    cdef list out_hops = []
    cdef cnp.ndarray frontier = np.array([anchor], dtype=np.int32)
    cdef int[::1] fr
    cdef int[::1] nxt_view
    cdef int hop, u, v, nf, nn
    cdef long long e
    cdef long added
    cdef cnp.ndarray nxt

    dist[anchor] = -1
    for hop in range(1, k + 1):
        fr = frontier
        nf = fr.shape[0]
        nxt = np.empty(n, dtype=np.int32)
        nxt_view = nxt
        nn = 0
        added = 0
        with nogil:
            for u in range(nf):
                if cap > 0 and added >= cap:
                    break
                for e in range(indptr[fr[u]], indptr[fr[u] + 1]):
                    v = indices[e]
                    if dist[v] != 0:
                        continue
                    dist[v] = hop
                    nxt_view[nn] = v
                    nn += 1
                    added += 1
                    if cap > 0 and added >= cap:
                        break
        if nn == 0:
            break
        frontier = np.sort(nxt[:nn])
        out_items.append(frontier)
        out_hops.append(np.full(nn, hop, dtype=np.int32))
    if not out_items:
        return np.empty(0, dtype=np.int32), np.empty(0, dtype=np.int32)
    return np.concatenate(out_items), np.concatenate(out_hops)


def hop_distances(const long long[::1] indptr, const int[::1] indices,
                  const int[::1] sources, const int[::1] targets, int max_hop):
    """Minimum directed hop count from each source to its target.

    ``-1`` marks "not reachable within ``max_hop``". A target equal to its
    source counts as one hop only through an explicit self-loop.
    """
    cdef int n = indptr.shape[0] - 1
    cdef Py_ssize_t m = sources.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=1] out_arr = np.full(m, -1, dtype=np.int32)
    cdef int[::1] out = out_arr
    cdef int *stamp
    cdef int *queue
    cdef int *nextq
    cdef int *tmp
    cdef Py_ssize_t q
    cdef int s, t, hop, nq, nn, i, u, v
    cdef long long e, lo, hi
    cdef bint found

    if n <= 0 or m == 0:
        return out_arr
    stamp = <int *> malloc(n * sizeof(int))
    queue = <int *> malloc(n * sizeof(int))
    nextq = <int *> malloc(n * sizeof(int))
    if stamp == NULL or queue == NULL or nextq == NULL:
        free(stamp)
        free(queue)
        free(nextq)
        raise MemoryError()
    with nogil:
        for i in range(n):
            stamp[i] = -1
        for q in range(m):
            s = sources[q]
            t = targets[q]
            if s < 0 or s >= n or t < 0 or t >= n or max_hop < 1:
                continue
            if s == t:
                lo = indptr[s]
                hi = indptr[s + 1]
                e = _bsearch(indices, lo, hi, s)
                if e < hi and indices[e] == s:
                    out[q] = 1
                continue
            stamp[s] = <int> q
            queue[0] = s
            nq = 1
            found = False
            for hop in range(1, max_hop + 1):
                nn = 0
                for i in range(nq):
                    u = queue[i]
                    for e in range(indptr[u], indptr[u + 1]):
                        v = indices[e]
                        if stamp[v] == q:
                            continue
                        if v == t:
                            found = True
                            break
                        stamp[v] = <int> q
                        nextq[nn] = v
                        nn += 1
                    if found:
                        break
                if found:
                    out[q] = hop
                    break
                if nn == 0:
                    break
                tmp = queue
                queue = nextq
                nextq = tmp
                nq = nn
    free(stamp)
    free(queue)
    free(nextq)
    return out_arr


def bpr_epoch(double[:, ::1] anchor_tab, double[:, ::1] target_tab,
              const int[::1] src, const int[::1] dst, const long long[::1] order,
              const int[:, ::1] negatives, double lr, double reg):
    """One SGD pass of BPR over the (shuffled) transition pairs.

    Ascends log sigmoid(a_i . t_j - a_i . t_k) for each sampled negative k,
    updating the three touched rows in place. Returns the summed loss
    -log sigmoid(x) over all updates, evaluated before each step.
    """
    cdef Py_ssize_t steps = order.shape[0]
    cdef Py_ssize_t n_neg = negatives.shape[1]
    cdef Py_ssize_t dim = anchor_tab.shape[1]
    cdef Py_ssize_t s, r, d
    cdef long long p
    cdef int i, j, kk
    cdef double x, g, ai, tj, tk, total = 0.0

    with nogil:
        for s in range(steps):
            p = order[s]
            i = src[p]
            j = dst[p]
            for r in range(n_neg):
                kk = negatives[p, r]
                x = 0.0
                for d in range(dim):
                    x = x + anchor_tab[i, d] * (target_tab[j, d] - target_tab[kk, d])
                if x > 0:
                    g = exp(-x)
                    total = total + log1p(g)
                    g = g / (1.0 + g)
                else:
                    g = exp(x)
                    total = total - x + log1p(g)
                    g = 1.0 / (1.0 + g)
                for d in range(dim):
                    ai = anchor_tab[i, d]
                    tj = target_tab[j, d]
                    tk = target_tab[kk, d]
                    anchor_tab[i, d] = ai + lr * (g * (tj - tk) - reg * ai)
                    target_tab[j, d] = tj + lr * (g * ai - reg * tj)
                    target_tab[kk, d] = tk + lr * (-g * ai - reg * tk)
    return total
