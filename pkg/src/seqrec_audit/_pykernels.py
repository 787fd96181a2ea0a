"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Same signatures, same results bit for bit: the BPR loop performs the
identical sequence of IEEE double operations, so both backends produce the
same tables for the same inputs.
"""
from __future__ import annotations

import math
from bisect import bisect_left

import numpy as np


def khop(indptr, indices, anchor: int, k: int, cap: int):
    indptr = np.asarray(indptr)
    n = len(indptr) - 1
    if anchor < 0 or anchor >= n or k < 1:
        return np.empty(0, dtype=np.int32), np.empty(0, dtype=np.int32)
    ptr = indptr.tolist()
    idx = indices
    seen = {anchor}
    frontier = [anchor]
    items: list[int] = []
    hops: list[int] = []
    for hop in range(1, k + 1):
        found: list[int] = []
        full = False
        for u in frontier:
            for v in idx[ptr[u]:ptr[u + 1]].tolist():
                if v in seen:
                    continue
                seen.add(v)
                found.append(v)
                if cap > 0 and len(found) >= cap:
                    full = True
                    break
            if full:
                break
        if not found:
            break
        found.sort()
        items.extend(found)
        hops.extend([hop] * len(found))
        frontier = found
    return np.asarray(items, dtype=np.int32), np.asarray(hops, dtype=np.int32)


def hop_distances(indptr, indices, sources, targets, max_hop: int):
    ptr = np.asarray(indptr).tolist()
    idx = np.asarray(indices).tolist()
    n = len(ptr) - 1
    out = np.full(len(sources), -1, dtype=np.int32)
    for q, (s, t) in enumerate(zip(np.asarray(sources).tolist(), np.asarray(targets).tolist())):
        if not (0 <= s < n and 0 <= t < n) or max_hop < 1:
            continue
        if s == t:
            lo, hi = ptr[s], ptr[s + 1]
            e = bisect_left(idx, s, lo, hi)
            if e < hi and idx[e] == s:
                out[q] = 1
            continue
        seen = {s}
        frontier = [s]
        for hop in range(1, max_hop + 1):
            nxt = []
            hit = False
            for u in frontier:
                for v in idx[ptr[u]:ptr[u + 1]]:
                    if v in seen:
                        continue
                    if v == t:
                        hit = True
                        break
                    seen.add(v)
                    nxt.append(v)
                if hit:
                    break
            if hit:
                out[q] = hop
                break
            if not nxt:
                break
            frontier = nxt
    return out


def bpr_epoch(anchor_tab, target_tab, src, dst, order, negatives, lr: float, reg: float):
    a = anchor_tab.tolist()
    t = target_tab.tolist()
    src_l = np.asarray(src).tolist()
    dst_l = np.asarray(dst).tolist()
    neg_l = np.asarray(negatives).tolist()
    dim = anchor_tab.shape[1]
    rng_d = range(dim)
    exp, log1p = math.exp, math.log1p
    total = 0.0
    for p in np.asarray(order).tolist():
        ai_row = a[src_l[p]]
        tj_row = t[dst_l[p]]
        for kk in neg_l[p]:
            tk_row = t[kk]
            x = 0.0
            for d in rng_d:
                x = x + ai_row[d] * (tj_row[d] - tk_row[d])
            if x > 0:
                g = exp(-x)
                total = total + log1p(g)
                g = g / (1.0 + g)
            else:
                g = exp(x)
                total = total - x + log1p(g)
                g = 1.0 / (1.0 + g)
            for d in rng_d:
                ai = ai_row[d]
                tj = tj_row[d]
                tk = tk_row[d]
                ai_row[d] = ai + lr * (g * (tj - tk) - reg * ai)
                tj_row[d] = tj + lr * (g * ai - reg * tj)
                tk_row[d] = tk + lr * (-g * ai - reg * tk)
    anchor_tab[...] = a
    target_tab[...] = t
    return total
