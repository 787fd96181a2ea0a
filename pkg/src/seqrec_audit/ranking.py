"""Ranked recommendation lists and deterministic top-K selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class RecommendationList:
    """Items by descending score; ties broken by ascending item index."""

    items: tuple[int, ...]
    scores: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(zip(self.items, self.scores))


def order_by_score(items: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Permutation sorting by (score desc, item asc)."""
    return np.lexsort((items, -scores))


def top_k(scores: np.ndarray, k: int, exclude: Iterable[int] = ()) -> RecommendationList:
    """Top-``k`` over a full-catalog score vector, dropping ``exclude`` first."""
    scores = np.asarray(scores, dtype=np.float64)
    keep = np.ones(len(scores), dtype=bool)
    excl = np.fromiter((int(e) for e in exclude), dtype=np.int64)
    excl = excl[(excl >= 0) & (excl < len(scores))]
    keep[excl] = False
    cand = np.flatnonzero(keep)
    k = max(0, min(int(k), len(cand)))
    if k == 0:
        return RecommendationList((), ())
    s = scores[cand]
    if k < len(cand):
        # partition on score, then pull in every item tied with the k-th score
        kth = np.partition(-s, k - 1)[k - 1]
        sel = -s <= kth
        cand, s = cand[sel], s[sel]
    order = order_by_score(cand, s)[:k]
    return RecommendationList(tuple(cand[order].tolist()), tuple(s[order].tolist()))
