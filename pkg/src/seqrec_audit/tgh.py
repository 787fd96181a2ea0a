"""Transition-Graph Heuristic (TGH).

For each anchor (a recent item of the context) the scorer walks the anchor's
few-hop neighborhood in the transition graph, scores every candidate by
cosine similarity to the anchor plus ``alpha * w(anchor, c)`` for direct
(hop-1) neighbors, keeps the top ``budget[hop]`` candidates of each hop, and
merges anchors by keeping each item's best score.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingMatrix
from .graph import TransitionGraph, k_hop_neighborhood
from .ranking import RecommendationList, order_by_score


@dataclass(frozen=True)
class AnchorSpec:
    offset: int  # 0 = last item of the context, 1 = second-last
    hop_budgets: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "hop_budgets", tuple(int(b) for b in self.hop_budgets))
        if self.offset < 0:
            raise ValueError("anchor offset must be >= 0")
        if not 1 <= len(self.hop_budgets) <= 3:
            raise ValueError("hop_budgets needs between 1 and 3 entries")
        if any(b < 0 for b in self.hop_budgets):
            raise ValueError("hop budgets must be >= 0")


@dataclass(frozen=True)
class TghConfig:
    anchors: tuple[AnchorSpec, ...]
    alpha: float = 0.5
    exclude_anchor: bool = True
    exclude_history: bool = False
    list_size: int = 10

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(self.anchors))
        if not self.anchors:
            raise ValueError("at least one anchor is required")
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if self.list_size < 1:
            raise ValueError("list_size must be positive")

    @property
    def budget_total(self) -> int:
        return sum(sum(a.hop_budgets) for a in self.anchors)


TGH1 = TghConfig(anchors=(AnchorSpec(0, (7, 2, 1)),), alpha=0.5)
TGH2 = TghConfig(anchors=(AnchorSpec(0, (5, 1)), AnchorSpec(1, (3, 1))), alpha=0.5)
PRESETS = {"tgh1": TGH1, "tgh2": TGH2}


@dataclass(frozen=True)
class ScoredCandidate:
    item: int
    score: float
    source_anchor: int  # anchor offset that produced the candidate
    hop: int


def score_candidate(emb: EmbeddingMatrix, g: TransitionGraph, anchor: int, cand: int, hop: int, alpha: float) -> float:
    """Cosine of the normalized rows, plus the edge bonus for hop-1 candidates."""
    score = float(emb.vectors[anchor] @ emb.vectors[cand])
    if hop == 1:
        score += alpha * g.edge_weight(anchor, cand)
    return score


def _check_inputs(g: TransitionGraph, emb: EmbeddingMatrix) -> None:
    if not emb.normalized:
        raise ValueError("TGH needs L2-normalized embeddings (see normalize_rows)")
    if emb.num_items != g.num_items:
        raise ValueError(f"embedding rows ({emb.num_items}) != graph items ({g.num_items})")


def retrieve_for_anchor(
    g: TransitionGraph,
    emb: EmbeddingMatrix,
    anchor: int,
    budgets,
    alpha: float = 0.5,
    exclude_anchor: bool = True,
    exclude: set[int] | None = None,
    offset: int = 0,
) -> list[ScoredCandidate]:
    """Top ``budgets[h-1]`` candidates of every hop ``h`` around ``anchor``.

    Candidates sit at their minimum hop distance. With ``exclude_anchor``
    off, the anchor competes at hop 1 when it has a self-loop.
    """
    budgets = tuple(budgets)
    if not 1 <= len(budgets) <= 3:
        raise ValueError("budgets needs between 1 and 3 entries")
    nb = k_hop_neighborhood(g, anchor, len(budgets))
    if not nb.anchor_known:
        return []
    items, hops = nb.items, nb.hops
    if not exclude_anchor and g.has_edge(anchor, anchor):
        items = np.concatenate([[anchor], items]).astype(np.int32)
        hops = np.concatenate([[1], hops]).astype(np.int32)
    if exclude:
        keep = ~np.isin(items, np.fromiter(exclude, dtype=np.int64))
        items, hops = items[keep], hops[keep]
    if len(items) == 0:
        return []

    vecs = emb.vectors
    scores = vecs[items] @ vecs[anchor]
    direct = hops == 1
    if alpha and direct.any():
        lo = g.indptr[anchor]
        nbrs = g.indices[lo:g.indptr[anchor + 1]]
        pos = lo + np.searchsorted(nbrs, items[direct])
        scores[direct] += alpha * g.weights[pos]

    out: list[ScoredCandidate] = []
    for h, budget in enumerate(budgets, start=1):
        if budget == 0:
            continue
        sel = np.flatnonzero(hops == h)
        if len(sel) == 0:
            continue
        order = order_by_score(items[sel], scores[sel])[:budget]
        for r in sel[order]:
            out.append(ScoredCandidate(int(items[r]), float(scores[r]), offset, h))
    return out


def recommend(cfg: TghConfig, g: TransitionGraph, emb: EmbeddingMatrix, context) -> RecommendationList:
    """Merge per-anchor retrievals (best score per item), sort and truncate."""
    _check_inputs(g, emb)
    context = np.asarray(context)
    if len(context) == 0:
        raise ValueError("context must be nonempty")
    exclude = set(context.tolist()) if cfg.exclude_history else None
    best: dict[int, float] = {}
    for spec in cfg.anchors:
        if spec.offset >= len(context):
            continue
        anchor = int(context[-1 - spec.offset])
        for c in retrieve_for_anchor(g, emb, anchor, spec.hop_budgets, cfg.alpha,
                                     cfg.exclude_anchor, exclude, spec.offset):
            if c.item not in best or c.score > best[c.item]:
                best[c.item] = c.score
    if not best:
        return RecommendationList((), ())
    items = np.fromiter(best.keys(), dtype=np.int64, count=len(best))
    scores = np.fromiter(best.values(), dtype=np.float64, count=len(best))
    order = order_by_score(items, scores)[:cfg.list_size]
    return RecommendationList(tuple(items[order].tolist()), tuple(scores[order].tolist()))


@dataclass
class TghRecommender:
    """Adapter exposing :func:`recommend` through the evaluation interface."""

    cfg: TghConfig
    graph: TransitionGraph
    emb: EmbeddingMatrix
    name: str = "tgh"
    concurrent: bool = field(default=True, init=False)

    def __post_init__(self):
        _check_inputs(self.graph, self.emb)

    def recommend(self, context) -> list[int]:
        return list(recommend(self.cfg, self.graph, self.emb, context).items)
