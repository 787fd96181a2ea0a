"""Diagnostic baselines: semantic nearest neighbor, last-item BPR model, and their fusion."""
from __future__ import annotations

import json
import logging
import math
import time
import zipfile
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .corpus import ItemVocab, SplitDataset
from .embeddings import EmbeddingMatrix, decode_embedding_binary, encode_embedding_binary
from .errors import ConfigError, DataError, TrainingDivergedError
from .graph import TransitionGraph
from .ranking import RecommendationList, order_by_score, top_k

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BprParams:
    dim: int = 64
    epochs: int = 30
    lr: float = 0.05
    negatives: int = 5
    reg: float = 1e-4
    seed: int = 0
    sampler: str = "uniform"  # or "popularity"

    def __post_init__(self):
        if self.dim < 1 or self.epochs < 0 or self.negatives < 1:
            raise ConfigError("dim and negatives must be positive, epochs non-negative")
        if not (self.lr > 0 and self.reg >= 0):
            raise ConfigError("lr must be positive and reg non-negative")
        if self.sampler not in ("uniform", "popularity"):
            raise ConfigError(f"unknown negative sampler {self.sampler!r}")


@dataclass(eq=False)
class IdLastModel:
    """Two item tables: ``score(a, t) = anchor_table[a] . target_table[t]``."""

    anchor_table: np.ndarray
    target_table: np.ndarray
    params: BprParams = field(default_factory=BprParams)
    loss_history: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.anchor_table.shape[1]

    @property
    def num_items(self) -> int:
        return self.anchor_table.shape[0]

    def score(self, anchor: int, target: int) -> float:
        return float(self.anchor_table[anchor] @ self.target_table[target])

    def scores(self, anchor: int) -> np.ndarray:
        return self.target_table @ self.anchor_table[anchor]


@dataclass(frozen=True)
class FusionSpec:
    id_weight: float = 1.0
    sem_weight: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.id_weight) and math.isfinite(self.sem_weight)):
            raise ConfigError("fusion weights must be finite")


def _exclusions(anchor: int, exclude) -> set[int]:
    out = {int(anchor)}
    if exclude:
        out.update(int(e) for e in exclude)
    return out


def sem_nn_rank(emb: EmbeddingMatrix, anchor: int, k: int, exclude=()) -> RecommendationList:
    """Full-catalog cosine ranking around ``anchor`` (anchor itself excluded)."""
    if not emb.normalized:
        raise ValueError("Sem-NN needs L2-normalized embeddings")
    scores = emb.vectors @ emb.vectors[anchor]
    return top_k(scores, k, _exclusions(anchor, exclude))


def id_last_rank(m: IdLastModel, anchor: int, k: int, exclude=()) -> RecommendationList:
    return top_k(m.scores(anchor), k, _exclusions(anchor, exclude))


def id_plus_sem_rank(m: IdLastModel, emb: EmbeddingMatrix, anchor: int, k: int,
                     fusion: FusionSpec = FusionSpec(), exclude=()) -> RecommendationList:
    """Late fusion: ``id_weight * dot + sem_weight * cosine`` with raw, unscaled scores."""
    if not emb.normalized:
        raise ValueError("ID+Sem needs L2-normalized embeddings")
    fused = fusion.id_weight * m.scores(anchor) + fusion.sem_weight * (emb.vectors @ emb.vectors[anchor])
    return top_k(fused, k, _exclusions(anchor, exclude))


def count_last_rank(g: TransitionGraph, anchor: int, k: int) -> RecommendationList:
    """Rank the anchor's out-neighbors by raw transition count."""
    if g.out_degree(anchor) == 0:
        return RecommendationList((), ())
    lo, hi = g.indptr[anchor], g.indptr[anchor + 1]
    items = g.indices[lo:hi].astype(np.int64)
    counts = g.counts[lo:hi].astype(np.float64)
    keep = items != anchor
    items, counts = items[keep], counts[keep]
    order = order_by_score(items, counts)[:k]
    return RecommendationList(tuple(items[order].tolist()), tuple(counts[order].tolist()))


def bpr_gradients(a_i: np.ndarray, t_j: np.ndarray, t_k: np.ndarray):
    """Gradient of ``log sigmoid(a_i . (t_j - t_k))`` w.r.t. ``a_i``, ``t_j``, ``t_k``."""
    x = float(a_i @ (t_j - t_k))
    g = 1.0 / (1.0 + math.exp(x)) if x <= 0 else math.exp(-x) / (1.0 + math.exp(-x))
    return g * (t_j - t_k), g * a_i, -g * a_i


def bpr_objective(a_i: np.ndarray, t_j: np.ndarray, t_k: np.ndarray) -> float:
    x = float(a_i @ (t_j - t_k))
    return -math.log1p(math.exp(-x)) if x > 0 else x - math.log1p(math.exp(x))


def _sample_negatives(rng, dst: np.ndarray, n_neg: int, n_items: int, probs) -> np.ndarray:
    shape = (len(dst), n_neg)
    if probs is None:
        neg = rng.integers(0, n_items, size=shape)
    else:
        neg = rng.choice(n_items, size=shape, p=probs)
    bad = neg == dst[:, None]
    while bad.any():
        m = int(bad.sum())
        neg[bad] = rng.integers(0, n_items, size=m) if probs is None else rng.choice(n_items, size=m, p=probs)
        bad = neg == dst[:, None]
    return np.ascontiguousarray(neg, dtype=np.int32)


def train_id_last(split: SplitDataset, params: BprParams = BprParams()) -> IdLastModel:
    """Fit the last-item model with BPR on every adjacent training transition.

    Each step takes one pair ``(i, j)`` and ``params.negatives`` uniform
    negatives ``k != j``. The learning rate decays linearly per epoch.
    Deterministic for a fixed seed.
    """
    src, dst = split.train_pairs()
    return train_bpr_pairs(src, dst, split.num_items, params)


def train_bpr_pairs(src, dst, num_items: int, params: BprParams = BprParams()) -> IdLastModel:
    src = np.ascontiguousarray(src, dtype=np.int32)
    dst = np.ascontiguousarray(dst, dtype=np.int32)
    if len(src) == 0:
        raise DataError("no training transitions: every training prefix has a single item")
    if num_items < 2:
        raise DataError("BPR needs at least two items")
    rng = np.random.default_rng(params.seed)
    bound = 0.1 / math.sqrt(params.dim)
    anchor_tab = rng.uniform(-bound, bound, size=(num_items, params.dim))
    target_tab = rng.uniform(-bound, bound, size=(num_items, params.dim))
    probs = None
    if params.sampler == "popularity":
        freq = np.bincount(dst, minlength=num_items).astype(np.float64) + 1.0
        probs = freq / freq.sum()

    model = IdLastModel(anchor_tab, target_tab, params)
    n_updates = len(src) * params.negatives
    for epoch in range(params.epochs):
        t0 = time.perf_counter()
        lr = params.lr * (1.0 - epoch / params.epochs)
        order = rng.permutation(len(src)).astype(np.int64)
        neg = _sample_negatives(rng, dst, params.negatives, num_items, probs)
        total = kernels.bpr_epoch(anchor_tab, target_tab, src, dst, order, neg, lr, params.reg)
        loss = total / n_updates
        if not math.isfinite(loss) or not (np.isfinite(anchor_tab).all() and np.isfinite(target_tab).all()):
            raise TrainingDivergedError(f"BPR loss became non-finite at epoch {epoch + 1}")
        model.loss_history.append(loss)
        _log.debug("bpr epoch %d/%d: loss %.5f lr %.4f (%.2fs)", epoch + 1, params.epochs, loss, lr,
                   time.perf_counter() - t0)
    return model


def save_id_last(m: IdLastModel, vocab: ItemVocab, path) -> None:
    """Zip container: ``manifest.json`` plus both tables as ``SRAE`` binaries."""
    ids = list(vocab.ids)
    if len(ids) != m.num_items:
        raise DataError("vocabulary size does not match the model")
    manifest = {"format": "seqrec-audit/id-last", "version": 1, "params": asdict(m.params),
                "num_items": m.num_items, "dim": m.dim, "loss_history": m.loss_history}
    entries = [("manifest.json", json.dumps(manifest, indent=2, sort_keys=True).encode())]
    for name, tab in (("anchor.srae", m.anchor_table), ("target.srae", m.target_table)):
        entries.append((name, encode_embedding_binary(ids, tab)))
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name, data in entries:
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, data)


def load_id_last(path, vocab: ItemVocab) -> IdLastModel:
    """Load a checkpoint; tables come back at the file's 32-bit precision."""
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        tables = []
        for name in ("anchor.srae", "target.srae"):
            ids, vecs = decode_embedding_binary(zf.read(name), f"{path}:{name}")
            if ids != list(vocab.ids):
                raise DataError(f"{path}: {name} ids do not match the vocabulary")
            tables.append(vecs.astype(np.float64))
    params = BprParams(**manifest["params"])
    return IdLastModel(tables[0], tables[1], params, list(manifest.get("loss_history", [])))


@dataclass
class SemNNRecommender:
    emb: EmbeddingMatrix
    k: int = 10
    name: str = "semnn"
    concurrent: bool = field(default=True, init=False)

    def recommend(self, context) -> list[int]:
        return list(sem_nn_rank(self.emb, int(context[-1]), self.k).items)


@dataclass
class IdLastRecommender:
    model: IdLastModel
    k: int = 10
    name: str = "idlast"
    concurrent: bool = field(default=True, init=False)

    def recommend(self, context) -> list[int]:
        return list(id_last_rank(self.model, int(context[-1]), self.k).items)


@dataclass
class IdSemRecommender:
    model: IdLastModel
    emb: EmbeddingMatrix
    fusion: FusionSpec = field(default_factory=FusionSpec)
    k: int = 10
    name: str = "idsem"
    concurrent: bool = field(default=True, init=False)

    def recommend(self, context) -> list[int]:
        return list(id_plus_sem_rank(self.model, self.emb, int(context[-1]), self.k, self.fusion).items)


@dataclass
class CountLastRecommender:
    graph: TransitionGraph
    k: int = 10
    name: str = "count-last"
    concurrent: bool = field(default=True, init=False)

    def recommend(self, context) -> list[int]:
        return list(count_last_rank(self.graph, int(context[-1]), self.k).items)
