"""Synthetic interaction logs with known structure, for tests and benchmarks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import InteractionLog


def _log_from_sequences(seqs: list[list[int]], prefix: str = "i") -> InteractionLog:
    records = []
    for u, seq in enumerate(seqs):
        user = f"u{u:06d}"
        records.extend((user, f"{prefix}{item:05d}", t) for t, item in enumerate(seq))
    return InteractionLog(records)


@dataclass
class MarkovWorld:
    transition: np.ndarray  # row-stochastic, zero diagonal
    log: InteractionLog

    @property
    def argmax_successor(self) -> np.ndarray:
        return self.transition.argmax(axis=1)


def markov_chain_world(num_states: int = 20, num_users: int = 1500, seq_len: tuple[int, int] = (6, 14),
                       top_prob: float = 0.6, fanout: int = 4, seed: int = 0) -> MarkovWorld:
    """Sequences from a sparse Markov chain with a dominant successor per state.

    Every state moves to one favored successor with ``top_prob`` and spreads
    the rest evenly over ``fanout - 1`` other states (never itself).
    """
    rng = np.random.default_rng(seed)
    P = np.zeros((num_states, num_states))
    for s in range(num_states):
        others = rng.permutation(np.delete(np.arange(num_states), s))[:fanout]
        P[s, others[0]] = top_prob
        P[s, others[1:]] = (1.0 - top_prob) / (fanout - 1)
    cum = P.cumsum(axis=1)
    seqs = []
    for _ in range(num_users):
        n = int(rng.integers(seq_len[0], seq_len[1] + 1))
        s = int(rng.integers(num_states))
        seq = [s]
        for _ in range(n - 1):
            s = min(int(np.searchsorted(cum[s], rng.random(), side="right")), num_states - 1)
            seq.append(s)
        seqs.append(seq)
    return MarkovWorld(P, _log_from_sequences(seqs, prefix="s"))


@dataclass
class ShortcutWorld:
    successors: np.ndarray  # (num_items, out_degree) hidden graph
    cluster: np.ndarray
    embeddings: np.ndarray  # unit rows, indexed by item number
    log: InteractionLog

    def item_ids(self) -> list[str]:
        return [f"i{i:05d}" for i in range(len(self.embeddings))]


def shortcut_world(num_users: int = 5000, num_items: int = 500, out_degree: int = 4,
                   cluster_size: int = 25, dim: int = 8, cluster_weight: float = 0.85,
                   noise: float = 0.3, seq_len: tuple[int, int] = (5, 12), seed: int = 0) -> ShortcutWorld:
    """Sequences that walk a hidden low-branching graph over feature-smooth items.

    Items fall into clusters; each item's ``out_degree`` successors are drawn
    from its own cluster, and same-cluster items share most of their
    embedding (cosine about ``cluster_weight``), so edges join similar items
    while a random pair is nearly orthogonal. With probability ``noise`` a
    step jumps to a uniformly random item instead of a successor.
    """
    rng = np.random.default_rng(seed)
    num_clusters = num_items // cluster_size
    cluster = np.arange(num_items) % num_clusters
    rng.shuffle(cluster)
    members = [np.flatnonzero(cluster == c) for c in range(num_clusters)]
    succ = np.empty((num_items, out_degree), dtype=np.int64)
    for i in range(num_items):
        pool = members[cluster[i]]
        pool = pool[pool != i]
        succ[i] = rng.choice(pool, size=out_degree, replace=False)

    centers = rng.normal(size=(num_clusters, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    own = rng.normal(size=(num_items, dim))
    own /= np.linalg.norm(own, axis=1, keepdims=True)
    emb = np.sqrt(cluster_weight) * centers[cluster] + np.sqrt(1.0 - cluster_weight) * own
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)

    seqs = []
    for _ in range(num_users):
        n = int(rng.integers(seq_len[0], seq_len[1] + 1))
        s = int(rng.integers(num_items))
        seq = [s]
        for _ in range(n - 1):
            if rng.random() < noise:
                s = int(rng.integers(num_items))
            else:
                s = int(succ[s, rng.integers(out_degree)])
            seq.append(s)
        seqs.append(seq)
    return ShortcutWorld(succ, cluster, emb, _log_from_sequences(seqs))
