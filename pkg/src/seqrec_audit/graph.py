"""Directed item-transition graph in CSR form, k-hop queries and graph statistics."""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import kernels
from .corpus import SplitDataset
from .errors import DataError, ParseError

MAX_HOPS = 4
GRAPH_MAGIC = b"SRTG"
GRAPH_VERSION = 1
_GRAPH_HEADER = struct.Struct("<4sBQQ")


@dataclass(frozen=True, eq=False)
class TransitionGraph:
    """Transition counts ``N[i, j]`` stored row-wise, targets sorted ascending.

    ``log_max[i]`` caches ``log(1 + max_j N[i, j])`` (0 for items without
    outgoing edges) and ``weights`` the normalized edge weights.
    """

    indptr: np.ndarray
    indices: np.ndarray
    counts: np.ndarray
    log_max: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, indptr, indices, counts) -> "TransitionGraph":
        indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        indices = np.ascontiguousarray(indices, dtype=np.int32)
        counts = np.ascontiguousarray(counts, dtype=np.int64)
        n = len(indptr) - 1
        deg = np.diff(indptr)
        log_counts = np.log1p(counts.astype(np.float64))
        log_max = np.zeros(n, dtype=np.float64)
        if len(counts):
            rows = np.repeat(np.arange(n), deg)
            np.maximum.at(log_max, rows, log_counts)
            weights = log_counts / log_max[rows]
        else:
            weights = np.zeros(0, dtype=np.float64)
        return cls(indptr, indices, counts, log_max, weights)

    @classmethod
    def from_pairs(cls, src, dst, num_items: int) -> "TransitionGraph":
        """Count adjacent ``(src[t], dst[t])`` transitions into a graph."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if len(src) and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= num_items):
            raise DataError("transition endpoint outside the item range")
        keys, counts = np.unique(src * num_items + dst, return_counts=True)
        rows = keys // num_items
        indptr = np.zeros(num_items + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=num_items), out=indptr[1:])
        return cls.from_arrays(indptr, keys % num_items, counts)

    @property
    def num_items(self) -> int:
        return len(self.indptr) - 1

    @property
    def num_edges(self) -> int:
        return len(self.indices)

    def out_degree(self, i: int) -> int:
        if not 0 <= i < self.num_items:
            return 0
        return int(self.indptr[i + 1] - self.indptr[i])

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def _find(self, i: int, j: int) -> int:
        if not (0 <= i < self.num_items and 0 <= j < self.num_items):
            return -1
        lo, hi = int(self.indptr[i]), int(self.indptr[i + 1])
        e = lo + int(np.searchsorted(self.indices[lo:hi], j))
        return e if e < hi and self.indices[e] == j else -1

    def count(self, i: int, j: int) -> int:
        e = self._find(i, j)
        return int(self.counts[e]) if e >= 0 else 0

    def has_edge(self, i: int, j: int) -> bool:
        return self._find(i, j) >= 0

    def edge_weight(self, i: int, j: int) -> float:
        e = self._find(i, j)
        return float(self.weights[e]) if e >= 0 else 0.0

    def to_bytes(self) -> bytes:
        if len(self.counts) and self.counts.max() > 0xFFFFFFFF:
            raise DataError("transition count exceeds the u32 range of the graph format")
        return b"".join([
            _GRAPH_HEADER.pack(GRAPH_MAGIC, GRAPH_VERSION, self.num_items, self.num_edges),
            self.indptr.astype("<u8").tobytes(),
            self.indices.astype("<u4").tobytes(),
            self.counts.astype("<u4").tobytes(),
        ])

    @classmethod
    def from_bytes(cls, buf: bytes, path="<bytes>") -> "TransitionGraph":
        if len(buf) < _GRAPH_HEADER.size:
            raise ParseError(path, "truncated header", offset=0)
        magic, version, n, m = _GRAPH_HEADER.unpack_from(buf, 0)
        if magic != GRAPH_MAGIC:
            raise ParseError(path, f"bad magic {magic!r}", offset=0)
        if version != GRAPH_VERSION:
            raise ParseError(path, f"unsupported version {version}", offset=4)
        expect = _GRAPH_HEADER.size + 8 * (n + 1) + 8 * m
        if len(buf) != expect:
            raise ParseError(path, f"expected {expect} bytes, found {len(buf)}", offset=_GRAPH_HEADER.size)
        pos = _GRAPH_HEADER.size
        indptr = np.frombuffer(buf, dtype="<u8", count=n + 1, offset=pos).astype(np.int64)
        pos += 8 * (n + 1)
        indices = np.frombuffer(buf, dtype="<u4", count=m, offset=pos).astype(np.int32)
        pos += 4 * m
        counts = np.frombuffer(buf, dtype="<u4", count=m, offset=pos).astype(np.int64)
        return cls.from_arrays(indptr, indices, counts)


@dataclass(frozen=True, eq=False)
class HopNeighborhood:
    """Items reachable from ``anchor`` with their minimum hop distance.

    ``items``/``hops`` are ordered by hop, then item index. The anchor is
    never listed. ``anchor_known`` is False for anchors without outgoing
    edges (cold-start anchors).
    """

    anchor: int
    items: np.ndarray
    hops: np.ndarray
    anchor_known: bool

    @property
    def entries(self) -> dict[int, int]:
        return dict(zip(self.items.tolist(), self.hops.tolist()))

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class GraphStats:
    num_users: int
    num_items: int
    num_edges: int
    num_sources: int
    avg_seq_len: float
    avg_out_degree: float
    avg_out_degree_active: float
    avg_edge_weight: float
    coverage: dict[int, float]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coverage"] = {str(k): v for k, v in sorted(self.coverage.items())}
        d["notes"] = {
            "avg_out_degree": "edges / catalog items",
            "avg_out_degree_active": "edges / items with >= 1 outgoing edge",
            "avg_edge_weight": "mean raw transition count per edge",
            "coverage": "percent of test targets within k hops of the last context item",
        }
        return d


def build_graph(split: SplitDataset) -> TransitionGraph:
    """Count transitions inside the training prefixes only."""
    src, dst = split.train_pairs()
    return TransitionGraph.from_pairs(src, dst, split.num_items)


def edge_weight(g: TransitionGraph, i: int, j: int) -> float:
    """``log(1 + N[i, j]) / max_j' log(1 + N[i, j'])``, or 0 for an absent edge."""
    return g.edge_weight(i, j)


def k_hop_neighborhood(g: TransitionGraph, anchor: int, k: int, cap: int | None = None) -> HopNeighborhood:
    if not 1 <= k <= MAX_HOPS:
        raise ValueError(f"k must lie in [1, {MAX_HOPS}], got {k}")
    if cap is not None and cap < 1:
        raise ValueError("cap must be positive")
    known = g.out_degree(anchor) > 0
    if not known:
        empty = np.empty(0, dtype=np.int32)
        return HopNeighborhood(anchor, empty, empty, False)
    items, hops = kernels.khop(g.indptr, g.indices, int(anchor), int(k), int(cap or 0))
    return HopNeighborhood(anchor, items, hops, True)


def hop_distances(g: TransitionGraph, sources, targets, max_hop: int) -> np.ndarray:
    """Minimum hop distance per (source, target); -1 when beyond ``max_hop``.

    A target equal to its source counts as reachable only through a self-loop.
    """
    return kernels.hop_distances(
        g.indptr,
        g.indices,
        np.ascontiguousarray(sources, dtype=np.int32),
        np.ascontiguousarray(targets, dtype=np.int32),
        int(max_hop),
    )


def target_hop_distances(g: TransitionGraph, split: SplitDataset, max_hop: int) -> np.ndarray:
    """Hop distance from each user's last context item to their test target."""
    return hop_distances(g, split.last_context_items, split.test_targets, max_hop)


def coverage_at_k(g: TransitionGraph, split: SplitDataset, ks: Iterable[int] = (1, 2, 3)) -> dict[int, float]:
    """Percent of test targets within ``k`` hops of each user's last context item."""
    ks = sorted(set(int(k) for k in ks))
    if not ks:
        return {}
    if split.num_users == 0:
        return {k: 0.0 for k in ks}
    dist = target_hop_distances(g, split, max(ks))
    reached = dist >= 1
    return {k: 100.0 * float(np.count_nonzero(reached & (dist <= k))) / split.num_users for k in ks}


def graph_stats(g: TransitionGraph, split: SplitDataset, ks: Iterable[int] = (1, 2, 3)) -> GraphStats:
    lengths = split.dataset.lengths
    sources = int(np.count_nonzero(np.diff(g.indptr)))
    m = g.num_edges
    return GraphStats(
        num_users=split.num_users,
        num_items=split.num_items,
        num_edges=m,
        num_sources=sources,
        avg_seq_len=float(lengths.mean()) if len(lengths) else 0.0,
        avg_out_degree=m / g.num_items if g.num_items else 0.0,
        avg_out_degree_active=m / sources if sources else 0.0,
        avg_edge_weight=float(g.counts.sum()) / m if m else 0.0,
        coverage=coverage_at_k(g, split, ks),
    )


def save_graph(g: TransitionGraph, path) -> None:
    Path(path).write_bytes(g.to_bytes())


def load_graph(path) -> TransitionGraph:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"graph file not found: {path}")
    return TransitionGraph.from_bytes(path.read_bytes(), path)


def format_stats_text(stats: GraphStats, name: str = "dataset") -> str:
    ks = sorted(stats.coverage)
    header = ["Dataset", "#Users", "#Items", "#Edges", "Avg. Seq. Len.", "Avg. Out-Deg.", "Avg. Edge W."]
    header += [f"Cov@{k}" for k in ks]
    row = [
        name,
        f"{stats.num_users:,}",
        f"{stats.num_items:,}",
        f"{stats.num_edges:,}",
        f"{stats.avg_seq_len:.2f}",
        f"{stats.avg_out_degree:.2f}",
        f"{stats.avg_edge_weight:.2f}",
    ]
    row += [f"{stats.coverage[k]:.2f}%" for k in ks]
    widths = [max(len(h), len(c)) for h, c in zip(header, row)]
    lines = [
        "  ".join(h.rjust(w) for h, w in zip(header, widths)),
        "  ".join(c.rjust(w) for c, w in zip(row, widths)),
        "",
        "Avg. Out-Deg. = edges / catalog items"
        f" ({stats.avg_out_degree_active:.2f} over the {stats.num_sources:,} items with outgoing edges)",
        "Avg. Edge W. = mean raw transition count per edge",
    ]
    return "\n".join(lines) + "\n"


def write_stats_report(stats: GraphStats, out_dir, name: str = "dataset") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    js = out_dir / "stats.json"
    txt = out_dir / "stats.txt"
    js.write_text(json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    txt.write_text(format_stats_text(stats, name), encoding="utf-8")
    return [js, txt]
