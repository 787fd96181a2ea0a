"""Shortcut diagnostics: prediction overlap, recall by hop distance, and the audit report."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import SplitDataset
from .embeddings import EmbeddingMatrix
from .graph import GraphStats, TransitionGraph, target_hop_distances
from .metrics import MetricsTable, PredictionSet, percent, target_ranks

UNREACHABLE = ">{max_hop} or unreachable"


def correct_set(p: PredictionSet, split: SplitDataset, k: int) -> set[str]:
    """Users whose test target ranks within the top ``k``."""
    if not 1 <= k <= p.k_max:
        raise ValueError(f"K={k} outside [1, {p.k_max}] for {p.model}")
    ranks = target_ranks(p, split)
    hits = np.flatnonzero((ranks >= 1) & (ranks <= k))
    return {split.user_ids[u] for u in hits.tolist()}


def jaccard(a: set, b: set) -> float:
    """``|a & b| / |a | b|``; two empty sets count as identical (1.0)."""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


@dataclass
class OverlapMatrix:
    models: list[str]
    k: int
    values: list[list[float]]
    correct_counts: list[int]

    def to_dict(self) -> dict:
        return {"k": self.k, "models": self.models, "jaccard": self.values, "correct_counts": self.correct_counts}


def overlap_matrix(preds: Sequence[PredictionSet], split: SplitDataset, k: int = 10) -> OverlapMatrix:
    sets = [correct_set(p, split, k) for p in preds]
    n = len(sets)
    values = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            values[i][j] = values[j][i] = jaccard(sets[i], sets[j])
    return OverlapMatrix([p.model for p in preds], k, values, [len(s) for s in sets])


@dataclass
class HopBucketReport:
    k: int
    max_hop: int
    labels: list[str]
    counts: list[int]
    recall: dict[str, list[float | None]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"k": self.k, "max_hop": self.max_hop, "buckets": self.labels, "num_users": self.counts,
                "recall": self.recall}


def hop_buckets(g: TransitionGraph, split: SplitDataset, max_hop: int = 3) -> np.ndarray:
    """Bucket index per test user: ``h - 1`` for hop distance ``h``, ``max_hop`` beyond."""
    dist = target_hop_distances(g, split, max_hop)
    return np.where(dist >= 1, dist - 1, max_hop)


def recall_by_hop(g: TransitionGraph, preds: Sequence[PredictionSet], split: SplitDataset, k: int = 10,
                  max_hop: int = 3) -> HopBucketReport:
    """Recall@``k`` of each model among users grouped by target hop distance.

    Unreachable targets share the final bucket with those beyond ``max_hop``.
    Empty buckets report ``None``.
    """
    bucket = hop_buckets(g, split, max_hop)
    labels = [str(h) for h in range(1, max_hop + 1)] + [UNREACHABLE.format(max_hop=max_hop)]
    counts = np.bincount(bucket, minlength=max_hop + 1)
    report = HopBucketReport(k, max_hop, labels, counts.tolist())
    for p in preds:
        if not 1 <= k <= p.k_max:
            raise ValueError(f"K={k} outside [1, {p.k_max}] for {p.model}")
        ranks = target_ranks(p, split)
        hit = (ranks >= 1) & (ranks <= k)
        hits = np.bincount(bucket, weights=hit.astype(np.float64), minlength=max_hop + 1)
        report.recall[p.model] = [float(h / c) if c else None for h, c in zip(hits, counts)]
    return report


def transition_cosines(split: SplitDataset, emb: EmbeddingMatrix, seed: int, samples: int = 20000) -> dict:
    """Mean cosine of training transitions versus random item pairs."""
    src, dst = split.train_pairs()
    rng = np.random.default_rng([seed, 7])
    v = emb.vectors
    if len(src) > samples:
        pick = rng.choice(len(src), size=samples, replace=False)
        src, dst = src[pick], dst[pick]
    trans = float(np.einsum("ij,ij->i", v[src], v[dst]).mean()) if len(src) else 0.0
    a = rng.integers(0, emb.num_items, size=samples)
    b = rng.integers(0, emb.num_items, size=samples)
    keep = a != b
    rand = float(np.einsum("ij,ij->i", v[a[keep]], v[b[keep]]).mean()) if keep.any() else 0.0
    return {"mean_transition_cosine": trans, "mean_random_pair_cosine": rand,
            "sampled_transitions": int(len(src))}


@dataclass
class AuditReport:
    graph_stats: GraphStats
    probes: list[MetricsTable]
    overlap: OverlapMatrix
    hop_buckets: HopBucketReport
    axes: dict
    provenance: dict
    timestamps: dict = field(default_factory=dict)

    def body(self) -> dict:
        """Everything except wall-clock timestamps."""
        return {
            "provenance": self.provenance,
            "graph_stats": self.graph_stats.to_dict(),
            "probes": [t.to_dict() for t in self.probes],
            "shortcut_axes": self.axes,
            "overlap": self.overlap.to_dict(),
            "hop_buckets": self.hop_buckets.to_dict(),
        }

    def body_sha256(self) -> str:
        return hashlib.sha256(_dumps(self.body()).encode()).hexdigest()

    def to_dict(self) -> dict:
        d = self.body()
        d["body_sha256"] = self.body_sha256()
        d["timestamps"] = self.timestamps
        return d

    def check_finite(self) -> None:
        bad = [path for path, v in _walk_numbers(self.body()) if not math.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite values in audit report: {bad[:5]}")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _walk_numbers(obj, path="$"):
    if isinstance(obj, bool) or obj is None:
        return
    if isinstance(obj, (int, float)):
        yield path, float(obj)
    elif isinstance(obj, dict):
        for k, v in obj.items():
            yield from _walk_numbers(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _walk_numbers(v, f"{path}[{i}]")


def _metric(tables: Sequence[MetricsTable], model: str, k: int):
    for t in tables:
        if t.model == model and k in t.cells:
            return t.cells[k]
    return None


def summarize_axes(stats: GraphStats, probes: Sequence[MetricsTable], cosines: dict | None,
                   externals: Sequence[str], overlap: OverlapMatrix, k: int) -> dict:
    """Evidence along the three shortcut axes; no verdicts."""
    def cell(model):
        c = _metric(probes, model, k)
        return None if c is None else {"recall": c.recall, "ndcg": c.ndcg}

    branching = {
        "avg_out_degree": stats.avg_out_degree,
        "avg_out_degree_active": stats.avg_out_degree_active,
        "out_degree_over_catalog": stats.avg_out_degree / stats.num_items if stats.num_items else 0.0,
        "coverage": {str(h): v for h, v in sorted(stats.coverage.items())},
    }
    smooth = {"semnn": cell("semnn"), **(cosines or {})}
    t1, t2 = cell("tgh1"), cell("tgh2")
    history = {
        "tgh1": t1,
        "tgh2": t2,
        "tgh2_minus_tgh1": None if t1 is None or t2 is None
        else {"recall": t2["recall"] - t1["recall"], "ndcg": t2["ndcg"] - t1["ndcg"]},
        "note": "full-history neural models are not trained here; the TGH-1 vs TGH-2 gap and any "
                "external prediction files stand in for the Last-1 vs full-history comparison",
        "external": {},
    }
    idx = {m: i for i, m in enumerate(overlap.models)}
    for name in externals:
        ext = cell(name)
        entry = {"metrics": ext}
        if ext is not None and t1 is not None:
            entry["recall_minus_tgh1"] = ext["recall"] - t1["recall"]
        if name in idx and "tgh1" in idx:
            entry["jaccard_with_tgh1"] = overlap.values[idx[name]][idx["tgh1"]]
        history["external"][name] = entry
    return {"k": k, "low_branching": branching, "feature_smoothness": smooth, "history_dependence": history}


def format_audit_markdown(report: AuditReport, name: str = "dataset") -> str:
    s = report.graph_stats
    ks = sorted(s.coverage)
    out = [f"# Benchmark audit: {name}", ""]
    out.append("## Transition graph")
    out.append("")
    head = ["#Users", "#Items", "#Edges", "Avg. Seq. Len.", "Avg. Out-Deg.", "Avg. Edge W."] + [f"Cov@{k}" for k in ks]
    row = [f"{s.num_users:,}", f"{s.num_items:,}", f"{s.num_edges:,}", f"{s.avg_seq_len:.2f}",
           f"{s.avg_out_degree:.2f}", f"{s.avg_edge_weight:.2f}"] + [f"{s.coverage[k]:.2f}%" for k in ks]
    out += ["| " + " | ".join(head) + " |", "|" + "---|" * len(head), "| " + " | ".join(row) + " |", ""]
    out.append(f"Avg. Out-Deg. divides edges by catalog items ({s.avg_out_degree_active:.2f} over the "
               f"{s.num_sources:,} items with outgoing edges). Avg. Edge W. is the mean raw transition count.")
    out.append("")

    ks_all = sorted({k for t in report.probes for k in t.cells})
    out.append("## Probe metrics (%)")
    out.append("")
    head = ["Model"] + [f"R@{k}" for k in ks_all] + [f"N@{k}" for k in ks_all]
    out += ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for t in report.probes:
        cells = [percent(t.cells[k].recall) if k in t.cells else "-" for k in ks_all]
        cells += [percent(t.cells[k].ndcg) if k in t.cells else "-" for k in ks_all]
        out.append("| " + " | ".join([t.model] + cells) + " |")
    out.append("")

    ov = report.overlap
    out.append(f"## Correct-prediction overlap (Jaccard @{ov.k})")
    out.append("")
    out += ["| | " + " | ".join(ov.models) + " |", "|" + "---|" * (len(ov.models) + 1)]
    for m, row_v in zip(ov.models, ov.values):
        out.append(f"| {m} | " + " | ".join(f"{v:.3f}" for v in row_v) + " |")
    out.append("")

    hb = report.hop_buckets
    out.append(f"## Recall@{hb.k} by ground-truth hop distance")
    out.append("")
    out += ["| Model | " + " | ".join(hb.labels) + " |", "|" + "---|" * (len(hb.labels) + 1)]
    out.append("| #users | " + " | ".join(str(c) for c in hb.counts) + " |")
    for m, vals in hb.recall.items():
        out.append(f"| {m} | " + " | ".join("-" if v is None else percent(v) for v in vals) + " |")
    out.append("")

    ax = report.axes
    out.append("## Shortcut axes")
    out.append("")
    lb = ax["low_branching"]
    out.append(f"- Low branching: avg out-degree {lb['avg_out_degree']:.2f} "
               f"({100 * lb['out_degree_over_catalog']:.3f}% of the catalog); coverage "
               + ", ".join(f"@{h} {v:.2f}%" for h, v in lb["coverage"].items()))
    fs = ax["feature_smoothness"]
    sem = fs.get("semnn")
    line = "- Feature smoothness: "
    line += f"Sem-NN R@{ax['k']} {percent(sem['recall'])}%" if sem else "Sem-NN not run"
    if "mean_transition_cosine" in fs:
        line += (f"; mean cosine of training transitions {fs['mean_transition_cosine']:.3f} "
                 f"vs random pairs {fs['mean_random_pair_cosine']:.3f}")
    out.append(line)
    hd = ax["history_dependence"]
    if hd["tgh2_minus_tgh1"] is not None:
        out.append(f"- History dependence: TGH-2 minus TGH-1 R@{ax['k']} "
                   f"{100 * hd['tgh2_minus_tgh1']['recall']:+.2f} points")
    for name_, e in hd["external"].items():
        if "recall_minus_tgh1" in e:
            out.append(f"  - {name_}: R@{ax['k']} minus TGH-1 {100 * e['recall_minus_tgh1']:+.2f} points")
    out.append(f"  - {hd['note']}")
    out.append("")
    out.append("## Provenance")
    out.append("")
    for k_, v in sorted(report.provenance.items()):
        if k_ != "config":
            out.append(f"- {k_}: {v}")
    out.append(f"- body_sha256: {report.body_sha256()}")
    return "\n".join(out) + "\n"


def write_audit(report: AuditReport, out_dir, name: str = "dataset") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "audit.json": _dumps(report.to_dict()),
        "audit.md": format_audit_markdown(report, name),
        "overlap.json": _dumps(report.overlap.to_dict()),
        "hop_buckets.json": _dumps(report.hop_buckets.to_dict()),
    }
    for fname, text in paths.items():
        (out_dir / fname).write_text(text, encoding="utf-8")
    return [out_dir / f for f in paths]
