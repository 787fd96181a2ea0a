"""End-to-end stages shared by the CLI commands: ingest, split, graph, models, audit."""
from __future__ import annotations

import contextlib
import hashlib
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, kernels
from .baselines import (BprParams, CountLastRecommender, FusionSpec, IdLastModel, IdLastRecommender,
                        IdSemRecommender, SemNNRecommender, train_id_last)
from .config import PROBE_MODELS, RunConfig
from .corpus import SequenceDataset, SplitDataset, build_sequences, load_interactions, split_leave_one_out
from .diagnostics import AuditReport, overlap_matrix, recall_by_hop, summarize_axes, transition_cosines
from .embeddings import EmbeddingMatrix, load_embeddings, normalize_rows
from .errors import AuditError, ConfigError
from .graph import GraphStats, TransitionGraph, build_graph, graph_stats
from .metrics import MetricsTable, PredictionSet, evaluate, read_predictions, run_model
from .tgh import PRESETS, TghConfig, TghRecommender

_log = logging.getLogger(__name__)


@contextlib.contextmanager
def stage(label: str):
    """Prefix any package error raised inside with ``[label]``."""
    try:
        yield
    except AuditError as err:
        if not getattr(err, "stage", None):
            err.stage = label
            err.args = (f"[{label}] {err}",) + err.args[1:]
        raise


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Prepared:
    cfg: RunConfig
    dataset: SequenceDataset
    split: SplitDataset
    graph: TransitionGraph
    emb: EmbeddingMatrix | None = None
    _id_last: IdLastModel | None = field(default=None, repr=False)

    def id_last(self) -> IdLastModel:
        if self._id_last is None:
            c = self.cfg
            params = BprParams(c.bpr_dim, c.bpr_epochs, c.bpr_lr, c.bpr_negatives, c.bpr_reg, c.seed, c.bpr_sampler)
            with stage("train-idlast"):
                self._id_last = train_id_last(self.split, params)
        return self._id_last

    def need_emb(self, model: str) -> EmbeddingMatrix:
        if self.emb is None:
            raise ConfigError(f"model {model!r} needs item embeddings (--embeddings)")
        return self.emb


def needs_embeddings(models) -> bool:
    return any(m in ("tgh1", "tgh2", "semnn", "idsem") for m in models)


def prepare(cfg: RunConfig, with_embeddings: bool) -> Prepared:
    cfg.validate()
    if not cfg.interactions:
        raise ConfigError("no interaction file given (--interactions)")
    with stage("ingest"):
        log = load_interactions(cfg.interactions, cfg.user_col, cfg.item_col, cfg.time_col,
                                cfg.delimiter, cfg.header, cfg.lenient)
    with stage("sequences"):
        ds = build_sequences(log, cfg.min_len, cfg.max_len, cfg.min_item_count)
    with stage("split"):
        split = split_leave_one_out(ds)
    with stage("graph"):
        g = build_graph(split)
    emb = None
    if with_embeddings:
        if not cfg.embeddings:
            raise ConfigError("no embedding file given (--embeddings)")
        with stage("embeddings"):
            emb = normalize_rows(load_embeddings(cfg.embeddings, ds.vocab, cfg.allow_missing_embeddings,
                                                 cfg.embedding_sep))
    _log.info("%d users, %d items, %d edges", split.num_users, split.num_items, g.num_edges)
    return Prepared(cfg, ds, split, g, emb)


def build_recommender(name: str, prep: Prepared):
    cfg = prep.cfg
    k = cfg.k_max
    if name in PRESETS:
        base = PRESETS[name]
        tcfg = TghConfig(base.anchors, alpha=cfg.tgh_alpha, exclude_anchor=base.exclude_anchor,
                         exclude_history=cfg.exclude_history, list_size=max(base.list_size, k))
        return TghRecommender(tcfg, prep.graph, prep.need_emb(name), name=name)
    if name == "semnn":
        return SemNNRecommender(prep.need_emb(name), k)
    if name == "idlast":
        return IdLastRecommender(prep.id_last(), k)
    if name == "idsem":
        fusion = FusionSpec(cfg.fusion_id_weight, cfg.fusion_sem_weight)
        return IdSemRecommender(prep.id_last(), prep.need_emb(name), fusion, k)
    if name == "count-last":
        return CountLastRecommender(prep.graph, k)
    raise ConfigError(f"unknown model {name!r}")


def predictions_for(name: str, prep: Prepared) -> PredictionSet:
    cfg = prep.cfg
    if name.startswith("external:"):
        path = Path(name[len("external:"):])
        with stage(f"external {path.name}"):
            return read_predictions(path, prep.split, name=path.stem, k_max=cfg.k_max)
    model = build_recommender(name, prep)
    with stage(f"predict {name}"):
        return run_model(model, prep.split, cfg.k_max, cfg.effective_threads(), name=name)


def run_models(prep: Prepared, names) -> tuple[list[PredictionSet], list[MetricsTable]]:
    preds, tables = [], []
    for name in names:
        p = predictions_for(name, prep)
        with stage(f"metrics {p.model}"):
            tables.append(evaluate(p, prep.split, prep.cfg.ks))
        preds.append(p)
    return preds, tables


def compute_stats(prep: Prepared) -> GraphStats:
    with stage("stats"):
        return graph_stats(prep.graph, prep.split, range(1, prep.cfg.max_hop + 1))


def audit(cfg: RunConfig) -> AuditReport:
    """Run the whole audit: graph statistics, every probe, overlap and hop buckets."""
    started = datetime.now(timezone.utc).isoformat()
    prep = prepare(cfg, with_embeddings=True)
    stats = compute_stats(prep)
    externals = [m for m in cfg.models if m.startswith("external:")]
    names = list(PROBE_MODELS) + externals
    preds, tables = run_models(prep, names)
    k = cfg.overlap_k
    with stage("overlap"):
        overlap = overlap_matrix(preds, prep.split, k)
    with stage("hop-buckets"):
        buckets = recall_by_hop(prep.graph, preds, prep.split, k, cfg.max_hop)
    with stage("axes"):
        cosines = transition_cosines(prep.split, prep.emb, cfg.seed)
        axes = summarize_axes(stats, tables, cosines, [p.model for p in preds[len(PROBE_MODELS):]], overlap, k)
    provenance = {
        "interactions_sha256": file_sha256(cfg.interactions),
        "embeddings_sha256": file_sha256(cfg.embeddings),
        "config": {k_: v for k_, v in cfg.__dict__.items() if k_ not in ("threads", "output_dir")},
        "package_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "bpr_params": {"dim": cfg.bpr_dim, "epochs": cfg.bpr_epochs, "lr": cfg.bpr_lr,
                       "negatives": cfg.bpr_negatives, "reg": cfg.bpr_reg, "sampler": cfg.bpr_sampler,
                       "seed": cfg.seed},
        "history_probe_substitution": "TGH-1 vs TGH-2 gap plus external prediction files",
    }
    report = AuditReport(stats, tables, overlap, buckets, axes, provenance)
    report.timestamps = {"started": started, "finished": datetime.now(timezone.utc).isoformat()}
    report.check_finite()
    return report
