"""Audit sequential-recommendation benchmarks with a transition-graph heuristic.

The package builds an item-transition graph from leave-one-out training
prefixes, scores few-hop neighbors of the most recent items (TGH), runs
simple diagnostic baselines, and reports graph statistics, coverage,
prediction overlap and recall by hop distance.
"""
__version__ = "0.1.0"

from .baselines import (BprParams, FusionSpec, IdLastModel, id_last_rank, id_plus_sem_rank, sem_nn_rank,
                        train_id_last)
from .corpus import (InteractionLog, ItemVocab, SequenceDataset, SplitDataset, build_sequences,
                     load_interactions, split_leave_one_out)
from .embeddings import EmbeddingMatrix, load_embeddings, normalize_rows
from .graph import (GraphStats, HopNeighborhood, TransitionGraph, build_graph, coverage_at_k, edge_weight,
                    graph_stats, k_hop_neighborhood)
from .metrics import MetricsTable, PredictionSet, evaluate, ndcg_at_k, recall_at_k, run_model
from .ranking import RecommendationList
from .tgh import TGH1, TGH2, AnchorSpec, ScoredCandidate, TghConfig, recommend, retrieve_for_anchor

__all__ = [
    "AnchorSpec", "BprParams", "EmbeddingMatrix", "FusionSpec", "GraphStats", "HopNeighborhood",
    "IdLastModel", "InteractionLog", "ItemVocab", "MetricsTable", "PredictionSet", "RecommendationList",
    "ScoredCandidate", "SequenceDataset", "SplitDataset", "TGH1", "TGH2", "TghConfig", "TransitionGraph",
    "build_graph", "build_sequences", "coverage_at_k", "edge_weight", "evaluate", "graph_stats",
    "id_last_rank", "id_plus_sem_rank", "k_hop_neighborhood", "load_embeddings", "load_interactions",
    "ndcg_at_k", "normalize_rows", "recall_at_k", "recommend", "retrieve_for_anchor", "run_model",
    "sem_nn_rank", "split_leave_one_out", "train_id_last",
]
