import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import dense_adjacency, random_graph, split_from_sequences
from oracles import bfs_distance, literal_weight, matrix_power_hops
from seqrec_audit.errors import ParseError
from seqrec_audit.graph import (TransitionGraph, build_graph, coverage_at_k, graph_stats, hop_distances,
                                k_hop_neighborhood, load_graph, save_graph, target_hop_distances)


def test_build_graph_uses_only_training_prefixes():
    # user 0: 1 2 3 | 4 5 ; user 1: 1 2 | 9 8
    split = split_from_sequences([[1, 2, 3, 4, 5], [1, 2, 9, 8]])
    g = build_graph(split)
    v = split.vocab
    e = lambda a, b: g.count(v.encode(f"i{a:03d}"), v.encode(f"i{b:03d}"))
    assert e(1, 2) == 2
    assert e(2, 3) == 1
    assert e(3, 4) == 0 and e(4, 5) == 0 and e(2, 9) == 0
    assert g.num_edges == 2


def test_edge_weight_two_and_seven_counts():
    g = TransitionGraph.from_pairs([0] * 9, [1] * 2 + [2] * 7, 3)
    assert g.edge_weight(0, 2) == 1.0
    assert abs(g.edge_weight(0, 1) - math.log(3) / math.log(8)) < 1e-12
    assert g.edge_weight(1, 0) == 0.0


def test_edge_weight_three_and_seven_is_two_thirds():
    g = TransitionGraph.from_pairs([0] * 10, [1] * 3 + [2] * 7, 3)
    assert abs(g.edge_weight(0, 1) - 2.0 / 3.0) < 1e-12


def test_single_edge_has_weight_one():
    g = TransitionGraph.from_pairs([4], [2], 5)
    assert g.edge_weight(4, 2) == 1.0


def test_weights_match_literal_formula(rng):
    for _ in range(20):
        n = int(rng.integers(2, 15))
        src = rng.integers(0, n, size=60)
        dst = rng.integers(0, n, size=60)
        counts = {}
        for a, b in zip(src.tolist(), dst.tolist()):
            counts[(a, b)] = counts.get((a, b), 0) + 1
        g = TransitionGraph.from_pairs(src, dst, n)
        for i in range(n):
            for j in range(n):
                assert abs(g.edge_weight(i, j) - literal_weight(counts, i, j)) < 1e-12


def test_khop_matches_matrix_powers(rng):
    for _ in range(40):
        g = random_graph(rng, n_max=40, m_max=120)
        adj = dense_adjacency(g)
        for anchor in range(g.num_items):
            for k in (1, 2, 3):
                nb = k_hop_neighborhood(g, anchor, k)
                expect = matrix_power_hops(adj, anchor, k) if adj[anchor].any() else {}
                assert nb.entries == expect


def test_khop_ordering_and_anchor_excluded():
    g = TransitionGraph.from_pairs([0, 0, 0, 2, 1], [0, 2, 1, 3, 3], 4)
    nb = k_hop_neighborhood(g, 0, 2)
    assert nb.items.tolist() == [1, 2, 3]
    assert nb.hops.tolist() == [1, 1, 2]
    assert 0 not in nb.entries


def test_khop_cold_anchor():
    g = TransitionGraph.from_pairs([0], [1], 3)
    nb = k_hop_neighborhood(g, 2, 3)
    assert not nb.anchor_known and len(nb) == 0
    # anchor 1 has no outgoing edge either
    assert not k_hop_neighborhood(g, 1, 1).anchor_known


@pytest.mark.parametrize("k", [0, 5, -1])
def test_khop_rejects_bad_k(k):
    g = TransitionGraph.from_pairs([0], [1], 2)
    with pytest.raises(ValueError):
        k_hop_neighborhood(g, 0, k)


def test_khop_cap_limits_size():
    g = TransitionGraph.from_pairs([0] * 10, list(range(1, 11)), 11)
    nb = k_hop_neighborhood(g, 0, 1, cap=3)
    assert len(nb) == 3
    assert nb.items.tolist() == [1, 2, 3]


def test_hop_distances_against_bfs(rng):
    for _ in range(30):
        g = random_graph(rng, n_max=30, m_max=60)
        lists = [g.neighbors(i).tolist() for i in range(g.num_items)]
        s = rng.integers(0, g.num_items, size=50)
        t = rng.integers(0, g.num_items, size=50)
        t[:5] = s[:5]
        got = hop_distances(g, s, t, 3)
        want = [bfs_distance(lists, int(a), int(b), 3) for a, b in zip(s, t)]
        assert got.tolist() == want


def test_self_target_needs_self_loop():
    g = TransitionGraph.from_pairs([0, 1], [1, 0], 2)
    assert hop_distances(g, [0], [0], 3).tolist() == [-1]
    g2 = TransitionGraph.from_pairs([0, 0], [0, 1], 2)
    assert hop_distances(g2, [0], [0], 3).tolist() == [1]
    g3 = TransitionGraph.from_pairs([0], [1], 2)
    assert hop_distances(g3, [0], [0], 3).tolist() == [-1]


def test_chain_coverage_is_total():
    # every test target directly follows the last context item somewhere in training
    seqs = [[0, 1, 2, 3, 4, 5], [1, 2, 3, 4, 5, 6], [2, 3, 4, 5, 6, 7], [0, 1, 2, 3], [3, 4, 5, 6, 7, 8, 9]]
    split = split_from_sequences(seqs + [[0, 1, 2, 3, 4], [4, 5, 6, 7, 8, 9, 10, 11]])
    g = build_graph(split)
    cov = coverage_at_k(g, split, (1, 2, 3))
    dist = target_hop_distances(g, split, 3)
    assert cov[1] == pytest.approx(100.0 * np.mean(dist == 1))
    assert cov[1] <= cov[2] <= cov[3]


def test_graph_stats_fields():
    split = split_from_sequences([[1, 2, 3, 4, 5], [1, 2, 9, 8], [2, 3, 1, 2, 7]])
    g = build_graph(split)
    st_ = graph_stats(g, split)
    assert st_.num_users == 3
    assert st_.num_items == split.num_items
    assert st_.num_edges == g.num_edges
    assert st_.avg_seq_len == pytest.approx((5 + 4 + 5) / 3)
    assert st_.avg_out_degree == pytest.approx(g.num_edges / split.num_items)
    assert st_.avg_out_degree_active == pytest.approx(g.num_edges / st_.num_sources)
    assert st_.avg_edge_weight == pytest.approx(g.counts.sum() / g.num_edges)
    d = st_.to_dict()
    assert set(d["coverage"]) == {"1", "2", "3"} or set(d["coverage"]) == {1, 2, 3}


def test_graph_binary_roundtrip(tmp_path, rng):
    g = random_graph(rng, n_max=50, m_max=300)
    save_graph(g, tmp_path / "g.srtg")
    h = load_graph(tmp_path / "g.srtg")
    assert np.array_equal(g.indptr, h.indptr)
    assert np.array_equal(g.indices, h.indices)
    assert np.array_equal(g.counts, h.counts)
    assert np.array_equal(g.weights, h.weights)


def test_graph_binary_errors(rng):
    g = random_graph(rng, n_max=10, m_max=20)
    buf = g.to_bytes()
    with pytest.raises(ParseError, match="magic"):
        TransitionGraph.from_bytes(b"XXXX" + buf[4:])
    with pytest.raises(ParseError, match="version"):
        TransitionGraph.from_bytes(buf[:4] + b"\x09" + buf[5:])
    with pytest.raises(ParseError):
        TransitionGraph.from_bytes(buf[:-1])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), max_size=80))
def test_weights_normalized_per_source(pairs):
    src = [a for a, _ in pairs]
    dst = [b for _, b in pairs]
    g = TransitionGraph.from_pairs(src, dst, 12)
    for i in range(12):
        lo, hi = g.indptr[i], g.indptr[i + 1]
        if hi > lo:
            w = g.weights[lo:hi]
            assert w.max() == 1.0
            assert (w > 0).all() and (w <= 1).all()
    assert g.counts.sum() == len(pairs)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=40),
       st.integers(0, 9))
def test_neighborhoods_nest(pairs, anchor):
    g = TransitionGraph.from_pairs([a for a, _ in pairs], [b for _, b in pairs], 10)
    prev = {}
    for k in (1, 2, 3, 4):
        cur = k_hop_neighborhood(g, anchor, k).entries
        assert all(cur[i] == h for i, h in prev.items())
        assert all(h <= k for h in cur.values())
        prev = cur
