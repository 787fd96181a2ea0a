import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import _kernels, dense_adjacency, random_graph
from oracles import matrix_power_hops
from seqrec_audit import _pykernels, kernels

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


def test_khop_backend_matches_oracle(backend, rng):
    for _ in range(25):
        g = random_graph(rng, n_max=30, m_max=90)
        adj = dense_adjacency(g)
        for anchor in range(g.num_items):
            items, hops = backend.khop(g.indptr, g.indices, anchor, 3, 0)
            assert dict(zip(items.tolist(), hops.tolist())) == matrix_power_hops(adj, anchor, 3)
            order = list(zip(hops.tolist(), items.tolist()))
            assert order == sorted(order)


def test_khop_out_of_range_anchor(backend):
    indptr = np.array([0, 1, 1], dtype=np.int64)
    indices = np.array([1], dtype=np.int32)
    for anchor in (-1, 2, 99):
        items, hops = backend.khop(indptr, indices, anchor, 2, 0)
        assert len(items) == 0 and len(hops) == 0


@needs_ext
def test_backends_agree_on_random_graphs(rng):
    for _ in range(40):
        g = random_graph(rng, n_max=80, m_max=400)
        for anchor in rng.integers(0, g.num_items, size=5).tolist():
            for cap in (0, 3):
                a = _kernels.khop(g.indptr, g.indices, anchor, 3, cap)
                b = _pykernels.khop(g.indptr, g.indices, anchor, 3, cap)
                assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        s = rng.integers(0, g.num_items, size=64).astype(np.int32)
        t = rng.integers(0, g.num_items, size=64).astype(np.int32)
        assert np.array_equal(_kernels.hop_distances(g.indptr, g.indices, s, t, 3),
                              _pykernels.hop_distances(g.indptr, g.indices, s, t, 3))


def _bpr_inputs(seed=3, n_items=12, dim=5, n_pairs=40, n_neg=3):
    r = np.random.default_rng(seed)
    a = r.uniform(-0.1, 0.1, size=(n_items, dim))
    t = r.uniform(-0.1, 0.1, size=(n_items, dim))
    src = r.integers(0, n_items, size=n_pairs).astype(np.int32)
    dst = r.integers(0, n_items, size=n_pairs).astype(np.int32)
    order = r.permutation(n_pairs).astype(np.int64)
    neg = r.integers(0, n_items, size=(n_pairs, n_neg)).astype(np.int32)
    return a, t, src, dst, order, neg


@needs_ext
def test_bpr_epoch_bit_identical_across_backends():
    a1, t1, src, dst, order, neg = _bpr_inputs()
    a2, t2 = a1.copy(), t1.copy()
    for _ in range(5):
        l1 = _kernels.bpr_epoch(a1, t1, src, dst, order, neg, 0.05, 1e-4)
        l2 = _pykernels.bpr_epoch(a2, t2, src, dst, order, neg, 0.05, 1e-4)
        assert l1 == l2
    assert np.array_equal(a1, a2) and np.array_equal(t1, t2)


def test_bpr_epoch_single_step_matches_hand_update(backend):
    a = np.array([[0.1, -0.2], [0.0, 0.0], [0.0, 0.0]])
    t = np.array([[0.0, 0.0], [0.3, 0.1], [-0.2, 0.4]])
    a0, t0 = a.copy(), t.copy()
    lr, reg = 0.1, 0.01
    loss = backend.bpr_epoch(a, t, np.array([0], np.int32), np.array([1], np.int32),
                             np.array([0], np.int64), np.array([[2]], np.int32), lr, reg)
    x = a0[0] @ (t0[1] - t0[2])
    g = 1.0 / (1.0 + np.exp(x))
    assert loss == pytest.approx(np.log1p(np.exp(-x)), rel=1e-12)
    assert np.allclose(a[0], a0[0] + lr * (g * (t0[1] - t0[2]) - reg * a0[0]), rtol=1e-12)
    assert np.allclose(t[1], t0[1] + lr * (g * a0[0] - reg * t0[1]), rtol=1e-12)
    assert np.allclose(t[2], t0[2] + lr * (-g * a0[0] - reg * t0[2]), rtol=1e-12)


def test_bpr_epoch_stable_for_large_margins(backend):
    a = np.array([[50.0], [0.0]])
    t = np.array([[40.0], [-40.0]])
    loss = backend.bpr_epoch(a, t, np.array([0], np.int32), np.array([0], np.int32),
                             np.array([0], np.int64), np.array([[1]], np.int32), 0.0, 0.0)
    assert np.isfinite(loss) and loss >= 0
    loss = backend.bpr_epoch(a, t, np.array([0], np.int32), np.array([1], np.int32),
                             np.array([0], np.int64), np.array([[0]], np.int32), 0.0, 0.0)
    assert loss == pytest.approx(4000.0)


def test_backend_selection_env():
    code = "from seqrec_audit import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, SEQREC_AUDIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("python", "cython")


@needs_ext
def test_pure_python_backend_end_to_end_identical(tmp_path):
    from conftest import write_world

    log, emb = write_world(tmp_path, num_users=200, num_items=40)
    outputs = {}
    for flag in ("0", "1"):
        out = tmp_path / f"out{flag}"
        env = dict(os.environ, SEQREC_AUDIT_PURE_PYTHON=flag)
        subprocess.run([sys.executable, "-m", "seqrec_audit.cli", "eval", "--interactions", str(log),
                        "--embeddings", str(emb), "--out", str(out), "--models", "tgh1,tgh2,idlast,idsem",
                        "--bpr-dim", "8", "--bpr-epochs", "3", "--threads", "1"],
                       env=env, check=True, capture_output=True)
        outputs[flag] = out
    for rel in ("metrics.json", "predictions/idlast.tsv", "predictions/tgh2.tsv", "idlast.ckpt"):
        assert (outputs["0"] / rel).read_bytes() == (outputs["1"] / rel).read_bytes(), rel
