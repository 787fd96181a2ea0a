import numpy as np
import pytest

from seqrec_audit import _pykernels
from seqrec_audit.corpus import InteractionLog, build_sequences, split_leave_one_out
from seqrec_audit.embeddings import EmbeddingMatrix, normalize_rows
from seqrec_audit.graph import TransitionGraph

try:
    from seqrec_audit import _kernels
except ImportError:  # extension not built
    _kernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
if _kernels is not None:
    BACKENDS.append(pytest.param(_kernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def split_from_sequences(seqs, prefix="i"):
    """Leave-one-out split of integer sequences; item ``n`` becomes id ``i{n:03d}``."""
    records = []
    for u, seq in enumerate(seqs):
        records.extend((f"u{u:03d}", f"{prefix}{x:03d}", t) for t, x in enumerate(seq))
    return split_leave_one_out(build_sequences(InteractionLog(records)))


def random_graph(rng, n_max=200, m_max=2000, self_loops=True):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(0, min(m_max, n * n) + 1))
    src = rng.integers(0, n, size=m)
    dst = rng.integers(0, n, size=m)
    if not self_loops:
        keep = src != dst
        src, dst = src[keep], dst[keep]
    return TransitionGraph.from_pairs(src, dst, n)


def dense_adjacency(g):
    a = np.zeros((g.num_items, g.num_items), dtype=bool)
    for i in range(g.num_items):
        a[i, g.neighbors(i)] = True
    return a


def unit_embeddings(rng, n, dim=6):
    return normalize_rows(EmbeddingMatrix(rng.normal(size=(n, dim))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_world(directory, num_users=300, num_items=60, seed=0):
    """Write a small shortcut world as ``log.tsv`` plus ``emb.txt``; returns both paths."""
    from seqrec_audit.embeddings import write_embedding_text
    from seqrec_audit.synthetic import shortcut_world

    w = shortcut_world(num_users=num_users, num_items=num_items, cluster_size=10, seed=seed)
    log = directory / "log.tsv"
    log.write_text("".join(f"{u}\t{i}\t{t}\n" for u, i, t in w.log.records), encoding="utf-8")
    emb = directory / "emb.txt"
    write_embedding_text(emb, w.item_ids(), w.embeddings)
    return log, emb


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
