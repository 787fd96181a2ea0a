import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqrec_audit.corpus import (InteractionLog, ItemVocab, build_sequences, load_interactions,
                                 split_leave_one_out, write_split)
from seqrec_audit.errors import ConfigError, DataError, ParseError


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_positional_columns(tmp_path):
    p = _write(tmp_path / "log.tsv", "u1\ta\t3\nu1\tb\t1\n\nu2\tc\t5\n")
    log = load_interactions(p)
    assert log.records == [("u1", "a", 3), ("u1", "b", 1), ("u2", "c", 5)]
    assert log.skipped == 0


def test_load_named_columns_with_header(tmp_path):
    p = _write(tmp_path / "log.csv", "ts,item,user\n10,x,alice\n11,y,alice\n")
    log = load_interactions(p, user_col="user", item_col="item", time_col="ts", delimiter=",")
    assert log.records == [("alice", "x", 10), ("alice", "y", 11)]


def test_missing_named_column(tmp_path):
    p = _write(tmp_path / "log.csv", "a,b,c\n1,2,3\n")
    with pytest.raises(DataError, match="missing column"):
        load_interactions(p, user_col="user", item_col="b", time_col="c", delimiter=",")


def test_bad_row_reports_line(tmp_path):
    p = _write(tmp_path / "log.tsv", "u1\ta\t1\nu1\tb\tnot-a-time\n")
    with pytest.raises(ParseError) as info:
        load_interactions(p)
    assert info.value.line == 2
    assert ":2:" in str(info.value)


def test_lenient_skips_rows(tmp_path):
    p = _write(tmp_path / "log.tsv", "u1\ta\t1\nshort\nu1\tb\tx\nu1\tc\t2\n")
    log = load_interactions(p, lenient=True)
    assert log.skipped == 2
    assert [r[1] for r in log.records] == ["a", "c"]


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_interactions(tmp_path / "nope.tsv")


def test_build_sorts_by_time_stably():
    log = InteractionLog([("u", "c", 2), ("u", "a", 1), ("u", "b", 2), ("u", "d", 0)])
    ds = build_sequences(log)
    assert [ds.vocab.decode(i) for i in ds.sequence(0).tolist()] == ["d", "a", "c", "b"]


def test_short_users_dropped_and_indexing_sorted():
    log = InteractionLog([("z", "q", 0), ("z", "p", 1), ("z", "q", 2), ("y", "p", 0), ("y", "r", 1)])
    ds = build_sequences(log)
    assert ds.user_ids == ("z",)
    assert ds.vocab.ids == ("p", "q")


def test_consecutive_duplicates_kept():
    log = InteractionLog([("u", "a", 0), ("u", "a", 1), ("u", "b", 2)])
    ds = build_sequences(log)
    assert ds.sequence(0).tolist() == [0, 0, 1]


def test_max_len_keeps_recent():
    log = InteractionLog([("u", f"i{t}", t) for t in range(8)])
    ds = build_sequences(log, max_len=4)
    assert [ds.vocab.decode(i) for i in ds.sequence(0).tolist()] == ["i4", "i5", "i6", "i7"]


def test_min_item_count_reaches_fixed_point():
    # dropping rare item "x" shortens u2 below min_len, which makes "y" rare in turn
    log = InteractionLog(
        [("u1", "a", 0), ("u1", "b", 1), ("u1", "a", 2), ("u1", "b", 3),
         ("u2", "x", 0), ("u2", "y", 1), ("u2", "a", 2),
         ("u3", "y", 0), ("u3", "a", 1), ("u3", "b", 2)]
    )
    ds = build_sequences(log, min_item_count=2)
    assert set(ds.vocab.ids) == {"a", "b"}
    assert ds.user_ids == ("u1",)


def test_min_len_below_three_rejected():
    with pytest.raises(ConfigError):
        build_sequences(InteractionLog([("u", "a", 0)]), min_len=2)


def test_empty_result_is_data_error():
    with pytest.raises(DataError):
        build_sequences(InteractionLog([("u", "a", 0)]))


def test_split_positions():
    log = InteractionLog([("u", f"i{t}", t) for t in range(5)])
    split = split_leave_one_out(build_sequences(log))
    assert split.train_prefix(0).tolist() == [0, 1, 2]
    assert int(split.valid_targets[0]) == 3
    assert int(split.test_targets[0]) == 4
    assert split.test_context(0).tolist() == [0, 1, 2, 3]


def test_write_split(tmp_path):
    log = InteractionLog([("u", f"i{t}", t) for t in range(4)] + [("v", "i0", 0), ("v", "i2", 1), ("v", "i1", 2)])
    paths = write_split(split_leave_one_out(build_sequences(log)), tmp_path)
    assert paths[0].read_text() == "u\ti0,i1\nv\ti0\n"
    assert paths[1].read_text() == "u\ti2\nv\ti2\n"
    assert paths[2].read_text() == "u\ti3\nv\ti1\n"


def test_vocab_rejects_duplicates():
    with pytest.raises(DataError):
        ItemVocab(["a", "a"])


sequences = st.lists(st.lists(st.integers(0, 8), min_size=3, max_size=9), min_size=1, max_size=12)


@settings(max_examples=80, deadline=None)
@given(sequences)
def test_split_invariants(seqs):
    records = [(f"u{u:02d}", f"i{x}", t) for u, s in enumerate(seqs) for t, x in enumerate(s)]
    split = split_leave_one_out(build_sequences(InteractionLog(records)))
    ds = split.dataset
    for u in range(split.num_users):
        seq = ds.sequence(u)
        ctx = split.test_context(u)
        assert ctx[-1] == split.valid_targets[u] == split.last_context_items[u]
        assert np.array_equal(np.concatenate([split.train_prefix(u), [split.valid_targets[u], split.test_targets[u]]]), seq)
    src, dst = split.train_pairs()
    want = [(p[t], p[t + 1]) for u in range(split.num_users) for p in [split.train_prefix(u).tolist()]
            for t in range(len(p) - 1)]
    assert list(zip(src.tolist(), dst.tolist())) == want
