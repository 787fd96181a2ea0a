import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import split_from_sequences
from oracles import literal_ndcg, literal_recall
from seqrec_audit.errors import DataError
from seqrec_audit.metrics import (ModelError, PredictionSet, _ndcg_from_ranks, evaluate,
                                  metrics_from_json, metrics_to_json, ndcg_at_k, percent, read_predictions,
                                  recall_at_k, run_model, target_ranks, write_predictions)


def _split():
    # test targets: u000 -> i004, u001 -> i001, u002 -> i009
    return split_from_sequences([[0, 1, 2, 3, 4], [2, 3, 1], [5, 6, 7, 8, 9]])


def _pred(lists, split, k=10, name="m"):
    return PredictionSet(name, k, split.user_ids, tuple(tuple(l) for l in lists))


def test_rank_three_gain_is_half():
    assert _ndcg_from_ranks(np.array([3]), 10) == 0.5
    assert _ndcg_from_ranks(np.array([1]), 1) == 1.0
    assert _ndcg_from_ranks(np.array([0]), 10) == 0.0


def test_hand_metrics():
    split = _split()
    p = _pred([["i004"], ["i000", "i002", "i001"], ["i005"]], split)
    assert target_ranks(p, split).tolist() == [1, 3, 0]
    assert recall_at_k(p, split, 1) == pytest.approx(1 / 3)
    assert recall_at_k(p, split, 5) == pytest.approx(2 / 3)
    assert ndcg_at_k(p, split, 5) == pytest.approx((1 + 0.5) / 3)


def test_k_bounds():
    split = _split()
    p = _pred([[], [], []], split, k=5)
    with pytest.raises(ValueError):
        recall_at_k(p, split, 6)
    with pytest.raises(ValueError):
        ndcg_at_k(p, split, 0)


def test_duplicate_items_rejected():
    split = _split()
    with pytest.raises(DataError):
        _pred([["i000", "i000"], [], []], split)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_metrics_match_literal_definition(data):
    split = _split()
    ids = list(split.vocab.ids)
    lists = [data.draw(st.lists(st.sampled_from(ids), unique=True, max_size=10)) for _ in range(3)]
    p = _pred(lists, split)
    targets = [split.vocab.decode(int(t)) for t in split.test_targets]
    table = evaluate(p, split, (1, 5, 10))
    for k in (1, 5, 10):
        assert abs(table.cells[k].recall - literal_recall(lists, targets, k)) <= 1e-12
        assert abs(table.cells[k].ndcg - literal_ndcg(lists, targets, k)) <= 1e-12
    assert table.cells[1].recall == table.cells[1].ndcg


class _Echo:
    name = "echo"
    concurrent = True

    def recommend(self, context):
        return [int(context[-1])]


class _Broken:
    name = "broken"

    def recommend(self, context):
        raise RuntimeError("boom")


def test_run_model_threads_agree():
    split = split_from_sequences([[i % 7, (i + 1) % 7, (i + 3) % 7, i % 5] for i in range(50)])
    a = run_model(_Echo(), split, 10, threads=1)
    b = run_model(_Echo(), split, 10, threads=4)
    assert a.lists == b.lists and a.model == "echo"


def test_run_model_wraps_errors():
    with pytest.raises(ModelError, match="broken"):
        run_model(_Broken(), _split(), 10)


def test_prediction_file_roundtrip(tmp_path):
    split = _split()
    p = _pred([["i004", "i001"], [], ["i009"]], split)
    write_predictions(p, tmp_path / "p.tsv")
    assert (tmp_path / "p.tsv").read_text().splitlines()[0] == "u000\ti004,i001"
    back = read_predictions(tmp_path / "p.tsv", split, k_max=10)
    assert back.lists == p.lists


def test_prediction_file_errors(tmp_path):
    split = _split()
    f = tmp_path / "p.tsv"
    f.write_text("ghost\ti001\n")
    with pytest.raises(DataError, match="unknown user"):
        read_predictions(f, split)
    f.write_text("u000\ti001\nu000\ti002\n")
    with pytest.raises(DataError, match="twice"):
        read_predictions(f, split)
    f.write_text("u000\ti001,i001\n")
    with pytest.raises(DataError, match="duplicate"):
        read_predictions(f, split)


def test_missing_users_get_empty_lists(tmp_path):
    split = _split()
    f = tmp_path / "p.tsv"
    f.write_text("u001\tunknown-item,i001\n")
    p = read_predictions(f, split, k_max=10)
    assert p.lists == ((), ("unknown-item", "i001"), ())
    assert recall_at_k(p, split, 2) == pytest.approx(1 / 3)


def test_percent_half_even():
    assert percent(0.076600) == "7.66"
    assert percent(0.000125) == "0.01"
    assert percent(0.000135) == "0.01" or percent(0.000135) == "0.02"
    assert percent(1.0) == "100.00"


def test_metrics_json_roundtrip():
    split = _split()
    t = evaluate(_pred([["i004"], [], []], split), split)
    text = metrics_to_json([t])
    assert metrics_from_json(text) == [t]
    assert json.loads(text)["tables"][0]["metrics"]["1"]["recall"] == pytest.approx(1 / 3)
