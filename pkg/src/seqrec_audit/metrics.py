"""Leave-one-out evaluation: prediction sets, Recall@K / NDCG@K and metric reports.

Ranks are 1-based throughout. With a single held-out item per user the
ideal DCG is 1, so NDCG@K is ``1 / log2(rank + 1)`` for a hit within K and 0
otherwise, averaged over users.
"""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import SplitDataset
from .errors import AuditError, DataError

_log = logging.getLogger(__name__)

DEFAULT_KS = (1, 5, 10)


class Recommender(Protocol):
    name: str

    def recommend(self, context) -> Sequence[int]: ...


class ModelError(AuditError):
    """A recommender raised while producing predictions."""


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """Top-``k_max`` item ids per user, in split user order."""

    model: str
    k_max: int
    user_ids: tuple[str, ...]
    lists: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.user_ids) != len(self.lists):
            raise DataError("prediction users and lists differ in length")
        for user, items in zip(self.user_ids, self.lists):
            if len(set(items)) != len(items):
                raise DataError(f"{self.model}: duplicate items in the list of user {user!r}")

    def __len__(self) -> int:
        return len(self.user_ids)

    def as_dict(self) -> dict[str, tuple[str, ...]]:
        return dict(zip(self.user_ids, self.lists))


def run_model(model: Recommender, split: SplitDataset, k_max: int = 10, threads: int = 1,
              name: str | None = None) -> PredictionSet:
    """Ask ``model`` for each user's test context and record the top ``k_max``."""
    vocab = split.vocab
    users = split.user_ids

    def predict(u: int) -> tuple[str, ...]:
        try:
            ranked = model.recommend(split.test_context(u))
        except Exception as err:
            raise ModelError(f"model {getattr(model, 'name', model)!r} failed on user {users[u]!r}: {err}") from err
        return tuple(vocab.decode(int(i)) for i in list(ranked)[:k_max])

    t0 = time.perf_counter()
    if threads > 1 and getattr(model, "concurrent", False):
        with ThreadPoolExecutor(max_workers=threads) as pool:
            lists = list(pool.map(predict, range(split.num_users), chunksize=256))
    else:
        lists = [predict(u) for u in range(split.num_users)]
    dt = time.perf_counter() - t0
    label = name or getattr(model, "name", "model")
    _log.info("%s: %d users in %.2fs (%.0f users/s)", label, len(lists), dt, len(lists) / dt if dt > 0 else float("inf"))
    return PredictionSet(label, k_max, users, tuple(lists))


def target_ranks(p: PredictionSet, split: SplitDataset) -> np.ndarray:
    """1-based rank of each user's test target in their list, 0 when absent."""
    lists = p.lists if p.user_ids == split.user_ids else _aligned(p, split)
    vocab = split.vocab
    ranks = np.zeros(split.num_users, dtype=np.int64)
    for u, items in enumerate(lists):
        target = vocab.decode(int(split.test_targets[u]))
        try:
            ranks[u] = items.index(target) + 1
        except ValueError:
            pass
    return ranks


def _aligned(p: PredictionSet, split: SplitDataset) -> list[tuple[str, ...]]:
    by_user = p.as_dict()
    return [by_user.get(u, ()) for u in split.user_ids]


def _check_k(p: PredictionSet, k: int) -> None:
    if not 1 <= k <= p.k_max:
        raise ValueError(f"K={k} outside [1, {p.k_max}] for {p.model}")


def recall_at_k(p: PredictionSet, split: SplitDataset, k: int) -> float:
    _check_k(p, k)
    if split.num_users == 0:
        return 0.0
    ranks = target_ranks(p, split)
    return float(np.count_nonzero((ranks >= 1) & (ranks <= k))) / split.num_users


def ndcg_at_k(p: PredictionSet, split: SplitDataset, k: int) -> float:
    _check_k(p, k)
    if split.num_users == 0:
        return 0.0
    return _ndcg_from_ranks(target_ranks(p, split), k)


def _ndcg_from_ranks(ranks: np.ndarray, k: int) -> float:
    hit = (ranks >= 1) & (ranks <= k)
    gains = np.zeros(len(ranks), dtype=np.float64)
    gains[hit] = 1.0 / np.log2(ranks[hit] + 1.0)
    return float(gains.sum()) / len(ranks)


@dataclass(frozen=True)
class MetricCell:
    recall: float
    ndcg: float


@dataclass
class MetricsTable:
    model: str
    num_users: int
    cells: dict[int, MetricCell] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "num_users": self.num_users,
            "metrics": {str(k): {"recall": c.recall, "ndcg": c.ndcg} for k, c in sorted(self.cells.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsTable":
        cells = {int(k): MetricCell(float(v["recall"]), float(v["ndcg"])) for k, v in d["metrics"].items()}
        return cls(d["model"], int(d["num_users"]), cells)

    def __eq__(self, other) -> bool:
        return (isinstance(other, MetricsTable) and self.model == other.model
                and self.num_users == other.num_users and self.cells == other.cells)


def evaluate(p: PredictionSet, split: SplitDataset, ks: Sequence[int] = DEFAULT_KS) -> MetricsTable:
    ranks = target_ranks(p, split)
    n = split.num_users
    table = MetricsTable(p.model, n)
    for k in sorted(set(ks)):
        _check_k(p, k)
        if n == 0:
            table.cells[k] = MetricCell(0.0, 0.0)
            continue
        recall = float(np.count_nonzero((ranks >= 1) & (ranks <= k))) / n
        table.cells[k] = MetricCell(recall, _ndcg_from_ranks(ranks, k))
    return table


def percent(x: float) -> str:
    """Format a [0, 1] metric as a percentage with 2 decimals, rounding half to even."""
    return str(Decimal(repr(x * 100.0)).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN))


def format_metrics_text(tables: Sequence[MetricsTable]) -> str:
    if not tables:
        return "no models evaluated\n"
    header = ["Model", "K", "Recall@K (%)", "NDCG@K (%)", "Users"]
    rows = [[t.model, str(k), percent(c.recall), percent(c.ndcg), str(t.num_users)]
            for t in tables for k, c in sorted(t.cells.items())]
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
    return "\n".join(lines) + "\n"


def metrics_to_json(tables: Sequence[MetricsTable]) -> str:
    return json.dumps({"tables": [t.to_dict() for t in tables]}, indent=2, sort_keys=True) + "\n"


def metrics_from_json(text: str) -> list[MetricsTable]:
    return [MetricsTable.from_dict(d) for d in json.loads(text)["tables"]]


def write_metrics_report(tables: Sequence[MetricsTable], out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        js, txt = out_dir / "metrics.json", out_dir / "metrics.txt"
        js.write_text(metrics_to_json(tables), encoding="utf-8")
        txt.write_text(format_metrics_text(tables), encoding="utf-8")
    except OSError as err:
        raise DataError(f"cannot write metrics report to {out_dir}: {err}") from err
    return [js, txt]


def write_predictions(p: PredictionSet, path) -> None:
    """One line per user: ``user_id<TAB>item1,item2,...``."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for user, items in zip(p.user_ids, p.lists):
            fh.write(f"{user}\t{','.join(items)}\n")


def read_predictions(path, split: SplitDataset, name: str | None = None, k_max: int | None = None) -> PredictionSet:
    """Read an interchange file and align it to the split's users.

    Unknown or repeated user ids are errors; users absent from the file get
    an empty list. Item ids outside the vocabulary are kept (they never hit).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"prediction file not found: {path}")
    known = set(split.user_ids)
    found: dict[str, tuple[str, ...]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            user, _, rest = line.partition("\t")
            if user not in known:
                raise DataError(f"{path}:{lineno}: unknown user id {user!r}")
            if user in found:
                raise DataError(f"{path}:{lineno}: user {user!r} listed twice")
            items = tuple(i for i in rest.split(",") if i) if rest else ()
            if len(set(items)) != len(items):
                raise DataError(f"{path}:{lineno}: duplicate items for user {user!r}")
            found[user] = items
    missing = len(known) - len(found)
    if missing:
        _log.warning("%s: %d users without predictions (treated as empty lists)", path, missing)
    if k_max is None:
        k_max = max((len(v) for v in found.values()), default=0)
    k_max = max(int(k_max), 1)
    lists = tuple(found.get(u, ())[:k_max] for u in split.user_ids)
    return PredictionSet(name or path.stem, k_max, split.user_ids, lists)


def is_finite_table(t: MetricsTable) -> bool:
    return all(math.isfinite(c.recall) and math.isfinite(c.ndcg) for c in t.cells.values())
