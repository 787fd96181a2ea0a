"""Interaction ingestion, sequence building and the leave-one-out split."""
from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, DataError, ParseError

_log = logging.getLogger(__name__)

Column = int | str


@dataclass(frozen=True)
class InteractionLog:
    """Raw ``(user_id, item_id, timestamp)`` records in input order."""

    records: list[tuple[str, str, int]]
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.records)


class ItemVocab:
    """Bijection between opaque item ids and dense indices."""

    def __init__(self, ids: Sequence[str]):
        self.ids: tuple[str, ...] = tuple(ids)
        self._index = {item: i for i, item in enumerate(self.ids)}
        if len(self._index) != len(self.ids):
            raise DataError("duplicate item ids in vocabulary")

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, item_id) -> bool:
        return item_id in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, ItemVocab) and self.ids == other.ids

    def encode(self, item_id: str) -> int:
        return self._index[item_id]

    def get(self, item_id: str, default: int = -1) -> int:
        return self._index.get(item_id, default)

    def decode(self, index: int) -> str:
        return self.ids[index]


@dataclass(frozen=True, eq=False)
class SequenceDataset:
    """Chronological per-user item sequences stored as one flat CSR array.

    Sequence ``u`` is ``items[offsets[u]:offsets[u + 1]]``.
    """

    user_ids: tuple[str, ...]
    offsets: np.ndarray
    items: np.ndarray
    vocab: ItemVocab

    @property
    def num_users(self) -> int:
        return len(self.user_ids)

    @property
    def num_items(self) -> int:
        return len(self.vocab)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def sequence(self, u: int) -> np.ndarray:
        return self.items[self.offsets[u]:self.offsets[u + 1]]

    def __iter__(self) -> Iterator[np.ndarray]:
        for u in range(self.num_users):
            yield self.sequence(u)


@dataclass(frozen=True, eq=False)
class SplitDataset:
    """Leave-one-out view over a :class:`SequenceDataset`.

    For each user the last item is the test target, the second-to-last the
    validation target, and everything before that the training prefix. The
    test context is the whole sequence minus the test target.
    """

    dataset: SequenceDataset
    valid_targets: np.ndarray = field(repr=False)
    test_targets: np.ndarray = field(repr=False)

    @property
    def user_ids(self) -> tuple[str, ...]:
        return self.dataset.user_ids

    @property
    def vocab(self) -> ItemVocab:
        return self.dataset.vocab

    @property
    def num_users(self) -> int:
        return self.dataset.num_users

    @property
    def num_items(self) -> int:
        return self.dataset.num_items

    def train_prefix(self, u: int) -> np.ndarray:
        return self.dataset.sequence(u)[:-2]

    def test_context(self, u: int) -> np.ndarray:
        return self.dataset.sequence(u)[:-1]

    @property
    def last_context_items(self) -> np.ndarray:
        """Last item of every test context (equal to the validation target)."""
        return self.valid_targets

    def train_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """All adjacent ``(i, j)`` pairs inside the training prefixes."""
        ds = self.dataset
        lengths = ds.lengths
        ends = np.repeat(ds.offsets[1:], lengths)
        pos = np.arange(len(ds.items), dtype=np.int64)
        keep = pos + 1 < ends - 2
        pos = pos[keep]
        return ds.items[pos], ds.items[pos + 1]


def _resolve_column(col: Column, header: list[str] | None, path) -> int:
    if isinstance(col, int):
        return col
    if header is None:
        raise ConfigError(f"column {col!r} given by name but {path} has no header")
    try:
        return header.index(col)
    except ValueError:
        raise DataError(f"{path}: missing column {col!r} (header: {header})") from None


def load_interactions(
    path,
    user_col: Column = 0,
    item_col: Column = 1,
    time_col: Column = 2,
    delimiter: str = "\t",
    header: bool | None = None,
    lenient: bool = False,
) -> InteractionLog:
    """Read a delimiter-separated interaction file.

    Columns are picked by position (``int``) or header name (``str``). The
    file is assumed to carry a header row iff any column is named, unless
    ``header`` says otherwise. Bad rows abort with the offending line number;
    under ``lenient`` they are skipped and counted instead.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"interaction file not found: {path}")
    if header is None:
        header = any(isinstance(c, str) for c in (user_col, item_col, time_col))

    records: list[tuple[str, str, int]] = []
    skipped = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter, quoting=csv.QUOTE_NONE)
        names = None
        if header:
            try:
                names = [c.strip() for c in next(reader)]
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
        cols = [_resolve_column(c, names, path) for c in (user_col, item_col, time_col)]
        need = max(cols) + 1
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) < need:
                    raise ParseError(path, f"expected at least {need} columns, got {len(row)}", line=line)
                user, item, ts = (row[c].strip() for c in cols)
                if not user or not item:
                    raise ParseError(path, "empty user or item id", line=line)
                try:
                    stamp = int(ts)
                except ValueError:
                    raise ParseError(path, f"unparseable timestamp {ts!r}", line=line) from None
            except ParseError as err:
                if not lenient:
                    raise
                skipped += 1
                _log.warning("skipping row: %s", err)
                continue
            records.append((user, item, stamp))
    if skipped:
        _log.warning("%s: skipped %d malformed rows", path, skipped)
    return InteractionLog(records, skipped)


def build_sequences(
    log: InteractionLog,
    min_len: int = 3,
    max_len: int | None = None,
    min_item_count: int = 0,
) -> SequenceDataset:
    """Group, order, filter and truncate interactions into user sequences.

    Records are sorted per user by timestamp; ties keep input order. Users
    with fewer than ``min_len`` interactions are dropped (and, when
    ``min_item_count`` is set, rare items too, repeating until nothing
    changes). Survivors keep their most recent ``max_len`` items. Users and
    items are indexed in sorted id order.
    """
    if min_len < 3:
        raise ConfigError(f"min_len must be >= 3 for the leave-one-out split, got {min_len}")
    if max_len is not None and max_len < min_len:
        raise ConfigError(f"max_len ({max_len}) must be >= min_len ({min_len})")

    per_user: dict[str, list[tuple[int, str]]] = {}
    for user, item, ts in log.records:
        per_user.setdefault(user, []).append((ts, item))
    seqs = {}
    for user, rows in per_user.items():
        rows.sort(key=lambda r: r[0])  # stable: ties keep input order
        seqs[user] = [item for _, item in rows]

    while True:
        before = sum(len(s) for s in seqs.values())
        seqs = {u: s for u, s in seqs.items() if len(s) >= min_len}
        if min_item_count > 0:
            counts = Counter(item for s in seqs.values() for item in s)
            seqs = {u: [i for i in s if counts[i] >= min_item_count] for u, s in seqs.items()}
            seqs = {u: s for u, s in seqs.items() if len(s) >= min_len}
        if sum(len(s) for s in seqs.values()) == before:
            break
        if min_item_count <= 0:
            break

    if not seqs:
        raise DataError(f"no user has at least {min_len} interactions after filtering")
    if max_len is not None:
        seqs = {u: s[-max_len:] for u, s in seqs.items()}

    vocab = ItemVocab(sorted({i for s in seqs.values() for i in s}))
    users = sorted(seqs)
    lengths = np.fromiter((len(seqs[u]) for u in users), dtype=np.int64, count=len(users))
    offsets = np.zeros(len(users) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    items = np.fromiter(
        (vocab.encode(i) for u in users for i in seqs[u]), dtype=np.int32, count=int(offsets[-1])
    )
    return SequenceDataset(tuple(users), offsets, items, vocab)


def split_leave_one_out(ds: SequenceDataset) -> SplitDataset:
    """Hold out each user's last item for test and second-to-last for validation."""
    if ds.num_users and ds.lengths.min() < 3:
        raise ConfigError("every sequence needs at least 3 items for the leave-one-out split")
    ends = ds.offsets[1:]
    return SplitDataset(ds, ds.items[ends - 2].copy(), ds.items[ends - 1].copy())


def write_split(split: SplitDataset, out_dir) -> list[Path]:
    """Write the split as text files with original ids, for external trainers."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vocab = split.vocab
    paths = [out_dir / "train.txt", out_dir / "valid.tsv", out_dir / "test.tsv"]
    with paths[0].open("w", encoding="utf-8") as tr, paths[1].open("w", encoding="utf-8") as va, \
            paths[2].open("w", encoding="utf-8") as te:
        for u, user in enumerate(split.user_ids):
            prefix = ",".join(vocab.decode(i) for i in split.train_prefix(u).tolist())
            tr.write(f"{user}\t{prefix}\n")
            va.write(f"{user}\t{vocab.decode(int(split.valid_targets[u]))}\n")
            te.write(f"{user}\t{vocab.decode(int(split.test_targets[u]))}\n")
    return paths
