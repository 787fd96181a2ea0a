"""Item embedding files: text and ``SRAE`` binary formats, row alignment, L2 normalization.

Binary layout (all little-endian)::

    b"SRAE" | u8 version=1 | u32 dim | u64 count |
    count x ( u16 id_len | id_len bytes UTF-8 id | dim x f32 )
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import ItemVocab
from .errors import DataError, ParseError

_log = logging.getLogger(__name__)

MAGIC = b"SRAE"
VERSION = 1
_HEADER = struct.Struct("<4sBIQ")


@dataclass(eq=False)
class EmbeddingMatrix:
    """Per-item vectors, row-aligned with the item vocabulary."""

    vectors: np.ndarray
    normalized: bool = False
    zero_rows: np.ndarray = field(default=None)  # type: ignore[assignment]
    ignored: int = 0

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise DataError("embedding matrix must be 2-dimensional")
        if self.zero_rows is None:
            self.zero_rows = ~np.any(self.vectors != 0.0, axis=1)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def num_items(self) -> int:
        return self.vectors.shape[0]


def normalize_rows(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every nonzero row to unit Euclidean norm; zero rows pass through flagged."""
    norms = np.linalg.norm(m.vectors, axis=1)
    zero = norms == 0.0
    safe = np.where(zero, 1.0, norms)
    vectors = m.vectors / safe[:, None]
    return EmbeddingMatrix(vectors, normalized=True, zero_rows=zero, ignored=m.ignored)


def _read_text(path: Path, sep: str | None) -> tuple[list[str], np.ndarray]:
    ids: list[str] = []
    rows: list[list[float]] = []
    dim = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split(sep) if sep is not None else line.split()
            if len(parts) < 2:
                raise ParseError(path, "expected an id followed by at least one value", line=lineno)
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise ParseError(path, f"dimension mismatch: expected {dim}, got {len(parts) - 1}", line=lineno)
            try:
                rows.append([float(v) for v in parts[1:]])
            except ValueError as err:
                raise ParseError(path, str(err), line=lineno) from None
            ids.append(parts[0])
    if dim is None:
        raise DataError(f"{path}: no embeddings found")
    return ids, np.asarray(rows, dtype=np.float64)


def decode_embedding_binary(buf: bytes, path="<bytes>") -> tuple[list[str], np.ndarray]:
    """Parse an ``SRAE`` buffer; errors carry the byte offset of the violation."""
    if len(buf) < _HEADER.size:
        raise ParseError(path, "truncated header", offset=0)
    magic, version, dim, count = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise ParseError(path, f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise ParseError(path, f"unsupported version {version}", offset=4)
    if dim == 0:
        raise ParseError(path, "dimension must be positive", offset=5)
    pos = _HEADER.size
    vec_bytes = 4 * dim
    ids: list[str] = []
    out = np.empty((count, dim), dtype=np.float32) if count * vec_bytes <= len(buf) else None
    if out is None:
        raise ParseError(path, f"file too short for {count} items of dim {dim}", offset=pos)
    for r in range(count):
        if pos + 2 > len(buf):
            raise ParseError(path, f"truncated id length for item {r}", offset=pos)
        (n,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        if pos + n > len(buf):
            raise ParseError(path, f"truncated id for item {r}", offset=pos)
        try:
            ids.append(buf[pos:pos + n].decode("utf-8"))
        except UnicodeDecodeError:
            raise ParseError(path, f"invalid UTF-8 id for item {r}", offset=pos) from None
        pos += n
        if pos + vec_bytes > len(buf):
            raise ParseError(path, f"truncated vector for item {r}", offset=pos)
        out[r] = np.frombuffer(buf, dtype="<f4", count=dim, offset=pos)
        pos += vec_bytes
    if pos != len(buf):
        raise ParseError(path, f"{len(buf) - pos} trailing bytes", offset=pos)
    return ids, out


def read_embedding_file(path, sep: str | None = None) -> tuple[list[str], np.ndarray]:
    """Read ids and vectors from either format (binary detected by its magic bytes).

    Binary files yield ``float32`` arrays, text files ``float64``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"embedding file not found: {path}")
    with path.open("rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        ids, vecs = decode_embedding_binary(path.read_bytes(), path)
    else:
        ids, vecs = _read_text(path, sep)
    seen: set[str] = set()
    for i in ids:
        if i in seen:
            raise DataError(f"{path}: duplicate item id {i!r}")
        seen.add(i)
    return ids, vecs


def encode_embedding_binary(ids, vectors) -> bytes:
    vectors = np.asarray(vectors)
    if vectors.ndim != 2 or len(ids) != vectors.shape[0]:
        raise DataError("ids and vectors disagree in length")
    rows = np.ascontiguousarray(vectors, dtype="<f4")
    parts = [_HEADER.pack(MAGIC, VERSION, rows.shape[1], rows.shape[0])]
    for item_id, row in zip(ids, rows):
        raw = item_id.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise DataError(f"item id too long for the binary format: {item_id[:40]!r}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(row.tobytes())
    return b"".join(parts)


def write_embedding_binary(path, ids, vectors) -> None:
    Path(path).write_bytes(encode_embedding_binary(ids, vectors))


def write_embedding_text(path, ids, vectors, sep: str = " ") -> None:
    # %.9g round-trips every float32 exactly
    vectors = np.asarray(vectors)
    with Path(path).open("w", encoding="utf-8") as fh:
        for item_id, row in zip(ids, vectors.astype(np.float32)):
            fh.write(item_id + sep + sep.join("%.9g" % v for v in row.tolist()) + "\n")


def load_embeddings(path, vocab: ItemVocab, allow_missing: bool = False, sep: str | None = None) -> EmbeddingMatrix:
    """Load an embedding file and align its rows to ``vocab``.

    File items outside the vocabulary are ignored and counted. A vocabulary
    item missing from the file is an error unless ``allow_missing``, which
    substitutes a flagged zero row.
    """
    ids, vecs = read_embedding_file(path, sep=sep)
    out = np.zeros((len(vocab), vecs.shape[1]), dtype=np.float64)
    present = np.zeros(len(vocab), dtype=bool)
    ignored = 0
    for r, item_id in enumerate(ids):
        idx = vocab.get(item_id)
        if idx < 0:
            ignored += 1
            continue
        out[idx] = vecs[r]
        present[idx] = True
    if ignored:
        _log.info("%s: ignored %d items outside the vocabulary", path, ignored)
    if not present.all():
        missing = np.flatnonzero(~present)
        if not allow_missing:
            raise DataError(
                f"{path}: no embedding for item {vocab.decode(int(missing[0]))!r}"
                f" ({len(missing)} vocabulary items missing)"
            )
        _log.warning("%s: %d vocabulary items missing, using zero vectors", path, len(missing))
    return EmbeddingMatrix(out, ignored=ignored)
