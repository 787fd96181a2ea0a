"""Run configuration: JSON file plus command-line overrides (flags win)."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

BUILTIN_MODELS = ("tgh1", "tgh2", "semnn", "idlast", "idsem", "count-last")
PROBE_MODELS = ("tgh1", "tgh2", "semnn", "idlast", "idsem", "count-last")
THREADS_ENV = "SEQREC_AUDIT_THREADS"


@dataclass
class RunConfig:
    interactions: str | None = None
    embeddings: str | None = None
    output_dir: str = "out"
    name: str = "dataset"
    # preprocessing
    delimiter: str = "\t"
    user_col: str | int = 0
    item_col: str | int = 1
    time_col: str | int = 2
    header: bool | None = None
    lenient: bool = False
    min_len: int = 3
    max_len: int | None = None
    min_item_count: int = 0
    embedding_sep: str | None = None
    allow_missing_embeddings: bool = False
    # models and evaluation
    models: list[str] = field(default_factory=lambda: ["tgh1", "tgh2", "semnn"])
    ks: list[int] = field(default_factory=lambda: [1, 5, 10])
    overlap_k: int = 10
    max_hop: int = 3
    tgh_alpha: float = 0.5
    exclude_history: bool = False
    bpr_dim: int = 64
    bpr_epochs: int = 30
    bpr_lr: float = 0.05
    bpr_negatives: int = 5
    bpr_reg: float = 1e-4
    bpr_sampler: str = "uniform"
    fusion_id_weight: float = 1.0
    fusion_sem_weight: float = 1.0
    seed: int = 0
    threads: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON: {err}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def override(self, **kw) -> "RunConfig":
        d = asdict(self)
        d.update({k: v for k, v in kw.items() if v is not None})
        return RunConfig.from_dict(d)

    def effective_threads(self) -> int:
        if self.threads is not None:
            return self.threads
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
            if n < 1:
                raise ConfigError(f"{THREADS_ENV} must be >= 1")
            return n
        return os.cpu_count() or 1

    def validate(self) -> "RunConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.min_len >= 3, "min_len must be >= 3")
        need(self.max_len is None or self.max_len >= self.min_len, "max_len must be >= min_len")
        need(self.min_item_count >= 0, "min_item_count must be >= 0")
        need(len(self.delimiter) == 1, "delimiter must be a single character")
        need(bool(self.ks) and all(isinstance(k, int) and k >= 1 for k in self.ks), "ks must be positive integers")
        need(self.overlap_k >= 1 and self.max_hop >= 1, "overlap_k and max_hop must be positive")
        need(self.max_hop <= 4, "max_hop must be <= 4")
        need(self.tgh_alpha >= 0, "tgh_alpha must be >= 0")
        need(self.threads is None or self.threads >= 1, "threads must be >= 1")
        need(0 <= self.seed < 2**64, "seed must be an unsigned 64-bit integer")
        need(self.bpr_sampler in ("uniform", "popularity"), "bpr_sampler must be uniform or popularity")
        for m in self.models:
            if m.startswith("external:"):
                need(len(m) > len("external:"), "external model needs a file path")
            else:
                need(m in BUILTIN_MODELS, f"unknown model {m!r} (choose from {', '.join(BUILTIN_MODELS)}, external:<file>)")
        need(len(set(self.models)) == len(self.models), "duplicate model names")
        return self

    @property
    def k_max(self) -> int:
        return max(max(self.ks), self.overlap_k)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"
