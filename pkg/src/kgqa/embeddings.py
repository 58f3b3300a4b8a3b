"""Full 200-dim entity embeddings: storage, truncation, and dot-product
re-ranking of entity candidates.

Store file layout (little-endian, versioned):

    magic b"EMBV" | u32 version | u32 dim | u64 count | u64 ids_len
    ids blob (UTF-8, newline-separated, `count` entries)
    float32[count * dim] vector data

Vector data is memory-mapped on open; the id -> row table is built eagerly.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CorruptRecord, IndexFormatError, LengthMismatch
from .label_index import EntityRecord, LabelHit
from .skeleton import TruncatedEmbedding, TruncationConfig

EMBEDDING_DIM = 200

_MAGIC = b"EMBV"
_VERSION = 1


@dataclass(frozen=True, eq=False)
class FullEmbedding:
    """One stored KG embedding: exactly EMBEDDING_DIM finite floats."""

    entity_id: str
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != (EMBEDDING_DIM,):
            raise LengthMismatch(
                f"{self.entity_id}: expected {EMBEDDING_DIM} dims, got {arr.shape}"
            )
        if not np.isfinite(arr).all():
            raise ValueError(f"{self.entity_id}: embedding has non-finite values")
        object.__setattr__(self, "values", arr)


class CandidateSource(enum.Enum):
    LABEL_SORTED = "label_sorted"
    EMBEDDING_SORTED = "embedding_sorted"


@dataclass(frozen=True)
class ScoredCandidate:
    entity: EntityRecord
    dot_score: float | None
    source: CandidateSource


def truncate(full: FullEmbedding, config: TruncationConfig = TruncationConfig()) -> TruncatedEmbedding:
    """First `length` coordinates, rounded half away from zero."""
    head = tuple(float(v) for v in full.values[: config.length])
    return TruncatedEmbedding(head, config.length, config.precision)


def truncate_vector(values: Sequence[float], config: TruncationConfig) -> TruncatedEmbedding:
    """`truncate` for a raw vector that may come straight from the store."""
    head = tuple(float(v) for v in values[: config.length])
    if len(head) < config.length:
        raise LengthMismatch(f"vector has {len(head)} dims, need {config.length}")
    return TruncatedEmbedding(head, config.length, config.precision)


def dot(a: TruncatedEmbedding, b: TruncatedEmbedding) -> float:
    # exactly-rounded summation: the score is a function of the values alone,
    # not of accumulation order, so rankings tie-break reproducibly
    if len(a.values) != len(b.values):
        raise LengthMismatch(f"dot of lengths {len(a.values)} and {len(b.values)}")
    return math.fsum(x * y for x, y in zip(a.values, b.values))


class EmbeddingStore:
    """Immutable id -> 200-dim float32 vector store; concurrent readers OK."""

    def __init__(self, ids: list[str], matrix: np.ndarray):
        self._ids = ids
        self._rows = {ident: i for i, ident in enumerate(ids)}
        self._matrix = matrix

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, Sequence[float]]]) -> "EmbeddingStore":
        """In-memory store; duplicate ids keep the last vector."""
        by_id: dict[str, np.ndarray] = {}
        for ident, values in records:
            arr = np.asarray(values, dtype=np.float32)
            if arr.shape != (EMBEDDING_DIM,):
                raise LengthMismatch(f"{ident}: expected {EMBEDDING_DIM} dims, got {arr.shape}")
            by_id[ident] = arr
        ids = list(by_id)
        matrix = (np.stack([by_id[i] for i in ids]) if ids
                  else np.zeros((0, EMBEDDING_DIM), dtype=np.float32))
        return cls(ids, matrix)

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, ident: str) -> bool:
        return ident in self._rows

    def __getitem__(self, ident: str) -> np.ndarray:
        return self._matrix[self._rows[ident]]

    def get(self, ident: str) -> np.ndarray | None:
        row = self._rows.get(ident)
        return None if row is None else self._matrix[row]

    def truncated(self, ident: str, config: TruncationConfig) -> TruncatedEmbedding | None:
        vec = self.get(ident)
        return None if vec is None else truncate_vector(vec, config)

    def save(self, path: str | Path) -> None:
        ids_blob = "\n".join(self._ids).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<IIQQ", _VERSION, EMBEDDING_DIM, len(self._ids), len(ids_blob)))
            fh.write(ids_blob)
            fh.write(np.ascontiguousarray(self._matrix, dtype="<f4").tobytes())

    @classmethod
    def open(cls, path: str | Path) -> "EmbeddingStore":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MAGIC:
                raise IndexFormatError(f"{path}: bad magic {magic!r}")
            version, dim, count, ids_len = struct.unpack("<IIQQ", fh.read(24))
            if version != _VERSION:
                raise IndexFormatError(f"{path}: unsupported version {version}")
            if dim != EMBEDDING_DIM:
                raise IndexFormatError(f"{path}: dim {dim} != {EMBEDDING_DIM}")
            ids_blob = fh.read(ids_len)
            data_offset = fh.tell()
        ids = ids_blob.decode("utf-8").split("\n") if ids_blob else []
        matrix = np.memmap(path, dtype="<f4", mode="r", offset=data_offset,
                           shape=(count, dim))
        return cls(ids, matrix)


def read_embedding_file(path: str | Path) -> Iterable[tuple[str, np.ndarray]]:
    """Yield (id, vector) from `<id>\\t<v1> <v2> ... <v200>` text lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise CorruptRecord(f"{path}:{lineno}: expected <id>\\t<values>")
            ident, rest = line.split("\t", 1)
            try:
                vec = np.array([float(x) for x in rest.split()], dtype=np.float32)
            except ValueError as exc:
                raise CorruptRecord(f"{path}:{lineno}: {exc}") from None
            if vec.shape != (EMBEDDING_DIM,):
                raise CorruptRecord(
                    f"{path}:{lineno}: expected {EMBEDDING_DIM} values, got {vec.shape[0]}"
                )
            yield ident, vec


def rerank(
    generated: TruncatedEmbedding,
    candidates: Sequence[LabelHit],
    store: EmbeddingStore,
    config: TruncationConfig = TruncationConfig(),
    diagnostics: dict | None = None,
) -> list[ScoredCandidate]:
    """Sort candidates by dot(generated, truncated stored embedding) desc.

    Candidates without a stored embedding are dropped here (they stay
    reachable through the label-sorted layer) and counted in `diagnostics`.
    """
    scored: list[ScoredCandidate] = []
    missing = 0
    for hit in candidates:
        trunc = store.truncated(hit.entity.id, config)
        if trunc is None:
            missing += 1
            continue
        scored.append(ScoredCandidate(hit.entity, dot(generated, trunc),
                                      CandidateSource.EMBEDDING_SORTED))
    if diagnostics is not None:
        diagnostics["missing_embeddings"] = diagnostics.get("missing_embeddings", 0) + missing
    scored.sort(key=lambda c: (-c.dot_score, c.entity.numeric_id, c.entity.id))
    return scored


class LayerOrder(enum.Enum):
    LABEL_FIRST = "label_first"
    EMBED_FIRST = "embed_first"


@dataclass(frozen=True)
class LayerPolicy:
    """How many label-sorted and embedding-sorted candidates to keep, and
    which block comes first. Default mirrors the 3 + 3 layering."""

    n_label: int = 3
    n_embed: int = 3
    order: LayerOrder = LayerOrder.LABEL_FIRST

    def __post_init__(self):
        if self.n_label < 0 or self.n_embed < 0:
            raise ValueError("layer quotas must be non-negative")
        if self.n_label + self.n_embed < 1:
            raise ValueError("layer policy total must be >= 1")

    @property
    def total(self) -> int:
        return self.n_label + self.n_embed

    def name(self) -> str:
        ls, ts = f"{self.n_label} LS", f"{self.n_embed} TS"
        return f"{ls} + {ts}" if self.order is LayerOrder.LABEL_FIRST else f"{ts} + {ls}"


def parse_policy_name(name: str) -> LayerPolicy:
    """Parse names like "3 LS + 3 TS" or "0 LS + 6 TS"."""
    parts = [p.strip() for p in name.split("+")]
    if len(parts) != 2:
        raise ValueError(f"bad policy name {name!r}")
    counts = {}
    first_kind = None
    for i, part in enumerate(parts):
        m = part.split()
        if len(m) != 2 or m[1] not in ("LS", "TS") or not m[0].isdigit():
            raise ValueError(f"bad policy part {part!r}")
        counts[m[1]] = int(m[0])
        if i == 0:
            first_kind = m[1]
    if set(counts) != {"LS", "TS"}:
        raise ValueError(f"policy must name both LS and TS: {name!r}")
    order = LayerOrder.LABEL_FIRST if first_kind == "LS" else LayerOrder.EMBED_FIRST
    return LayerPolicy(counts["LS"], counts["TS"], order)


# the six candidate-ordering configurations compared in the ablation sweep
SWEEP_POLICY_NAMES = ["3 LS + 3 TS", "3 TS + 3 LS", "3 LS + 0 TS",
                      "0 LS + 3 TS", "6 LS + 0 TS", "0 LS + 6 TS"]


def layer_candidates(
    label_hits: Sequence[LabelHit],
    reranked: Sequence[ScoredCandidate],
    policy: LayerPolicy = LayerPolicy(),
) -> list[ScoredCandidate]:
    """Concatenate label-sorted and embedding-sorted blocks per policy.

    Each block draws from its full ranked list until it has contributed its
    quota of ids not already taken (dedupe keeps the earliest occurrence).
    If a list runs out, the other list backfills up to the policy total.
    """
    label_seq = [ScoredCandidate(h.entity, None, CandidateSource.LABEL_SORTED)
                 for h in label_hits]
    embed_seq = list(reranked)
    if policy.order is LayerOrder.LABEL_FIRST:
        sources = [(label_seq, policy.n_label), (embed_seq, policy.n_embed)]
    else:
        sources = [(embed_seq, policy.n_embed), (label_seq, policy.n_label)]

    out: list[ScoredCandidate] = []
    seen: set[str] = set()
    cursors = [0, 0]

    for s_idx, (items, quota) in enumerate(sources):
        contributed = 0
        while contributed < quota and cursors[s_idx] < len(items):
            item = items[cursors[s_idx]]
            cursors[s_idx] += 1
            if item.entity.id in seen:
                continue
            out.append(item)
            seen.add(item.entity.id)
            contributed += 1

    for s_idx, (items, _) in enumerate(sources):
        while len(out) < policy.total and cursors[s_idx] < len(items):
            item = items[cursors[s_idx]]
            cursors[s_idx] += 1
            if item.entity.id in seen:
                continue
            out.append(item)
            seen.add(item.entity.id)

    return out
