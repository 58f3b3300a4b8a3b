"""Ground generated relation labels to KG property identifiers by cosine
similarity over externally supplied text-embedding vectors.

The core never computes text embeddings itself; it reads a catalog file
(`<id>\\t<label>\\t<v1> ... <vD>` per line) and, for generated labels, a
query-vector file (`<label>\\t<v1> ... <vD>`) produced by whatever encoder
the sidecar used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CorruptRecord, DimensionMismatch, EmptyCatalog
from .label_index import numeric_id_of


@dataclass(frozen=True, eq=False)
class RelationRecord:
    id: str
    label: str
    text_vector: np.ndarray

    @property
    def numeric_id(self) -> int:
        return numeric_id_of(self.id)


@dataclass(frozen=True, eq=False)
class RelationHit:
    relation: RelationRecord
    cosine: float
    rank: int


def _parse_vector_line(line: str, path, lineno: int, parts_expected: int) -> list[str]:
    parts = line.split("\t")
    if len(parts) != parts_expected:
        raise CorruptRecord(f"{path}:{lineno}: expected {parts_expected} tab-separated fields")
    return parts


def load_relation_catalog(path: str | Path) -> list[RelationRecord]:
    """Read `<id>\\t<label>\\t<v1> ... <vD>` lines; all vectors must share one
    dimension."""
    records: list[RelationRecord] = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            ident, label, values = _parse_vector_line(line, path, lineno, 3)
            try:
                vec = np.array([float(x) for x in values.split()], dtype=np.float64)
            except ValueError as exc:
                raise CorruptRecord(f"{path}:{lineno}: {exc}") from None
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise CorruptRecord(
                    f"{path}:{lineno}: dimension {vec.shape[0]} != catalog dimension {dim}"
                )
            if not np.isfinite(vec).all():
                raise CorruptRecord(f"{path}:{lineno}: non-finite vector entry")
            records.append(RelationRecord(ident, label, vec))
    return records


def load_query_vectors(path: str | Path) -> dict[str, np.ndarray]:
    """Read `<label>\\t<v1> ... <vD>` lines into a label -> vector table."""
    table: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            label, values = _parse_vector_line(line, path, lineno, 2)
            try:
                table[label] = np.array([float(x) for x in values.split()], dtype=np.float64)
            except ValueError as exc:
                raise CorruptRecord(f"{path}:{lineno}: {exc}") from None
    return table


def match_relation(
    query_vector: Sequence[float],
    catalog: Sequence[RelationRecord],
    k: int = 3,
) -> list[RelationHit]:
    """Top-k catalog entries by cosine similarity descending; ties broken by
    ascending numeric id. Zero-norm vectors score cosine 0 by convention."""
    if not catalog:
        raise EmptyCatalog("relation catalog is empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(query_vector, dtype=np.float64)
    dim = catalog[0].text_vector.shape[0]
    if q.shape != (dim,):
        raise DimensionMismatch(f"query dim {q.shape} != catalog dim ({dim},)")

    q_norm = math.sqrt(float(q @ q))
    scored = []
    for rec in catalog:
        v = rec.text_vector
        v_norm = math.sqrt(float(v @ v))
        if q_norm == 0.0 or v_norm == 0.0:
            cos = 0.0
        else:
            cos = float(q @ v) / (q_norm * v_norm)
        scored.append((cos, rec))
    scored.sort(key=lambda it: (-it[0], it[1].numeric_id, it[1].id))
    return [RelationHit(rec, cos, rank)
            for rank, (cos, rec) in enumerate(scored[:k], start=1)]


class RelationMatcher:
    """Catalog plus the query-vector table for generated labels.

    Labels absent from the query-vector table fall back to exact label
    matching against the catalog; if that also fails the hit list is empty
    and the miss is counted in diagnostics.
    """

    def __init__(self, catalog: Sequence[RelationRecord],
                 query_vectors: dict[str, np.ndarray] | None = None):
        self.catalog = list(catalog)
        self.query_vectors = query_vectors or {}
        self._by_label: dict[str, list[RelationRecord]] = {}
        for rec in self.catalog:
            self._by_label.setdefault(rec.label.strip(), []).append(rec)
        for recs in self._by_label.values():
            recs.sort(key=lambda r: (r.numeric_id, r.id))

    def candidates_for_label(self, label: str, k: int = 3,
                             diagnostics: dict | None = None) -> list[RelationHit]:
        label = label.strip()
        vec = self.query_vectors.get(label)
        if vec is not None and self.catalog:
            return match_relation(vec, self.catalog, k)
        exact = self._by_label.get(label, [])
        if exact:
            if diagnostics is not None:
                diagnostics["relation_label_fallback"] = (
                    diagnostics.get("relation_label_fallback", 0) + 1)
            return [RelationHit(rec, 1.0, rank)
                    for rank, rec in enumerate(exact[:k], start=1)]
        if diagnostics is not None:
            diagnostics["relation_label_missing"] = (
                diagnostics.get("relation_label_missing", 0) + 1)
        return []
