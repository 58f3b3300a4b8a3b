"""BM25 full-text search over KG entity labels.

The index is an Okapi BM25 (k1=1.2, b=0.75, Lucene-style smoothed idf)
inverted index. Tokenization: Unicode NFKC normalization, casefold, split on
non-alphanumeric runs.

Persisted layout (single file, little-endian, versioned):

    magic b"LIDX" | u32 version | u64 header_len | header JSON
    then the binary sections named in the header, each described by
    (byte offset, dtype, element count):

    doc_len        u32[N]     token count per document
    numeric_id     u64[N]     digits of each id (tie-break key)
    id_offsets     u64[N+1]   slice bounds into id_blob
    id_blob        bytes      UTF-8 ids, concatenated
    label_offsets  u64[N+1]
    label_blob     bytes
    term_offsets   u64[T+1]   slice bounds into term_blob (terms sorted)
    term_blob      bytes
    post_start     u64[T+1]   postings slice bounds per term
    post_doc       u32[P]     document index per posting
    post_tf        u32[P]     term frequency per posting

A reopened index memory-maps every section, so reopening needs no rebuild
and many readers can share one file.
"""

from __future__ import annotations

import io
import json
import math
import re
import struct
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import CorruptRecord, EmptyQuery, IndexFormatError

_MAGIC = b"LIDX"
_VERSION = 1

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_ID_RE = re.compile(r"^[A-Za-z]+\d+$")

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(unicodedata.normalize("NFKC", text).casefold())


def numeric_id_of(identifier: str) -> int:
    digits = "".join(ch for ch in identifier if ch.isdigit())
    return int(digits) if digits else 0


@dataclass(frozen=True)
class EntityRecord:
    """One KG item: identifier, human label, and the numeric tie-break key."""

    id: str
    label: str
    numeric_id: int = -1

    def __post_init__(self):
        if self.numeric_id < 0:
            object.__setattr__(self, "numeric_id", numeric_id_of(self.id))


@dataclass(frozen=True)
class LabelHit:
    entity: EntityRecord
    score: float
    rank: int


def read_label_file(path: str | Path) -> Iterator[EntityRecord]:
    """Yield records from a UTF-8 `<id>\\t<label>` file; blank lines skipped."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise CorruptRecord(f"{path}:{lineno}: expected <id>\\t<label>")
            ident, label = line.split("\t", 1)
            if not _ID_RE.match(ident):
                raise CorruptRecord(f"{path}:{lineno}: bad identifier {ident!r}")
            if not label.strip():
                raise CorruptRecord(f"{path}:{lineno}: blank label")
            yield EntityRecord(ident, label)


class LabelIndex:
    """Immutable BM25 index; build once (single writer), search concurrently."""

    def __init__(self, *, ids, labels, numeric, doc_len, terms, term_offsets,
                 post_start, post_doc, post_tf, total_tokens, k1=DEFAULT_K1, b=DEFAULT_B):
        self._ids = ids                    # u64 offsets + blob, or list[str]
        self._labels = labels
        self._numeric = numeric            # u64[N]
        self._doc_len = doc_len            # u32[N]
        self._terms = terms                # bytes blob
        self._term_offsets = term_offsets  # u64[T+1]
        self._post_start = post_start      # u64[T+1]
        self._post_doc = post_doc          # u32[P]
        self._post_tf = post_tf            # u32[P]
        self._total_tokens = int(total_tokens)
        self.k1 = k1
        self.b = b

    # --- construction ---------------------------------------------------

    @classmethod
    def build(cls, records: Iterable[EntityRecord], k1: float = DEFAULT_K1,
              b: float = DEFAULT_B) -> "LabelIndex":
        """Index a finite record stream; on duplicate ids the last label wins."""
        by_id: dict[str, str] = {}
        for rec in records:
            by_id[rec.id] = rec.label

        ids = list(by_id)
        labels = [by_id[i] for i in ids]
        numeric = np.array([numeric_id_of(i) for i in ids], dtype="<u8")

        doc_len = np.zeros(len(ids), dtype="<u4")
        postings: dict[str, list[tuple[int, int]]] = {}
        for doc_idx, label in enumerate(labels):
            tokens = tokenize(label)
            doc_len[doc_idx] = len(tokens)
            counts: dict[str, int] = {}
            for t in tokens:
                counts[t] = counts.get(t, 0) + 1
            for term, tf in counts.items():
                postings.setdefault(term, []).append((doc_idx, tf))

        terms_sorted = sorted(postings)
        term_blob = io.BytesIO()
        term_offsets = np.zeros(len(terms_sorted) + 1, dtype="<u8")
        post_start = np.zeros(len(terms_sorted) + 1, dtype="<u8")
        doc_list: list[int] = []
        tf_list: list[int] = []
        for t_idx, term in enumerate(terms_sorted):
            term_blob.write(term.encode("utf-8"))
            term_offsets[t_idx + 1] = term_blob.tell()
            for doc_idx, tf in postings[term]:
                doc_list.append(doc_idx)
                tf_list.append(tf)
            post_start[t_idx + 1] = len(doc_list)

        return cls(
            ids=ids, labels=labels, numeric=numeric, doc_len=doc_len,
            terms=term_blob.getvalue(), term_offsets=term_offsets,
            post_start=post_start,
            post_doc=np.array(doc_list, dtype="<u4"),
            post_tf=np.array(tf_list, dtype="<u4"),
            total_tokens=int(doc_len.sum()), k1=k1, b=b,
        )

    # --- accessors --------------------------------------------------------

    def __len__(self) -> int:
        return len(self._doc_len)

    def _id_at(self, doc_idx: int) -> str:
        if isinstance(self._ids, list):
            return self._ids[doc_idx]
        offsets, blob = self._ids
        return bytes(blob[offsets[doc_idx]:offsets[doc_idx + 1]]).decode("utf-8")

    def _label_at(self, doc_idx: int) -> str:
        if isinstance(self._labels, list):
            return self._labels[doc_idx]
        offsets, blob = self._labels
        return bytes(blob[offsets[doc_idx]:offsets[doc_idx + 1]]).decode("utf-8")

    def record_at(self, doc_idx: int) -> EntityRecord:
        return EntityRecord(self._id_at(doc_idx), self._label_at(doc_idx),
                            int(self._numeric[doc_idx]))

    def _term_index(self, token: str) -> int | None:
        """Binary search the sorted term blob; UTF-8 byte order equals
        codepoint order, so bytes comparisons are safe."""
        needle = token.encode("utf-8")
        lo, hi = 0, len(self._term_offsets) - 2
        while lo <= hi:
            mid = (lo + hi) // 2
            start, end = int(self._term_offsets[mid]), int(self._term_offsets[mid + 1])
            candidate = bytes(self._terms[start:end])
            if candidate == needle:
                return mid
            if candidate < needle:
                lo = mid + 1
            else:
                hi = mid - 1
        return None

    # --- search ------------------------------------------------------------

    def search(self, query: str, k: int) -> list[LabelHit]:
        """Top-k by BM25 score desc, ties by ascending numeric_id then id."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        tokens = tokenize(query)
        if not tokens:
            raise EmptyQuery(f"query {query!r} tokenizes to nothing")
        n = len(self)
        if n == 0 or self._total_tokens == 0:
            return []
        avg_len = self._total_tokens / n

        scores = np.zeros(n, dtype="<f8")
        touched: list[np.ndarray] = []
        for token in tokens:
            t_idx = self._term_index(token)
            if t_idx is None:
                continue
            start, end = int(self._post_start[t_idx]), int(self._post_start[t_idx + 1])
            doc = self._post_doc[start:end]
            tf = self._post_tf[start:end].astype("<f8")
            df = end - start
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            dl = self._doc_len[doc].astype("<f8")
            contrib = idf * (tf * (self.k1 + 1.0)) / (tf + self.k1 * (1.0 - self.b + self.b * dl / avg_len))
            scores[doc] += contrib
            touched.append(doc)
        if not touched:
            return []

        matched = np.unique(np.concatenate(touched))
        order = sorted(
            matched.tolist(),
            key=lambda d: (-scores[d], int(self._numeric[d]), self._id_at(d)),
        )[:k]
        return [
            LabelHit(self.record_at(d), float(scores[d]), rank)
            for rank, d in enumerate(order, start=1)
        ]

    # --- persistence ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        path = Path(path)
        ids = [self._id_at(i) for i in range(len(self))]
        labels = [self._label_at(i) for i in range(len(self))]
        id_blob, id_offsets = _pack_strings(ids)
        label_blob, label_offsets = _pack_strings(labels)

        sections: list[tuple[str, bytes, str, int]] = [
            ("doc_len", self._doc_len.astype("<u4").tobytes(), "<u4", len(self)),
            ("numeric_id", self._numeric.astype("<u8").tobytes(), "<u8", len(self)),
            ("id_offsets", id_offsets.tobytes(), "<u8", len(ids) + 1),
            ("id_blob", id_blob, "bytes", len(id_blob)),
            ("label_offsets", label_offsets.tobytes(), "<u8", len(labels) + 1),
            ("label_blob", label_blob, "bytes", len(label_blob)),
            ("term_offsets", self._term_offsets.astype("<u8").tobytes(), "<u8",
             len(self._term_offsets)),
            ("term_blob", bytes(self._terms), "bytes", len(self._terms)),
            ("post_start", self._post_start.astype("<u8").tobytes(), "<u8",
             len(self._post_start)),
            ("post_doc", self._post_doc.astype("<u4").tobytes(), "<u4", len(self._post_doc)),
            ("post_tf", self._post_tf.astype("<u4").tobytes(), "<u4", len(self._post_tf)),
        ]

        header = {"doc_count": len(self), "total_tokens": self._total_tokens,
                  "k1": self.k1, "b": self.b, "sections": {}}
        # compute offsets: magic+version+len field, then header json, then data
        blobs = [blob for _, blob, _, _ in sections]
        trial = json.dumps(header).encode()
        base = len(_MAGIC) + 4 + 8 + len(trial)
        while True:
            offset = base
            for (name, blob, dtype, count) in sections:
                header["sections"][name] = [offset, dtype, count]
                offset += len(blob)
            encoded = json.dumps(header).encode()
            if len(encoded) == base - (len(_MAGIC) + 4 + 8):
                break
            base = len(_MAGIC) + 4 + 8 + len(encoded)

        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", _VERSION))
            fh.write(struct.pack("<Q", len(encoded)))
            fh.write(encoded)
            for blob in blobs:
                fh.write(blob)

    @classmethod
    def open(cls, path: str | Path) -> "LabelIndex":
        """Reopen a persisted index; sections are memory-mapped, not copied."""
        path = Path(path)
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MAGIC:
                raise IndexFormatError(f"{path}: bad magic {magic!r}")
            (version,) = struct.unpack("<I", fh.read(4))
            if version != _VERSION:
                raise IndexFormatError(f"{path}: unsupported version {version}")
            (header_len,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(header_len))

        raw = np.memmap(path, dtype=np.uint8, mode="r")

        def section(name):
            offset, dtype, count = header["sections"][name]
            if dtype == "bytes":
                return raw[offset:offset + count]
            itemsize = np.dtype(dtype).itemsize
            return raw[offset:offset + count * itemsize].view(dtype)

        return cls(
            ids=(section("id_offsets"), section("id_blob")),
            labels=(section("label_offsets"), section("label_blob")),
            numeric=section("numeric_id"),
            doc_len=section("doc_len"),
            terms=section("term_blob"),
            term_offsets=section("term_offsets"),
            post_start=section("post_start"),
            post_doc=section("post_doc"),
            post_tf=section("post_tf"),
            total_tokens=header["total_tokens"],
            k1=header["k1"], b=header["b"],
        )


def _pack_strings(strings: list[str]) -> tuple[bytes, np.ndarray]:
    blob = io.BytesIO()
    offsets = np.zeros(len(strings) + 1, dtype="<u8")
    for i, s in enumerate(strings):
        blob.write(s.encode("utf-8"))
        offsets[i + 1] = blob.tell()
    return blob.getvalue(), offsets


def build_index(records: Iterable[EntityRecord], **kwargs) -> LabelIndex:
    return LabelIndex.build(records, **kwargs)


def search(index: LabelIndex, query: str, k: int) -> list[LabelHit]:
    return index.search(query, k)
