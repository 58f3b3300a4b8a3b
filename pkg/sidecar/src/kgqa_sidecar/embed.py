"""Deterministic label embeddings via hashed character n-grams.

The build environment cannot download pretrained encoders, so labels are
embedded with a feature-hashing scheme: every character 3..5-gram of the
boundary-marked, casefolded label maps to a signed coordinate through
blake2b, and the label vector is the mean over its n-gram vectors (mean
pooling). The hash makes regeneration byte-identical across runs and
machines. Output files follow the QA core's relation-vector formats.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import unicodedata
from dataclasses import dataclass
from pathlib import Path

ENCODER_TAG = "hashed-char-ngram-v1"
POOLING_TAG = "mean"


@dataclass
class EmbeddingJob:
    labels_file: Path  # lines of `<label>` or `<id>\t<label>`
    out_path: Path
    dim: int = 64
    ngram_min: int = 3
    ngram_max: int = 5


def _ngrams(label: str, lo: int, hi: int) -> list[str]:
    text = "\x02" + unicodedata.normalize("NFKC", label).casefold() + "\x03"
    grams = []
    for n in range(lo, hi + 1):
        grams.extend(text[i:i + n] for i in range(len(text) - n + 1))
    return grams


def encode_label(label: str, dim: int = 64, ngram_min: int = 3,
                 ngram_max: int = 5) -> list[float]:
    """Mean-pooled signed hash features, L2-normalized."""
    vec = [0.0] * dim
    grams = _ngrams(label, ngram_min, ngram_max)
    if not grams:
        return vec
    for gram in grams:
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
        bucket = int.from_bytes(digest[:4], "little") % dim
        sign = 1.0 if digest[4] & 1 else -1.0
        vec[bucket] += sign
    vec = [v / len(grams) for v in vec]
    norm = math.sqrt(sum(v * v for v in vec))
    if norm > 0.0:
        vec = [v / norm for v in vec]
    return vec


def _format(vec: list[float]) -> str:
    return " ".join(f"{v:.6f}" for v in vec)


def _atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def embed_labels(job: EmbeddingJob) -> Path:
    """Write one vector per input line.

    `<id>\\t<label>` inputs produce the catalog format
    (`<id>\\t<label>\\t<v...>`), bare labels the query-vector format
    (`<label>\\t<v...>`). Provenance (encoder, pooling, dimension) goes to
    `<out>.meta.json` so the vector file itself stays in the exact exchange
    format the core parses.
    """
    lines_out: list[str] = []
    count = 0
    with open(job.labels_file, encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.rstrip("\n")
            if not raw.strip():
                continue
            if "\t" in raw:
                ident, label = raw.split("\t", 1)
                prefix = f"{ident}\t{label}\t"
            else:
                label = raw
                prefix = f"{label}\t"
            vec = encode_label(label, job.dim, job.ngram_min, job.ngram_max)
            lines_out.append(prefix + _format(vec) + "\n")
            count += 1

    out_path = Path(job.out_path)
    _atomic_write_text(out_path, "".join(lines_out))
    meta = {"encoder": ENCODER_TAG, "pooling": POOLING_TAG, "dim": job.dim,
            "ngram_range": [job.ngram_min, job.ngram_max], "labels": count}
    _atomic_write_text(out_path.with_suffix(out_path.suffix + ".meta.json"),
                       json.dumps(meta, indent=2) + "\n")
    return out_path
