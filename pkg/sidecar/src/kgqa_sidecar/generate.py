"""Beam-file generation in the core's exchange format (JSONL, one
{"qid": ..., "beams": [...]} object per line)."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import torch

from .seq2seq import _pad_batch, load_checkpoint
from .vocab import PAD_ID


@dataclass
class GenerationJob:
    checkpoint_dir: Path
    questions_file: Path  # JSONL with qid and question fields
    out_path: Path
    beam_count: int = 3
    max_length: int = 96
    batch_size: int = 32


def read_questions(path: str | Path) -> list[tuple[str, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            rows.append((str(obj["qid"]), obj["question"]))
    return rows


def _atomic_write(path: Path, lines: list[str]) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.writelines(lines)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def generate_beams(job: GenerationJob) -> Path:
    """Decode `beam_count` beams per question; a per-question failure is
    recorded as an entry with an empty beams list so downstream consumers
    see the qid either way."""
    if job.beam_count < 1:
        raise ValueError("beam_count must be >= 1")
    model, vocab = load_checkpoint(job.checkpoint_dir)
    questions = read_questions(job.questions_file)

    lines: list[str] = []
    with torch.no_grad():
        for start in range(0, len(questions), job.batch_size):
            chunk = questions[start:start + job.batch_size]
            try:
                inputs = _pad_batch([vocab.encode(q) for _, q in chunk])
                generated = model.generate(
                    input_ids=inputs,
                    attention_mask=(inputs != PAD_ID).long(),
                    num_beams=max(job.beam_count, 2),
                    num_return_sequences=job.beam_count,
                    max_length=job.max_length,
                    early_stopping=True,
                )
                per_question = generated.view(len(chunk), job.beam_count, -1)
                for (qid, _), beams in zip(chunk, per_question):
                    texts = [vocab.decode(beam.tolist()) for beam in beams]
                    lines.append(json.dumps({"qid": qid, "beams": texts},
                                            ensure_ascii=False) + "\n")
            except Exception:  # noqa: BLE001 - emit the empty-beam marker
                for qid, _ in chunk:
                    lines.append(json.dumps({"qid": qid, "beams": []}) + "\n")

    out_path = Path(job.out_path)
    _atomic_write(out_path, lines)
    return out_path
