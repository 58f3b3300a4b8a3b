"""Toy encoder-decoder generator: a small randomly-initialized T5 trained
from scratch to memorize question -> skeleton-query pairs.

No pretrained weights are used (the build environment has no model hub);
the architecture still gives beam-search decoding for free.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from transformers import T5Config, T5ForConditionalGeneration
from transformers.utils import logging as hf_logging

from .vocab import PAD_ID, EOS_ID, Vocab

hf_logging.set_verbosity_error()

WEIGHTS_FILE = "model.pt"
VOCAB_FILE = "vocab.json"
SETTINGS_FILE = "settings.json"


@dataclass(frozen=True)
class ModelSettings:
    d_model: int = 64
    d_kv: int = 16
    d_ff: int = 128
    num_layers: int = 2
    num_heads: int = 4


@dataclass
class TrainingJob:
    pairs_file: Path
    out_dir: Path
    epochs: int = 250
    learning_rate: float = 3e-3
    batch_size: int = 16
    seed: int = 0
    settings: ModelSettings = field(default_factory=ModelSettings)


def build_model(vocab_size: int, settings: ModelSettings = ModelSettings()) -> T5ForConditionalGeneration:
    config = T5Config(
        vocab_size=vocab_size,
        d_model=settings.d_model,
        d_kv=settings.d_kv,
        d_ff=settings.d_ff,
        num_layers=settings.num_layers,
        num_heads=settings.num_heads,
        dropout_rate=0.0,
        decoder_start_token_id=PAD_ID,
        pad_token_id=PAD_ID,
        eos_token_id=EOS_ID,
    )
    return T5ForConditionalGeneration(config)


def _pad_batch(sequences: list[list[int]]) -> torch.Tensor:
    width = max(len(s) for s in sequences)
    return torch.tensor([s + [PAD_ID] * (width - len(s)) for s in sequences],
                        dtype=torch.long)


def read_pairs(path: str | Path) -> list[tuple[str, str, str]]:
    """(qid, question, skeleton) rows from the training-pairs JSONL."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            rows.append((str(obj["qid"]), obj["question"], obj["skeleton"]))
    return rows


def train_from_pairs(job: TrainingJob) -> Path:
    """Memorization fine-tune; deterministic for a fixed seed on CPU."""
    torch.manual_seed(job.seed)
    random.seed(job.seed)

    pairs = read_pairs(job.pairs_file)
    if not pairs:
        raise ValueError(f"{job.pairs_file}: no training pairs")
    vocab = Vocab.from_texts(text for _, q, s in pairs for text in (q, s))
    model = build_model(len(vocab), job.settings)

    examples = [(vocab.encode(q), vocab.encode(s)) for _, q, s in pairs]
    optimizer = torch.optim.AdamW(model.parameters(), lr=job.learning_rate)
    model.train()
    for _ in range(job.epochs):
        order = list(range(len(examples)))
        random.shuffle(order)
        for start in range(0, len(order), job.batch_size):
            chunk = [examples[i] for i in order[start:start + job.batch_size]]
            inputs = _pad_batch([x for x, _ in chunk])
            targets = _pad_batch([y for _, y in chunk])
            labels = targets.clone()
            labels[labels == PAD_ID] = -100
            optimizer.zero_grad()
            loss = model(input_ids=inputs,
                         attention_mask=(inputs != PAD_ID).long(),
                         labels=labels).loss
            loss.backward()
            optimizer.step()

    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out_dir / WEIGHTS_FILE)
    vocab.save(out_dir / VOCAB_FILE)
    payload = {"settings": asdict(job.settings), "vocab_size": len(vocab),
               "epochs": job.epochs, "seed": job.seed}
    (out_dir / SETTINGS_FILE).write_text(json.dumps(payload, indent=2) + "\n",
                                         encoding="utf-8")
    return out_dir


def load_checkpoint(checkpoint_dir: str | Path) -> tuple[T5ForConditionalGeneration, Vocab]:
    checkpoint_dir = Path(checkpoint_dir)
    payload = json.loads((checkpoint_dir / SETTINGS_FILE).read_text(encoding="utf-8"))
    vocab = Vocab.load(checkpoint_dir / VOCAB_FILE)
    model = build_model(payload["vocab_size"], ModelSettings(**payload["settings"]))
    state = torch.load(checkpoint_dir / WEIGHTS_FILE, map_location="cpu",
                       weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, vocab
