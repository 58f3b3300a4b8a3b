"""Word-level vocabulary for the toy generator (closed world over the
training pairs)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

PAD_ID = 0
EOS_ID = 1
UNK_ID = 2

_SPECIALS = ["<pad>", "</s>", "<unk>"]


@dataclass
class Vocab:
    token_to_id: dict[str, int]
    id_to_token: list[str]

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocab":
        token_to_id = {tok: i for i, tok in enumerate(_SPECIALS)}
        for text in texts:
            for token in text.split():
                token_to_id.setdefault(token, len(token_to_id))
        id_to_token = [None] * len(token_to_id)
        for token, idx in token_to_id.items():
            id_to_token[idx] = token
        return cls(token_to_id, id_to_token)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def encode(self, text: str) -> list[int]:
        return [self.token_to_id.get(tok, UNK_ID) for tok in text.split()] + [EOS_ID]

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self.id_to_token[i] for i in ids
                        if i not in (PAD_ID, EOS_ID) and 0 <= i < len(self.id_to_token))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.id_to_token, ensure_ascii=False),
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        id_to_token = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls({tok: i for i, tok in enumerate(id_to_token)}, id_to_token)
