"""Skeleton SPARQL queries: the exchange language between the generator and
the grounding engine.

A skeleton query is a SPARQL scaffold in which every entity identifier has
been replaced by ``<ent>label [v1, v2, ...]</ent>`` (the bracketed vector is
a truncated KG embedding and may be absent) and every relation identifier by
``<rel>label</rel>``. This module parses such strings into an AST, serializes
the AST back to skeleton or grounded SPARQL text, and converts gold SPARQL
queries into training skeletons.

The embedding surface syntax is square-bracketed, comma-separated decimals
with a fixed number of fractional digits, e.g. ``[0.123, -0.045]``. Values
are rounded half away from zero at the configured precision.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence, Union

from .errors import (
    EmptyLabel,
    LengthMismatch,
    MalformedTags,
    MissingBinding,
    MissingEmbedding,
    NotAQuery,
    UnknownIdentifier,
)

_VERB_TOKENS = {"select", "ask"}

_TAG_RE = re.compile(r"</?(?:ent|rel)>")
_SLOT_BODY_RE = re.compile(r"^(?P<label>.*?)(?:\s*\[(?P<vec>[^\][]*)\])?\s*$", re.S)
_KG_ID_RE = re.compile(r"\b(wd:Q\d+|wdt:P\d+)\b")


def round_half_away(value: float, digits: int) -> float:
    """Round to `digits` decimals with ties going away from zero.

    Operates on the shortest decimal representation of the float, matching
    how a decimal-string formatter would render it.
    """
    value = float(value)  # accept numpy scalars
    if not math.isfinite(value):
        raise ValueError(f"cannot round non-finite value {value!r}")
    quantum = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class TruncationConfig:
    """Length and decimal precision of truncated embeddings (defaults 10, 3)."""

    length: int = 10
    precision: int = 3

    def __post_init__(self):
        if not 1 <= self.length <= 200:
            raise ValueError(f"truncation length {self.length} outside [1, 200]")
        if not 0 <= self.precision <= 6:
            raise ValueError(f"precision {self.precision} outside [0, 6]")


@dataclass(frozen=True)
class TruncatedEmbedding:
    """Fixed-length vector of decimals acting as a soft entity identifier.

    Values are normalized (rounded half away from zero) on construction, so
    two embeddings parsed from equivalent strings compare equal.
    """

    values: tuple[float, ...]
    declared_length: int = 10
    declared_precision: int = 3

    def __post_init__(self):
        rounded = tuple(round_half_away(v, self.declared_precision) for v in self.values)
        if len(rounded) != self.declared_length:
            raise ValueError(
                f"embedding has {len(rounded)} values, declared length is {self.declared_length}"
            )
        object.__setattr__(self, "values", rounded)

    def render(self) -> str:
        body = ", ".join(f"{v:.{self.declared_precision}f}" for v in self.values)
        return f"[{body}]"


@dataclass(frozen=True)
class EntitySlot:
    label: str
    trunc_embedding: TruncatedEmbedding | None = None

    def __post_init__(self):
        if not self.label.strip():
            raise EmptyLabel("entity slot with blank label")
        object.__setattr__(self, "label", self.label.strip())


@dataclass(frozen=True)
class RelationSlot:
    label: str

    def __post_init__(self):
        if not self.label.strip():
            raise EmptyLabel("relation slot with blank label")
        object.__setattr__(self, "label", self.label.strip())


@dataclass(frozen=True)
class EntityRef:
    """Marker in the scaffold pointing at entity_slots[index]."""

    index: int


@dataclass(frozen=True)
class RelationRef:
    """Marker in the scaffold pointing at relation_slots[index]."""

    index: int


ScaffoldToken = Union[str, EntityRef, RelationRef]


@dataclass
class ParseDiagnostics:
    """Repairs applied while parsing a generated query string."""

    length_repaired: bool = False
    value_repaired: bool = False
    precision_repaired: bool = False

    def any(self) -> bool:
        return self.length_repaired or self.value_repaired or self.precision_repaired

    def as_flags(self) -> list[str]:
        return [name for name in ("length_repaired", "value_repaired", "precision_repaired")
                if getattr(self, name)]


@dataclass(frozen=True)
class SkeletonQuery:
    """Parsed AST of a generated query.

    Slot order equals left-to-right textual order. `raw_text` and
    `diagnostics` are carried for observability and excluded from equality,
    so round-tripping through `serialize_skeleton` yields an equal AST.
    """

    scaffold_tokens: tuple[ScaffoldToken, ...]
    entity_slots: tuple[EntitySlot, ...]
    relation_slots: tuple[RelationSlot, ...]
    raw_text: str = field(compare=False, default="")
    diagnostics: ParseDiagnostics = field(compare=False, default_factory=ParseDiagnostics)

    def slot_refs(self) -> list[EntityRef | RelationRef]:
        """Slot markers in textual order (the combination-significance order)."""
        return [t for t in self.scaffold_tokens if not isinstance(t, str)]


@dataclass(frozen=True)
class PrefixScheme:
    """Identifier prefixes used when grounding slots to KG ids."""

    entity_prefix: str = "wd:"
    relation_prefix: str = "wdt:"


def split_tokens(text: str) -> list[str]:
    """Split on whitespace, keeping double-quoted regions (with backslash
    escapes) glued to their token."""
    tokens: list[str] = []
    cur: list[str] = []
    in_quotes = False
    i = 0
    while i < len(text):
        ch = text[i]
        if in_quotes:
            cur.append(ch)
            if ch == "\\" and i + 1 < len(text):
                cur.append(text[i + 1])
                i += 1
            elif ch == '"':
                in_quotes = False
        elif ch == '"':
            in_quotes = True
            cur.append(ch)
        elif ch.isspace():
            if cur:
                tokens.append("".join(cur))
                cur = []
        else:
            cur.append(ch)
        i += 1
    if cur:
        tokens.append("".join(cur))
    return tokens


def normalize_whitespace(text: str) -> str:
    """Collapse whitespace runs to single spaces; quoted strings stay intact."""
    return " ".join(split_tokens(text))


def _scan_tags(text: str) -> list[tuple[str, str]]:
    """Split `text` into ('text' | 'ent' | 'rel', payload) parts.

    Raises MalformedTags on unbalanced, nested, or interleaved tags.
    """
    parts: list[tuple[str, str]] = []
    state: str | None = None
    buf = ""
    pos = 0
    for m in _TAG_RE.finditer(text):
        segment = text[pos : m.start()]
        tag = m.group()
        if state is None:
            if segment:
                parts.append(("text", segment))
            if tag == "<ent>":
                state, buf = "ent", ""
            elif tag == "<rel>":
                state, buf = "rel", ""
            else:
                raise MalformedTags(f"stray closing tag {tag}")
        else:
            buf += segment
            if tag == f"</{state}>":
                parts.append((state, buf))
                state = None
            else:
                raise MalformedTags(f"{tag} inside <{state}> block")
        pos = m.end()
    if state is not None:
        raise MalformedTags(f"unclosed <{state}> tag")
    tail = text[pos:]
    if tail:
        parts.append(("text", tail))
    return parts


def _parse_vector(body: str, config: TruncationConfig, diag: ParseDiagnostics) -> TruncatedEmbedding:
    entries = [e.strip() for e in body.split(",")] if body.strip() else []
    values: list[float] = []
    for entry in entries:
        try:
            v = float(entry)
        except ValueError:
            diag.value_repaired = True
            v = 0.0
        if not math.isfinite(v):
            diag.value_repaired = True
            v = 0.0
        values.append(v)
    if len(values) != config.length:
        diag.length_repaired = True
        values = values[: config.length]
        values += [0.0] * (config.length - len(values))
    rounded = [round_half_away(v, config.precision) for v in values]
    if any(r != v for r, v in zip(rounded, values)):
        diag.precision_repaired = True
    return TruncatedEmbedding(tuple(rounded), config.length, config.precision)


def parse_skeleton(text: str, config: TruncationConfig = TruncationConfig()) -> SkeletonQuery:
    """Parse one generated query string into a SkeletonQuery.

    Embedding vectors of the wrong length are truncated or zero-padded to the
    configured length and flagged in `diagnostics`; unrecoverable tag
    structure raises instead of returning a partial AST.
    """
    parts = _scan_tags(text)

    scaffold_text = " ".join(p for kind, p in parts if kind == "text")
    if not any(t.lower() in _VERB_TOKENS for t in split_tokens(scaffold_text)):
        raise NotAQuery("no SPARQL verb token (select/ask) found")

    diag = ParseDiagnostics()
    tokens: list[ScaffoldToken] = []
    entity_slots: list[EntitySlot] = []
    relation_slots: list[RelationSlot] = []
    for kind, payload in parts:
        if kind == "text":
            tokens.extend(split_tokens(payload))
        elif kind == "ent":
            m = _SLOT_BODY_RE.match(payload)
            label = m.group("label").strip()
            if not label:
                raise EmptyLabel("<ent> tag with blank content")
            vec = m.group("vec")
            emb = _parse_vector(vec, config, diag) if vec is not None else None
            tokens.append(EntityRef(len(entity_slots)))
            entity_slots.append(EntitySlot(label, emb))
        else:
            label = payload.strip()
            if not label:
                raise EmptyLabel("<rel> tag with blank content")
            tokens.append(RelationRef(len(relation_slots)))
            relation_slots.append(RelationSlot(label))

    return SkeletonQuery(
        scaffold_tokens=tuple(tokens),
        entity_slots=tuple(entity_slots),
        relation_slots=tuple(relation_slots),
        raw_text=text,
        diagnostics=diag,
    )


def serialize_skeleton(q: SkeletonQuery) -> str:
    """Render the AST back to skeleton-string form (single-space separated)."""
    out: list[str] = []
    for t in q.scaffold_tokens:
        if isinstance(t, EntityRef):
            slot = q.entity_slots[t.index]
            body = slot.label
            if slot.trunc_embedding is not None:
                body += " " + slot.trunc_embedding.render()
            out.append(f"<ent>{body}</ent>")
        elif isinstance(t, RelationRef):
            out.append(f"<rel>{q.relation_slots[t.index].label}</rel>")
        else:
            out.append(t)
    return " ".join(out)


def serialize_grounded(
    q: SkeletonQuery,
    entity_ids: Sequence[str],
    relation_ids: Sequence[str],
    prefixes: PrefixScheme = PrefixScheme(),
) -> str:
    """Bind every slot to a KG identifier and emit executable SPARQL text.

    Scaffold tokens are preserved verbatim; slot markers become
    ``wd:<id>`` / ``wdt:<id>`` per the prefix scheme.
    """
    if len(entity_ids) != len(q.entity_slots):
        raise MissingBinding(
            f"expected {len(q.entity_slots)} entity bindings, got {len(entity_ids)}"
        )
    if len(relation_ids) != len(q.relation_slots):
        raise MissingBinding(
            f"expected {len(q.relation_slots)} relation bindings, got {len(relation_ids)}"
        )
    out: list[str] = []
    for t in q.scaffold_tokens:
        if isinstance(t, EntityRef):
            out.append(prefixes.entity_prefix + entity_ids[t.index])
        elif isinstance(t, RelationRef):
            out.append(prefixes.relation_prefix + relation_ids[t.index])
        else:
            out.append(t)
    return " ".join(out)


def _sub_outside_quotes(text: str, repl) -> str:
    """Apply _KG_ID_RE substitution only outside double-quoted regions."""
    out: list[str] = []
    i = 0
    start = 0
    in_quotes = False
    while i < len(text):
        ch = text[i]
        if in_quotes:
            if ch == "\\":
                i += 1
            elif ch == '"':
                out.append(text[start : i + 1])
                start = i + 1
                in_quotes = False
        elif ch == '"':
            out.append(_KG_ID_RE.sub(repl, text[start:i]))
            start = i
            in_quotes = True
        i += 1
    tail = text[start:]
    out.append(tail if in_quotes else _KG_ID_RE.sub(repl, tail))
    return "".join(out)


def build_training_pair(
    question: str,
    gold_sparql: str,
    *,
    entity_labels: Mapping[str, str],
    relation_labels: Mapping[str, str],
    entity_embeddings: Mapping[str, Sequence[float]] | None = None,
    config: TruncationConfig = TruncationConfig(),
    with_embeddings: bool = True,
) -> tuple[str, str]:
    """Convert a gold SPARQL query into a (question, skeleton string) pair.

    Each ``wd:Q…`` occurrence becomes ``<ent>label [vector]</ent>`` and each
    ``wdt:P…`` occurrence ``<rel>label</rel>``; repeated identifiers become
    separate slots. All other tokens pass through verbatim.
    """

    def replace(m: re.Match) -> str:
        token = m.group(1)
        prefix, ident = token.split(":", 1)
        if prefix == "wd":
            if ident not in entity_labels:
                raise UnknownIdentifier(f"entity {ident} not in catalog")
            body = entity_labels[ident]
            if with_embeddings:
                if entity_embeddings is None or ident not in entity_embeddings:
                    raise MissingEmbedding(f"entity {ident} has no stored embedding")
                vec = entity_embeddings[ident]
                if len(vec) < config.length:
                    raise LengthMismatch(
                        f"embedding for {ident} has {len(vec)} dims, need {config.length}"
                    )
                emb = TruncatedEmbedding(tuple(vec[: config.length]), config.length, config.precision)
                body += " " + emb.render()
            return f"<ent>{body}</ent>"
        if ident not in relation_labels:
            raise UnknownIdentifier(f"relation {ident} not in catalog")
        return f"<rel>{relation_labels[ident]}</rel>"

    skeleton = normalize_whitespace(_sub_outside_quotes(gold_sparql, replace))
    return question, skeleton
