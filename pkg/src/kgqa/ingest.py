"""Dataset readers and the beams/training exchange files.

Two dataset shapes are supported: the LC-QuAD 2.0 JSON array (fields `uid`,
`question`, `paraphrased_question`, `sparql_wikidata`) and the
SimpleQuestions-Wikidata annotated TSV (`subject\\tpredicate\\tobject\\t
question`, with `R`-prefixed predicates marking reversed triples). Gold
queries for the TSV shape are synthesized as single-triple SELECTs.

The beams exchange file is JSON lines: {"qid": ..., "beams": [...]} — the
sole contract between the generator sidecar and this package.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import FileError, SchemaError, SparqlParseError, UnsupportedSyntax
from .mini_kg.parser import parse_query
from .skeleton import TruncationConfig, build_training_pair, parse_skeleton

_SQ_PREDICATE_RE = re.compile(r"^R?P\d+$")


class Dataset(enum.Enum):
    LC_QUAD2 = "lcquad2"
    SIMPLE_QUESTIONS_WD = "simplequestions-wd"


@dataclass(frozen=True)
class QuestionRecord:
    qid: str
    text: str
    gold_sparql: str
    dataset: Dataset
    unsupported_gold: bool = False


@dataclass
class BeamEntry:
    qid: str
    beams: list[str] = field(default_factory=list)


def _gold_supported(sparql: str) -> bool:
    try:
        parse_query(sparql)
    except (SparqlParseError, UnsupportedSyntax):
        return False
    return True


def _load_lcquad2(path: Path) -> list[QuestionRecord]:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}")
    if not isinstance(payload, list):
        raise SchemaError(f"{path}: expected a JSON array of question objects")
    records = []
    for i, obj in enumerate(payload):
        if not isinstance(obj, dict):
            raise SchemaError("expected an object", record_index=i)
        if "uid" not in obj or "sparql_wikidata" not in obj:
            raise SchemaError("missing uid or sparql_wikidata", record_index=i)
        question = obj.get("question")
        # dataset quirk: fall back to the paraphrase when question is blank
        if not question or not str(question).strip() or str(question).strip().lower() == "n/a":
            question = obj.get("paraphrased_question") or ""
        gold = str(obj["sparql_wikidata"]).strip()
        records.append(QuestionRecord(
            qid=str(obj["uid"]),
            text=str(question).strip(),
            gold_sparql=gold,
            dataset=Dataset.LC_QUAD2,
            unsupported_gold=not _gold_supported(gold),
        ))
    return records


def _load_simplequestions(path: Path) -> list[QuestionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise SchemaError(f"expected 4 tab-separated fields, got {len(parts)}",
                                  record_index=lineno)
            subject, predicate, _obj, question = parts
            if not _SQ_PREDICATE_RE.match(predicate):
                raise SchemaError(f"bad predicate {predicate!r}", record_index=lineno)
            if predicate.startswith("R"):
                gold = f"SELECT ?x WHERE {{ ?x wdt:{predicate[1:]} wd:{subject} }}"
            else:
                gold = f"SELECT ?x WHERE {{ wd:{subject} wdt:{predicate} ?x }}"
            records.append(QuestionRecord(
                qid=f"sq-{lineno}",
                text=question.strip(),
                gold_sparql=gold,
                dataset=Dataset.SIMPLE_QUESTIONS_WD,
                unsupported_gold=not _gold_supported(gold),
            ))
    return records


def load_dataset(path: str | Path, kind: Dataset) -> list[QuestionRecord]:
    """Read all records; gold queries outside the executable subset are kept
    but flagged `unsupported_gold`."""
    path = Path(path)
    if not path.exists():
        raise FileError(f"dataset file not found: {path}")
    if kind is Dataset.LC_QUAD2:
        return _load_lcquad2(path)
    return _load_simplequestions(path)


def load_split(path: str | Path) -> list[str]:
    """Read a qid list (one per line) selecting an evaluation subset."""
    path = Path(path)
    if not path.exists():
        raise FileError(f"split file not found: {path}")
    return [line.strip() for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()]


# --- beams exchange file ------------------------------------------------------


def load_beams(path: str | Path) -> list[BeamEntry]:
    path = Path(path)
    if not path.exists():
        raise FileError(f"beams file not found: {path}")
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"bad JSON: {exc}", record_index=lineno)
            if not isinstance(obj, dict) or "qid" not in obj or "beams" not in obj:
                raise SchemaError("expected {\"qid\":..., \"beams\":[...]}",
                                  record_index=lineno)
            beams = obj["beams"]
            if not isinstance(beams, list) or not all(isinstance(b, str) for b in beams):
                raise SchemaError("beams must be a list of strings", record_index=lineno)
            entries.append(BeamEntry(str(obj["qid"]), list(beams)))
    return entries


def save_beams(entries: Iterable[BeamEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps({"qid": entry.qid, "beams": entry.beams},
                                ensure_ascii=False) + "\n")


# --- training pairs ----------------------------------------------------------


def make_training_file(
    records: Sequence[QuestionRecord],
    out_path: str | Path,
    *,
    entity_labels: Mapping[str, str],
    relation_labels: Mapping[str, str],
    entity_embeddings=None,
    config: TruncationConfig = TruncationConfig(),
    with_embeddings: bool = True,
) -> dict:
    """Write JSON-lines {qid, question, skeleton} for every convertible
    record; per-record failures are skipped and listed in the returned
    manifest (also written next to the output as <out>.manifest.json)."""
    out_path = Path(out_path)
    manifest: dict = {"written": 0, "skipped": []}
    with open(out_path, "w", encoding="utf-8") as fh:
        for record in records:
            if record.unsupported_gold:
                manifest["skipped"].append({"qid": record.qid, "reason": "unsupported_gold"})
                continue
            try:
                _, skeleton_str = build_training_pair(
                    record.text, record.gold_sparql,
                    entity_labels=entity_labels, relation_labels=relation_labels,
                    entity_embeddings=entity_embeddings, config=config,
                    with_embeddings=with_embeddings,
                )
                parse_skeleton(skeleton_str, config)  # every emitted line must parse
            except Exception as exc:  # noqa: BLE001 - per-record isolation
                manifest["skipped"].append({"qid": record.qid, "reason": str(exc)})
                continue
            fh.write(json.dumps({"qid": record.qid, "question": record.text,
                                 "skeleton": skeleton_str}, ensure_ascii=False) + "\n")
            manifest["written"] += 1
    manifest_path = out_path.with_suffix(out_path.suffix + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n",
                             encoding="utf-8")
    return manifest


def load_training_file(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "qid" not in obj or "skeleton" not in obj:
                raise SchemaError("training line needs qid and skeleton", record_index=lineno)
            rows.append(obj)
    return rows
