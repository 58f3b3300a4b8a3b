"""Toy-model fine-tune on 50 synthetic pairs, then schema and parse-rate
checks of the generated beams through the QA core's own parsers."""

import json
import random

import pytest

from kgqa.errors import SkeletonParseError
from kgqa.ingest import load_beams
from kgqa.skeleton import build_training_pair, parse_skeleton

from kgqa_sidecar.generate import GenerationJob, generate_beams
from kgqa_sidecar.seq2seq import ModelSettings, TrainingJob, train_from_pairs


def _synthetic_pairs(n=50):
    rng = random.Random(13)
    entity_labels = {f"Q{i}": f"thing {i}" for i in range(1, n + 1)}
    relation_labels = {"P1": "linked to", "P2": "part of"}
    embeddings = {qid: [round(rng.uniform(-1, 1), 3) for _ in range(200)]
                  for qid in entity_labels}
    pairs = []
    for i in range(1, n + 1):
        question = f"what is thing {i} linked to ?"
        gold = f"SELECT ?x WHERE {{ wd:Q{i} wdt:P1 ?x }}"
        _, skeleton = build_training_pair(question, gold,
                                          entity_labels=entity_labels,
                                          relation_labels=relation_labels,
                                          entity_embeddings=embeddings)
        pairs.append({"qid": f"s{i:03d}", "question": question, "skeleton": skeleton})
    return pairs


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    base = tmp_path_factory.mktemp("sidecar")
    pairs_file = base / "train.jsonl"
    pairs = _synthetic_pairs(50)
    pairs_file.write_text("".join(json.dumps(p, ensure_ascii=False) + "\n" for p in pairs),
                          encoding="utf-8")
    checkpoint = train_from_pairs(TrainingJob(
        pairs_file=pairs_file, out_dir=base / "ckpt", epochs=250, seed=0,
        settings=ModelSettings()))
    return base, pairs_file, checkpoint, pairs


def test_beams_file_is_schema_valid_and_parseable(trained):
    base, pairs_file, checkpoint, pairs = trained
    out = base / "beams.jsonl"
    generate_beams(GenerationJob(checkpoint_dir=checkpoint, questions_file=pairs_file,
                                 out_path=out, beam_count=3))
    entries = load_beams(out)  # zero schema errors or this raises
    assert [e.qid for e in entries] == [p["qid"] for p in pairs]
    assert all(len(e.beams) == 3 for e in entries)

    parseable = 0
    for entry in entries:
        try:
            parse_skeleton(entry.beams[0])
            parseable += 1
        except SkeletonParseError:
            pass
    rate = parseable / len(entries)
    print(f"ACCEPTANCE PASS sidecar beams parse rate {rate:.0%} (>= 95%)")
    assert rate >= 0.95


def test_top_beam_memorizes_training_pairs(trained):
    base, _, checkpoint, pairs = trained
    entries = load_beams(base / "beams.jsonl")
    expected = {p["qid"]: p["skeleton"] for p in pairs}
    exact = sum(1 for e in entries if e.beams and e.beams[0] == expected[e.qid])
    assert exact / len(entries) >= 0.9


def test_beam_count_one(trained):
    base, pairs_file, checkpoint, _ = trained
    out = base / "beams1.jsonl"
    generate_beams(GenerationJob(checkpoint_dir=checkpoint, questions_file=pairs_file,
                                 out_path=out, beam_count=1))
    entries = load_beams(out)
    assert all(len(e.beams) == 1 for e in entries)


def test_untrained_model_still_emits_schema_valid_file(trained, tmp_path):
    base, pairs_file, _, _ = trained
    untrained = train_from_pairs(TrainingJob(
        pairs_file=pairs_file, out_dir=tmp_path / "raw", epochs=0, seed=7))
    out = tmp_path / "garbage_beams.jsonl"
    generate_beams(GenerationJob(checkpoint_dir=untrained, questions_file=pairs_file,
                                 out_path=out, beam_count=2))
    entries = load_beams(out)  # schema must hold even for garbage strings
    assert len(entries) == 50
    for entry in entries:
        for beam in entry.beams:
            try:
                parse_skeleton(beam)
            except SkeletonParseError:
                pass  # garbage may fail to parse; it must never crash
