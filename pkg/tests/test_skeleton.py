import random

import pytest

from kgqa import skeleton as sk
from kgqa.errors import (
    EmptyLabel,
    MalformedTags,
    MissingBinding,
    MissingEmbedding,
    NotAQuery,
    SkeletonParseError,
    UnknownIdentifier,
)

from oracles import random_skeleton_text, round_half_away_oracle

TEN = "[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]"


def test_parse_entity_and_relation_slots():
    text = f"select ?o where {{ <ent>Barack Obama {TEN}</ent> <rel>father</rel> ?o }}"
    q = sk.parse_skeleton(text)
    assert len(q.entity_slots) == 1
    assert len(q.relation_slots) == 1
    assert q.entity_slots[0].label == "Barack Obama"
    assert q.relation_slots[0].label == "father"
    assert q.entity_slots[0].trunc_embedding is not None
    assert len(q.entity_slots[0].trunc_embedding.values) == 10
    assert not q.diagnostics.any()


def test_parse_no_embedding_mode():
    q = sk.parse_skeleton("select ?o where { <ent>X</ent> <rel>r</rel> ?o }")
    assert len(q.entity_slots) == 1
    assert q.entity_slots[0].trunc_embedding is None
    assert len(q.relation_slots) == 1


def test_parse_repairs_overlong_vector():
    # valid 10-value fixture with one extra value appended
    base = f"select ?o where {{ <ent>Barack Obama {TEN[:-1]}, 0.5]</ent> <rel>father</rel> ?o }}"
    q = sk.parse_skeleton(base)
    emb = q.entity_slots[0].trunc_embedding
    assert q.diagnostics.length_repaired
    assert len(emb.values) == 10
    assert emb.values == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def test_parse_repairs_short_vector_by_zero_padding():
    q = sk.parse_skeleton("select ?o where { <ent>X [0.5, 0.25]</ent> ?p ?o }")
    emb = q.entity_slots[0].trunc_embedding
    assert q.diagnostics.length_repaired
    assert emb.values == (0.5, 0.25) + (0.0,) * 8


def test_parse_repairs_non_numeric_entries():
    q = sk.parse_skeleton("select ?o where { <ent>X [a, 0.1, inf, 0.2, 0, 0, 0, 0, 0, 0]</ent> ?p ?o }")
    emb = q.entity_slots[0].trunc_embedding
    assert q.diagnostics.value_repaired
    assert emb.values[0] == 0.0 and emb.values[2] == 0.0


def test_slot_order_is_textual_order():
    text = ("select ?o where { <rel>spouse</rel> <ent>A</ent> ?x . "
            "<ent>B</ent> <rel>father</rel> ?o }")
    q = sk.parse_skeleton(text)
    refs = q.slot_refs()
    assert refs == [sk.RelationRef(0), sk.EntityRef(0), sk.EntityRef(1), sk.RelationRef(1)]
    assert [s.label for s in q.entity_slots] == ["A", "B"]
    assert [s.label for s in q.relation_slots] == ["spouse", "father"]


@pytest.mark.parametrize("text,err", [
    ("select ?o where { <ent>A <rel>r</rel> ?o }", MalformedTags),
    ("select ?o where { <ent>A</rel> ?o }", MalformedTags),
    ("select ?o where { A</ent> ?o }", MalformedTags),
    ("select ?o where { <ent>A</ent></ent> ?o }", MalformedTags),
    ("select ?o where { <ent>A<ent>B</ent></ent> ?o }", MalformedTags),
    ("select ?o where { <ent>  </ent> ?o }", EmptyLabel),
    ("select ?o where { <rel></rel> ?o }", EmptyLabel),
    ("who is the father of Barack Obama ?", NotAQuery),
    ("", NotAQuery),
])
def test_parse_errors(text, err):
    with pytest.raises(err):
        sk.parse_skeleton(text)


def test_serialize_grounded_running_example():
    text = f"select ?o where {{ <ent>Barack Obama {TEN}</ent> <rel>father</rel> ?o }}"
    q = sk.parse_skeleton(text)
    assert sk.serialize_grounded(q, ["Q76"], ["P22"]) == "select ?o where { wd:Q76 wdt:P22 ?o }"


def test_serialize_grounded_zero_slots_is_identity():
    text = "select ?o where { ?s ?p ?o }"
    q = sk.parse_skeleton(text)
    assert sk.serialize_grounded(q, [], []) == text


def test_serialize_grounded_swapped_bindings_differ_only_at_entity_positions():
    text = "select ?o where { <ent>A</ent> <rel>r</rel> <ent>B</ent> }"
    q = sk.parse_skeleton(text)
    out1 = sk.serialize_grounded(q, ["Q1", "Q2"], ["P1"]).split(" ")
    out2 = sk.serialize_grounded(q, ["Q2", "Q1"], ["P1"]).split(" ")
    diff = [i for i, (a, b) in enumerate(zip(out1, out2)) if a != b]
    ent_positions = [i for i, t in enumerate(q.scaffold_tokens) if isinstance(t, sk.EntityRef)]
    assert diff == ent_positions


def test_serialize_grounded_missing_binding():
    q = sk.parse_skeleton("select ?o where { <ent>A</ent> <rel>r</rel> ?o }")
    with pytest.raises(MissingBinding):
        sk.serialize_grounded(q, [], ["P1"])
    with pytest.raises(MissingBinding):
        sk.serialize_grounded(q, ["Q1", "Q2"], ["P1"])


def test_serialize_grounded_custom_prefixes():
    q = sk.parse_skeleton("select ?o where { <ent>A</ent> <rel>r</rel> ?o }")
    out = sk.serialize_grounded(q, ["Q1"], ["P1"],
                                sk.PrefixScheme("http://kg/e/", "http://kg/p/"))
    assert out == "select ?o where { http://kg/e/Q1 http://kg/p/P1 ?o }"


# --- rounding ---------------------------------------------------------------

def test_round_half_away_forced_cases():
    assert sk.round_half_away(0.12345, 3) == 0.123
    assert sk.round_half_away(-0.98765, 3) == -0.988
    assert sk.round_half_away(0.1235, 3) == 0.124
    assert sk.round_half_away(-0.1235, 3) == -0.124
    assert sk.round_half_away(2.5, 0) == 3.0


def test_round_half_away_matches_digit_string_oracle():
    rng = random.Random(20260810)
    for _ in range(2000):
        v = rng.uniform(-3, 3) * 10 ** rng.randint(-6, 2)
        for digits in (0, 1, 3, 6):
            assert sk.round_half_away(v, digits) == round_half_away_oracle(v, digits), (v, digits)


def test_truncated_embedding_normalizes_on_construction():
    emb = sk.TruncatedEmbedding((0.12345, -0.98765), declared_length=2, declared_precision=3)
    assert emb.values == (0.123, -0.988)
    assert emb.render() == "[0.123, -0.988]"
    with pytest.raises(ValueError):
        sk.TruncatedEmbedding((0.1,), declared_length=2)


# --- training pairs -----------------------------------------------------------

CATALOG_LABELS = {"Q76": "Barack Obama", "Q58863414": "female beauty pageant",
                  "Q62900839": "all countries"}
CATALOG_RELS = {"P22": "father", "P31": "instance of", "P2541": "operating area"}
CATALOG_EMB = {qid: [0.01 * (i + 1) for i in range(200)] for qid in CATALOG_LABELS}


def test_build_training_pair_running_example():
    question = "Who is the father of Barack Obama ?"
    gold = "select ?o where {  wd:Q76 wdt:P22 ?o }"
    q_out, skel = sk.build_training_pair(
        question, gold,
        entity_labels=CATALOG_LABELS, relation_labels=CATALOG_RELS,
        entity_embeddings=CATALOG_EMB)
    assert q_out == question
    assert skel.startswith("select ?o where { <ent>Barack Obama [")
    assert "<rel>father</rel>" in skel
    parsed = sk.parse_skeleton(skel)
    assert sk.serialize_grounded(parsed, ["Q76"], ["P22"]) == sk.normalize_whitespace(gold)


def test_build_training_pair_no_ids_is_identity():
    gold = "select ?o where { ?s ?p ?o }"
    _, skel = sk.build_training_pair("q", gold, entity_labels={}, relation_labels={},
                                     entity_embeddings={})
    assert skel == gold


TABLE_STYLE_GOLD = (
    'SELECT DISTINCT ?sbj ?sbj_label WHERE { ?sbj wdt:P31 wd:Q58863414 . '
    '?sbj wdt:P2541 wd:Q62900839 . ?sbj rdfs:label ?sbj_label . '
    'FILTER(CONTAINS(lcase(?sbj_label), "model")) . '
    'FILTER (lang(?sbj_label) = "en") } LIMIT 25'
)


def test_build_training_pair_preserves_filters_and_limit():
    _, skel = sk.build_training_pair(
        "Tell me the female beauty pageant that operates in all countries and "
        "contains the word model in it's name?",
        TABLE_STYLE_GOLD,
        entity_labels=CATALOG_LABELS, relation_labels=CATALOG_RELS,
        entity_embeddings=CATALOG_EMB)
    for token in ('FILTER(CONTAINS(lcase(?sbj_label), "model"))', "LIMIT 25", "rdfs:label"):
        assert token in skel
    assert "wd:Q58863414" not in skel and "wd:Q62900839" not in skel
    parsed = sk.parse_skeleton(skel)
    regrounded = sk.serialize_grounded(parsed, ["Q58863414", "Q62900839"], ["P31", "P2541"])
    assert regrounded == sk.normalize_whitespace(TABLE_STYLE_GOLD)


def test_build_training_pair_skips_quoted_identifiers():
    gold = 'select ?o where { wd:Q76 wdt:P22 ?o . FILTER(CONTAINS(?o, "wd:Q76")) }'
    _, skel = sk.build_training_pair("q", gold, entity_labels=CATALOG_LABELS,
                                     relation_labels=CATALOG_RELS, entity_embeddings=CATALOG_EMB)
    assert '"wd:Q76"' in skel
    assert skel.count("<ent>") == 1


def test_build_training_pair_repeated_identifier_gets_two_slots():
    gold = "ask where { wd:Q76 wdt:P22 wd:Q76 }"
    _, skel = sk.build_training_pair("q", gold, entity_labels=CATALOG_LABELS,
                                     relation_labels=CATALOG_RELS, entity_embeddings=CATALOG_EMB)
    q = sk.parse_skeleton(skel)
    assert len(q.entity_slots) == 2


def test_build_training_pair_errors():
    with pytest.raises(UnknownIdentifier):
        sk.build_training_pair("q", "select ?o where { wd:Q999 wdt:P22 ?o }",
                               entity_labels=CATALOG_LABELS, relation_labels=CATALOG_RELS,
                               entity_embeddings=CATALOG_EMB)
    with pytest.raises(MissingEmbedding):
        sk.build_training_pair("q", "select ?o where { wd:Q76 wdt:P22 ?o }",
                               entity_labels=CATALOG_LABELS, relation_labels=CATALOG_RELS,
                               entity_embeddings={})


def test_build_training_pair_without_embeddings_mode():
    _, skel = sk.build_training_pair("q", "select ?o where { wd:Q76 wdt:P22 ?o }",
                                     entity_labels=CATALOG_LABELS, relation_labels=CATALOG_RELS,
                                     with_embeddings=False)
    assert skel == "select ?o where { <ent>Barack Obama</ent> <rel>father</rel> ?o }"


# --- properties ----------------------------------------------------------------

def test_round_trip_property():
    rng = random.Random(42)
    for _ in range(300):
        text = random_skeleton_text(rng)
        first = sk.parse_skeleton(text)
        again = sk.parse_skeleton(sk.serialize_skeleton(first))
        assert first == again, text


def test_parse_never_panics_on_arbitrary_input():
    rng = random.Random(7)
    alphabet = "<>entrl/ []select?o{}.,0123456789-\"abé "
    for _ in range(2000):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        try:
            q = sk.parse_skeleton(text)
            assert isinstance(q, sk.SkeletonQuery)
        except SkeletonParseError:
            pass


def test_slot_count_matches_identifier_occurrences():
    rng = random.Random(99)
    ids = list(CATALOG_LABELS) + list(CATALOG_RELS)
    for _ in range(100):
        n = rng.randint(0, 6)
        chosen = [rng.choice(ids) for _ in range(n)]
        body = " ".join(("wd:" if c.startswith("Q") else "wdt:") + c for c in chosen)
        gold = f"select ?o where {{ {body} ?o }}"
        _, skel = sk.build_training_pair("q", gold, entity_labels=CATALOG_LABELS,
                                         relation_labels=CATALOG_RELS,
                                         entity_embeddings=CATALOG_EMB)
        q = sk.parse_skeleton(skel)
        assert len(q.entity_slots) == sum(1 for c in chosen if c.startswith("Q"))
        assert len(q.relation_slots) == sum(1 for c in chosen if c.startswith("P"))
