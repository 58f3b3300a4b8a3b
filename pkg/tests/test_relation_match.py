import math
import random

import numpy as np
import pytest

from kgqa.errors import CorruptRecord, DimensionMismatch, EmptyCatalog
from kgqa.relation_match import (
    RelationMatcher,
    RelationRecord,
    load_query_vectors,
    load_relation_catalog,
    match_relation,
)


def rec(ident, label, vec):
    return RelationRecord(ident, label, np.asarray(vec, dtype=np.float64))


CATALOG = [
    rec("P22", "father", [1.0, 0.0, 0.0]),
    rec("P25", "mother", [0.9, 0.1, 0.0]),
    rec("P1082", "population", [0.0, 0.0, 1.0]),
]


def test_self_similarity_is_one():
    hits = match_relation(CATALOG[0].text_vector, CATALOG, k=1)
    assert [h.relation.id for h in hits] == ["P22"]
    assert hits[0].cosine == pytest.approx(1.0, abs=1e-12)
    assert hits[0].rank == 1


def test_orthogonal_query_ties_break_by_numeric_id():
    hits = match_relation([0.0, 1.0, 0.0],
                          [rec("P5", "a", [1, 0, 0]), rec("P3", "b", [0, 0, 1]),
                           rec("P9", "c", [-1, 0, 0])], k=3)
    assert all(h.cosine == 0.0 for h in hits)
    assert [h.relation.id for h in hits] == ["P3", "P5", "P9"]


def test_zero_norm_convention():
    hits = match_relation([0.0, 0.0, 0.0], CATALOG, k=3)
    assert all(h.cosine == 0.0 for h in hits)
    hits = match_relation([1.0, 0.0, 0.0], [rec("P1", "z", [0, 0, 0])] + CATALOG[1:], k=3)
    assert hits[0].cosine > 0.0


def test_result_length_is_min_k_catalog():
    assert len(match_relation([1, 0, 0], CATALOG, k=2)) == 2
    assert len(match_relation([1, 0, 0], CATALOG, k=50)) == 3


def test_errors():
    with pytest.raises(EmptyCatalog):
        match_relation([1.0], [], k=3)
    with pytest.raises(DimensionMismatch):
        match_relation([1.0, 0.0], CATALOG, k=3)
    with pytest.raises(ValueError):
        match_relation([1.0, 0.0, 0.0], CATALOG, k=0)


def _synthetic_catalog(rng, n, dim=16):
    return [rec(f"P{i}", f"prop {i}",
                [rng.gauss(0, 1) for _ in range(dim)]) for i in range(1, n + 1)]


def test_brute_force_oracle_equivalence():
    rng = random.Random(808)
    catalog = _synthetic_catalog(rng, 1000)
    for _ in range(100):
        q = np.array([rng.gauss(0, 1) for _ in range(16)])
        got = match_relation(q, catalog, k=10)
        qn = math.sqrt(math.fsum(x * x for x in q))
        oracle = sorted(
            ((math.fsum(x * y for x, y in zip(q, r.text_vector)) /
              (qn * math.sqrt(math.fsum(v * v for v in r.text_vector))), r)
             for r in catalog),
            key=lambda it: (-it[0], it[1].numeric_id))[:10]
        assert [h.relation.id for h in got] == [r.id for _, r in oracle]
        for h, (cos, _) in zip(got, oracle):
            assert h.cosine == pytest.approx(cos, abs=1e-9)


def test_ranking_is_scale_invariant():
    rng = random.Random(2)
    catalog = _synthetic_catalog(rng, 200)
    for _ in range(20):
        q = np.array([rng.gauss(0, 1) for _ in range(16)])
        base = [h.relation.id for h in match_relation(q, catalog, k=20)]
        for c in (0.001, 7.5, 4096.0):
            assert [h.relation.id for h in match_relation(c * q, catalog, k=20)] == base


def test_matcher_uses_query_vectors_then_falls_back():
    table = {"dad": np.array([0.95, 0.05, 0.0])}
    matcher = RelationMatcher(CATALOG, table)
    hits = matcher.candidates_for_label("dad", k=2)
    assert [h.relation.id for h in hits] == ["P22", "P25"]

    diagnostics = {}
    hits = matcher.candidates_for_label("father", k=2, diagnostics=diagnostics)
    assert [h.relation.id for h in hits] == ["P22"]
    assert hits[0].cosine == 1.0
    assert diagnostics["relation_label_fallback"] == 1

    hits = matcher.candidates_for_label("no such label", k=2, diagnostics=diagnostics)
    assert hits == []
    assert diagnostics["relation_label_missing"] == 1


def test_catalog_file_round_trip(tmp_path):
    path = tmp_path / "relations.tsv"
    path.write_text("P22\tfather\t1.0 0.0\nP25\tmother\t0.5 0.5\n", encoding="utf-8")
    catalog = load_relation_catalog(path)
    assert [r.id for r in catalog] == ["P22", "P25"]
    assert catalog[0].text_vector.shape == (2,)

    qpath = tmp_path / "queries.tsv"
    qpath.write_text("father\t1.0 0.0\n", encoding="utf-8")
    table = load_query_vectors(qpath)
    assert set(table) == {"father"}

    bad = tmp_path / "bad.tsv"
    bad.write_text("P22\tfather\t1.0 0.0\nP25\tmother\t0.5 0.5 0.5\n", encoding="utf-8")
    with pytest.raises(CorruptRecord):
        load_relation_catalog(bad)
