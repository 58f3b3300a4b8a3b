import math
import random

import pytest

from kgqa.errors import CorruptRecord, EmptyQuery, IndexFormatError
from kgqa.label_index import EntityRecord, LabelIndex, numeric_id_of, read_label_file, tokenize

from oracles import bm25_brute_force

THREE = [
    EntityRecord("Q76", "Barack Obama"),
    EntityRecord("Q47513588", "Barack Obama"),
    EntityRecord("Q77", "Uruguay"),
]


def test_numeric_id_of():
    assert numeric_id_of("Q76") == 76
    assert numeric_id_of("Q47513588") == 47513588
    assert numeric_id_of("P22") == 22


def test_tokenize_casefold_and_split():
    assert tokenize("Barack Obama") == ["barack", "obama"]
    assert tokenize("  fo-o_bar 42 ") == ["fo", "o", "bar", "42"]
    assert tokenize("Universität") == ["universität"]
    assert tokenize("ＦＵＬＬwidth") == ["fullwidth"]  # NFKC folds width


def test_build_counts_distinct_ids_last_label_wins():
    records = THREE + [EntityRecord("Q76", "Barack Hussein Obama")]
    idx = LabelIndex.build(records)
    assert len(idx) == 3
    hits = idx.search("Hussein", k=10)
    assert [h.entity.id for h in hits] == ["Q76"]


def test_label_collision_tie_break_by_numeric_id():
    idx = LabelIndex.build(THREE)
    hits = idx.search("Barack Obama", k=100)
    assert [h.entity.id for h in hits] == ["Q76", "Q47513588"]
    assert [h.rank for h in hits] == [1, 2]
    assert hits[0].score == hits[1].score
    # hand-computed Okapi BM25: both docs have tf=1, dl=2 for both terms
    avg_len = 5.0 / 3.0
    idf = math.log(1.0 + (3 - 2 + 0.5) / (2 + 0.5))
    expected = 2.0 * (idf * (1.0 * 2.2) / (1.0 + 1.2 * (0.25 + 0.75 * 2.0 / avg_len)))
    assert hits[0].score == pytest.approx(expected, abs=1e-12)


def test_unique_token_match():
    idx = LabelIndex.build(THREE)
    hits = idx.search("Uruguay", k=1)
    assert [h.entity.id for h in hits] == ["Q77"]


def test_k_caps_never_pads():
    records = [EntityRecord(f"Q{i}", "common label") for i in range(1, 51)]
    idx = LabelIndex.build(records)
    assert len(idx.search("common", k=100)) == 50
    assert len(idx.search("common", k=7)) == 7


def test_empty_index_searches_empty():
    idx = LabelIndex.build([])
    assert idx.search("anything", k=5) == []


def test_empty_query_raises():
    idx = LabelIndex.build(THREE)
    with pytest.raises(EmptyQuery):
        idx.search("  --- ", k=5)
    with pytest.raises(ValueError):
        idx.search("obama", k=0)


def test_read_label_file(tmp_path):
    p = tmp_path / "labels.tsv"
    p.write_text("Q76\tBarack Obama\nQ77\tUruguay\n\n", encoding="utf-8")
    records = list(read_label_file(p))
    assert [r.id for r in records] == ["Q76", "Q77"]
    assert records[0].numeric_id == 76


@pytest.mark.parametrize("line", ["no-tab-here", "76Q\tlabel", "Q76\t   ", "\tlabel"])
def test_read_label_file_corrupt(tmp_path, line):
    p = tmp_path / "labels.tsv"
    p.write_text(line + "\n", encoding="utf-8")
    with pytest.raises(CorruptRecord):
        list(read_label_file(p))


def _synthetic_records(rng, n):
    words = ["alpha", "beta", "gamma", "delta", "obama", "press", "union",
             "river", "lake", "city", "park", "prize", "quartet", "museum"]
    return [
        EntityRecord(f"Q{i}", " ".join(rng.choice(words) for _ in range(rng.randint(1, 4))))
        for i in range(1, n + 1)
    ]


def test_persisted_index_reopens_identically(tmp_path):
    rng = random.Random(1234)
    records = _synthetic_records(rng, 10_000)
    idx = LabelIndex.build(records)
    path = tmp_path / "labels.idx"
    idx.save(path)
    reopened = LabelIndex.open(path)
    assert len(reopened) == len(idx)
    words = ["alpha beta", "obama", "union press", "river lake city", "prize",
             "quartet museum", "gamma delta alpha"]
    for _ in range(100):
        query = rng.choice(words)
        k = rng.randint(1, 50)
        a = [(h.entity.id, h.score, h.rank) for h in idx.search(query, k)]
        b = [(h.entity.id, h.score, h.rank) for h in reopened.search(query, k)]
        assert a == b


def test_open_rejects_foreign_file(tmp_path):
    p = tmp_path / "junk.idx"
    p.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(IndexFormatError):
        LabelIndex.open(p)


def test_oracle_equivalence_small():
    rng = random.Random(99)
    records = _synthetic_records(rng, 1_000)
    idx = LabelIndex.build(records)
    docs = [(r.id, tokenize(r.label)) for r in records]
    for _ in range(200):
        query = " ".join(rng.choice(["alpha", "beta", "obama", "city", "zzz"])
                         for _ in range(rng.randint(1, 3)))
        expected = bm25_brute_force(docs, tokenize(query))[:25]
        got = idx.search(query, k=25)
        assert [h.entity.id for h in got] == [doc_id for _, doc_id in expected]
        for hit, (score, _) in zip(got, expected):
            assert hit.score == pytest.approx(score, abs=1e-9)


def test_search_is_deterministic_and_k_monotone():
    rng = random.Random(5)
    records = _synthetic_records(rng, 500)
    idx = LabelIndex.build(records)
    first = [h.entity.id for h in idx.search("alpha city", k=40)]
    again = [h.entity.id for h in idx.search("alpha city", k=40)]
    assert first == again
    for k in (1, 5, 17, 39):
        assert [h.entity.id for h in idx.search("alpha city", k=k)] == first[:k]
