import random
from collections import Counter

import pytest

from kgqa.errors import SparqlParseError, UnsupportedSyntax
from kgqa.mini_kg import (
    Literal,
    ResultKind,
    TripleStore,
    load_ntriples,
    load_triples,
    load_tsv,
    local_query,
    parse_query,
)
from kgqa.mini_kg.parser import SelectQuery, Var

from oracles import join_brute_force

TABLE1_QUERY = (
    'SELECT DISTINCT ?sbj ?sbj_label WHERE { ?sbj wdt:P31 wd:Q58863414 . '
    '?sbj wdt:P2541 wd:Q62900839 . ?sbj rdfs:label ?sbj_label . '
    'FILTER(CONTAINS(lcase(?sbj_label), "model")) . '
    'FILTER (lang(?sbj_label) = "en") } LIMIT 25'
)

TABLE2_QUERY = "SELECT ?x WHERE { wd:Q1176417 wdt:P136 ?x }"


def pageant_store():
    store = TripleStore()
    store.add("Q111", "P31", "Q58863414")
    store.add("Q111", "P2541", "Q62900839")
    store.add("Q111", "rdfs:label", Literal("Miss Model of the World", "en"))
    store.add("Q222", "P31", "Q58863414")
    store.add("Q222", "P2541", "Q62900839")
    store.add("Q222", "rdfs:label", Literal("Miss World", "en"))
    store.add("Q333", "P31", "Q58863414")
    store.add("Q333", "P2541", "Q62900839")
    store.add("Q333", "rdfs:label", Literal("Concours de Model", "fr"))
    return store


def test_table1_shape_query_filters_and_limit():
    result = local_query(pageant_store(), TABLE1_QUERY)
    assert result.kind is ResultKind.BINDINGS
    assert result.variables == ["sbj", "sbj_label"]
    assert result.rows == [{"sbj": "Q111",
                            "sbj_label": Literal("Miss Model of the World", "en")}]


def test_table2_shape_query():
    store = TripleStore()
    store.add("Q1176417", "P136", "Q9778")
    result = local_query(store, TABLE2_QUERY)
    assert result.rows == [{"x": "Q9778"}]


def test_count_over_absent_triples_is_scalar_zero():
    result = local_query(TripleStore(), "SELECT (COUNT(?obj) AS ?value ) { wd:Q999 wdt:P17 ?obj }")
    assert result.kind is ResultKind.SCALAR
    assert result.value == 0
    assert result.is_empty(count_zero_is_empty=False) is False
    assert result.is_empty(count_zero_is_empty=True) is True


def test_count_and_count_distinct():
    store = TripleStore()
    store.add("Q1", "P17", "Q2")
    store.add("Q1", "P17", "Q3")
    store.add("Q1", "P17", "Q3")
    assert local_query(store, "SELECT (COUNT(?o) AS ?c) { wd:Q1 wdt:P17 ?o }").value == 3
    assert local_query(store, "SELECT (COUNT(DISTINCT ?o) AS ?c) { wd:Q1 wdt:P17 ?o }").value == 2
    assert local_query(store, "SELECT (COUNT(*) AS ?c) WHERE { ?s wdt:P17 ?o }").value == 3


def test_ask_queries():
    store = TripleStore()
    assert local_query(store, "ASK WHERE { wd:Q1 wdt:P1 wd:Q2 }").value is False
    store.add("Q1", "P1", "Q2")
    result = local_query(store, "ASK { wd:Q1 wdt:P1 wd:Q2 }")
    assert result.kind is ResultKind.BOOLEAN and result.value is True
    assert result.is_empty() is False


def test_distinct_dedupes_preserving_order():
    store = TripleStore()
    store.add("Q1", "P5", "Q9")
    store.add("Q2", "P5", "Q9")
    result = local_query(store, "SELECT DISTINCT ?o WHERE { ?s wdt:P5 ?o }")
    assert result.rows == [{"o": "Q9"}]


def test_hyper_relational_predicates_as_plain_edges():
    store = TripleStore()
    store.add("Q5", "p:P166", "stmt1")
    store.add("stmt1", "ps:P166", "Q99")
    store.add("stmt1", "pq:P585", Literal("2001"))
    result = local_query(store, "SELECT ?x WHERE { wd:Q5 p:P166 ?st . ?st ps:P166 ?x }")
    assert result.rows == [{"x": "Q99"}]


def test_repeated_variable_inside_one_pattern():
    store = TripleStore()
    store.add("Q1", "P1", "Q2")
    store.add("Q3", "P1", "Q3")
    result = local_query(store, "SELECT ?x WHERE { ?x wdt:P1 ?x }")
    assert result.rows == [{"x": "Q3"}]


def test_literal_comparison_lcase_and_lang():
    store = TripleStore()
    store.add("Q1", "rdfs:label", Literal("CAFÉ Model", "en"))
    q = ('SELECT ?s WHERE { ?s rdfs:label ?l . '
         'FILTER(CONTAINS(lcase(?l), "café")) . FILTER(lang(?l) = "EN") }')
    assert local_query(store, q).rows == [{"s": "Q1"}]
    q2 = 'SELECT ?s WHERE { ?s rdfs:label ?l . FILTER(CONTAINS(?l, "café")) }'
    assert local_query(store, q2).rows == []


@pytest.mark.parametrize("query", [
    "SELECT ?x WHERE { ?x wdt:P1 ?y . OPTIONAL { ?x wdt:P2 ?z } }",
    "SELECT ?x WHERE { { ?x wdt:P1 ?y } UNION { ?x wdt:P2 ?y } }",
    "SELECT * WHERE { ?x wdt:P1 ?y }",
    "SELECT ?x WHERE { ?x wdt:P1 ?y } ORDER BY ?x",
    "PREFIX wd: <http://www.wikidata.org/entity/> SELECT ?x WHERE { ?x wdt:P1 ?y }",
    "SELECT ?x WHERE { ?x wdt:P1 ?y . FILTER(REGEX(?y, \"a\")) }",
])
def test_unsupported_syntax_raises(query):
    with pytest.raises(UnsupportedSyntax):
        local_query(TripleStore(), query)


@pytest.mark.parametrize("query", [
    "", "this is not sparql", "SELECT WHERE { }", "SELECT ?x { ?x wdt:P1 }",
    "SELECT ?x WHERE { ?x wdt:P1 ?y", "ASK { ?x } extra",
])
def test_parse_errors(query):
    with pytest.raises(SparqlParseError):
        local_query(TripleStore(), query)


def test_local_query_is_pure():
    store = pageant_store()
    before = store.triples()
    local_query(store, TABLE1_QUERY)
    local_query(store, "ASK { wd:Q111 wdt:P31 wd:Q58863414 }")
    assert store.triples() == before


def test_parse_query_ast_shape():
    q = parse_query(TABLE1_QUERY)
    assert isinstance(q, SelectQuery)
    assert q.distinct and q.limit == 25
    assert len(q.patterns) == 3
    assert q.patterns[0].predicate == "P31"
    assert q.patterns[2].object == Var("sbj_label")
    assert len(q.filters) == 2


# --- loaders -------------------------------------------------------------------


def test_load_tsv(tmp_path):
    p = tmp_path / "fixture.tsv"
    p.write_text(
        "Q76\tP22\tQ11673\n"
        "Q76\trdfs:label\tBarack Obama\t@en\n"
        "Q5\tp:P166\tstmt1\n"
        "# comment line\n"
        "Q7\tP100\tfree text object\n",
        encoding="utf-8",
    )
    store = load_tsv(p)
    assert len(store) == 4
    assert list(store.match("Q76", "P22", None)) == [("Q76", "P22", "Q11673")]
    [(_, _, label)] = store.match("Q76", "rdfs:label", None)
    assert label == Literal("Barack Obama", "en")
    [(_, _, text)] = store.match("Q7", None, None)
    assert text == Literal("free text object")


def test_load_ntriples(tmp_path):
    p = tmp_path / "fixture.nt"
    p.write_text(
        '<http://www.wikidata.org/entity/Q76> '
        '<http://www.wikidata.org/prop/direct/P22> '
        '<http://www.wikidata.org/entity/Q11673> .\n'
        '<http://www.wikidata.org/entity/Q76> '
        '<http://www.w3.org/2000/01/rdf-schema#label> "Barack Obama"@en .\n',
        encoding="utf-8",
    )
    store = load_ntriples(p)
    assert list(store.match("Q76", "P22", None)) == [("Q76", "P22", "Q11673")]
    result = local_query(store, "SELECT ?o WHERE { wd:Q76 wdt:P22 ?o }")
    assert result.rows == [{"o": "Q11673"}]


def test_load_triples_sniffs_format(tmp_path):
    nt = tmp_path / "a.nt"
    nt.write_text('<http://www.wikidata.org/entity/Q1> '
                  '<http://www.wikidata.org/prop/direct/P2> '
                  '<http://www.wikidata.org/entity/Q3> .\n', encoding="utf-8")
    tsv = tmp_path / "b.tsv"
    tsv.write_text("Q1\tP2\tQ3\n", encoding="utf-8")
    assert load_triples(nt).triples() == load_triples(tsv).triples()
    with pytest.raises(SparqlParseError):
        load_tsv(tmp_path / "bad.tsv") if (tmp_path / "bad.tsv").write_text(
            "only two\tfields\n", encoding="utf-8") else load_tsv(tmp_path / "bad.tsv")


# --- brute-force oracle ------------------------------------------------------------


def _random_store(rng, n_triples, n_entities=40, n_props=8):
    store = TripleStore()
    for _ in range(n_triples):
        store.add(f"Q{rng.randint(1, n_entities)}", f"P{rng.randint(1, n_props)}",
                  f"Q{rng.randint(1, n_entities)}")
    return store


def _random_query(rng, store):
    """1-3 patterns over existing triples, each with >= 1 constant."""
    triples = store.triples()
    var_pool = ["a", "b", "c", "d"]
    patterns = []
    for _ in range(rng.randint(1, 3)):
        s, p, o = rng.choice(triples)
        keep_constant = rng.sample(range(3), k=rng.randint(1, 2))
        terms = []
        for position, value in enumerate((s, p, o)):
            if position in keep_constant:
                terms.append(value)
            else:
                terms.append("?" + rng.choice(var_pool))
        patterns.append(tuple(terms))
    return patterns


def _pattern_to_sparql(patterns):
    def term(t):
        if t.startswith("?"):
            return t
        if t.startswith("P"):
            return "wdt:" + t
        return "wd:" + t

    body = " . ".join(" ".join(term(t) for t in triple) for triple in patterns)
    variables = sorted({t for triple in patterns for t in triple if t.startswith("?")})
    if not variables:
        return f"ASK {{ {body} }}", None
    return f"SELECT {' '.join(variables)} WHERE {{ {body} }}", [v[1:] for v in variables]


def test_bgp_matches_brute_force_join():
    rng = random.Random(424242)
    for _ in range(150):
        store = _random_store(rng, rng.randint(20, 300))
        patterns = _random_query(rng, store)
        sparql, variables = _pattern_to_sparql(patterns)
        result = local_query(store, sparql)
        oracle = join_brute_force(store.triples(), patterns)
        if variables is None:
            assert result.value is (len(oracle) > 0)
            continue
        got = Counter(frozenset(row.items()) for row in result.rows)
        expected = Counter(
            frozenset((var[1:], value) for var, value in sol.items()) for sol in oracle)
        assert got == expected
