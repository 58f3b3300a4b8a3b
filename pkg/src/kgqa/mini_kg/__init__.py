"""KG interface: in-process triple store plus SPARQL-protocol HTTP client."""

from .client import SparqlEndpoint, endpoint_query, parse_results_json
from .parser import is_count_query, parse_query
from .results import Literal, ResultKind, ResultSet, Value, from_iri, to_iri
from .server import FixtureEndpoint, results_to_wire_json
from .store import LocalKg, TripleStore, load_ntriples, load_triples, load_tsv, local_query

__all__ = [
    "FixtureEndpoint",
    "Literal",
    "LocalKg",
    "ResultKind",
    "ResultSet",
    "SparqlEndpoint",
    "TripleStore",
    "Value",
    "endpoint_query",
    "from_iri",
    "is_count_query",
    "load_ntriples",
    "load_triples",
    "load_tsv",
    "local_query",
    "parse_query",
    "parse_results_json",
    "results_to_wire_json",
    "to_iri",
]
