"""SPARQL-protocol HTTP client returning the same ResultSet shapes as the
local store."""

from __future__ import annotations

import json
import time

import requests

from ..errors import (
    EndpointError,
    MalformedResults,
    QueryTimeout,
    TransportError,
)
from .parser import is_count_query
from .results import Literal, ResultSet, Value, from_iri

_ACCEPT = "application/sparql-results+json"

_INTEGER_DATATYPES = {
    "http://www.w3.org/2001/XMLSchema#integer",
    "http://www.w3.org/2001/XMLSchema#int",
    "http://www.w3.org/2001/XMLSchema#long",
    "http://www.w3.org/2001/XMLSchema#nonNegativeInteger",
}


def _parse_binding(obj: dict) -> Value:
    kind = obj.get("type")
    value = obj.get("value", "")
    if kind == "uri":
        return from_iri(value)
    if kind in ("literal", "typed-literal"):
        datatype = obj.get("datatype")
        if datatype in _INTEGER_DATATYPES:
            try:
                return int(value)
            except ValueError:
                pass
        return Literal(value, obj.get("xml:lang"))
    if kind == "bnode":
        return f"_:{value}"
    raise MalformedResults(f"unknown binding type {kind!r}")


def parse_results_json(payload: dict) -> ResultSet:
    """Standard SPARQL JSON results -> ResultSet (Bindings or Boolean)."""
    if "boolean" in payload:
        return ResultSet.boolean(payload["boolean"])
    try:
        variables = list(payload["head"]["vars"])
        bindings = payload["results"]["bindings"]
    except (KeyError, TypeError) as exc:
        raise MalformedResults(f"missing results structure: {exc}") from None
    rows = []
    for entry in bindings:
        if not isinstance(entry, dict):
            raise MalformedResults("binding row is not an object")
        rows.append({var: _parse_binding(obj) for var, obj in entry.items()})
    return ResultSet.bindings(rows, variables)


def _maybe_scalar(sparql: str, result: ResultSet) -> ResultSet:
    """Fold a 1x1 integer Bindings into Scalar when the query is COUNT-form.

    Endpoints report COUNT aggregates as an ordinary binding row; the local
    store reports Scalar, so normalize to the local shape when we can tell.
    """
    if result.kind.value != "bindings" or len(result.rows) != 1:
        return result
    row = result.rows[0]
    if len(row) != 1:
        return result
    value = next(iter(row.values()))
    if isinstance(value, Literal) and value.lexical.isdigit():
        value = int(value.lexical)
    if isinstance(value, int) and not isinstance(value, bool) and is_count_query(sparql):
        return ResultSet.scalar(value)
    return result


class SparqlEndpoint:
    """One remote endpoint; retries transient failures with backoff."""

    def __init__(self, url: str, timeout: float = 30.0, retries: int = 2,
                 backoff: float = 0.5, session: requests.Session | None = None):
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.session = session or requests.Session()

    def query(self, sparql: str) -> ResultSet:
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = self.session.post(
                    self.url,
                    data={"query": sparql},
                    headers={"Accept": _ACCEPT},
                    timeout=self.timeout,
                )
            except requests.Timeout as exc:
                last_exc = QueryTimeout(f"{self.url}: timed out after {self.timeout}s")
                last_exc.__cause__ = exc
            except requests.RequestException as exc:
                last_exc = TransportError(f"{self.url}: {exc}")
            else:
                if 500 <= response.status_code < 600 and attempt < self.retries:
                    last_exc = EndpointError(response.status_code, response.text[:200])
                elif response.status_code != 200:
                    raise EndpointError(response.status_code, response.text[:200])
                else:
                    try:
                        payload = response.json()
                    except (json.JSONDecodeError, ValueError) as exc:
                        raise MalformedResults(f"{self.url}: response is not JSON: {exc}")
                    return _maybe_scalar(sparql, parse_results_json(payload))
            if attempt < self.retries:
                time.sleep(self.backoff * (2 ** attempt))
        assert last_exc is not None
        if isinstance(last_exc, EndpointError):
            raise last_exc
        raise last_exc


def endpoint_query(url: str, sparql: str, timeout: float = 30.0) -> ResultSet:
    """One-shot query against a standard SPARQL endpoint."""
    return SparqlEndpoint(url, timeout=timeout).query(sparql)
