"""Minimal SPARQL-protocol HTTP server backed by a TripleStore.

Serves the standard JSON results format over GET (?query=) and POST
(form-encoded or raw body). Used by the test suite for differential
client/store testing and handy for poking at fixtures with curl.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from ..errors import SparqlParseError, UnsupportedSyntax
from .results import Literal, ResultKind, ResultSet, to_iri
from .store import TripleStore, local_query


def results_to_wire_json(result: ResultSet) -> dict:
    """ResultSet -> standard SPARQL JSON results document.

    Scalars are reported the way real endpoints report COUNT aggregates:
    a single binding row with an xsd:integer literal.
    """
    if result.kind is ResultKind.BOOLEAN:
        return {"head": {}, "boolean": bool(result.value)}
    if result.kind is ResultKind.SCALAR:
        return {
            "head": {"vars": ["count"]},
            "results": {"bindings": [{
                "count": {
                    "type": "literal",
                    "value": str(result.value),
                    "datatype": "http://www.w3.org/2001/XMLSchema#integer",
                }
            }]},
        }
    bindings = []
    for row in result.rows:
        entry = {}
        for var, value in row.items():
            if isinstance(value, Literal):
                obj = {"type": "literal", "value": value.lexical}
                if value.lang:
                    obj["xml:lang"] = value.lang
            elif isinstance(value, bool):
                obj = {"type": "literal", "value": "true" if value else "false",
                       "datatype": "http://www.w3.org/2001/XMLSchema#boolean"}
            elif isinstance(value, int):
                obj = {"type": "literal", "value": str(value),
                       "datatype": "http://www.w3.org/2001/XMLSchema#integer"}
            else:
                obj = {"type": "uri", "value": to_iri(value)}
            entry[var] = obj
        bindings.append(entry)
    return {"head": {"vars": result.variables}, "results": {"bindings": bindings}}


class _Handler(BaseHTTPRequestHandler):
    store: TripleStore = TripleStore()

    def _respond(self, status: int, payload: dict | str):
        body = (json.dumps(payload) if isinstance(payload, dict) else payload).encode("utf-8")
        self.send_response(status)
        content_type = ("application/sparql-results+json"
                        if isinstance(payload, dict) else "text/plain")
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _run(self, sparql: str | None):
        if not sparql:
            self._respond(400, "missing query parameter")
            return
        try:
            result = local_query(self.store, sparql)
        except (SparqlParseError, UnsupportedSyntax) as exc:
            self._respond(400, f"bad query: {exc}")
            return
        self._respond(200, results_to_wire_json(result))

    def do_GET(self):
        params = parse_qs(urlparse(self.path).query)
        self._run(params.get("query", [None])[0])

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        body = self.rfile.read(length).decode("utf-8")
        content_type = self.headers.get("Content-Type", "")
        if "application/x-www-form-urlencoded" in content_type:
            sparql = parse_qs(body).get("query", [None])[0]
        else:
            sparql = body
        self._run(sparql)

    def log_message(self, fmt, *args):  # keep test output quiet
        pass


class FixtureEndpoint:
    """Context manager running a TripleStore-backed endpoint on localhost."""

    def __init__(self, store: TripleStore, port: int = 0):
        handler = type("BoundHandler", (_Handler,), {"store": store})
        self._server = ThreadingHTTPServer(("127.0.0.1", port), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/sparql"

    def __enter__(self) -> "FixtureEndpoint":
        self._thread.start()
        return self

    def __exit__(self, *exc_info):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)
