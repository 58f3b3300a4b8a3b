"""In-process triple store evaluating the supported SPARQL subset offline.

Join strategy: triple patterns left to right as written, substituting
already-bound variables. Filters apply after the pattern block, projection,
DISTINCT, and LIMIT after that. Dataset queries are tiny, so there is no
optimizer on purpose.
"""

from __future__ import annotations

import re
import unicodedata
from pathlib import Path
from typing import Iterable, Iterator

from ..errors import SparqlParseError
from .parser import (
    AskQuery,
    ContainsFilter,
    LangFilter,
    SelectQuery,
    TriplePattern,
    Var,
    parse_query,
)
from .results import Literal, ResultSet, Value, from_iri

Triple = tuple[str, str, Value]

_NT_LINE_RE = re.compile(
    r"^\s*<(?P<s>[^>]*)>\s+<(?P<p>[^>]*)>\s+"
    r"(?:<(?P<o_iri>[^>]*)>|\"(?P<o_lit>(?:[^\"\\]|\\.)*)\"(?:@(?P<lang>[A-Za-z0-9-]+))?)"
    r"\s*\.\s*$"
)

_BARE_ID_RE = re.compile(r"^[A-Za-z]\d+$")
_PREFIXED_RE = re.compile(r"^(?:p|ps|pq):[A-Za-z]\d+$")


class TripleStore:
    """Immutable-after-load store of (subject, predicate, object) triples."""

    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples: list[Triple] = []
        self._by_s: dict[str, list[int]] = {}
        self._by_p: dict[str, list[int]] = {}
        self._by_o: dict[Value, list[int]] = {}
        for s, p, o in triples:
            self.add(s, p, o)

    def add(self, subject: str, predicate: str, obj: Value) -> None:
        if not subject or not predicate:
            raise ValueError("triple subject/predicate must be non-empty")
        idx = len(self._triples)
        self._triples.append((subject, predicate, obj))
        self._by_s.setdefault(subject, []).append(idx)
        self._by_p.setdefault(predicate, []).append(idx)
        self._by_o.setdefault(obj, []).append(idx)

    def __len__(self) -> int:
        return len(self._triples)

    def triples(self) -> list[Triple]:
        return list(self._triples)

    def match(self, s: Value | None, p: Value | None, o: Value | None) -> Iterator[Triple]:
        """All triples matching the constant positions, in insertion order."""
        pools = []
        if s is not None:
            pools.append(self._by_s.get(s, []))
        if p is not None:
            pools.append(self._by_p.get(p, []))
        if o is not None:
            pools.append(self._by_o.get(o, []))
        if not pools:
            yield from self._triples
            return
        smallest = min(pools, key=len)
        for idx in smallest:
            t = self._triples[idx]
            if s is not None and t[0] != s:
                continue
            if p is not None and t[1] != p:
                continue
            if o is not None and t[2] != o:
                continue
            yield t


def _object_from_tsv(text: str, lang: str | None) -> Value:
    if lang is not None:
        return Literal(text, lang)
    if _BARE_ID_RE.match(text) or _PREFIXED_RE.match(text):
        return text
    return Literal(text)


def load_tsv(path: str | Path, store: TripleStore | None = None) -> TripleStore:
    """Load `s\\tp\\to[\\t@lang]` lines. Objects that look like KG ids become
    ids; everything else becomes a literal (with the optional language tag)."""
    store = store or TripleStore()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (3, 4):
                raise SparqlParseError(f"{path}:{lineno}: expected 3 or 4 tab-separated fields")
            s, p, o = parts[0], parts[1], parts[2]
            lang = None
            if len(parts) == 4:
                if not parts[3].startswith("@"):
                    raise SparqlParseError(f"{path}:{lineno}: fourth field must be @lang")
                lang = parts[3][1:]
            store.add(s, p, _object_from_tsv(o, lang))
    return store


def load_ntriples(path: str | Path, store: TripleStore | None = None) -> TripleStore:
    """Load N-Triples-style `<s> <p> <o> .` lines, mapping Wikidata IRIs to
    canonical ids."""
    store = store or TripleStore()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            m = _NT_LINE_RE.match(line)
            if m is None:
                raise SparqlParseError(f"{path}:{lineno}: not an N-Triples line")
            obj: Value
            if m.group("o_iri") is not None:
                obj = from_iri(m.group("o_iri"))
            else:
                lexical = m.group("o_lit").replace('\\"', '"').replace("\\\\", "\\")
                obj = Literal(lexical, m.group("lang"))
            store.add(from_iri(m.group("s")), from_iri(m.group("p")), obj)
    return store


def load_triples(path: str | Path) -> TripleStore:
    """Sniff the fixture format: N-Triples if the first data line starts
    with '<', else the simplified TSV."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if stripped and not stripped.startswith("#"):
                first = stripped
                break
        else:
            return TripleStore()
    return load_ntriples(path) if first.startswith("<") else load_tsv(path)


def _substitute(pattern: TriplePattern, binding: dict[str, Value]):
    out = []
    for term in pattern.terms():
        if isinstance(term, Var):
            out.append(binding.get(term.name))
        else:
            out.append(term)
    return out


def _solutions(store: TripleStore, patterns, binding0=None) -> list[dict[str, Value]]:
    solutions: list[dict[str, Value]] = [dict(binding0 or {})]
    for pattern in patterns:
        next_solutions: list[dict[str, Value]] = []
        for binding in solutions:
            s, p, o = _substitute(pattern, binding)
            for triple in store.match(s, p, o):
                new = dict(binding)
                ok = True
                for term, value in zip(pattern.terms(), triple):
                    if isinstance(term, Var):
                        # repeated variable within one pattern must agree
                        if term.name in new and new[term.name] != value:
                            ok = False
                            break
                        new[term.name] = value
                if ok:
                    next_solutions.append(new)
        solutions = next_solutions
        if not solutions:
            break
    return solutions


def _lower_nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text).lower()


def _passes(filters, binding: dict[str, Value]) -> bool:
    for f in filters:
        if isinstance(f, ContainsFilter):
            value = binding.get(f.var.name)
            if isinstance(value, Literal):
                haystack = value.lexical
            elif isinstance(value, str):
                haystack = value
            else:
                return False
            if f.lowercase:
                if _lower_nfc(f.needle) not in _lower_nfc(haystack):
                    return False
            elif f.needle not in haystack:
                return False
        elif isinstance(f, LangFilter):
            value = binding.get(f.var.name)
            if not isinstance(value, Literal):
                return False
            if (value.lang or "").lower() != f.lang.lower():
                return False
    return True


def local_query(store: TripleStore, sparql: str) -> ResultSet:
    """Evaluate `sparql` against the store; pure with respect to the store.

    Returns the same ResultSet shape an endpoint would: Bindings for plain
    SELECT, Scalar for COUNT selects, Boolean for ASK. Constructs outside
    the subset raise UnsupportedSyntax, never evaluate silently wrong.
    """
    query = parse_query(sparql)
    solutions = [b for b in _solutions(store, query.patterns) if _passes(query.filters, b)]

    if isinstance(query, AskQuery):
        return ResultSet.boolean(bool(solutions))

    assert isinstance(query, SelectQuery)
    if query.count is not None:
        spec = query.count
        if spec.var is None:
            values: list[Value] = [True for _ in solutions]
        else:
            values = [b[spec.var.name] for b in solutions if spec.var.name in b]
        if spec.distinct:
            seen = []
            for v in values:
                if v not in seen:
                    seen.append(v)
            return ResultSet.scalar(len(seen))
        return ResultSet.scalar(len(values))

    var_names = [v.name for v in query.variables]
    rows: list[dict[str, Value]] = []
    for binding in solutions:
        rows.append({name: binding[name] for name in var_names if name in binding})
    if query.distinct:
        seen_keys = set()
        deduped = []
        for row in rows:
            key = tuple((name, row.get(name)) for name in var_names)
            if key not in seen_keys:
                seen_keys.add(key)
                deduped.append(row)
        rows = deduped
    if query.limit is not None:
        rows = rows[: query.limit]
    return ResultSet.bindings(rows, var_names)


class LocalKg:
    """KG interface backed by an in-process TripleStore."""

    def __init__(self, store: TripleStore):
        self.store = store

    def query(self, sparql: str) -> ResultSet:
        return local_query(self.store, sparql)
