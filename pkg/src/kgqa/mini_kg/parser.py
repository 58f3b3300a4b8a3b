"""Recursive-descent parser for the SPARQL subset used by the datasets.

Supported: SELECT (DISTINCT, COUNT aggregates), ASK, basic graph patterns
(including ``p:``/``ps:``/``pq:`` and ``rdfs:label`` predicates),
FILTER(CONTAINS(lcase(?v), "...")), FILTER(CONTAINS(?v, "...")),
FILTER(lang(?v) = "..."), and LIMIT. Anything that parses as SPARQL but is
outside this subset raises UnsupportedSyntax rather than evaluating wrong.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from ..errors import SparqlParseError, UnsupportedSyntax
from .results import Literal, canonical_pname

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<string>"(?:[^"\\]|\\.)*")
    | (?P<sstring>'(?:[^'\\]|\\.)*')
    | (?P<langtag>@[A-Za-z][A-Za-z0-9-]*)
    | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
    | (?P<pname>[A-Za-z][A-Za-z0-9_-]*:[A-Za-z0-9_.-]+)
    | (?P<iri><[^<>\s]*>)
    | (?P<number>-?\d+(?:\.\d+)?)
    | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<punct>[{}().,=*;:])
    """,
    re.X,
)

# recognized SPARQL constructs we deliberately do not evaluate
_UNSUPPORTED_KEYWORDS = {
    "optional", "union", "order", "group", "having", "offset", "bind",
    "values", "minus", "service", "graph", "construct", "describe", "prefix",
    "base", "insert", "delete", "exists", "not", "regex", "strstarts", "str",
    "year", "month", "now", "sum", "avg", "min", "max", "sample", "concat",
    "filter_not",
}

_FORM_KEYWORDS = {"select", "ask"}


@dataclass(frozen=True)
class Var:
    name: str


Term = Union[Var, str, Literal]


@dataclass(frozen=True)
class TriplePattern:
    subject: Term
    predicate: Term
    object: Term

    def terms(self) -> tuple[Term, Term, Term]:
        return (self.subject, self.predicate, self.object)


@dataclass(frozen=True)
class ContainsFilter:
    var: Var
    needle: str
    lowercase: bool


@dataclass(frozen=True)
class LangFilter:
    var: Var
    lang: str


Filter = Union[ContainsFilter, LangFilter]


@dataclass(frozen=True)
class CountSpec:
    var: Var | None  # None = COUNT(*)
    distinct: bool
    as_var: Var


@dataclass(frozen=True)
class SelectQuery:
    variables: tuple[Var, ...]
    patterns: tuple[TriplePattern, ...]
    filters: tuple[Filter, ...] = ()
    distinct: bool = False
    count: CountSpec | None = None
    limit: int | None = None


@dataclass(frozen=True)
class AskQuery:
    patterns: tuple[TriplePattern, ...]
    filters: tuple[Filter, ...] = ()


Query = Union[SelectQuery, AskQuery]


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SparqlParseError(f"unexpected character {text[pos]!r} at offset {pos}")
        kind = m.lastgroup
        text_out = m.group()
        if kind == "sstring":
            kind = "string"
            text_out = '"' + text_out[1:-1].replace('"', '\\"') + '"'
        if kind != "ws":
            tokens.append(_Token(kind, text_out, pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    # --- token helpers -----------------------------------------------------

    def peek(self) -> _Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise SparqlParseError("unexpected end of query")
        self.i += 1
        return tok

    def at_name(self, *names: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "name" and tok.text.lower() in names

    def expect_name(self, name: str) -> None:
        tok = self.next()
        if tok.kind != "name" or tok.text.lower() != name:
            raise SparqlParseError(f"expected {name.upper()} at offset {tok.pos}, got {tok.text!r}")

    def expect_punct(self, ch: str) -> None:
        tok = self.next()
        if tok.kind != "punct" or tok.text != ch:
            raise SparqlParseError(f"expected {ch!r} at offset {tok.pos}, got {tok.text!r}")

    def _check_unsupported(self, tok: _Token) -> None:
        if tok.kind == "name" and tok.text.lower() in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedSyntax(f"{tok.text.upper()} is outside the supported subset")

    # --- grammar ------------------------------------------------------------

    def parse_query(self) -> Query:
        tok = self.peek()
        if tok is None:
            raise SparqlParseError("empty query")
        self._check_unsupported(tok)
        if tok.kind != "name" or tok.text.lower() not in _FORM_KEYWORDS:
            raise SparqlParseError(f"query must start with SELECT or ASK, got {tok.text!r}")
        query = self._select() if tok.text.lower() == "select" else self._ask()
        trailing = self.peek()
        if trailing is not None:
            self._check_unsupported(trailing)
            raise SparqlParseError(f"trailing tokens at offset {trailing.pos}: {trailing.text!r}")
        return query

    def _select(self) -> SelectQuery:
        self.expect_name("select")
        distinct = False
        if self.at_name("distinct"):
            self.next()
            distinct = True

        count: CountSpec | None = None
        variables: list[Var] = []
        tok = self.peek()
        if tok is not None and tok.kind == "punct" and tok.text == "(":
            count = self._count_clause()
        else:
            while True:
                tok = self.peek()
                if tok is None:
                    raise SparqlParseError("unexpected end of projection")
                if tok.kind == "var":
                    variables.append(Var(self.next().text[1:]))
                    continue
                if tok.kind == "punct" and tok.text == "*":
                    raise UnsupportedSyntax("SELECT * is outside the supported subset")
                break
            if not variables:
                raise SparqlParseError("SELECT needs at least one projection variable")

        patterns, filters = self._group()

        limit = None
        if self.at_name("limit"):
            self.next()
            tok = self.next()
            if tok.kind != "number" or "." in tok.text:
                raise SparqlParseError(f"LIMIT needs an integer, got {tok.text!r}")
            limit = int(tok.text)

        return SelectQuery(tuple(variables), patterns, filters,
                           distinct=distinct, count=count, limit=limit)

    def _ask(self) -> AskQuery:
        self.expect_name("ask")
        patterns, filters = self._group()
        return AskQuery(patterns, filters)

    def _count_clause(self) -> CountSpec:
        self.expect_punct("(")
        self.expect_name("count")
        self.expect_punct("(")
        distinct = False
        if self.at_name("distinct"):
            self.next()
            distinct = True
        tok = self.next()
        if tok.kind == "var":
            var: Var | None = Var(tok.text[1:])
        elif tok.kind == "punct" and tok.text == "*":
            var = None
        else:
            raise SparqlParseError(f"COUNT needs a variable or *, got {tok.text!r}")
        self.expect_punct(")")
        self.expect_name("as")
        tok = self.next()
        if tok.kind != "var":
            raise SparqlParseError(f"COUNT ... AS needs a variable, got {tok.text!r}")
        as_var = Var(tok.text[1:])
        self.expect_punct(")")
        return CountSpec(var, distinct, as_var)

    def _group(self) -> tuple[tuple[TriplePattern, ...], tuple[Filter, ...]]:
        if self.at_name("where"):
            self.next()
        self.expect_punct("{")
        patterns: list[TriplePattern] = []
        filters: list[Filter] = []
        while True:
            tok = self.peek()
            if tok is None:
                raise SparqlParseError("unterminated group: missing '}'")
            if tok.kind == "punct" and tok.text == "}":
                self.next()
                break
            if tok.kind == "punct" and tok.text in ".;":
                self.next()
                continue
            if tok.kind == "name" and tok.text.lower() == "filter":
                filters.append(self._filter())
                continue
            self._check_unsupported(tok)
            if tok.kind == "punct" and tok.text == "{":
                raise UnsupportedSyntax("nested groups are outside the supported subset")
            patterns.append(self._triple())
        return tuple(patterns), tuple(filters)

    def _triple(self) -> TriplePattern:
        return TriplePattern(self._term(), self._term(), self._term())

    def _term(self) -> Term:
        tok = self.next()
        if tok.kind == "var":
            return Var(tok.text[1:])
        if tok.kind == "pname":
            return canonical_pname(tok.text)
        if tok.kind == "iri":
            from .results import from_iri
            return from_iri(tok.text[1:-1])
        if tok.kind == "string":
            lexical = _unescape(tok.text[1:-1])
            nxt = self.peek()
            if nxt is not None and nxt.kind == "langtag":
                self.next()
                return Literal(lexical, nxt.text[1:])
            return Literal(lexical)
        if tok.kind == "number":
            return Literal(tok.text)
        self._check_unsupported(tok)
        raise SparqlParseError(f"cannot use {tok.text!r} as a triple term (offset {tok.pos})")

    def _filter(self) -> Filter:
        self.expect_name("filter")
        self.expect_punct("(")
        tok = self.next()
        if tok.kind != "name":
            raise SparqlParseError(f"unsupported FILTER at offset {tok.pos}")
        fname = tok.text.lower()
        if fname == "contains":
            self.expect_punct("(")
            lowercase = False
            tok = self.next()
            if tok.kind == "name" and tok.text.lower() == "lcase":
                lowercase = True
                self.expect_punct("(")
                var_tok = self.next()
                if var_tok.kind != "var":
                    raise SparqlParseError("lcase(...) needs a variable")
                var = Var(var_tok.text[1:])
                self.expect_punct(")")
            elif tok.kind == "var":
                var = Var(tok.text[1:])
            else:
                raise SparqlParseError(f"CONTAINS needs a variable, got {tok.text!r}")
            self.expect_punct(",")
            needle_tok = self.next()
            if needle_tok.kind != "string":
                raise SparqlParseError("CONTAINS needs a string literal")
            self.expect_punct(")")
            self.expect_punct(")")
            return ContainsFilter(var, _unescape(needle_tok.text[1:-1]), lowercase)
        if fname == "lang":
            self.expect_punct("(")
            var_tok = self.next()
            if var_tok.kind != "var":
                raise SparqlParseError("lang(...) needs a variable")
            self.expect_punct(")")
            self.expect_punct("=")
            lang_tok = self.next()
            if lang_tok.kind != "string":
                raise SparqlParseError("lang(...) = needs a string literal")
            self.expect_punct(")")
            return LangFilter(Var(var_tok.text[1:]), _unescape(lang_tok.text[1:-1]))
        self._check_unsupported(tok)
        raise UnsupportedSyntax(f"FILTER {tok.text} is outside the supported subset")


def _unescape(raw: str) -> str:
    return raw.replace('\\"', '"').replace("\\\\", "\\")


def parse_query(text: str) -> Query:
    """Parse SPARQL text; raises SparqlParseError or UnsupportedSyntax."""
    return _Parser(text).parse_query()


def is_count_query(text: str) -> bool:
    """True when the text parses (in-subset) to a COUNT-form SELECT."""
    try:
        q = parse_query(text)
    except (SparqlParseError, UnsupportedSyntax):
        return False
    return isinstance(q, SelectQuery) and q.count is not None
