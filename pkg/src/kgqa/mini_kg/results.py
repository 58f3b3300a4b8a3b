"""SPARQL result model and term canonicalization.

Terms are kept in a compact canonical form throughout the package:
entity ids ``Q76``, direct-property ids ``P22``, statement/qualifier
predicates with their namespace kept (``p:P166``, ``ps:P166``, ``pq:P166``),
``rdfs:label`` spelled literally, and literals as (lexical form, language
tag) pairs. Full Wikidata IRIs map onto this form and back.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Union

_WD_ENTITY = "http://www.wikidata.org/entity/"
_WD_DIRECT = "http://www.wikidata.org/prop/direct/"
_WD_STATEMENT = "http://www.wikidata.org/prop/statement/"
_WD_QUALIFIER = "http://www.wikidata.org/prop/qualifier/"
_WD_PROP = "http://www.wikidata.org/prop/"
_RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"

_PNAME_MAP = {"wd": "", "wdt": "", "p": "p:", "ps": "ps:", "pq": "pq:"}

_BARE_ID_RE = re.compile(r"^[A-Za-z]\d+$")


@dataclass(frozen=True)
class Literal:
    lexical: str
    lang: str | None = None

    def __str__(self) -> str:
        return f'"{self.lexical}"@{self.lang}' if self.lang else f'"{self.lexical}"'


Value = Union[str, Literal, int, bool]


def canonical_pname(pname: str) -> str:
    """Map a prefixed name from query text to canonical form."""
    prefix, _, local = pname.partition(":")
    if pname == "rdfs:label":
        return "rdfs:label"
    if prefix in _PNAME_MAP:
        return _PNAME_MAP[prefix] + local
    return pname


def from_iri(iri: str) -> str:
    """Map a full IRI to canonical form; unknown IRIs pass through."""
    for base, out_prefix in ((_WD_ENTITY, ""), (_WD_DIRECT, ""), (_WD_STATEMENT, "ps:"),
                             (_WD_QUALIFIER, "pq:"), (_WD_PROP, "p:")):
        if iri.startswith(base):
            return out_prefix + iri[len(base):]
    if iri == _RDFS_LABEL:
        return "rdfs:label"
    return iri


def to_iri(term: str) -> str:
    """Inverse of `from_iri` for the canonical vocabulary."""
    if term == "rdfs:label":
        return _RDFS_LABEL
    if term.startswith("ps:"):
        return _WD_STATEMENT + term[3:]
    if term.startswith("pq:"):
        return _WD_QUALIFIER + term[3:]
    if term.startswith("p:"):
        return _WD_PROP + term[2:]
    if _BARE_ID_RE.match(term):
        if term[0] in "Qq":
            return _WD_ENTITY + term
        return _WD_DIRECT + term
    return term


class ResultKind(enum.Enum):
    BINDINGS = "bindings"
    BOOLEAN = "boolean"
    SCALAR = "scalar"


@dataclass
class ResultSet:
    """A SPARQL response: variable bindings, an ASK boolean, or a COUNT."""

    kind: ResultKind
    rows: list[dict[str, Value]] = field(default_factory=list)
    value: bool | int | None = None
    variables: list[str] = field(default_factory=list)

    @classmethod
    def bindings(cls, rows: list[dict[str, Value]], variables: list[str] | None = None) -> "ResultSet":
        if variables is None:
            variables = []
            for row in rows:
                for var in row:
                    if var not in variables:
                        variables.append(var)
        return cls(ResultKind.BINDINGS, rows=rows, variables=variables)

    @classmethod
    def boolean(cls, value: bool) -> "ResultSet":
        return cls(ResultKind.BOOLEAN, value=bool(value))

    @classmethod
    def scalar(cls, value: int) -> "ResultSet":
        return cls(ResultKind.SCALAR, value=int(value))

    def is_empty(self, count_zero_is_empty: bool = False) -> bool:
        """Empty means "keep exploring" during grounded-query execution.

        ASK booleans always count as answers; COUNT scalars count as answers
        even at zero unless `count_zero_is_empty` asks to treat a zero count
        as no answer.
        """
        if self.kind is ResultKind.BINDINGS:
            return not self.rows
        if self.kind is ResultKind.SCALAR:
            return count_zero_is_empty and self.value == 0
        return False

    def answer_values(self) -> set:
        """Flattened set of answer values for metric comparison."""
        if self.kind is ResultKind.BINDINGS:
            return {value for row in self.rows for value in row.values()}
        return {self.value}

    def first_answer(self) -> Value | None:
        """The first binding of the first row (KG row order), if any."""
        if self.kind is not ResultKind.BINDINGS:
            return self.value
        if not self.rows:
            return None
        first = self.rows[0]
        for var in self.variables:
            if var in first:
                return first[var]
        return next(iter(first.values()), None)

    def to_json(self) -> dict:
        """Serialize for reports/traces (not the SPARQL wire format)."""
        if self.kind is ResultKind.BINDINGS:
            rows = [
                {var: (value if isinstance(value, str)
                       else {"lexical": value.lexical, "lang": value.lang}
                       if isinstance(value, Literal) else value)
                 for var, value in row.items()}
                for row in self.rows
            ]
            return {"kind": "bindings", "variables": self.variables, "rows": rows}
        return {"kind": self.kind.value, "value": self.value}
