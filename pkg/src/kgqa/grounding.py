"""Candidate combinations and first-non-empty execution against a KG.

Combinations are the Cartesian product of per-slot candidate lists, in
lexicographic order of per-slot ranks with the leftmost (textually first)
slot most significant. Beams run in decoder order; within a beam,
combinations run in rank order; the first non-empty KG response wins and
nothing after it executes.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .errors import (
    EmptySlotCandidates,
    EndpointError,
    KgUnreachable,
    LimitExceeded,
    MalformedResults,
    SparqlParseError,
    TransportError,
    UnsupportedSyntax,
)
from .mini_kg.results import ResultSet
from .skeleton import EntityRef, PrefixScheme, SkeletonQuery, serialize_grounded


def candidate_id(candidate) -> str:
    """Accepts plain id strings, ScoredCandidate, or RelationHit."""
    if isinstance(candidate, str):
        return candidate
    if hasattr(candidate, "entity"):
        return candidate.entity.id
    if hasattr(candidate, "relation"):
        return candidate.relation.id
    raise TypeError(f"not a candidate: {candidate!r}")


@dataclass
class BeamPlan:
    """One parsed beam plus its per-slot candidate lists (rank order)."""

    query: SkeletonQuery
    entity_candidates: list[Sequence]
    relation_candidates: list[Sequence]


@dataclass
class GroundingPlan:
    beams: list[BeamPlan]


@dataclass(frozen=True)
class GroundedQuery:
    beam_index: int
    combo_rank: int
    sparql: str
    bindings: dict[str, str] = field(compare=False, default_factory=dict)


@dataclass(frozen=True)
class ExecutionLimits:
    """Per-question execution budget."""

    max_queries: int = 200
    max_seconds: float = 30.0


@dataclass
class ExecutionOutcome:
    answer: ResultSet | None
    executed_count: int
    winning: tuple[int, int] | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def answered(self) -> bool:
        return self.answer is not None


def enumerate_combinations(
    q: SkeletonQuery,
    entity_cands: Sequence[Sequence],
    relation_cands: Sequence[Sequence],
    prefixes: PrefixScheme = PrefixScheme(),
    beam_index: int = 0,
) -> Iterator[GroundedQuery]:
    """Yield every grounding of `q` in rank-lexicographic order.

    The slot significance order is the textual order of the slots, so the
    first emitted query uses the rank-0 candidate in every slot and the last
    varies the leftmost slot slowest.
    """
    if len(entity_cands) != len(q.entity_slots) or len(relation_cands) != len(q.relation_slots):
        raise ValueError("candidate lists do not match slot counts")
    for i, cands in enumerate(entity_cands):
        if not cands:
            raise EmptySlotCandidates(f"entity slot {i} has no candidates")
    for i, cands in enumerate(relation_cands):
        if not cands:
            raise EmptySlotCandidates(f"relation slot {i} has no candidates")
    return _combinations(q, entity_cands, relation_cands, prefixes, beam_index)


def _combinations(q, entity_cands, relation_cands, prefixes, beam_index):
    refs = q.slot_refs()
    lists_in_order = [
        entity_cands[ref.index] if isinstance(ref, EntityRef) else relation_cands[ref.index]
        for ref in refs
    ]

    for rank, combo in enumerate(itertools.product(*lists_in_order)):
        entity_ids = [""] * len(q.entity_slots)
        relation_ids = [""] * len(q.relation_slots)
        bindings: dict[str, str] = {}
        for ref, chosen in zip(refs, combo):
            ident = candidate_id(chosen)
            if isinstance(ref, EntityRef):
                entity_ids[ref.index] = ident
                bindings[f"ent{ref.index}"] = ident
            else:
                relation_ids[ref.index] = ident
                bindings[f"rel{ref.index}"] = ident
        yield GroundedQuery(
            beam_index=beam_index,
            combo_rank=rank,
            sparql=serialize_grounded(q, entity_ids, relation_ids, prefixes),
            bindings=bindings,
        )


def combination_count(entity_cands: Sequence[Sequence], relation_cands: Sequence[Sequence]) -> int:
    total = 1
    for cands in itertools.chain(entity_cands, relation_cands):
        total *= len(cands)
    return total


# KG errors that fail one grounded query but not the question
_PER_QUERY_ERRORS = (SparqlParseError, UnsupportedSyntax, EndpointError, MalformedResults)


def execute_until_answer(
    plan: GroundingPlan,
    kg,
    limits: ExecutionLimits = ExecutionLimits(),
    count_zero_is_empty: bool = False,
    prefixes: PrefixScheme = PrefixScheme(),
) -> ExecutionOutcome:
    """Run grounded queries beam-major until the KG answers.

    Per-query KG errors are counted and skipped; transport failure aborts the
    question as KgUnreachable; budget exhaustion raises LimitExceeded. When
    everything is empty the outcome has answer=None and executed_count shows
    how much work that took.
    """
    diagnostics: dict = {"skipped_beams": [], "query_errors": 0, "executed": []}
    executed = 0
    started = time.monotonic()

    for beam_index, beam in enumerate(plan.beams):
        try:
            combos = enumerate_combinations(
                beam.query, beam.entity_candidates, beam.relation_candidates,
                prefixes=prefixes, beam_index=beam_index,
            )
            for grounded in combos:
                if executed >= limits.max_queries:
                    raise LimitExceeded(
                        f"query budget {limits.max_queries} exhausted", executed)
                if time.monotonic() - started > limits.max_seconds:
                    raise LimitExceeded(
                        f"wall-clock budget {limits.max_seconds}s exhausted", executed)
                try:
                    result = kg.query(grounded.sparql)
                except _PER_QUERY_ERRORS:
                    executed += 1
                    diagnostics["query_errors"] += 1
                    diagnostics["executed"].append(
                        {"beam": beam_index, "rank": grounded.combo_rank,
                         "status": "error", "sparql": grounded.sparql})
                    continue
                except TransportError as exc:
                    raise KgUnreachable(str(exc), executed) from exc
                executed += 1
                diagnostics["executed"].append(
                    {"beam": beam_index, "rank": grounded.combo_rank,
                     "status": "empty", "sparql": grounded.sparql})
                if not result.is_empty(count_zero_is_empty):
                    diagnostics["executed"][-1]["status"] = "answered"
                    return ExecutionOutcome(
                        answer=result,
                        executed_count=executed,
                        winning=(beam_index, grounded.combo_rank),
                        diagnostics=diagnostics,
                    )
        except EmptySlotCandidates as exc:
            diagnostics["skipped_beams"].append((beam_index, str(exc)))
            continue

    return ExecutionOutcome(answer=None, executed_count=executed, winning=None,
                            diagnostics=diagnostics)
