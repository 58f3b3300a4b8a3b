"""End-to-end orchestration: parse beams, gather candidates, ground, execute,
score. Owns the run configuration and the per-question trace."""

from __future__ import annotations

import json
import re
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .embeddings import (
    EmbeddingStore,
    LayerPolicy,
    ScoredCandidate,
    SWEEP_POLICY_NAMES,
    layer_candidates,
    parse_policy_name,
    rerank,
)
from .errors import EmptyQuery, KgqaError, KgUnreachable, LimitExceeded, SkeletonParseError
from .evaluation import EvalReport, QuestionEval, aggregate, score_question
from .grounding import BeamPlan, ExecutionLimits, GroundingPlan, execute_until_answer
from .ingest import BeamEntry, QuestionRecord
from .label_index import LabelIndex
from .mini_kg.results import ResultSet
from .relation_match import RelationMatcher
from .skeleton import PrefixScheme, TruncationConfig, parse_skeleton

_GOLD_ENTITY_RE = re.compile(r"\bwd:(Q\d+)\b")
_GOLD_RELATION_RE = re.compile(r"\bwdt:(P\d+)\b")


@dataclass(frozen=True)
class PipelineConfig:
    """Run configuration; defaults follow the reference pipeline settings
    (top-100 label search, 3+3 candidate layering, top-3 relations, 3 beams,
    10-dim/3-decimal truncation, zero counts accepted as answers)."""

    k_label_search: int = 100
    layer_policy: LayerPolicy = LayerPolicy()
    k_relation: int = 3
    beam_count: int = 3
    truncation: TruncationConfig = TruncationConfig()
    count_zero_is_empty: bool = False
    empty_both_correct: bool = True
    limits: ExecutionLimits = ExecutionLimits()
    workers: int = 1
    prefixes: PrefixScheme = PrefixScheme()

    @classmethod
    def from_dict(cls, data: Mapping) -> "PipelineConfig":
        kwargs: dict = {}
        for key in ("k_label_search", "k_relation", "beam_count",
                    "count_zero_is_empty", "empty_both_correct", "workers"):
            if key in data:
                kwargs[key] = data[key]
        if "layer_policy" in data:
            kwargs["layer_policy"] = parse_policy_name(data["layer_policy"])
        if "truncation" in data:
            t = data["truncation"]
            kwargs["truncation"] = TruncationConfig(t.get("length", 10), t.get("precision", 3))
        if "max_queries" in data or "max_seconds" in data:
            kwargs["limits"] = ExecutionLimits(
                data.get("max_queries", 200), data.get("max_seconds", 30.0))
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "k_label_search": self.k_label_search,
            "layer_policy": self.layer_policy.name(),
            "k_relation": self.k_relation,
            "beam_count": self.beam_count,
            "truncation": {"length": self.truncation.length,
                           "precision": self.truncation.precision},
            "count_zero_is_empty": self.count_zero_is_empty,
            "empty_both_correct": self.empty_both_correct,
            "max_queries": self.limits.max_queries,
            "max_seconds": self.limits.max_seconds,
            "workers": self.workers,
        }


@dataclass
class Stores:
    """Shared immutable stores; safe across worker threads."""

    label_index: LabelIndex
    relation_matcher: RelationMatcher
    kg: object
    embedding_store: EmbeddingStore | None = None


@dataclass
class QuestionTrace:
    qid: str
    beams: list[str] = field(default_factory=list)
    beam_details: list[dict] = field(default_factory=list)
    execution: dict = field(default_factory=dict)
    answer: dict | None = None
    errors: list[str] = field(default_factory=list)
    timings_ms: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "qid": self.qid,
            "beams": self.beams,
            "beam_details": self.beam_details,
            "execution": self.execution,
            "answer": self.answer,
            "errors": self.errors,
            "timings_ms": self.timings_ms,
        }


def _candidate_json(c: ScoredCandidate) -> dict:
    return {"id": c.entity.id, "label": c.entity.label, "source": c.source.value,
            "dot_score": c.dot_score}


def answer_question(
    beams: Sequence[str],
    config: PipelineConfig,
    stores: Stores,
    qid: str = "",
) -> tuple[ResultSet | None, QuestionTrace]:
    """Run the five pipeline stages for one question.

    Stage errors land in the trace instead of propagating, so one bad
    question can never take down a batch run.
    """
    trace = QuestionTrace(qid=qid, beams=list(beams[: config.beam_count]))
    beam_plans: list[BeamPlan] = []
    t_parse = t_entities = t_relations = 0.0

    for beam_text in trace.beams:
        detail: dict = {"parse_error": None, "entity_candidates": [], "relation_candidates": []}
        trace.beam_details.append(detail)

        start = time.perf_counter()
        try:
            query = parse_skeleton(beam_text, config.truncation)
        except SkeletonParseError as exc:
            detail["parse_error"] = f"{type(exc).__name__}: {exc}"
            trace.errors.append(detail["parse_error"])
            t_parse += time.perf_counter() - start
            continue
        t_parse += time.perf_counter() - start
        detail["parse_flags"] = query.diagnostics.as_flags()

        start = time.perf_counter()
        entity_candidates: list[list[ScoredCandidate]] = []
        for slot in query.entity_slots:
            try:
                hits = stores.label_index.search(slot.label, config.k_label_search)
            except EmptyQuery:
                hits = []
            reranked: list[ScoredCandidate] = []
            if slot.trunc_embedding is not None and stores.embedding_store is not None:
                reranked = rerank(slot.trunc_embedding, hits, stores.embedding_store,
                                  config.truncation)
            layered = layer_candidates(hits, reranked, config.layer_policy)
            entity_candidates.append(layered)
            detail["entity_candidates"].append([_candidate_json(c) for c in layered])
        t_entities += time.perf_counter() - start

        start = time.perf_counter()
        relation_candidates = []
        for slot in query.relation_slots:
            rel_hits = stores.relation_matcher.candidates_for_label(
                slot.label, config.k_relation)
            relation_candidates.append(rel_hits)
            detail["relation_candidates"].append(
                [{"id": h.relation.id, "label": h.relation.label,
                  "cosine": h.cosine} for h in rel_hits])
        t_relations += time.perf_counter() - start

        beam_plans.append(BeamPlan(query, entity_candidates, relation_candidates))

    trace.timings_ms["parse"] = t_parse * 1000
    trace.timings_ms["entity_candidates"] = t_entities * 1000
    trace.timings_ms["relation_candidates"] = t_relations * 1000

    start = time.perf_counter()
    answer: ResultSet | None = None
    try:
        outcome = execute_until_answer(
            GroundingPlan(beam_plans), stores.kg, config.limits,
            count_zero_is_empty=config.count_zero_is_empty, prefixes=config.prefixes)
        answer = outcome.answer
        trace.execution = {
            "executed_count": outcome.executed_count,
            "winning": list(outcome.winning) if outcome.winning else None,
            "skipped_beams": outcome.diagnostics.get("skipped_beams", []),
            "query_errors": outcome.diagnostics.get("query_errors", 0),
            "executed": outcome.diagnostics.get("executed", []),
        }
    except KgUnreachable as exc:
        trace.errors.append(f"KgUnreachable: {exc}")
        trace.execution = {"executed_count": exc.executed_count, "winning": None,
                           "kg_unreachable": True}
    except LimitExceeded as exc:
        trace.errors.append(f"LimitExceeded: {exc}")
        trace.execution = {"executed_count": exc.executed_count, "winning": None,
                           "limit_exceeded": True}
    trace.timings_ms["execute"] = (time.perf_counter() - start) * 1000
    trace.answer = answer.to_json() if answer is not None else None
    return answer, trace


def _coverage_rank(gold_ids: set[str], slots: list[list[dict]]) -> int | None:
    """Depth a ranked candidate list must be read to cover every gold id;
    None when some gold id never appears."""
    best: dict[str, int] = {}
    for slot in slots:
        for rank, candidate in enumerate(slot, start=1):
            ident = candidate["id"]
            if ident in gold_ids and (ident not in best or rank < best[ident]):
                best[ident] = rank
    if set(best) != gold_ids:
        return None
    return max(best.values())


def _gold_hit_diagnostics(record: QuestionRecord, trace: QuestionTrace) -> dict:
    gold_entities = set(_GOLD_ENTITY_RE.findall(record.gold_sparql))
    gold_relations = set(_GOLD_RELATION_RE.findall(record.gold_sparql))
    diagnostics: dict = {}
    if gold_entities:
        slots = [slot for detail in trace.beam_details
                 for slot in detail.get("entity_candidates", [])]
        rank = _coverage_rank(gold_entities, slots)
        diagnostics["entity_in_candidates"] = rank is not None
        diagnostics["entity_hit_rank"] = rank
    if gold_relations:
        slots = [slot for detail in trace.beam_details
                 for slot in detail.get("relation_candidates", [])]
        rank = _coverage_rank(gold_relations, slots)
        diagnostics["relation_in_candidates"] = rank is not None
        diagnostics["relation_hit_rank"] = rank
    flags = sorted({flag for detail in trace.beam_details
                    for flag in detail.get("parse_flags", [])})
    if flags:
        diagnostics["parse_flags"] = flags
    return diagnostics


def _evaluate_one(
    record: QuestionRecord,
    beams: Sequence[str] | None,
    config: PipelineConfig,
    stores: Stores,
) -> tuple[QuestionEval, QuestionTrace, float]:
    started = time.perf_counter()
    if beams:
        answer, trace = answer_question(beams, config, stores, qid=record.qid)
    else:
        answer, trace = None, QuestionTrace(qid=record.qid)
        trace.errors.append("no beams for qid")

    diagnostics = _gold_hit_diagnostics(record, trace)
    diagnostics["answered"] = answer is not None
    diagnostics["beams_available"] = bool(beams)
    if trace.execution.get("executed_count") is not None:
        diagnostics["executed_count"] = trace.execution["executed_count"]
    parse_failed = bool(trace.beams) and all(
        d.get("parse_error") for d in trace.beam_details)
    if trace.beams:
        diagnostics["parse_failed"] = parse_failed

    if record.unsupported_gold:
        diagnostics["unsupported_gold"] = True
        evaluation = QuestionEval(record.qid, 0, 0, 0, 0, 0.0, diagnostics)
    else:
        try:
            gold_result = stores.kg.query(record.gold_sparql)
        except KgqaError as exc:
            trace.errors.append(f"gold query failed: {exc}")
            diagnostics["unsupported_gold"] = True
            evaluation = QuestionEval(record.qid, 0, 0, 0, 0, 0.0, diagnostics)
        else:
            evaluation = score_question(
                gold_result, answer, record.qid,
                empty_both_correct=config.empty_both_correct,
                diagnostics=diagnostics)
    elapsed_ms = (time.perf_counter() - started) * 1000
    trace.timings_ms["total"] = elapsed_ms
    return evaluation, trace, elapsed_ms


def run_batch(
    records: Sequence[QuestionRecord],
    beam_entries: Sequence[BeamEntry],
    config: PipelineConfig,
    stores: Stores,
    split: Sequence[str] | None = None,
) -> tuple[EvalReport, list[QuestionTrace], dict]:
    """Answer and score every question; always completes.

    Returns (report, traces, timing summary). The report is deterministic
    for fixed inputs and config; timings live in the separate summary.
    """
    if split is not None:
        wanted = set(split)
        records = [r for r in records if r.qid in wanted]
    beams_by_qid = {entry.qid: entry.beams for entry in beam_entries}

    def work(record: QuestionRecord):
        try:
            return _evaluate_one(record, beams_by_qid.get(record.qid), config, stores)
        except Exception as exc:  # noqa: BLE001 - one question never poisons the pool
            trace = QuestionTrace(qid=record.qid, errors=[f"internal error: {exc}"])
            diagnostics = {"answered": False, "internal_error": True}
            return QuestionEval(record.qid, 0, 0, 0, 0, 0.0, diagnostics), trace, 0.0

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(work, records))
    else:
        results = [work(r) for r in records]

    evaluations = [ev for ev, _, _ in results]
    traces = sorted((tr for _, tr, _ in results), key=lambda t: t.qid)
    latencies = [ms for _, _, ms in results]

    report = aggregate(evaluations) if evaluations else EvalReport(0, 0.0, 0.0, [])
    covered = sum(1 for r in records if r.qid in beams_by_qid)
    report.diagnostics["beam_coverage"] = covered / len(records) if records else 0.0
    report.diagnostics["policy"] = config.layer_policy.name()

    timing = {
        "mean_ms": statistics.mean(latencies) if latencies else 0.0,
        "median_ms": statistics.median(latencies) if latencies else 0.0,
        "total_s": sum(latencies) / 1000,
    }
    return report, traces, timing


def policy_sweep(
    records: Sequence[QuestionRecord],
    beam_entries: Sequence[BeamEntry],
    config: PipelineConfig,
    stores: Stores,
    policy_names: Sequence[str] = tuple(SWEEP_POLICY_NAMES),
    split: Sequence[str] | None = None,
) -> dict[str, EvalReport]:
    """Re-run the batch once per candidate-ordering policy."""
    reports: dict[str, EvalReport] = {}
    for name in policy_names:
        swept = replace(config, layer_policy=parse_policy_name(name))
        report, _, _ = run_batch(records, beam_entries, swept, stores, split=split)
        reports[name] = report
    return reports


def report_to_bytes(report: EvalReport) -> bytes:
    """Canonical JSON encoding used for golden-file comparisons."""
    return (json.dumps(report.to_json(), indent=2, sort_keys=True, ensure_ascii=False)
            + "\n").encode("utf-8")


def save_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_bytes(report_to_bytes(report))


def save_traces(traces: Sequence[QuestionTrace], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(json.dumps(trace.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
