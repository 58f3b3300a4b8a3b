"""Macro P@1 / macro F1 scoring plus the embedding-alignment analyses.

Scoring compares the answer-value sets of gold and predicted KG responses:
IRIs by full canonical string, literals by (lexical form, language tag).
P@1 asks whether the first returned binding (KG row order, first projected
variable) is in the gold answer set; for boolean/scalar results both metrics
reduce to equality. When gold and prediction are both empty the question
counts as correct by default (`empty_both_correct=False` flips that).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import EmptyInput
from .mini_kg.results import ResultKind, ResultSet
from .skeleton import SkeletonQuery, TruncatedEmbedding, TruncationConfig, parse_skeleton
from .errors import SkeletonParseError


@dataclass
class QuestionEval:
    qid: str
    tp: int
    fp: int
    fn: int
    p_at_1: int
    f1: float
    diagnostics: dict = field(default_factory=dict)


def _f1(tp: int, fp: int, fn: int) -> float:
    denominator = 2 * tp + fp + fn
    return 2 * tp / denominator if denominator > 0 else 0.0


def score_question(
    gold_result: ResultSet | None,
    pred_result: ResultSet | None,
    qid: str = "",
    *,
    empty_both_correct: bool = True,
    diagnostics: dict | None = None,
) -> QuestionEval:
    """TP/FP/FN over answer-value sets; unanswered predictions score 0."""
    gold = gold_result if gold_result is not None else ResultSet.bindings([])
    pred = pred_result if pred_result is not None else ResultSet.bindings([])

    gold_empty = gold.kind is ResultKind.BINDINGS and not gold.rows
    pred_empty = pred.kind is ResultKind.BINDINGS and not pred.rows

    if gold_empty and pred_empty:
        score = 1 if empty_both_correct else 0
        return QuestionEval(qid, 0, 0, 0, score, float(score), diagnostics or {})

    if gold.kind is ResultKind.BINDINGS and pred.kind is ResultKind.BINDINGS:
        gold_values = gold.answer_values()
        pred_values = pred.answer_values()
        tp = len(gold_values & pred_values)
        fp = len(pred_values - gold_values)
        fn = len(gold_values - pred_values)
        first = pred.first_answer()
        p_at_1 = 1 if first is not None and first in gold_values else 0
    elif gold.kind == pred.kind:
        # boolean/scalar compare by equality
        if gold.value == pred.value:
            tp, fp, fn, p_at_1 = 1, 0, 0, 1
        else:
            tp, fp, fn, p_at_1 = 0, 1, 1, 0
    else:
        # kind mismatch (e.g. bindings vs count) never matches
        tp = 0
        fp = 0 if pred_empty else max(1, len(pred.answer_values()))
        fn = 0 if gold_empty else max(1, len(gold.answer_values()))
        p_at_1 = 0

    return QuestionEval(qid, tp, fp, fn, p_at_1, _f1(tp, fp, fn), diagnostics or {})


@dataclass
class EvalReport:
    question_count: int
    macro_p_at_1: float
    macro_f1: float
    per_question: list[QuestionEval]
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "question_count": self.question_count,
            "macro_p_at_1": self.macro_p_at_1,
            "macro_f1": self.macro_f1,
            "diagnostics": self.diagnostics,
            "per_question": [
                {"qid": ev.qid, "tp": ev.tp, "fp": ev.fp, "fn": ev.fn,
                 "p_at_1": ev.p_at_1, "f1": ev.f1, "diagnostics": ev.diagnostics}
                for ev in self.per_question
            ],
        }


def aggregate(per_question: Sequence[QuestionEval]) -> EvalReport:
    """Macro averages (uniform over questions), sorted by qid for stable
    output; diagnostic flags present on questions are averaged as rates."""
    if not per_question:
        raise EmptyInput("no question evaluations to aggregate")
    ordered = sorted(per_question, key=lambda ev: ev.qid)
    n = len(ordered)
    macro_p = sum(ev.p_at_1 for ev in ordered) / n
    macro_f1 = sum(ev.f1 for ev in ordered) / n

    diagnostics: dict = {}
    flag_keys = ("entity_in_candidates", "relation_in_candidates", "answered",
                 "parse_failed", "unsupported_gold")
    for key in flag_keys:
        flagged = [ev for ev in ordered if key in ev.diagnostics]
        if flagged:
            diagnostics[f"{key}_rate"] = sum(
                1 for ev in flagged if ev.diagnostics[key]) / len(flagged)
    executed = [ev.diagnostics["executed_count"] for ev in ordered
                if "executed_count" in ev.diagnostics]
    if executed:
        diagnostics["mean_executed_queries"] = sum(executed) / len(executed)

    return EvalReport(n, macro_p, macro_f1, ordered, diagnostics)


# --- embedding-alignment analyses ------------------------------------------------


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float | None:
    """Cosine of two equal-length vectors; None when either has zero norm."""
    dot = 0.0
    norm_a = 0.0
    norm_b = 0.0
    for x, y in zip(a, b):
        dot += x * y
        norm_a += x * x
        norm_b += y * y
    if norm_a == 0.0 or norm_b == 0.0:
        return None
    return dot / math.sqrt(norm_a) / math.sqrt(norm_b)


def angle_degrees(a: Sequence[float], b: Sequence[float]) -> float | None:
    """Angle in degrees; identical/antipodal inputs short-circuit so that
    angle(v, v) is exactly 0 and angle(v, -v) exactly 180 despite float
    rounding inside acos."""
    cos = cosine_similarity(a, b)
    if cos is None:
        return None
    if len(a) == len(b):
        if all(x == y for x, y in zip(a, b)):
            return 0.0
        if all(x == -y for x, y in zip(a, b)):
            return 180.0
    return math.degrees(math.acos(max(-1.0, min(1.0, cos))))


@dataclass
class AngleStats:
    angles: list[float]
    mean: float
    histogram: list[int]
    bin_width: float
    excluded_zero_norm: int


def angle_stats(
    pairs: Iterable[tuple[TruncatedEmbedding, TruncatedEmbedding]],
    bins: int = 18,
) -> AngleStats:
    """Angular difference (degrees, in [0, 180]) between gold and predicted
    truncated embeddings; zero-norm vectors are excluded but counted."""
    angles: list[float] = []
    excluded = 0
    for gold, predicted in pairs:
        angle = angle_degrees(gold.values, predicted.values)
        if angle is None:
            excluded += 1
        else:
            angles.append(angle)
    width = 180.0 / bins
    histogram = [0] * bins
    for angle in angles:
        histogram[min(bins - 1, int(angle / width))] += 1
    mean = sum(angles) / len(angles) if angles else 0.0
    return AngleStats(angles, mean, histogram, width, excluded)


@dataclass
class EpochSimilarity:
    epoch: str
    mean_cosine: float
    mean_dot: float
    pairs: int
    missing_gold: int
    parse_failures: int
    zero_norm: int


def _slot_embeddings(query: SkeletonQuery) -> list[TruncatedEmbedding]:
    return [slot.trunc_embedding for slot in query.entity_slots
            if slot.trunc_embedding is not None]


def similarity_curves(
    epochs: Sequence[tuple[str, Sequence]],
    gold_skeletons: Mapping[str, str],
    config: TruncationConfig = TruncationConfig(),
) -> list[EpochSimilarity]:
    """Per-epoch mean cosine and dot between generated and gold truncated
    embeddings.

    `epochs` holds (epoch label, beam entries); only the first beam of each
    entry is used. Entries without a gold skeleton are skipped and counted.
    """
    out = []
    for epoch_label, entries in epochs:
        cosines: list[float] = []
        dots: list[float] = []
        missing_gold = 0
        parse_failures = 0
        zero_norm = 0
        for entry in entries:
            gold_text = gold_skeletons.get(entry.qid)
            if gold_text is None:
                missing_gold += 1
                continue
            if not entry.beams:
                parse_failures += 1
                continue
            try:
                predicted = parse_skeleton(entry.beams[0], config)
                gold = parse_skeleton(gold_text, config)
            except SkeletonParseError:
                parse_failures += 1
                continue
            for gold_emb, pred_emb in zip(_slot_embeddings(gold), _slot_embeddings(predicted)):
                product = 0.0
                for x, y in zip(gold_emb.values, pred_emb.values):
                    product += x * y
                dots.append(product)
                cos = cosine_similarity(gold_emb.values, pred_emb.values)
                if cos is None:
                    zero_norm += 1
                else:
                    cosines.append(cos)
        out.append(EpochSimilarity(
            epoch=epoch_label,
            mean_cosine=sum(cosines) / len(cosines) if cosines else 0.0,
            mean_dot=sum(dots) / len(dots) if dots else 0.0,
            pairs=len(dots),
            missing_gold=missing_gold,
            parse_failures=parse_failures,
            zero_norm=zero_norm,
        ))
    return out


def curves_to_csv(curves: Sequence[EpochSimilarity]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["epoch", "mean_cosine", "mean_dot", "pairs",
                     "missing_gold", "parse_failures", "zero_norm"])
    for row in curves:
        writer.writerow([row.epoch, f"{row.mean_cosine:.6f}", f"{row.mean_dot:.6f}",
                         row.pairs, row.missing_gold, row.parse_failures, row.zero_norm])
    return buffer.getvalue()
