"""Text-generation metrics and run-level analysis.

All metrics share one tokenizer (lowercase, punctuation split, CJK per
character) so they stay mutually consistent across English and Chinese
responses. Sentence BLEU, token F1, Rouge-L, and distinct-n live in [0, 1];
corpus BLEU is reported on the usual 0–100 scale; the report table puts the
per-sample metrics on 0–100 as well, matching how such results are
conventionally displayed.

Averaged BLEU is sentence-averaged: each sample's BLEU-1..4 are averaged,
then averaged across the corpus. Corpus BLEU follows the common corpus-level
BLEU-4 with exponential smoothing for zero counts. BERTScore is deliberately
absent (needs pretrained embeddings); its column is simply not produced.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Sequence

from conductor.core import Evidence, RunRecord, SchemaKind
from conductor.errors import EmptyCandidate, LengthMismatch
from conductor.plangrammar import StrategyPlanStep
from conductor.retrieval import tokenize

Tokens = Sequence[str]


def _as_tokens(value: str | Tokens) -> list[str]:
    return tokenize(value) if isinstance(value, str) else list(value)


def _ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


# ---------------------------------------------------------------------------
# BLEU


def modified_ngram_precision(
    candidate_tokens: Tokens, reference_tokens: Tokens, n: int
) -> tuple[int, int]:
    """Clipped n-gram matches and total candidate n-grams."""
    if n < 1:
        raise ValueError("n must be >= 1")
    total = max(0, len(candidate_tokens) - n + 1)
    if total == 0:
        return 0, 0
    cand_counts = _ngrams(candidate_tokens, n)
    ref_counts = _ngrams(reference_tokens, n)
    clipped = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    return clipped, total


def _max_clipped(candidate_tokens: Tokens, references: list[list[str]], n: int) -> tuple[int, int]:
    """Clip against the per-gram maximum over all references."""
    total = max(0, len(candidate_tokens) - n + 1)
    if total == 0:
        return 0, 0
    cand_counts = _ngrams(candidate_tokens, n)
    clipped = 0
    for gram, count in cand_counts.items():
        best = max((_ngrams(ref, n)[gram] for ref in references), default=0)
        clipped += min(count, best)
    return clipped, total


def _closest_ref_len(cand_len: int, references: list[list[str]]) -> int:
    # closest reference length; ties prefer the shorter reference
    return min((abs(len(r) - cand_len), len(r)) for r in references)[1]


def brevity_penalty(ref_len: int, cand_len: int) -> float:
    if cand_len == 0:
        return 0.0
    return min(1.0, math.exp(1.0 - ref_len / cand_len))


def sentence_bleu_n(
    candidate: str | Tokens,
    references: Iterable[str | Tokens],
    n: int,
    smoothing: bool = True,
) -> float:
    """BLEU-n: geometric mean of clipped precisions 1..n times brevity penalty.

    With smoothing on, orders with zero clipped matches use add-one in both
    numerator and denominator; with it off, any zero precision zeroes the
    score.
    """
    if not 1 <= n <= 4:
        raise ValueError("n must be in 1..4")
    cand = _as_tokens(candidate)
    refs = [_as_tokens(r) for r in references]
    if not cand:
        raise EmptyCandidate("candidate has no tokens")
    if not refs:
        raise LengthMismatch("need at least one reference")

    log_sum = 0.0
    for order in range(1, n + 1):
        clipped, total = _max_clipped(cand, refs, order)
        if clipped > 0:
            precision = clipped / total
        elif smoothing:
            precision = (clipped + 1) / (total + 1)
        else:
            return 0.0
        log_sum += math.log(precision)
    bp = brevity_penalty(_closest_ref_len(len(cand), refs), len(cand))
    return bp * math.exp(log_sum / n)


def avg_bleu(
    candidates: Sequence[str | Tokens], references: Sequence[str | Tokens]
) -> float:
    """Mean over samples of smoothed BLEU-n, then mean over n in 1..4.

    A candidate with no tokens contributes 0 (failed samples stay in the
    denominator instead of crashing the batch).
    """
    per_sample = per_sample_avg_bleu(candidates, references)
    return sum(per_sample) / len(per_sample)


def per_sample_avg_bleu(
    candidates: Sequence[str | Tokens], references: Sequence[str | Tokens]
) -> list[float]:
    if len(candidates) != len(references):
        raise LengthMismatch(
            f"{len(candidates)} candidates vs {len(references)} references"
        )
    if not candidates:
        raise LengthMismatch("empty corpus")
    values = []
    for cand, ref in zip(candidates, references):
        cand_tokens = _as_tokens(cand)
        if not cand_tokens:
            values.append(0.0)
            continue
        values.append(
            sum(
                sentence_bleu_n(cand_tokens, [ref], n, smoothing=True)
                for n in range(1, 5)
            )
            / 4.0
        )
    return values


def corpus_bleu(
    candidates: Sequence[str | Tokens], references: Sequence[str | Tokens]
) -> float:
    """Corpus-level BLEU-4 on the 0–100 scale.

    Clipped matches and totals accumulate over the corpus per order; zero
    counts get exponential smoothing (1 / (2^j * total)); the brevity penalty
    uses corpus-summed lengths. Orders the corpus is too short to populate
    are dropped from the geometric mean (the usual effective-order rule), so
    identical corpora score 100 regardless of length.
    """
    if len(candidates) != len(references):
        raise LengthMismatch(
            f"{len(candidates)} candidates vs {len(references)} references"
        )
    if not candidates:
        raise LengthMismatch("empty corpus")
    clipped_totals = [0] * 4
    totals = [0] * 4
    cand_len_sum = 0
    ref_len_sum = 0
    for cand, ref in zip(candidates, references):
        cand_tokens = _as_tokens(cand)
        ref_tokens = _as_tokens(ref)
        cand_len_sum += len(cand_tokens)
        ref_len_sum += len(ref_tokens)
        for order in range(1, 5):
            clipped, total = modified_ngram_precision(cand_tokens, ref_tokens, order)
            clipped_totals[order - 1] += clipped
            totals[order - 1] += total

    smooth = 1.0
    log_sum = 0.0
    effective_orders = 0
    for order in range(4):
        if totals[order] == 0:
            break
        if clipped_totals[order] > 0:
            precision = clipped_totals[order] / totals[order]
        else:
            smooth *= 2.0
            precision = 1.0 / (smooth * totals[order])
        log_sum += math.log(precision)
        effective_orders += 1
    if effective_orders == 0:
        return 0.0
    bp = brevity_penalty(ref_len_sum, cand_len_sum)
    return 100.0 * bp * math.exp(log_sum / effective_orders)


# ---------------------------------------------------------------------------
# Token F1 / Rouge-L / distinct-n


def token_f1(candidate: str | Tokens, reference: str | Tokens) -> float:
    """Multiset-overlap F1 over normalized tokens; 0 when either side is empty."""
    cand = Counter(_as_tokens(candidate))
    ref = Counter(_as_tokens(reference))
    if not cand or not ref:
        return 0.0
    overlap = sum((cand & ref).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(cand.values())
    recall = overlap / sum(ref.values())
    return 2 * precision * recall / (precision + recall)


def _lcs_length(a: Tokens, b: Tokens) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for item_a in a:
        curr = [0]
        for j, item_b in enumerate(b, start=1):
            if item_a == item_b:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def rouge_l(candidate: str | Tokens, reference: str | Tokens, beta: float = 1.0) -> float:
    """LCS-based Rouge-L F-measure; beta weights recall (beta=1 is balanced)."""
    cand = _as_tokens(candidate)
    ref = _as_tokens(reference)
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    beta_sq = beta * beta
    return (1 + beta_sq) * precision * recall / (recall + beta_sq * precision)


def distinct_n(candidates: Sequence[str | Tokens], n: int) -> float:
    """Corpus-level distinct n-grams over total n-grams across all candidates."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seen: set[tuple[str, ...]] = set()
    total = 0
    for cand in candidates:
        tokens = _as_tokens(cand)
        for i in range(len(tokens) - n + 1):
            seen.add(tuple(tokens[i : i + n]))
            total += 1
    if total == 0:
        return 0.0
    return len(seen) / total


# ---------------------------------------------------------------------------
# Run analysis


def strategy_label(names: Iterable[str]) -> str:
    return " ".join(names)


def strategy_distribution(records: Iterable[RunRecord]) -> dict[str, float]:
    """Histogram of ordered strategy sequences across records.

    Each record's label is the space-joined strategy names of its parsed
    plan, multiplicity intact ("Hint Question Hint"). Invented names survive
    verbatim. Records without a parsed strategy plan are skipped.
    """
    counts: Counter = Counter()
    for record in records:
        plan = record.parsed_plan
        if not isinstance(plan, (list, tuple)) or not plan:
            continue
        if not all(isinstance(step, StrategyPlanStep) for step in plan):
            continue
        counts[strategy_label(step.strategy_name for step in plan)] += 1
    total = sum(counts.values())
    if total == 0:
        return {}
    return {label: count / total for label, count in counts.items()}


def retrieval_accuracy(
    records: Iterable[RunRecord],
    gold_persona_sets: dict[str, Sequence[str]],
    gold_document_sets: dict[str, Sequence[str]],
) -> tuple[int, int]:
    """Count retrieved passages that exactly equal a gold candidate string.

    Every passage of every evidence binding is checked against its sample's
    gold persona and gold document strings; counts sum over the corpus.
    """
    correct_persona = 0
    correct_document = 0
    for record in records:
        golds_p = set(gold_persona_sets.get(record.sample_id, ()))
        golds_d = set(gold_document_sets.get(record.sample_id, ()))
        for _, value in record.evidence.items():
            if not isinstance(value, Evidence):
                continue
            for _, text, _ in value.passages:
                if text in golds_p:
                    correct_persona += 1
                if text in golds_d:
                    correct_document += 1
    return correct_persona, correct_document


# Metric panels per dataset, in display order.
PANELS: dict[SchemaKind, tuple[str, ...]] = {
    SchemaKind.FOCUS: ("Avg.B", "F1", "Rouge.L"),
    SchemaKind.CIMA: ("sBLEU", "F1"),
    SchemaKind.PSYQA: ("Avg.B", "F1", "D-1"),
}


@dataclass(frozen=True)
class EvalConfig:
    kind: SchemaKind
    method: str = ""
    rouge_beta: float = 1.0
    gold_persona_sets: dict[str, Sequence[str]] | None = None
    gold_document_sets: dict[str, Sequence[str]] | None = None


@dataclass
class MetricReport:
    kind: SchemaKind
    method: str
    n_samples: int
    n_failures: int
    per_sample: dict[str, list[float]]
    aggregates: dict[str, float]
    total_cost: Decimal
    strategy_histogram: dict[str, float] = field(default_factory=dict)
    retrieval_counts: tuple[int, int] | None = None

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind.value,
            "method": self.method,
            "n_samples": self.n_samples,
            "n_failures": self.n_failures,
            "aggregates": {k: round(v, 4) for k, v in self.aggregates.items()},
            "per_sample": {
                k: [round(v, 6) for v in vs] for k, vs in self.per_sample.items()
            },
            "strategy_histogram": {
                k: round(v, 6) for k, v in self.strategy_histogram.items()
            },
            "retrieval_counts": (
                list(self.retrieval_counts) if self.retrieval_counts else None
            ),
            "total_cost_usd": str(self.total_cost),
        }

    def to_table(self) -> str:
        """Human-readable aligned summary table."""
        headers = ["Method", "#Samples"] + list(self.aggregates) + ["Cost"]
        row = [
            self.method or "-",
            str(self.n_samples),
            *(f"{self.aggregates[name]:.2f}" for name in self.aggregates),
            str(self.total_cost),
        ]
        widths = [max(len(h), len(v)) for h, v in zip(headers, row)]
        header_line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
        value_line = "  ".join(v.ljust(w) for v, w in zip(row, widths))
        rule = "-" * len(header_line)
        return "\n".join([header_line, rule, value_line])


def score_run(
    records: Sequence[RunRecord],
    references: Sequence[tuple[str, str]],
    config: EvalConfig,
) -> MetricReport:
    """Compute the dataset's metric panel over aligned (id, gold) references."""
    if len(records) != len(references):
        raise LengthMismatch(f"{len(records)} records vs {len(references)} references")
    if not records:
        raise LengthMismatch("empty corpus")
    for record, (ref_id, _) in zip(records, references):
        if record.sample_id != ref_id:
            raise LengthMismatch(
                f"record {record.sample_id!r} does not align with reference {ref_id!r}"
            )

    candidates = [record.response for record in records]
    golds = [text for _, text in references]
    panel = PANELS[config.kind]

    per_sample: dict[str, list[float]] = {}
    aggregates: dict[str, float] = {}
    for name in panel:
        if name == "Avg.B":
            values = per_sample_avg_bleu(candidates, golds)
            per_sample[name] = values
            aggregates[name] = 100.0 * sum(values) / len(values)
        elif name == "F1":
            values = [token_f1(c, g) for c, g in zip(candidates, golds)]
            per_sample[name] = values
            aggregates[name] = 100.0 * sum(values) / len(values)
        elif name == "Rouge.L":
            values = [
                rouge_l(c, g, beta=config.rouge_beta)
                for c, g in zip(candidates, golds)
            ]
            per_sample[name] = values
            aggregates[name] = 100.0 * sum(values) / len(values)
        elif name == "sBLEU":
            aggregates[name] = corpus_bleu(candidates, golds)
        elif name == "D-1":
            aggregates[name] = 100.0 * distinct_n(candidates, 1)

    histogram = (
        strategy_distribution(records) if config.kind != SchemaKind.FOCUS else {}
    )
    counts = None
    if config.gold_persona_sets is not None or config.gold_document_sets is not None:
        counts = retrieval_accuracy(
            records,
            config.gold_persona_sets or {},
            config.gold_document_sets or {},
        )

    total_cost = Decimal("0.000000")
    for record in records:
        total_cost += record.cost_usd

    return MetricReport(
        kind=config.kind,
        method=config.method or (records[0].method if records else ""),
        n_samples=len(records),
        n_failures=sum(1 for r in records if r.error is not None),
        per_sample=per_sample,
        aggregates=aggregates,
        total_cost=total_cost,
        strategy_histogram=histogram,
        retrieval_counts=counts,
    )
