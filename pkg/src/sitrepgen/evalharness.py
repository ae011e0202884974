"""Evaluation harness: annotator agreement, metrics and confidence bounds.

Human annotations arrive as flat records (task, item, annotator, label).
The harness computes:

* inter-annotator agreement — raw percent agreement, Cohen's kappa
  (chance-corrected via both annotators' marginals), and the
  prevalence-and-bias-adjusted kappa (PABAK), whose binary form is
  ``2 * p_o - 1``;
* precision / recall / F1 of a judge against resolved gold labels, with
  the usual conventions for degenerate denominators (score 0 plus a
  warning rather than an error);
* support-share breakdowns for citation precision and recall on a
  three-point scale (fully / partially / does not support), where a
  single-citation claim's recall label is by definition its citation's
  precision label;
* percentile-bootstrap confidence intervals (seeded, resampling the
  items with replacement);
* an LLM relevance judgment per answer with a strict binary protocol.

Disagreements between annotators are resolved by a seeded uniform draw
among the submitted labels, so gold sets are reproducible.
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .answers import Answer
from .errors import ContractError
from .prompts import render_prompt
from .providers import ChatProvider, ChatRequest
from .questions import Question, derive_seed

logger = logging.getLogger(__name__)

#: Default bootstrap settings.
DEFAULT_RESAMPLES = 1000
DEFAULT_LEVEL = 0.95

_WORD_RE = re.compile(r"[a-z]+")


class SupportLabel(str, Enum):
    """Three-point support scale for citation annotations."""

    FULLY = "fully"
    PARTIALLY = "partially"
    NONE = "none"


@dataclass(frozen=True)
class AnnotationRecord:
    """One label from one annotator for one item of one task."""

    task: str
    item_id: str
    annotator_id: str
    label: str

    def __post_init__(self) -> None:
        for name in ("task", "item_id", "annotator_id", "label"):
            if not getattr(self, name):
                raise ContractError(f"annotation record field {name} must be non-empty")


@dataclass(frozen=True)
class AgreementStats:
    """Agreement between two annotators on aligned items.

    ``pabak`` is present only when the observed label set is binary; the
    k-category extension is available explicitly via :func:`pabak_k`.
    """

    n_items: int
    percent_agreement: float
    kappa: float
    pabak: float | None


@dataclass(frozen=True)
class MetricWithCI:
    """A point estimate with a percentile-bootstrap confidence interval."""

    point: float
    ci_low: float
    ci_high: float
    level: float
    n_resamples: int
    seed: int

    def __post_init__(self) -> None:
        if not self.ci_low <= self.ci_high:
            raise ContractError(f"interval [{self.ci_low}, {self.ci_high}] is reversed")


class PrecisionRecallF1(NamedTuple):
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ClaimCitationAnnotation:
    """Support labels for one claim's citations.

    ``citation_labels`` holds one precision label per citation, in
    citation order.  ``recall_label`` says whether the citation set as a
    whole supports the claim; for single-citation claims it is defined to
    equal the lone precision label and may be omitted.
    """

    claim_id: str
    citation_labels: tuple[SupportLabel, ...]
    recall_label: SupportLabel | None = None


@dataclass(frozen=True)
class ShareBreakdown:
    """Fractions per support level; they sum to one."""

    fully: float
    partially: float
    none: float

    def __post_init__(self) -> None:
        total = self.fully + self.partially + self.none
        if abs(total - 1.0) > 1e-12:
            raise ContractError(f"support shares sum to {total!r}, not 1")
        for name in ("fully", "partially", "none"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ContractError(f"share {name}={value} outside [0, 1]")


@dataclass(frozen=True)
class CitationSupportReport:
    precision: ShareBreakdown
    recall: ShareBreakdown
    n_citations: int
    n_claims: int


def _check_aligned(a: Sequence, b: Sequence) -> int:
    if len(a) != len(b):
        raise ContractError(f"label sequences differ in length: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise ContractError("agreement needs at least one item")
    return len(a)


def percent_agreement(a: Sequence, b: Sequence) -> float:
    """Fraction of aligned items with identical labels."""
    n = _check_aligned(a, b)
    return sum(1 for x, y in zip(a, b) if x == y) / n


def cohens_kappa(a: Sequence, b: Sequence) -> float:
    """Chance-corrected agreement using both annotators' marginals.

    ``kappa = (p_o - p_e) / (1 - p_e)`` with ``p_e`` the dot product of the
    two annotators' label distributions.  When chance agreement is total
    (``p_e == 1``, both annotators constant and identical) observed
    agreement is total too; that degenerate case is reported as 1 with a
    warning rather than dividing by zero.
    """
    n = _check_aligned(a, b)
    p_o = percent_agreement(a, b)
    categories = set(a) | set(b)
    p_e = sum(
        (sum(1 for x in a if x == c) / n) * (sum(1 for y in b if y == c) / n)
        for c in categories
    )
    if abs(1.0 - p_e) < 1e-15:
        logger.warning("kappa degenerate: chance agreement is 1; reporting 1.0")
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def pabak(a: Sequence, b: Sequence) -> float:
    """Prevalence-and-bias-adjusted kappa, binary form ``2 * p_o - 1``."""
    _check_aligned(a, b)
    distinct = set(a) | set(b)
    if len(distinct) > 2:
        raise ContractError(
            f"pabak is binary; got {len(distinct)} labels — use pabak_k for more"
        )
    return 2.0 * percent_agreement(a, b) - 1.0


def pabak_k(a: Sequence, b: Sequence, k: int | None = None) -> float:
    """k-category PABAK: ``(k * p_o - 1) / (k - 1)``.

    ``k`` defaults to the number of distinct labels observed across both
    annotators and must be at least 2.
    """
    _check_aligned(a, b)
    if k is None:
        k = len(set(a) | set(b))
    if k < 2:
        raise ContractError(f"k={k} categories; the adjustment needs k >= 2")
    return (k * percent_agreement(a, b) - 1.0) / (k - 1.0)


def agreement_stats(a: Sequence, b: Sequence) -> AgreementStats:
    """Bundle percent agreement, kappa and (when binary) PABAK."""
    n = _check_aligned(a, b)
    binary = len(set(a) | set(b)) <= 2
    return AgreementStats(
        n_items=n,
        percent_agreement=percent_agreement(a, b),
        kappa=cohens_kappa(a, b),
        pabak=pabak(a, b) if binary else None,
    )


def precision_recall_f1(predicted: Sequence[bool], gold: Sequence[bool]) -> PrecisionRecallF1:
    """Binary precision/recall/F1 of ``predicted`` against ``gold``.

    Degenerate denominators (no positive predictions, no positive gold,
    or both precision and recall zero) score 0 with a warning.
    """
    _check_aligned(predicted, gold)
    tp = sum(1 for p, g in zip(predicted, gold) if p and g)
    fp = sum(1 for p, g in zip(predicted, gold) if p and not g)
    fn = sum(1 for p, g in zip(predicted, gold) if not p and g)
    if tp + fp == 0:
        logger.warning("precision undefined (no positive predictions); reporting 0")
        precision = 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        logger.warning("recall undefined (no positive gold items); reporting 0")
        recall = 0.0
    else:
        recall = tp / (tp + fn)
    return PrecisionRecallF1(precision, recall, f1_from_precision_recall(precision, recall))


def f1_from_precision_recall(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall (0 when both are 0)."""
    for name, value in (("precision", precision), ("recall", recall)):
        if not 0.0 <= value <= 1.0:
            raise ContractError(f"{name} {value} outside [0, 1]")
    if precision + recall == 0.0:
        logger.warning("F1 undefined (precision and recall both 0); reporting 0")
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _shares(labels: Sequence[SupportLabel]) -> ShareBreakdown:
    total = len(labels)
    counts = {level: 0 for level in SupportLabel}
    for label in labels:
        counts[label] += 1
    return ShareBreakdown(
        fully=counts[SupportLabel.FULLY] / total,
        partially=counts[SupportLabel.PARTIALLY] / total,
        none=counts[SupportLabel.NONE] / total,
    )


def citation_metrics(annotations: Sequence[ClaimCitationAnnotation]) -> CitationSupportReport:
    """Support-share breakdowns for citation precision and claim recall.

    Precision shares are over every individual citation; recall shares are
    over claims, with single-citation claims inheriting their citation's
    precision label.  Claims without citations cannot be annotated here
    and are reported as errors, as are multi-citation claims missing a
    recall label or singletons whose explicit recall label contradicts the
    derived one.
    """
    if not annotations:
        raise ContractError("citation metrics need at least one annotated claim")
    problems: list[str] = []
    precision_labels: list[SupportLabel] = []
    recall_labels: list[SupportLabel] = []
    for annotation in annotations:
        if not annotation.citation_labels:
            problems.append(f"claim {annotation.claim_id}: no citation labels")
            continue
        precision_labels.extend(annotation.citation_labels)
        if len(annotation.citation_labels) == 1:
            derived = annotation.citation_labels[0]
            if annotation.recall_label is not None and annotation.recall_label != derived:
                problems.append(
                    f"claim {annotation.claim_id}: singleton recall label "
                    f"{annotation.recall_label.value} contradicts derived {derived.value}"
                )
                continue
            recall_labels.append(derived)
        else:
            if annotation.recall_label is None:
                problems.append(f"claim {annotation.claim_id}: missing recall label")
                continue
            recall_labels.append(annotation.recall_label)
    if problems:
        raise ContractError(
            f"{len(problems)} invalid claim annotation(s):\n  " + "\n  ".join(problems)
        )
    return CitationSupportReport(
        precision=_shares(precision_labels),
        recall=_shares(recall_labels),
        n_citations=len(precision_labels),
        n_claims=len(recall_labels),
    )


def bootstrap_ci(
    statistic: Callable[[Sequence], float],
    data: Sequence,
    n_resamples: int = DEFAULT_RESAMPLES,
    level: float = DEFAULT_LEVEL,
    seed: int = 0,
) -> MetricWithCI:
    """Percentile bootstrap for ``statistic`` over ``data``.

    The point estimate is the statistic of the full sample; the interval
    endpoints are the ``(1 - level) / 2`` and ``(1 + level) / 2``
    percentiles of the statistic over ``n_resamples`` seeded resamples
    (drawn with replacement, same size as the data).
    """
    if len(data) == 0:
        raise ContractError("bootstrap needs a non-empty sample")
    if not 0.0 < level < 1.0:
        raise ContractError(f"confidence level {level} outside (0, 1)")
    if n_resamples < 1:
        raise ContractError("n_resamples must be >= 1")
    items = list(data)
    n = len(items)
    rng = np.random.default_rng(seed)
    stats = np.empty(n_resamples, dtype=float)
    for i in range(n_resamples):
        indices = rng.integers(0, n, size=n)
        stats[i] = statistic([items[j] for j in indices])
    low_pct = 100.0 * (1.0 - level) / 2.0
    low, high = np.percentile(stats, [low_pct, 100.0 - low_pct])
    return MetricWithCI(
        point=float(statistic(items)),
        ci_low=float(low),
        ci_high=float(high),
        level=level,
        n_resamples=n_resamples,
        seed=seed,
    )


def resolve_disagreements(
    records: Iterable[AnnotationRecord],
    seed: int = 0,
) -> dict[str, str]:
    """Resolve per-item gold labels from multiple annotators.

    Unanimous items keep their label.  Where annotators disagree, one of
    the submitted labels is drawn uniformly (a seeded draw keyed by task
    and item, so resolution does not depend on record order).
    """
    by_item: dict[str, list[AnnotationRecord]] = {}
    task: str | None = None
    for record in records:
        if task is None:
            task = record.task
        elif record.task != task:
            raise ContractError(
                f"records span tasks {task!r} and {record.task!r}; resolve one task at a time"
            )
        by_item.setdefault(record.item_id, []).append(record)
    if not by_item:
        raise ContractError("no annotation records to resolve")
    gold: dict[str, str] = {}
    for item_id, item_records in by_item.items():
        labels = [r.label for r in sorted(item_records, key=lambda r: r.annotator_id)]
        if len(set(labels)) == 1:
            gold[item_id] = labels[0]
        else:
            rng = random.Random(derive_seed(seed, "gold", task, item_id))
            gold[item_id] = rng.choice(labels)
    return gold


def judge_answer_relevance(
    question: Question,
    answer: Answer,
    chat: ChatProvider,
) -> bool | None:
    """Strict binary relevance judgment, stored on the answer.

    The judge must reply with exactly the verdict — ``relevant``,
    ``irrelevant`` or ``not relevant``; anything else is retried once
    and then left unjudged (``None``) with a warning.
    """
    prompt = render_prompt("relevance_judge", question=question.text, answer=answer.raw_text)
    verdict: bool | None = None
    for attempt in range(2):
        reply = chat.chat(ChatRequest(prompt=prompt, temperature=0.0, seed=attempt))
        words = _WORD_RE.findall(reply.lower())
        if words == ["relevant"]:
            verdict = True
            break
        if words in (["irrelevant"], ["not", "relevant"]):
            verdict = False
            break
        logger.warning(
            "relevance judge attempt %d for %s was ambiguous: %r",
            attempt + 1, answer.question_id, reply[:60],
        )
    if verdict is None:
        logger.warning("answer %s left unjudged", answer.question_id)
    answer.relevant = verdict
    return verdict


def mean_metric_with_ci(
    values: Sequence[float],
    n_resamples: int = DEFAULT_RESAMPLES,
    level: float = DEFAULT_LEVEL,
    seed: int = 0,
) -> MetricWithCI:
    """Bootstrap CI for a plain mean (the common case for shares)."""
    return bootstrap_ci(
        lambda sample: float(np.mean(np.asarray(sample, dtype=float))),
        values,
        n_resamples=n_resamples,
        level=level,
        seed=seed,
    )
