"""Post-hoc citation correction for generated answers.

Generated citations are checked claim by claim against the passages the
answer actually saw.  Each (claim, passage) pair gets a match score

    score = lambda_weight * jaccard(claim_tokens, passage_tokens)
            + (1 - lambda_weight) * cosine(question_embedding, passage_embedding)

mixing lexical overlap between the claim and the passage with semantic
closeness between the *question* and the passage.  The best-scoring
passage decides the outcome:

* best score >= threshold and the best passage is among the claim's valid
  original citations -> **confirmed** (the claim keeps its valid original
  set; multi-citation claims survive intact);
* best score >= threshold otherwise -> **replaced** when the claim had
  citations, **added** when it had none — the claim now cites exactly the
  best passage;
* best score < threshold -> **removed**: all citations are dropped and
  the claim is flagged unsupported.

Out-of-range citation numbers never survive: they are either superseded
by the best passage or dropped with the rest.  Claim text is never
modified.  Every decision is returned as a :class:`CorrectionRecord` so
reports can audit what changed and why.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .answers import Answer
from .errors import ContractError
from .ingest import Paragraph
from .providers import EmbeddingVector

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class CorrectionAction(str, Enum):
    CONFIRMED = "confirmed"
    REPLACED = "replaced"
    REMOVED = "removed"
    ADDED = "added"


@dataclass(frozen=True)
class CorrectionConfig:
    """Weights for citation correction.

    ``lambda_weight`` balances lexical overlap against semantic closeness;
    ``threshold`` is the minimum best score for a claim to keep any
    citation at all.
    """

    lambda_weight: float = 0.8
    threshold: float = 0.3

    def __post_init__(self) -> None:
        if not 0.0 <= self.lambda_weight <= 1.0:
            raise ContractError(f"lambda_weight {self.lambda_weight} outside [0, 1]")
        if not 0.0 <= self.threshold <= 1.0:
            raise ContractError(f"threshold {self.threshold} outside [0, 1]")


@dataclass(frozen=True)
class CorrectionRecord:
    """Audit entry for one claim's citation decision."""

    claim_index: int
    original_citations: tuple[int, ...]
    corrected_citations: tuple[int, ...]
    best_score: float
    best_passage: int
    action: CorrectionAction

    def __post_init__(self) -> None:
        if self.action is CorrectionAction.REMOVED and self.corrected_citations:
            raise ContractError("a removed claim cannot keep citations")
        if self.action is not CorrectionAction.REMOVED and not self.corrected_citations:
            raise ContractError(f"action {self.action.value} requires citations")


def tokenize(text: str) -> set[str]:
    """Lowercased alphanumeric token set."""
    return set(_TOKEN_RE.findall(text.lower()))


def jaccard(text_a: str, text_b: str) -> float:
    """Token-set Jaccard similarity.

    Two empty token sets count as identical (1.0); exactly one empty set
    shares nothing (0.0).
    """
    tokens_a, tokens_b = tokenize(text_a), tokenize(text_b)
    if not tokens_a and not tokens_b:
        return 1.0
    if not tokens_a or not tokens_b:
        return 0.0
    return len(tokens_a & tokens_b) / len(tokens_a | tokens_b)


def cosine(vector_a: np.ndarray, vector_b: np.ndarray) -> float:
    a = np.asarray(vector_a, dtype=float).reshape(-1)
    b = np.asarray(vector_b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ContractError(f"cosine dims differ: {a.shape[0]} vs {b.shape[0]}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ContractError("cosine is undefined for zero vectors")
    return float(np.dot(a, b) / (norm_a * norm_b))


def claim_doc_score(
    claim_text: str,
    passage_text: str,
    query_embedding: EmbeddingVector | np.ndarray,
    passage_embedding: EmbeddingVector | np.ndarray,
    config: CorrectionConfig,
) -> float:
    """Blend of claim/passage lexical overlap and query/passage closeness."""
    query_vec = (
        query_embedding.as_array()
        if isinstance(query_embedding, EmbeddingVector)
        else np.asarray(query_embedding, dtype=float)
    )
    passage_vec = (
        passage_embedding.as_array()
        if isinstance(passage_embedding, EmbeddingVector)
        else np.asarray(passage_embedding, dtype=float)
    )
    lexical = jaccard(claim_text, passage_text)
    semantic = cosine(query_vec, passage_vec)
    return config.lambda_weight * lexical + (1.0 - config.lambda_weight) * semantic


def correct_citations(
    answer: Answer,
    passages: Sequence[Paragraph],
    query_embedding: EmbeddingVector | np.ndarray,
    passage_embeddings: Sequence[EmbeddingVector | np.ndarray],
    config: CorrectionConfig | None = None,
) -> tuple[Answer, list[CorrectionRecord]]:
    """Re-score every claim's citations against the answer's passages.

    ``passages`` and ``passage_embeddings`` are aligned with the answer's
    context in rank order (local citation number ``i`` is
    ``passages[i - 1]``).  The answer is updated in place — claims'
    ``citation_ids`` become the corrected sets and removed claims gain the
    ``unsupported`` flag — and returned with the per-claim audit records.
    Claim texts are never rewritten.
    """
    config = config or CorrectionConfig()
    if len(passages) != len(answer.passages):
        raise ContractError(
            f"{len(passages)} passages for an answer with {len(answer.passages)} context slots"
        )
    if len(passage_embeddings) != len(passages):
        raise ContractError(
            f"{len(passage_embeddings)} embeddings for {len(passages)} passages"
        )
    if not passages:
        raise ContractError("citation correction needs at least one passage")

    records: list[CorrectionRecord] = []
    m = len(passages)
    for index, claim in enumerate(answer.claims):
        scores = [
            claim_doc_score(claim.text, passages[j].text, query_embedding, passage_embeddings[j], config)
            for j in range(m)
        ]
        best_j = max(range(m), key=lambda j: (scores[j], -j))
        best_score = scores[best_j]
        best_number = best_j + 1
        original = claim.citation_ids
        valid_original = tuple(c for c in original if 1 <= c <= m)
        if math.isnan(best_score):
            raise ContractError(f"claim {index}: match score is NaN")
        if best_score >= config.threshold:
            if best_number in valid_original:
                action = CorrectionAction.CONFIRMED
                corrected = valid_original
            elif original:
                action = CorrectionAction.REPLACED
                corrected = (best_number,)
            else:
                action = CorrectionAction.ADDED
                corrected = (best_number,)
            claim.unsupported = False
        else:
            action = CorrectionAction.REMOVED
            corrected = ()
            claim.unsupported = True
            logger.warning(
                "claim %d unsupported: best score %.4f below threshold %.2f",
                index, best_score, config.threshold,
            )
        if action is CorrectionAction.CONFIRMED and set(corrected) != set(original):
            logger.warning(
                "claim %d: dropped out-of-range citation(s) %s",
                index, sorted(set(original) - set(corrected)),
            )
        claim.citation_ids = corrected
        records.append(
            CorrectionRecord(
                claim_index=index,
                original_citations=original,
                corrected_citations=corrected,
                best_score=best_score,
                best_passage=best_number,
                action=action,
            )
        )
    return answer, records


def correction_counts(records: Sequence[CorrectionRecord]) -> dict[str, int]:
    """Action histogram over correction records (for logs and metadata)."""
    counts = {action.value: 0 for action in CorrectionAction}
    for record in records:
        counts[record.action.value] += 1
    return counts
