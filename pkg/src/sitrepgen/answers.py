"""Question answering over the paragraph corpus with cited claims.

Answering a question is a small retrieval-augmented pipeline:

1. ``expand_query`` asks the chat model for paraphrases of the question so
   retrieval sees several phrasings (falling back to the original question
   alone if the model is unavailable).
2. ``retrieve`` ranks paragraphs for each phrasing against a
   :class:`RetrievalIndex` (dense dot-product by default, pluggable via
   the backend protocol).
3. ``rrf_fuse`` merges the per-phrasing rankings with reciprocal rank
   fusion: each paragraph scores ``sum(1 / (k + rank))`` over the rankings
   that contain it, ranks counted from 1.
4. ``generate_answer`` prompts the model with the top fused passages,
   numbered ``1..m``, and parses the reply into claims.

A *claim* is one sentence of the answer together with the passage numbers
it cites.  Citations are bracketed runs attached to the sentence
terminator — ``[3]``, ``[3][7]`` or ``[3, 7]``, before or after the final
punctuation.  Brackets elsewhere in a sentence are ordinary text.  Claims
keep their exact raw spans, so concatenating them reproduces the answer
text byte for byte.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from .errors import ContractError, ProviderError, StageError, TransportError
from .ingest import SENTENCE_ABBREVIATIONS, Paragraph
from .prompts import render_prompt
from .providers import ChatProvider, ChatRequest, EmbeddingProvider
from .questions import Question

logger = logging.getLogger(__name__)

#: Reciprocal-rank-fusion smoothing constant.
RRF_K = 60.0

#: Query phrasings used for retrieval (the original plus paraphrases).
DEFAULT_QUERY_VARIANTS = 4

#: Passages retrieved per phrasing before fusion.
DEFAULT_RETRIEVAL_DEPTH = 20

#: Fused passages shown to the answer generator.
DEFAULT_CONTEXT_SIZE = 8

#: Lowercase phrases marking an answer that the sources could not support.
LOW_CONFIDENCE_PHRASES = (
    "sources do not provide",
    "sources do not specify",
    "sources do not mention",
    "no information available",
    "not mentioned in the sources",
    "not stated in the sources",
)

_CITE_GROUP_RE = re.compile(r"\[\s*(\d+(?:\s*,\s*\d+)*)\s*\]")
_CITE_RUN = r"(?:\s*\[\s*\d+(?:\s*,\s*\d+)*\s*\])+"
_TERMINATOR_RE = re.compile(rf"(?P<pre>{_CITE_RUN})?(?P<punct>[.!?]+)(?P<post>{_CITE_RUN})?")
_TRAILING_RUN_RE = re.compile(rf"{_CITE_RUN}\s*$")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class RetrievedPassage:
    """One ranked retrieval hit (``rank`` counts from 1, no gaps)."""

    paragraph_id: str
    score: float
    rank: int

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ContractError(f"rank {self.rank} must be >= 1")


@dataclass
class Claim:
    """One answer sentence with the passage numbers it cites.

    ``raw_span`` is the exact slice of the answer text this claim came
    from (terminal citation markers and trailing whitespace included);
    the spans of an answer's claims concatenate back to the answer.
    ``citation_ids`` are answer-local passage numbers in order of
    appearance, deduplicated.  The boolean flags record generation-time
    problems: citations outside the passage range, or none at all.
    ``unsupported`` is set later when citation correction removes a
    claim's citations for lack of support.
    """

    text: str
    citation_ids: tuple[int, ...]
    raw_span: str
    out_of_range: bool = False
    uncited: bool = False
    unsupported: bool = False


@dataclass
class Answer:
    """A generated answer: the raw text, its claims and its context."""

    question_id: str
    raw_text: str
    claims: list[Claim]
    passages: tuple[RetrievedPassage, ...]
    low_confidence: bool = False
    relevant: bool | None = None


class RetrieverBackend(Protocol):
    """Ranks paragraphs for a query; scores must be non-increasing."""

    def rank(self, query: str, k: int) -> list[tuple[str, float]]: ...


class DenseRetrieverBackend:
    """Dot-product ranking over provider embeddings (the default backend).

    Ties break lexicographically by paragraph id so ranking is total and
    deterministic.
    """

    def __init__(self, paragraphs: Sequence[Paragraph], embedder: EmbeddingProvider) -> None:
        self._ids = [p.id for p in paragraphs]
        vectors = embedder.embed([p.text for p in paragraphs])
        self._matrix = np.vstack([v.as_array() for v in vectors])
        self._embedder = embedder

    def rank(self, query: str, k: int) -> list[tuple[str, float]]:
        query_vec = self._embedder.embed([query])[0].as_array()
        scores = self._matrix @ query_vec
        order = sorted(range(len(self._ids)), key=lambda i: (-scores[i], self._ids[i]))
        return [(self._ids[i], float(scores[i])) for i in order[:k]]


class RetrievalIndex:
    """An immutable paragraph index with a pluggable ranking backend."""

    def __init__(self, paragraphs: Sequence[Paragraph], backend: RetrieverBackend) -> None:
        if not paragraphs:
            raise ContractError("cannot index an empty paragraph list")
        ids = [p.id for p in paragraphs]
        if len(set(ids)) != len(ids):
            raise ContractError("paragraph ids must be unique")
        self._by_id = {p.id: p for p in paragraphs}
        self._ids = tuple(ids)
        self._backend = backend

    @property
    def paragraph_ids(self) -> tuple[str, ...]:
        return self._ids

    def paragraph(self, paragraph_id: str) -> Paragraph:
        try:
            return self._by_id[paragraph_id]
        except KeyError:
            raise ContractError(f"unknown paragraph id {paragraph_id!r}") from None

    def rank(self, query: str, k: int) -> list[tuple[str, float]]:
        return self._backend.rank(query, k)


def build_index(paragraphs: Sequence[Paragraph], embedder: EmbeddingProvider) -> RetrievalIndex:
    """Index every paragraph (noise-cluster paragraphs included)."""
    if not paragraphs:
        raise ContractError("cannot index an empty paragraph list")
    return RetrievalIndex(paragraphs, DenseRetrieverBackend(paragraphs, embedder))


def retrieve(index: RetrievalIndex, query: str, k: int) -> list[RetrievedPassage]:
    """Top-``k`` passages for ``query``: gapless ranks, non-increasing scores."""
    if not query.strip():
        raise ContractError("query must be non-empty")
    if k < 1:
        raise ContractError("k must be >= 1")
    ranked = index.rank(query, k)
    passages = [
        RetrievedPassage(paragraph_id=pid, score=score, rank=position)
        for position, (pid, score) in enumerate(ranked, start=1)
    ]
    for earlier, later in zip(passages, passages[1:]):
        if later.score > earlier.score:
            raise ContractError("retriever backend returned increasing scores")
    return passages


def expand_query(
    question_text: str,
    chat: ChatProvider,
    n_variants: int = DEFAULT_QUERY_VARIANTS,
    seed: int = 0,
) -> list[str]:
    """The question plus up to ``n_variants - 1`` model paraphrases.

    The original question always comes first.  Paraphrases that fail to
    parse or duplicate an earlier phrasing are dropped.  If the chat
    provider fails, retrieval proceeds on the original question alone.
    """
    if not question_text.strip():
        raise ContractError("question text must be non-empty")
    if n_variants < 1:
        raise ContractError("n_variants must be >= 1")
    variants = [question_text]
    if n_variants == 1:
        return variants
    prompt = render_prompt("query_expansion", n_variants=n_variants - 1, question=question_text)
    try:
        reply = chat.chat(ChatRequest(prompt=prompt, seed=seed))
    except (ProviderError, TransportError) as exc:
        logger.warning("query expansion failed (%s); retrieving with the question only", exc)
        return variants
    seen = {question_text.strip().lower()}
    for line in reply.splitlines():
        text = re.sub(r"^\s*(?:[-*•]|\(?\d+[.)])\s*", "", line).strip()
        if not text:
            continue
        key = text.lower()
        if key in seen:
            continue
        seen.add(key)
        variants.append(text)
        if len(variants) == n_variants:
            break
    return variants


def rrf_fuse(
    rankings: Sequence[Sequence[str]],
    k_const: float = RRF_K,
) -> list[RetrievedPassage]:
    """Merge rankings by reciprocal rank fusion.

    Each paragraph's fused score is ``sum(1 / (k_const + rank))`` over the
    rankings that include it, with ranks counted from 1.  The fused list
    is ordered by descending score, ties broken by ascending paragraph id,
    and re-ranked 1..n.
    """
    if not rankings:
        raise ContractError("at least one ranking is required")
    if k_const <= 0:
        raise ContractError("k_const must be positive")
    scores: dict[str, float] = {}
    for ranking in rankings:
        ids = list(ranking)
        if len(set(ids)) != len(ids):
            raise ContractError("a ranking must not repeat a paragraph id")
        for rank, pid in enumerate(ids, start=1):
            scores[pid] = scores.get(pid, 0.0) + 1.0 / (k_const + rank)
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [
        RetrievedPassage(paragraph_id=pid, score=score, rank=position)
        for position, (pid, score) in enumerate(ordered, start=1)
    ]


def _parse_numbers(run: str) -> list[int]:
    numbers: list[int] = []
    for group in _CITE_GROUP_RE.finditer(run):
        numbers.extend(int(part) for part in group.group(1).split(","))
    return numbers


def _is_boundary(text: str, match: re.Match) -> bool:
    """Decide whether a terminator match really ends a sentence."""
    end = match.end()
    if end >= len(text):
        return True
    if not text[end].isspace():
        return False
    rest = text[end:].lstrip()
    if not rest:
        return True
    nxt = rest[0]
    if not (nxt.isupper() or nxt.isdigit() or nxt in "\"'(["):
        return False
    if match.group("pre") is None and match.group("post") is None:
        # A bare terminator could still be an abbreviation or initial.
        prefix = text[: match.start("punct")]
        words = prefix.split()
        last_word = words[-1] if words else ""
        token = (last_word + match.group("punct")).strip(".").lower()
        if token in SENTENCE_ABBREVIATIONS:
            return False
        if len(token) == 1 and token.isalpha():
            return False
    return True


def _dedupe(numbers: Sequence[int]) -> tuple[int, ...]:
    seen: dict[int, None] = {}
    for n in numbers:
        seen.setdefault(n, None)
    return tuple(seen)


def parse_claims(raw_text: str) -> list[Claim]:
    """Split answer text into claims with their terminal citations.

    The grammar, in full:

    * A claim ends at terminal punctuation (``.``, ``!`` or ``?``, runs
      allowed) that is followed by end-of-text or by whitespace and a
      capital letter, digit, quote or opening bracket.  The terminator may
      carry one citation run immediately before the punctuation, after
      it, or both; a run is one or more adjacent bracket groups, each
      ``[n]`` or ``[n, m]``.
    * Abbreviations (``Dr.``, ``approx.``, ``U.S.`` ...) and single-letter
      initials do not end a claim unless accompanied by a citation run.
    * Bracket groups anywhere else in a sentence are ordinary text, not
      citations.
    * Text after the last terminator still forms a claim; a citation run
      at the very end of it counts as its terminal citations.

    Each claim's ``raw_span`` is the exact substring it was parsed from,
    including the trailing whitespace that separates it from the next
    claim, so ``"".join(spans) == raw_text``.  ``text`` is the span with
    terminal citation runs removed and whitespace normalized.
    """
    claims: list[Claim] = []
    start = 0
    pos = 0
    length = len(raw_text)
    while pos < length:
        match = _TERMINATOR_RE.search(raw_text, pos)
        if match is None:
            break
        if not _is_boundary(raw_text, match):
            pos = match.start() + 1
            continue
        citations: list[int] = []
        core_parts: list[str] = []
        if match.group("pre"):
            citations.extend(_parse_numbers(match.group("pre")))
        if match.group("post"):
            citations.extend(_parse_numbers(match.group("post")))
        core_parts.append(raw_text[start : match.start()])
        core_parts.append(match.group("punct"))
        span_end = match.end()
        while span_end < length and raw_text[span_end].isspace():
            span_end += 1
        text = _WS_RE.sub(" ", "".join(core_parts)).strip()
        claims.append(
            Claim(
                text=text,
                citation_ids=_dedupe(citations),
                raw_span=raw_text[start:span_end],
            )
        )
        start = span_end
        pos = span_end
    if start < length:
        tail = raw_text[start:]
        citations = []
        core = tail
        trailing = _TRAILING_RUN_RE.search(tail)
        if trailing:
            citations = _parse_numbers(trailing.group())
            core = tail[: trailing.start()]
        text = _WS_RE.sub(" ", core).strip()
        if text or citations:
            claims.append(
                Claim(text=text, citation_ids=_dedupe(citations), raw_span=tail)
            )
        elif claims:
            # Pure-whitespace tail: fold it into the previous claim's span.
            previous = claims[-1]
            previous.raw_span = previous.raw_span + tail
        # An all-whitespace input with no claims yields none.
    return claims


def generate_answer(
    question: Question,
    context: Sequence[RetrievedPassage],
    paragraphs: Mapping[str, Paragraph],
    chat: ChatProvider,
    seed: int = 0,
) -> Answer:
    """Prompt for an answer over the fused context and parse its claims.

    Passages are numbered ``1..m`` in fused rank order.  Claims citing
    numbers outside that range are flagged ``out_of_range``; claims with
    no citations are flagged ``uncited`` (both with warnings) — citation
    correction later resolves both.  An answer that only disclaims (the
    sources held nothing relevant) is kept verbatim but marked
    ``low_confidence``.  An empty reply is a stage failure.
    """
    if not context:
        raise ContractError("answer generation needs at least one passage")
    block_lines = []
    for passage in context:
        paragraph = paragraphs.get(passage.paragraph_id)
        if paragraph is None:
            raise ContractError(f"context references unknown paragraph {passage.paragraph_id!r}")
        block_lines.append(f"[{passage.rank}] {paragraph.text}")
    prompt = render_prompt(
        "answer_generation",
        question=question.text,
        passages="\n".join(block_lines),
    )
    raw = chat.chat(ChatRequest(prompt=prompt, seed=seed)).strip()
    if not raw:
        raise StageError(f"empty answer for question {question.id}", stage="answers")
    claims = parse_claims(raw)
    m = len(context)
    for index, claim in enumerate(claims):
        if any(not 1 <= cid <= m for cid in claim.citation_ids):
            claim.out_of_range = True
            logger.warning(
                "question %s claim %d cites outside 1..%d: %s",
                question.id, index, m, claim.citation_ids,
            )
        if not claim.citation_ids:
            claim.uncited = True
            logger.warning("question %s claim %d has no citations", question.id, index)
    lowered = raw.lower()
    low_confidence = any(phrase in lowered for phrase in LOW_CONFIDENCE_PHRASES)
    answer = Answer(
        question_id=question.id,
        raw_text=raw,
        claims=claims,
        passages=tuple(context),
        low_confidence=low_confidence,
    )
    assert "".join(c.raw_span for c in claims) == raw
    return answer


def answer_question(
    question: Question,
    index: RetrievalIndex,
    chat: ChatProvider,
    n_variants: int = DEFAULT_QUERY_VARIANTS,
    retrieval_depth: int = DEFAULT_RETRIEVAL_DEPTH,
    context_size: int = DEFAULT_CONTEXT_SIZE,
    k_const: float = RRF_K,
    seed: int = 0,
) -> Answer:
    """Full answer pipeline for one question: expand, retrieve, fuse, answer."""
    variants = expand_query(question.text, chat, n_variants=n_variants, seed=seed)
    rankings = [
        [p.paragraph_id for p in retrieve(index, variant, retrieval_depth)]
        for variant in variants
    ]
    fused = rrf_fuse(rankings, k_const=k_const)
    context = [
        RetrievedPassage(paragraph_id=p.paragraph_id, score=p.score, rank=position)
        for position, p in enumerate(fused[:context_size], start=1)
    ]
    lookup = {pid: index.paragraph(pid) for pid in (p.paragraph_id for p in context)}
    return generate_answer(question, context, lookup, chat, seed=seed)
