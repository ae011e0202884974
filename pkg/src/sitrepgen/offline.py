"""Offline chat provider that synthesizes plausible stage outputs.

Real runs talk to hosted models; offline runs (``--mock-providers``)
need a chat provider that can stand in for every pipeline prompt —
question drafting, filtering, SDG tagging, query expansion, answering,
judging and summarizing — while staying fully deterministic so that two
runs with the same seed produce byte-identical reports.

:class:`OfflineChat` recognizes which stage a prompt belongs to by the
prompt template's static prefix, parses the dynamic parts back out of
the prompt text, and derives every random choice from a hash of
``(provider seed, stage, prompt, request seed)``.  The synthesized
output is deliberately imperfect in controlled ways — occasional
off-by-one citations, an unsupported claim, a summary marker that does
not resolve — so the downstream correction and validation layers have
real work to do in end-to-end tests.
"""

from __future__ import annotations

import hashlib
import random
import re
from collections import Counter
from dataclasses import dataclass, field

from .errors import ContractError
from .prompts import PROMPT_NAMES, static_prefix
from .providers import ChatRequest

_PASSAGE_LINE_RE = re.compile(r"^\[(\d+)\] (.+)$", re.MULTILINE)
_QUESTION_LINE_RE = re.compile(r"^QUESTION: (.+)$", re.MULTILINE)
_WORD_RE = re.compile(r"[A-Za-z][A-Za-z'-]+")
_FIRST_CITED_SENTENCE_RE = re.compile(r".+?[.!?]+(?:\s*\[[\d,\s]+\])+")

_STOPWORDS = frozenset(
    """about above after again their there these those where which while would
    could should across between during against through under over from with
    have has been being report questions question answer current period
    humanitarian situation""".split()
)

_FILTER_FLAGS = (
    "specific_to_country",
    "non_political",
    "current_not_historical",
    "concrete_not_vague",
)

_QUESTION_TEMPLATES = (
    "What is the current status of {a} and {b} in {place}?",
    "How many people are affected by the {a} situation in {place}?",
    "Which areas of {place} report needs around {a} and {b}?",
    "What response actions address {a} in {place} this week?",
    "What figures are reported for {a} and {b} in {place}?",
    "Where in {place} is access to {a} still limited?",
    "Which services for {a} have been restored in {place}?",
    "What are the immediate needs relating to {a} near {b} sites in {place}?",
)


def detect_stage(prompt: str) -> str:
    """Name the prompt template a rendered prompt came from."""
    matches = [
        name for name in PROMPT_NAMES if prompt.startswith(static_prefix(name))
    ]
    if len(matches) != 1:
        raise ContractError(
            f"prompt matches {len(matches)} stage templates: {matches or 'none'}"
        )
    return matches[0]


def _content_words(text: str, limit: int = 12) -> list[str]:
    counts = Counter(
        word.lower()
        for word in _WORD_RE.findall(text)
        if len(word) >= 5 and word.lower() not in _STOPWORDS
    )
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return [word for word, _ in ranked[:limit]]


def _first_sentence(text: str) -> str:
    match = re.search(r".+?[.!?]", text)
    return match.group(0) if match else text


def _grounded_claim(text: str, rng: random.Random) -> str:
    """One sentence that visibly matches its source passage.

    The passage's opening sentence, extended with distinctive words from
    the remainder, so word overlap with the full passage stays high while
    the claim remains a single sentence.
    """
    first = _first_sentence(text).rstrip(".!?")
    extras = sorted(
        {w.lower() for w in re.findall(r"[A-Za-z]{5,}", text[len(first):])} - _STOPWORDS
    )
    if not extras:
        return f"{first}."
    picked = rng.sample(extras, k=min(len(extras), rng.randint(5, 7)))
    return f"{first}, with reports also noting {', '.join(picked)}."


@dataclass
class OfflineChat:
    """Deterministic stage-aware chat for provider-free pipeline runs."""

    seed: int = 0
    calls: list[ChatRequest] = field(default_factory=list)

    def chat(self, request: ChatRequest) -> str:
        self.calls.append(request)
        stage = detect_stage(request.prompt)
        rng = self._rng(stage, request)
        handler = getattr(self, f"_{stage}")
        return handler(request.prompt, rng)

    def _rng(self, stage: str, request: ChatRequest) -> random.Random:
        digest = hashlib.sha256(
            f"{self.seed}\0{stage}\0{request.seed}\0{request.prompt}".encode("utf-8")
        ).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))

    # -- clustering ---------------------------------------------------------

    def _cluster_judge(self, prompt: str, rng: random.Random) -> str:
        return f"{rng.uniform(0.35, 0.9):.2f}"

    # -- questions ----------------------------------------------------------

    def _question_generation(self, prompt: str, rng: random.Random) -> str:
        header = re.search(
            r"situation report about (?P<event>.+) in (?P<place>.+)\.", prompt
        )
        place = header.group("place") if header else "the affected area"
        limit_match = re.search(r"Write up to (\d+)\s+distinct questions", prompt)
        limit = int(limit_match.group(1)) if limit_match else 6
        excerpts = prompt.split("EXCERPTS:\n", 1)[-1]
        words = _content_words(excerpts) or ["relief", "access"]
        lines = []
        for _ in range(rng.randint(max(1, limit - 2), limit)):
            a, b = rng.choice(words), rng.choice(words)
            template = rng.choice(_QUESTION_TEMPLATES)
            lines.append(template.format(a=a, b=b, place=place))
        return "\n".join(lines)

    def _question_filter(self, prompt: str, rng: random.Random) -> str:
        flags = {name: 1 for name in _FILTER_FLAGS}
        if rng.random() >= 0.8:
            flags[rng.choice(_FILTER_FLAGS)] = 0
        return "\n".join(f"{name}: {value}" for name, value in flags.items())

    def _sdg_classification(self, prompt: str, rng: random.Random) -> str:
        roll = rng.random()
        if roll < 0.15:
            return "NONE"
        first = rng.randint(1, 17)
        if roll < 0.75:
            return str(first)
        second = rng.randint(1, 17)
        return f"{first}, {second}" if second != first else str(first)

    # -- answers ------------------------------------------------------------

    def _query_expansion(self, prompt: str, rng: random.Random) -> str:
        question = _QUESTION_LINE_RE.search(prompt)
        base = question.group(1).rstrip("?") if question else "the situation"
        count_match = re.search(r"Rewrite the question below in (\d+)", prompt)
        count = int(count_match.group(1)) if count_match else 3
        openers = (
            "What details are known regarding",
            "Summarize the latest on",
            "What do reports say about",
            "Give the current information on",
            "What has been confirmed about",
        )
        picked = rng.sample(openers, k=min(count, len(openers)))
        return "\n".join(f"{opener} {base}?" for opener in picked)

    def _answer_generation(self, prompt: str, rng: random.Random) -> str:
        passages = _PASSAGE_LINE_RE.findall(prompt.split("PASSAGES:\n", 1)[-1])
        if not passages:
            return "The sources do not provide clear answers to that."
        ranks = [int(number) for number, _ in passages]
        texts = {int(number): text for number, text in passages}
        chosen = rng.sample(ranks, k=min(rng.randint(2, 3), len(ranks)))
        sentences = []
        for rank in chosen:
            claim = _grounded_claim(texts[rank], rng)
            cited = rank
            if rng.random() < 0.25 and len(ranks) > 1:
                # An imperfect citation for the correction layer to fix.
                cited = ranks[(ranks.index(rank) + 1) % len(ranks)]
            sentences.append(f"{claim} [{cited}]")
        leftover = [rank for rank in ranks if rank not in chosen]
        roll = rng.random()
        if roll < 0.25 and leftover:
            # A supported statement missing its marker, for the correction
            # layer to attach to its source.
            sentences.append(_grounded_claim(texts[rng.choice(leftover)], rng))
        elif roll < 0.4:
            sentences.append("Assessment teams continue to verify field reports.")
        return " ".join(sentences)

    # -- evaluation ---------------------------------------------------------

    def _relevance_judge(self, prompt: str, rng: random.Random) -> str:
        return "relevant" if rng.random() < 0.9 else "irrelevant"

    # -- summaries ----------------------------------------------------------

    def _summarize_qa_block(self, prompt: str, rng: random.Random) -> str:
        answers = re.findall(r"^A: (.+)$", prompt, re.MULTILINE)
        pieces: list[str] = []
        for answer in answers[:3]:
            cited = _FIRST_CITED_SENTENCE_RE.match(answer)
            pieces.append(cited.group(0) if cited else _first_sentence(answer))
        body = " ".join(pieces) if pieces else "No findings were recorded."
        if rng.random() < 0.2:
            body += " Further verification is pending. [99]"
        return body

    def _cluster_summary(self, prompt: str, rng: random.Random) -> str:
        return self._summarize_qa_block(prompt, rng)

    def _sdg_summary(self, prompt: str, rng: random.Random) -> str:
        return self._summarize_qa_block(prompt, rng)

    def _headline(self, prompt: str, rng: random.Random) -> str:
        summary = prompt.split("SUMMARY:\n", 1)[-1]
        words = _content_words(summary, limit=5)
        if not words:
            return "Situation Overview"
        return " ".join(word.capitalize() for word in words)

    def _executive_summary(self, prompt: str, rng: random.Random) -> str:
        passages = _PASSAGE_LINE_RE.findall(prompt.split("PASSAGES:\n", 1)[-1])
        if not passages:
            return "No source material was available."
        chosen = passages[: min(3, len(passages))]
        return " ".join(
            f"{_first_sentence(text)} [{number}]" for number, text in chosen
        )
