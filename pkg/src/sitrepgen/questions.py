"""Question drafting for report topics: generation, dedupe, filtering, SDGs.

For each topic cluster the chat model drafts candidate questions over
several rounds (same prompt, different sampling seeds), the pool is
de-duplicated with a redundancy scorer and down-sampled to a fixed budget,
and each surviving question is screened against four editorial criteria —
all four must pass for the question to be kept — and tagged with the
UN Sustainable Development Goals it touches (possibly none).
"""

from __future__ import annotations

import hashlib
import logging
import random
import re
from dataclasses import dataclass

from .errors import ContractError, StageError
from .ingest import EventSpec, Paragraph
from .prompts import render_prompt
from .providers import ChatProvider, ChatRequest, DuplicateScorer

logger = logging.getLogger(__name__)

#: Generation rounds per cluster (same prompt, varied sampling).
DEFAULT_ROUNDS = 3

#: Questions requested per generation round and kept per cluster.
QUESTION_TARGET = 6

#: Redundancy score at or above which a later question is dropped.
DEFAULT_DUP_THRESHOLD = 0.8

#: The four screening criteria, in prompt/reply order.
FILTER_CRITERIA = (
    "specific_to_country",
    "non_political",
    "current_not_historical",
    "concrete_not_vague",
)

SDG_NAMES: dict[int, str] = {
    1: "No Poverty",
    2: "Zero Hunger",
    3: "Good Health and Well-being",
    4: "Quality Education",
    5: "Gender Equality",
    6: "Clean Water and Sanitation",
    7: "Affordable and Clean Energy",
    8: "Decent Work and Economic Growth",
    9: "Industry, Innovation and Infrastructure",
    10: "Reduced Inequalities",
    11: "Sustainable Cities and Communities",
    12: "Responsible Consumption and Production",
    13: "Climate Action",
    14: "Life Below Water",
    15: "Life on Land",
    16: "Peace, Justice and Strong Institutions",
    17: "Partnerships for the Goals",
}

_SDG_FOCUS: dict[int, str] = {
    1: "poverty, income support and social protection",
    2: "hunger, food security, nutrition and agriculture",
    3: "health services, disease, injuries and well-being",
    4: "schools, learning continuity and education access",
    5: "gender equality and protection of women and girls",
    6: "drinking water, sanitation and hygiene",
    7: "electricity, fuel and energy access",
    8: "jobs, livelihoods and economic activity",
    9: "infrastructure, industry, transport and communications",
    10: "inequality and support to marginalized groups",
    11: "housing, settlements, shelter and urban services",
    12: "supply chains, waste and resource use",
    13: "climate hazards, disaster response and resilience",
    14: "oceans, coasts and marine livelihoods",
    15: "land, forests, wildlife and ecosystems",
    16: "safety, justice, institutions and public order",
    17: "international cooperation and partnerships",
}

_LINE_PREFIX_RE = re.compile(r"^\s*(?:[-*•]|\(?\d+[.)])\s*")
_FLAG_RES = {
    name: re.compile(rf"{name}\s*[:=]\s*([01])", re.IGNORECASE) for name in FILTER_CRITERIA
}
_INT_RE = re.compile(r"\d+")


@dataclass(frozen=True)
class SDGLabel:
    """One Sustainable Development Goal, numbered 1 through 17."""

    value: int

    def __post_init__(self) -> None:
        if self.value not in SDG_NAMES:
            raise ContractError(f"SDG number {self.value} outside 1..17")

    @property
    def name(self) -> str:
        return SDG_NAMES[self.value]

    def __str__(self) -> str:
        return f"SDG {self.value}: {self.name}"


@dataclass(frozen=True)
class FilterVerdict:
    """Outcome of the four-criteria screen; ``keep`` is their conjunction.

    ``invalid`` marks a verdict synthesized after the screen itself failed
    (unparseable replies); such questions are rejected, never kept.
    """

    specific_to_country: bool
    non_political: bool
    current_not_historical: bool
    concrete_not_vague: bool
    keep: bool
    invalid: bool = False

    def __post_init__(self) -> None:
        expected = (
            self.specific_to_country
            and self.non_political
            and self.current_not_historical
            and self.concrete_not_vague
        )
        if self.keep != expected:
            raise ContractError("keep flag must equal the AND of the four criteria")

    @classmethod
    def from_flags(cls, flags: dict[str, bool]) -> "FilterVerdict":
        return cls(
            specific_to_country=flags["specific_to_country"],
            non_political=flags["non_political"],
            current_not_historical=flags["current_not_historical"],
            concrete_not_vague=flags["concrete_not_vague"],
            keep=all(flags[name] for name in FILTER_CRITERIA),
        )

    @classmethod
    def invalid_verdict(cls) -> "FilterVerdict":
        return cls(False, False, False, False, keep=False, invalid=True)


@dataclass
class Question:
    """A candidate report question tied to the topic cluster it came from."""

    id: str
    cluster_label: int
    text: str
    origin_round: int
    verdict: FilterVerdict | None = None
    sdgs: tuple[SDGLabel, ...] = ()

    def __post_init__(self) -> None:
        if self.cluster_label < 0:
            raise ContractError("questions belong to real clusters, not noise")
        if not self.text.endswith("?"):
            raise ContractError(f"question text must end with '?': {self.text!r}")
        if self.origin_round < 0:
            raise ContractError("origin_round must be >= 0")


def sdg_descriptions_block() -> str:
    """The 17 goals rendered one per line for the classification prompt."""
    return "\n".join(
        f"{number}. {SDG_NAMES[number]} - {_SDG_FOCUS[number]}" for number in sorted(SDG_NAMES)
    )


def derive_seed(base_seed: int, *parts: object) -> int:
    """Stable 32-bit sub-seed from a base seed and context parts."""
    digest = hashlib.sha256(repr((base_seed, *parts)).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def parse_question_lines(reply: str) -> list[str]:
    """Extract question lines from a generation reply.

    Lines are stripped of list markers; only lines ending with ``?`` count.
    """
    questions: list[str] = []
    for line in reply.splitlines():
        text = _LINE_PREFIX_RE.sub("", line).strip()
        if text.endswith("?") and len(text) > 3:
            questions.append(text)
    return questions


def generate_questions(
    cluster_label: int,
    paragraphs: list[Paragraph],
    event: EventSpec,
    chat: ChatProvider,
    rounds: int = DEFAULT_ROUNDS,
    temperature: float = 0.7,
    top_p: float = 0.9,
    seed: int = 0,
) -> list[Question]:
    """Draft candidate questions for one cluster over several rounds.

    Every round reuses the same prompt with a different request seed, so
    sampling (not the input) provides diversity.  A round whose reply
    contains no parseable question is skipped with a warning; if all
    rounds come back empty the stage fails.
    """
    if cluster_label < 0:
        raise ContractError("cannot generate questions for noise")
    if not paragraphs:
        raise ContractError("cluster has no paragraphs")
    if rounds < 1:
        raise ContractError("rounds must be >= 1")
    excerpt = "\n".join(f"- {p.text}" for p in paragraphs)
    prompt = render_prompt(
        "question_generation",
        event_name=event.name,
        country=event.country,
        max_questions=QUESTION_TARGET,
        paragraphs=excerpt,
    )
    questions: list[Question] = []
    for round_index in range(rounds):
        reply = chat.chat(
            ChatRequest(
                prompt=prompt,
                temperature=temperature,
                top_p=top_p,
                seed=derive_seed(seed, "question-round", cluster_label, round_index),
            )
        )
        texts = parse_question_lines(reply)
        if not texts:
            logger.warning(
                "cluster %d round %d produced no parseable questions; skipping round",
                cluster_label, round_index,
            )
            continue
        for position, text in enumerate(texts):
            questions.append(
                Question(
                    id=f"c{cluster_label}-r{round_index}-q{position}",
                    cluster_label=cluster_label,
                    text=text,
                    origin_round=round_index,
                )
            )
    if not questions:
        raise StageError(
            f"cluster {cluster_label}: no usable questions in {rounds} round(s)",
            stage="questions",
        )
    return questions


def dedupe_and_sample(
    questions: list[Question],
    scorer: DuplicateScorer,
    dup_threshold: float = DEFAULT_DUP_THRESHOLD,
    target: int = QUESTION_TARGET,
    seed: int = 0,
) -> list[Question]:
    """Drop near-duplicates (first kept wins) and sample down to ``target``.

    Questions are visited in their given order; a question scoring at or
    above ``dup_threshold`` against any already-kept question is dropped.
    When more than ``target`` survive, a seeded uniform sample is taken
    and returned in the survivors' original order.
    """
    if not 0.0 <= dup_threshold <= 1.0:
        raise ContractError(f"dup_threshold {dup_threshold} outside [0, 1]")
    if target < 1:
        raise ContractError("target must be >= 1")
    kept: list[Question] = []
    for question in questions:
        duplicate_of = next(
            (k for k in kept if scorer.score(question.text, k.text) >= dup_threshold),
            None,
        )
        if duplicate_of is not None:
            logger.debug("dropping %s as duplicate of %s", question.id, duplicate_of.id)
            continue
        kept.append(question)
    if len(kept) <= target:
        return kept
    rng = random.Random(seed)
    chosen = sorted(rng.sample(range(len(kept)), target))
    return [kept[i] for i in chosen]


def filter_question(question: Question, event: EventSpec, chat: ChatProvider) -> FilterVerdict:
    """Screen one question against the four editorial criteria.

    The model must return all four named flags; an incomplete reply is
    retried once, after which the question gets an invalid (rejecting)
    verdict with a warning.  The verdict is stored on the question.
    """
    prompt = render_prompt(
        "question_filter",
        event_name=event.name,
        country=event.country,
        question=question.text,
    )
    verdict: FilterVerdict | None = None
    for attempt in range(2):
        reply = chat.chat(ChatRequest(prompt=prompt, temperature=0.0, seed=attempt))
        flags: dict[str, bool] = {}
        for name, pattern in _FLAG_RES.items():
            match = pattern.search(reply)
            if match:
                flags[name] = match.group(1) == "1"
        if len(flags) == len(FILTER_CRITERIA):
            verdict = FilterVerdict.from_flags(flags)
            break
        logger.warning(
            "question %s: filter reply attempt %d missing flags %s",
            question.id, attempt + 1, sorted(set(FILTER_CRITERIA) - flags.keys()),
        )
    if verdict is None:
        logger.warning("question %s rejected: filter never returned a full verdict", question.id)
        verdict = FilterVerdict.invalid_verdict()
    question.verdict = verdict
    return verdict


def classify_sdg(question: Question, chat: ChatProvider) -> tuple[SDGLabel, ...]:
    """Tag one question with the goals it concerns (possibly none).

    A reply naming goals outside 1..17 is retried once; on the second
    failure the out-of-range values are dropped with a warning.  An empty
    tag set is legal — such questions fall into the unclassified bucket.
    The tags are stored on the question, ascending and without duplicates.
    """
    prompt = render_prompt(
        "sdg_classification",
        sdg_descriptions=sdg_descriptions_block(),
        question=question.text,
    )
    labels: tuple[SDGLabel, ...] = ()
    for attempt in range(2):
        reply = chat.chat(ChatRequest(prompt=prompt, temperature=0.0, seed=attempt))
        numbers = [int(n) for n in _INT_RE.findall(reply)]
        valid = sorted({n for n in numbers if n in SDG_NAMES})
        out_of_range = sorted({n for n in numbers if n not in SDG_NAMES})
        if not out_of_range:
            labels = tuple(SDGLabel(n) for n in valid)
            break
        if attempt == 0:
            logger.warning(
                "question %s: SDG reply named invalid goal(s) %s; retrying",
                question.id, out_of_range,
            )
        else:
            logger.warning(
                "question %s: dropping invalid goal(s) %s from SDG reply",
                question.id, out_of_range,
            )
            labels = tuple(SDGLabel(n) for n in valid)
    question.sdgs = labels
    return labels
