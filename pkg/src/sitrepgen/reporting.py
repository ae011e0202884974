"""Report assembly: summaries, citation reindexing and rendering.

The report presents the same question/answer material four ways — Q&A
grouped by topic cluster, Q&A grouped by Sustainable Development Goal,
per-topic narrative summaries, and per-SDG narrative summaries — behind
one executive summary and one global citation registry.

Citations start out *local*: each answer numbers its own context
passages, and each generated summary inherits a group-local numbering
built from the answers it condenses.  :func:`reindex_citations` walks
the drafted report in a fixed order (executive summary, then the four
views), assigns one global number per distinct cited paragraph in order
of first appearance, rewrites every marker, and emits the registry.
Rendering then serializes the reindexed report to a structured JSON
document and a self-contained static page; both are pure functions of
the report, so re-rendering is byte-identical.

Two marker disciplines coexist deliberately.  Answer text is rebuilt
from parsed claims (text plus citation ids), never re-scanned, so
literal bracketed text inside an answer — "[2019]", say — can never be
mistaken for a citation.  Summary and executive text comes back from a
chat model as flat prose, so there markers *are* found by scanning;
any marker that does not resolve in the group's citation map is
stripped with a warning at generation time, which makes a marker that
is still unresolved at reindex time a pipeline bug.
"""

from __future__ import annotations

import html
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .answers import Answer
from .errors import ContractError, ReportIntegrityError, StageError
from .ingest import Document, EventSpec, Paragraph
from .prompts import render_prompt
from .providers import ChatProvider, ChatRequest
from .questions import SDG_NAMES, Question, derive_seed

logger = logging.getLogger(__name__)

#: Formats understood by :func:`render_report`.
STRUCTURED = "structured"
STATIC_PAGE = "static-page"
KNOWN_FORMATS = frozenset({STRUCTURED, STATIC_PAGE})

#: Version stamp for the structured output schema.
SCHEMA_VERSION = 1

#: Label used for questions with no SDG tags in the by-SDG view.
UNCLASSIFIED = "Unclassified"

_MARKER_RUN_RE = re.compile(r"(?P<lead>\s*)\[\s*(?P<body>\d+(?:\s*,\s*\d+)*)\s*\]")


def format_marker(numbers: Sequence[int]) -> str:
    """Canonical citation-run text for one or more numbers."""
    if not numbers:
        raise ContractError("citation marker needs at least one number")
    return "[" + ", ".join(str(n) for n in numbers) + "]"


# ---------------------------------------------------------------------------
# Draft structures (local citation numbering).


@dataclass(frozen=True)
class ClaimSegment:
    """One claim's display text and its local citation numbers."""

    text: str
    citations: tuple[int, ...]


@dataclass(frozen=True)
class AnswerBlock:
    """An answer rebuilt as segments over a local citation map."""

    segments: tuple[ClaimSegment, ...]
    citations: Mapping[int, str]  # local number -> paragraph_id

    def cited_numbers(self) -> list[int]:
        seen: list[int] = []
        for segment in self.segments:
            for number in segment.citations:
                if number not in seen:
                    seen.append(number)
        return seen


@dataclass(frozen=True)
class FlatBlock:
    """Chat-produced prose whose bracketed markers index ``citations``."""

    text: str
    citations: Mapping[int, str]  # local number -> paragraph_id


@dataclass(frozen=True)
class QAEntryDraft:
    question_id: str
    question_text: str
    sdgs: tuple[int, ...]
    block: AnswerBlock
    low_confidence: bool


@dataclass(frozen=True)
class TopicSectionDraft:
    cluster_label: int
    entries: tuple[QAEntryDraft, ...]


@dataclass(frozen=True)
class SDGSectionDraft:
    sdg: int | None  # None = unclassified
    entries: tuple[QAEntryDraft, ...]


@dataclass(frozen=True)
class ClusterSummary:
    """Narrative summary of one topic cluster, with a headline."""

    cluster_label: int
    headline: str
    body: str
    citations: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.headline.strip():
            raise ContractError(f"cluster {self.cluster_label} summary has empty headline")


@dataclass(frozen=True)
class SDGSummary:
    """Narrative summary of all answers tagged with one SDG."""

    sdg: int | None  # None = unclassified
    body: str
    citations: Mapping[int, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ReportDraft:
    """All report content, still carrying local citation numbers."""

    event: EventSpec
    executive: FlatBlock
    qa_by_topic: tuple[TopicSectionDraft, ...]
    qa_by_sdg: tuple[SDGSectionDraft, ...]
    topic_summaries: tuple[ClusterSummary, ...]
    sdg_summaries: tuple[SDGSummary, ...]


# ---------------------------------------------------------------------------
# Final structures (global citation numbering).


@dataclass(frozen=True)
class RegistryEntry:
    number: int
    paragraph_id: str
    doc_title: str
    doc_url: str
    paragraph_text: str


@dataclass(frozen=True)
class CitationRegistry:
    entries: tuple[RegistryEntry, ...]

    def __post_init__(self) -> None:
        numbers = [entry.number for entry in self.entries]
        if numbers != list(range(1, len(numbers) + 1)):
            raise ContractError(f"registry numbers {numbers} are not contiguous from 1")
        paragraph_ids = [entry.paragraph_id for entry in self.entries]
        if len(set(paragraph_ids)) != len(paragraph_ids):
            raise ContractError("registry paragraph_ids are not unique")

    def __len__(self) -> int:
        return len(self.entries)

    def number_for(self, paragraph_id: str) -> int:
        for entry in self.entries:
            if entry.paragraph_id == paragraph_id:
                return entry.number
        raise KeyError(paragraph_id)


@dataclass(frozen=True)
class QAEntry:
    question_id: str
    question_text: str
    sdgs: tuple[int, ...]
    answer_text: str
    low_confidence: bool


@dataclass(frozen=True)
class TopicSection:
    cluster_label: int
    entries: tuple[QAEntry, ...]


@dataclass(frozen=True)
class SDGSection:
    sdg: int | None
    entries: tuple[QAEntry, ...]

    @property
    def title(self) -> str:
        if self.sdg is None:
            return UNCLASSIFIED
        return f"SDG {self.sdg}: {SDG_NAMES[self.sdg]}"


@dataclass(frozen=True)
class ReportMetadata:
    """Provenance the report carries along: models, config identity.

    Timings are deliberately *not* part of the report (they differ run to
    run and would break byte-identical rendering); pipelines write them
    to a sidecar file and may record its relative path here.
    """

    models: Mapping[str, str] = field(default_factory=dict)
    config_hash: str = ""
    timings_path: str | None = None


@dataclass(frozen=True)
class Report:
    event: EventSpec
    executive_summary: str
    qa_by_topic: tuple[TopicSection, ...]
    qa_by_sdg: tuple[SDGSection, ...]
    topic_summaries: tuple[ClusterSummary, ...]
    sdg_summaries: tuple[SDGSummary, ...]
    registry: CitationRegistry
    metadata: ReportMetadata


# ---------------------------------------------------------------------------
# Building blocks from answers.


def answer_block(answer: Answer) -> AnswerBlock:
    """Rebuild an answer as display segments over its passage numbering."""
    rank_to_pid = {p.rank: p.paragraph_id for p in answer.passages}
    segments: list[ClaimSegment] = []
    for claim in answer.claims:
        unknown = [c for c in claim.citation_ids if c not in rank_to_pid]
        if unknown:
            raise ContractError(
                f"answer {answer.question_id} cites passage numbers {unknown} "
                "outside its context"
            )
        segments.append(ClaimSegment(text=claim.text, citations=claim.citation_ids))
    return AnswerBlock(
        segments=tuple(segments),
        citations={p.rank: p.paragraph_id for p in answer.passages},
    )


def _answer_display_text(block: AnswerBlock, renumber: Mapping[int, int]) -> str:
    parts: list[str] = []
    for segment in block.segments:
        piece = segment.text
        if segment.citations:
            marker = format_marker([renumber[c] for c in segment.citations])
            piece = f"{piece} {marker}".strip()
        if piece:
            parts.append(piece)
    return " ".join(parts)


def qa_entry_draft(question: Question, answer: Answer) -> QAEntryDraft:
    if answer.question_id != question.id:
        raise ContractError(
            f"answer {answer.question_id} paired with question {question.id}"
        )
    return QAEntryDraft(
        question_id=question.id,
        question_text=question.text,
        sdgs=tuple(label.value for label in question.sdgs),
        block=answer_block(answer),
        low_confidence=answer.low_confidence,
    )


def build_topic_sections(
    qa_pairs: Sequence[tuple[Question, Answer]],
) -> tuple[TopicSectionDraft, ...]:
    """Group Q&A pairs into per-cluster sections, labels ascending."""
    by_label: dict[int, list[QAEntryDraft]] = {}
    for question, answer in qa_pairs:
        by_label.setdefault(question.cluster_label, []).append(
            qa_entry_draft(question, answer)
        )
    return tuple(
        TopicSectionDraft(cluster_label=label, entries=tuple(by_label[label]))
        for label in sorted(by_label)
    )


def build_sdg_sections(
    qa_pairs: Sequence[tuple[Question, Answer]],
) -> tuple[SDGSectionDraft, ...]:
    """Group Q&A pairs by SDG tag, ascending, with Unclassified last.

    A question tagged with several SDGs appears once under each, so every
    SDG section is self-contained; untagged questions land in the
    Unclassified section.
    """
    by_sdg: dict[int | None, list[QAEntryDraft]] = {}
    for question, answer in qa_pairs:
        entry = qa_entry_draft(question, answer)
        if question.sdgs:
            for label in question.sdgs:
                by_sdg.setdefault(label.value, []).append(entry)
        else:
            by_sdg.setdefault(None, []).append(entry)
    ordered: list[int | None] = sorted(k for k in by_sdg if k is not None)
    if None in by_sdg:
        ordered.append(None)
    return tuple(
        SDGSectionDraft(sdg=key, entries=tuple(by_sdg[key])) for key in ordered
    )


# ---------------------------------------------------------------------------
# Marker hygiene for chat-produced prose.


def strip_unknown_markers(text: str, known: Iterable[int], context: str) -> str:
    """Drop citation numbers that do not resolve in the local map.

    Runs that keep at least one known number are rewritten canonically;
    runs left empty disappear along with their leading whitespace.  Every
    dropped number is logged.
    """
    known_set = set(known)

    def repair(match: re.Match[str]) -> str:
        numbers = [int(n) for n in re.findall(r"\d+", match.group("body"))]
        kept = [n for n in numbers if n in known_set]
        dropped = [n for n in numbers if n not in known_set]
        for number in dropped:
            logger.warning("%s: stripped unresolved citation marker [%d]", context, number)
        if not kept:
            return ""
        lead = " " if match.group("lead") else ""
        return lead + format_marker(kept)

    repaired = _MARKER_RUN_RE.sub(repair, text)
    return re.sub(r" {2,}", " ", repaired).strip()


def _renumber_flat(block: FlatBlock, renumber: Mapping[int, int], context: str) -> str:
    def rewrite(match: re.Match[str]) -> str:
        numbers = [int(n) for n in re.findall(r"\d+", match.group("body"))]
        rewritten: list[int] = []
        for number in numbers:
            if number not in renumber:
                raise ReportIntegrityError(
                    f"{context}: marker [{number}] has no local citation entry"
                )
            global_number = renumber[number]
            if global_number not in rewritten:
                rewritten.append(global_number)
        lead = " " if match.group("lead") else ""
        return lead + format_marker(rewritten)

    return _MARKER_RUN_RE.sub(rewrite, block.text)


# ---------------------------------------------------------------------------
# Summaries.


def _group_renumbered_texts(
    qa_pairs: Sequence[tuple[Question, Answer]],
) -> tuple[list[tuple[str, str]], dict[int, str]]:
    """Rewrite each answer with group-local citation numbers.

    Returns (question text, answer text) pairs plus the group map from
    local number to paragraph id, numbering paragraphs by first
    appearance across the group.
    """
    group_numbers: dict[str, int] = {}
    rendered: list[tuple[str, str]] = []
    for question, answer in qa_pairs:
        block = answer_block(answer)
        renumber: dict[int, int] = {}
        for local in block.cited_numbers():
            paragraph_id = block.citations[local]
            if paragraph_id not in group_numbers:
                group_numbers[paragraph_id] = len(group_numbers) + 1
            renumber[local] = group_numbers[paragraph_id]
        rendered.append((question.text, _answer_display_text(block, renumber)))
    return rendered, {number: pid for pid, number in group_numbers.items()}


def _qa_block(rendered: Sequence[tuple[str, str]]) -> str:
    return "\n\n".join(f"Q: {q}\nA: {a}" for q, a in rendered)


def _chat_text(
    chat: ChatProvider,
    prompt: str,
    *,
    seed: int,
    what: str,
    retries: int = 1,
) -> str:
    for attempt in range(retries + 1):
        reply = chat.chat(
            ChatRequest(prompt=prompt, temperature=0.0, seed=seed + attempt)
        ).strip()
        if reply:
            return reply
        logger.warning("%s came back empty (attempt %d)", what, attempt + 1)
    raise StageError(f"{what} was empty after {retries + 1} attempts", stage="report")


def summarize_cluster(
    cluster_label: int,
    qa_pairs: Sequence[tuple[Question, Answer]],
    chat: ChatProvider,
    seed: int = 0,
) -> ClusterSummary:
    """Condense one cluster's answers, then headline the result.

    The summary may cite only passages the input answers cite; markers
    outside that set are stripped with a warning.  The headline comes
    from a second prompt over the finished body and carries no markers.
    """
    if not qa_pairs:
        raise ContractError(f"cluster {cluster_label} has no answers to summarize")
    if not any(answer.claims for _, answer in qa_pairs):
        raise ContractError(f"cluster {cluster_label} answers contain no claims")
    rendered, group_map = _group_renumbered_texts(qa_pairs)
    body_raw = _chat_text(
        chat,
        render_prompt("cluster_summary", qa_block=_qa_block(rendered)),
        seed=derive_seed(seed, "cluster-summary", cluster_label),
        what=f"cluster {cluster_label} summary",
    )
    body = strip_unknown_markers(body_raw, group_map, f"cluster {cluster_label} summary")
    headline_raw = _chat_text(
        chat,
        render_prompt("headline", summary=body),
        seed=derive_seed(seed, "headline", cluster_label),
        what=f"cluster {cluster_label} headline",
    )
    headline = re.sub(
        r" {2,}", " ", _MARKER_RUN_RE.sub("", headline_raw.splitlines()[0])
    ).strip().strip('"')
    if not headline:
        raise StageError(f"cluster {cluster_label} headline was empty", stage="report")
    return ClusterSummary(
        cluster_label=cluster_label, headline=headline, body=body, citations=group_map
    )


def summarize_sdg(
    sdg: int | None,
    qa_pairs: Sequence[tuple[Question, Answer]],
    chat: ChatProvider,
    seed: int = 0,
) -> SDGSummary:
    """Condense all answers tagged with one SDG (or left unclassified)."""
    name = UNCLASSIFIED if sdg is None else f"SDG {sdg}: {SDG_NAMES[sdg]}"
    if not qa_pairs:
        raise ContractError(f"{name} has no answers to summarize")
    rendered, group_map = _group_renumbered_texts(qa_pairs)
    body_raw = _chat_text(
        chat,
        render_prompt("sdg_summary", sdg_name=name, qa_block=_qa_block(rendered)),
        seed=derive_seed(seed, "sdg-summary", -1 if sdg is None else sdg),
        what=f"{name} summary",
    )
    body = strip_unknown_markers(body_raw, group_map, f"{name} summary")
    return SDGSummary(sdg=sdg, body=body, citations=group_map)


def collect_cited_paragraphs(
    answers: Sequence[Answer],
    paragraphs_by_id: Mapping[str, Paragraph],
) -> list[Paragraph]:
    """Paragraphs cited by at least one (post-correction) claim.

    Sorted by paragraph id so downstream numbering is deterministic.
    """
    cited: set[str] = set()
    for answer in answers:
        rank_to_pid = {p.rank: p.paragraph_id for p in answer.passages}
        for claim in answer.claims:
            for number in claim.citation_ids:
                cited.add(rank_to_pid[number])
    missing = sorted(pid for pid in cited if pid not in paragraphs_by_id)
    if missing:
        raise ContractError(f"cited paragraphs missing from corpus: {missing}")
    return [paragraphs_by_id[pid] for pid in sorted(cited)]


def executive_summary(
    cited_paragraphs: Sequence[Paragraph],
    event: EventSpec,
    chat: ChatProvider,
    seed: int = 0,
) -> FlatBlock:
    """Summarize the event from exactly the claim-cited paragraphs.

    The model sees only that subset, numbered 1..K, so the executive
    summary can never cite material the Q&A layer did not; markers
    outside 1..K are stripped with a warning.
    """
    if not cited_paragraphs:
        raise StageError(
            "no supported claims anywhere: executive summary has no sources",
            stage="report",
        )
    numbering = {i + 1: p.id for i, p in enumerate(cited_paragraphs)}
    passages = "\n".join(
        f"[{i + 1}] {p.text}" for i, p in enumerate(cited_paragraphs)
    )
    body_raw = _chat_text(
        chat,
        render_prompt(
            "executive_summary",
            event_name=event.name,
            country=event.country,
            passages=passages,
        ),
        seed=derive_seed(seed, "executive-summary"),
        what="executive summary",
    )
    body = strip_unknown_markers(body_raw, numbering, "executive summary")
    return FlatBlock(text=body, citations=numbering)


# ---------------------------------------------------------------------------
# Global reindexing.


def _validate_view_consistency(draft: ReportDraft) -> None:
    topic_ids = [e.question_id for s in draft.qa_by_topic for e in s.entries]
    if len(set(topic_ids)) != len(topic_ids):
        raise ReportIntegrityError("a question appears twice in the by-topic view")
    expected: dict[str, set[int | None]] = {}
    for section in draft.qa_by_topic:
        for entry in section.entries:
            expected[entry.question_id] = set(entry.sdgs) or {None}
    seen: dict[str, set[int | None]] = {qid: set() for qid in expected}
    for section in draft.qa_by_sdg:
        for entry in section.entries:
            if entry.question_id not in expected:
                raise ReportIntegrityError(
                    f"question {entry.question_id} is in the by-SDG view only"
                )
            if section.sdg in seen[entry.question_id]:
                raise ReportIntegrityError(
                    f"question {entry.question_id} appears twice under SDG {section.sdg}"
                )
            seen[entry.question_id].add(section.sdg)
    for question_id, sdgs in expected.items():
        if seen[question_id] != sdgs:
            raise ReportIntegrityError(
                f"question {question_id} SDG placement {sorted(seen[question_id], key=str)} "
                f"does not match its tags {sorted(sdgs, key=str)}"
            )


class _GlobalNumbering:
    def __init__(self) -> None:
        self.by_paragraph: dict[str, int] = {}
        self.order: list[str] = []

    def assign(self, paragraph_id: str) -> int:
        if paragraph_id not in self.by_paragraph:
            self.by_paragraph[paragraph_id] = len(self.by_paragraph) + 1
            self.order.append(paragraph_id)
        return self.by_paragraph[paragraph_id]

    def renumber_block(
        self, citations: Mapping[int, str], used: Iterable[int], context: str
    ) -> dict[int, int]:
        mapping: dict[int, int] = {}
        for local in used:
            if local not in citations:
                raise ReportIntegrityError(
                    f"{context}: marker [{local}] has no local citation entry"
                )
            mapping[local] = self.assign(citations[local])
        return mapping


def _flat_markers(text: str) -> list[int]:
    numbers: list[int] = []
    for match in _MARKER_RUN_RE.finditer(text):
        for n in re.findall(r"\d+", match.group("body")):
            number = int(n)
            if number not in numbers:
                numbers.append(number)
    return numbers


def reindex_citations(
    draft: ReportDraft,
    paragraphs: Sequence[Paragraph],
    documents: Sequence[Document],
    metadata: ReportMetadata | None = None,
) -> Report:
    """Assign global citation numbers and build the registry.

    Numbers follow first appearance scanning the executive summary, then
    the four views in order; every citation of the same paragraph, in any
    view, shares one number.  A marker without a local citation entry is
    a pipeline bug and raises; so does a citation of a paragraph missing
    from the corpus.
    """
    _validate_view_consistency(draft)
    paragraphs_by_id = {p.id: p for p in paragraphs}
    documents_by_id = {d.id: d for d in documents}
    numbering = _GlobalNumbering()

    exec_map = numbering.renumber_block(
        draft.executive.citations, _flat_markers(draft.executive.text), "executive summary"
    )
    executive_text = _renumber_flat(draft.executive, exec_map, "executive summary")

    def rebuild_entries(entries: Sequence[QAEntryDraft], where: str) -> tuple[QAEntry, ...]:
        out: list[QAEntry] = []
        for entry in entries:
            mapping = numbering.renumber_block(
                entry.block.citations,
                entry.block.cited_numbers(),
                f"{where} answer {entry.question_id}",
            )
            out.append(
                QAEntry(
                    question_id=entry.question_id,
                    question_text=entry.question_text,
                    sdgs=entry.sdgs,
                    answer_text=_answer_display_text(entry.block, mapping),
                    low_confidence=entry.low_confidence,
                )
            )
        return tuple(out)

    qa_by_topic = tuple(
        TopicSection(
            cluster_label=section.cluster_label,
            entries=rebuild_entries(section.entries, f"topic {section.cluster_label}"),
        )
        for section in draft.qa_by_topic
    )
    qa_by_sdg = tuple(
        SDGSection(
            sdg=section.sdg,
            entries=rebuild_entries(section.entries, f"sdg {section.sdg}"),
        )
        for section in draft.qa_by_sdg
    )
    topic_summaries = []
    for summary in draft.topic_summaries:
        context = f"cluster {summary.cluster_label} summary"
        mapping = numbering.renumber_block(
            summary.citations, _flat_markers(summary.body), context
        )
        topic_summaries.append(
            ClusterSummary(
                cluster_label=summary.cluster_label,
                headline=summary.headline,
                body=_renumber_flat(
                    FlatBlock(summary.body, summary.citations), mapping, context
                ),
                citations={},
            )
        )
    sdg_summaries = []
    for summary in draft.sdg_summaries:
        context = f"sdg {summary.sdg} summary"
        mapping = numbering.renumber_block(
            summary.citations, _flat_markers(summary.body), context
        )
        sdg_summaries.append(
            SDGSummary(
                sdg=summary.sdg,
                body=_renumber_flat(
                    FlatBlock(summary.body, summary.citations), mapping, context
                ),
                citations={},
            )
        )

    entries: list[RegistryEntry] = []
    for position, paragraph_id in enumerate(numbering.order, start=1):
        paragraph = paragraphs_by_id.get(paragraph_id)
        if paragraph is None:
            raise ReportIntegrityError(
                f"registry paragraph {paragraph_id} is not in the event corpus"
            )
        document = documents_by_id.get(paragraph.doc_id)
        if document is None:
            raise ReportIntegrityError(
                f"registry paragraph {paragraph_id} has no document {paragraph.doc_id}"
            )
        entries.append(
            RegistryEntry(
                number=position,
                paragraph_id=paragraph_id,
                doc_title=document.title,
                doc_url=document.url,
                paragraph_text=paragraph.text,
            )
        )
    return Report(
        event=draft.event,
        executive_summary=executive_text,
        qa_by_topic=qa_by_topic,
        qa_by_sdg=qa_by_sdg,
        topic_summaries=tuple(topic_summaries),
        sdg_summaries=tuple(sdg_summaries),
        registry=CitationRegistry(entries=tuple(entries)),
        metadata=metadata or ReportMetadata(),
    )


# ---------------------------------------------------------------------------
# Rendering.


def report_to_dict(report: Report) -> dict:
    """The structured (JSON-ready) form of a reindexed report."""
    return {
        "schema_version": SCHEMA_VERSION,
        "event": {
            "name": report.event.name,
            "country": report.event.country,
            "start_date": report.event.start_date.isoformat(),
            "end_date": report.event.end_date.isoformat(),
        },
        "executive_summary": report.executive_summary,
        "views": {
            "qa_by_topic": [
                {
                    "cluster_label": section.cluster_label,
                    "entries": [_entry_dict(e) for e in section.entries],
                }
                for section in report.qa_by_topic
            ],
            "qa_by_sdg": [
                {
                    "sdg": section.sdg,
                    "title": section.title,
                    "entries": [_entry_dict(e) for e in section.entries],
                }
                for section in report.qa_by_sdg
            ],
            "topic_summaries": [
                {
                    "cluster_label": s.cluster_label,
                    "headline": s.headline,
                    "body": s.body,
                }
                for s in report.topic_summaries
            ],
            "sdg_summaries": [
                {
                    "sdg": s.sdg,
                    "title": UNCLASSIFIED if s.sdg is None else f"SDG {s.sdg}: {SDG_NAMES[s.sdg]}",
                    "body": s.body,
                }
                for s in report.sdg_summaries
            ],
        },
        "registry": [
            {
                "number": e.number,
                "paragraph_id": e.paragraph_id,
                "doc_title": e.doc_title,
                "doc_url": e.doc_url,
                "paragraph_text": e.paragraph_text,
            }
            for e in report.registry.entries
        ],
        "metadata": {
            "models": dict(report.metadata.models),
            "config_hash": report.metadata.config_hash,
            "timings_path": report.metadata.timings_path,
        },
    }


def _entry_dict(entry: QAEntry) -> dict:
    return {
        "question_id": entry.question_id,
        "question": entry.question_text,
        "sdgs": list(entry.sdgs),
        "answer": entry.answer_text,
        "low_confidence": entry.low_confidence,
    }


def report_from_dict(payload: Mapping) -> Report:
    """Rebuild a report from its structured form (inverse of report_to_dict).

    This is what lets a completed run re-render its outputs without any
    provider calls: the persisted structured document carries everything.
    """
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise ContractError(
            f"unsupported report schema_version {payload.get('schema_version')!r}"
        )
    event = payload["event"]
    views = payload["views"]

    def entry(data: Mapping) -> QAEntry:
        return QAEntry(
            question_id=data["question_id"],
            question_text=data["question"],
            sdgs=tuple(data["sdgs"]),
            answer_text=data["answer"],
            low_confidence=data["low_confidence"],
        )

    metadata = payload["metadata"]
    return Report(
        event=EventSpec(
            name=event["name"],
            country=event["country"],
            start_date=date.fromisoformat(event["start_date"]),
            end_date=date.fromisoformat(event["end_date"]),
        ),
        executive_summary=payload["executive_summary"],
        qa_by_topic=tuple(
            TopicSection(
                cluster_label=section["cluster_label"],
                entries=tuple(entry(e) for e in section["entries"]),
            )
            for section in views["qa_by_topic"]
        ),
        qa_by_sdg=tuple(
            SDGSection(
                sdg=section["sdg"],
                entries=tuple(entry(e) for e in section["entries"]),
            )
            for section in views["qa_by_sdg"]
        ),
        topic_summaries=tuple(
            ClusterSummary(
                cluster_label=s["cluster_label"], headline=s["headline"], body=s["body"]
            )
            for s in views["topic_summaries"]
        ),
        sdg_summaries=tuple(
            SDGSummary(sdg=s["sdg"], body=s["body"]) for s in views["sdg_summaries"]
        ),
        registry=CitationRegistry(
            entries=tuple(
                RegistryEntry(
                    number=e["number"],
                    paragraph_id=e["paragraph_id"],
                    doc_title=e["doc_title"],
                    doc_url=e["doc_url"],
                    paragraph_text=e["paragraph_text"],
                )
                for e in payload["registry"]
            )
        ),
        metadata=ReportMetadata(
            models=dict(metadata["models"]),
            config_hash=metadata["config_hash"],
            timings_path=metadata["timings_path"],
        ),
    )


def _linkify(text: str, max_number: int) -> str:
    """Escape text and turn citation markers into registry anchors."""
    escaped = html.escape(text)

    def link(match: re.Match[str]) -> str:
        numbers = [int(n) for n in re.findall(r"\d+", match.group("body"))]
        if any(n < 1 or n > max_number for n in numbers):
            return match.group(0)  # literal bracketed text, not a citation
        linked = ", ".join(f'<a href="#cite-{n}">{n}</a>' for n in numbers)
        return f"{match.group('lead')}[{linked}]"

    return _MARKER_RUN_RE.sub(link, escaped)


_PAGE_STYLE = """
body { font-family: Georgia, 'Times New Roman', serif; margin: 0 auto;
       max-width: 56rem; padding: 1rem 1.5rem 4rem; color: #1a1a1a; }
h1 { font-size: 1.6rem; margin-bottom: 0.2rem; }
.subtitle { color: #555; margin-top: 0; }
nav { display: flex; gap: 0.5rem; flex-wrap: wrap; margin: 1rem 0; }
nav button { padding: 0.45rem 0.9rem; border: 1px solid #888; background: #f5f5f5;
             cursor: pointer; font: inherit; border-radius: 4px; }
nav button.active { background: #1a1a1a; color: #fff; border-color: #1a1a1a; }
section.view { display: none; }
section.view.active { display: block; }
.exec { background: #f3f6fa; border-left: 4px solid #33557a; padding: 0.8rem 1rem;
        margin-bottom: 1.5rem; }
article.qa { margin-bottom: 1.2rem; }
article.qa .q { font-weight: bold; }
.badge { font-size: 0.75rem; color: #8a5200; border: 1px solid #c98a1b;
         border-radius: 3px; padding: 0 0.3rem; margin-left: 0.4rem; }
.summary { margin-bottom: 1.6rem; }
.summary h3 { margin-bottom: 0.3rem; }
ol.registry li { margin-bottom: 0.8rem; }
ol.registry .ptext { color: #444; display: block; margin-top: 0.15rem; }
a { color: #33557a; }
""".strip()

_PAGE_SCRIPT = """
function showView(name) {
  document.querySelectorAll('section.view').forEach(function (s) {
    s.classList.toggle('active', s.dataset.view === name);
  });
  document.querySelectorAll('nav button').forEach(function (b) {
    b.classList.toggle('active', b.dataset.view === name);
  });
}
document.querySelectorAll('nav button').forEach(function (b) {
  b.addEventListener('click', function () { showView(b.dataset.view); });
});
showView('qa-by-topic');
""".strip()


def render_static_page(report: Report) -> str:
    """One self-contained page: four switchable views plus the registry."""
    n = len(report.registry)
    exec_html = (
        f'<div class="exec"><h2>Executive summary</h2>'
        f"<p>{_linkify(report.executive_summary, n)}</p></div>"
    )

    def qa_articles(entries: Sequence[QAEntry]) -> str:
        blocks = []
        for entry in entries:
            badge = '<span class="badge">low confidence</span>' if entry.low_confidence else ""
            blocks.append(
                '<article class="qa">'
                f'<p class="q">{html.escape(entry.question_text)}{badge}</p>'
                f"<p>{_linkify(entry.answer_text, n)}</p>"
                "</article>"
            )
        return "".join(blocks)

    view_sections: list[tuple[str, str, str]] = []
    topic_html = "".join(
        f"<h2>Topic {section.cluster_label}</h2>{qa_articles(section.entries)}"
        for section in report.qa_by_topic
    )
    view_sections.append(("qa-by-topic", "Q&amp;A by topic", topic_html))
    sdg_html = "".join(
        f"<h2>{html.escape(section.title)}</h2>{qa_articles(section.entries)}"
        for section in report.qa_by_sdg
    )
    view_sections.append(("qa-by-sdg", "Q&amp;A by SDG", sdg_html))
    topic_summary_html = "".join(
        '<div class="summary">'
        f"<h3>{html.escape(s.headline)}</h3>"
        f'<p class="subtitle">Topic {s.cluster_label}</p>'
        f"<p>{_linkify(s.body, n)}</p></div>"
        for s in report.topic_summaries
    )
    view_sections.append(("topic-summaries", "Topic summaries", topic_summary_html))
    sdg_summary_html = "".join(
        '<div class="summary">'
        f"<h3>{html.escape(UNCLASSIFIED if s.sdg is None else f'SDG {s.sdg}: {SDG_NAMES[s.sdg]}')}</h3>"
        f"<p>{_linkify(s.body, n)}</p></div>"
        for s in report.sdg_summaries
    )
    view_sections.append(("sdg-summaries", "SDG summaries", sdg_summary_html))

    nav = "".join(
        f'<button type="button" data-view="{key}">{label}</button>'
        for key, label, _ in view_sections
    )
    sections = "".join(
        f'<section class="view" data-view="{key}">{exec_html}{body}</section>'
        for key, _, body in view_sections
    )
    registry_items = "".join(
        f'<li id="cite-{e.number}" value="{e.number}">'
        f'<a href="{html.escape(e.doc_url, quote=True)}">{html.escape(e.doc_title)}</a>'
        f' <span class="pid">({html.escape(e.paragraph_id)})</span>'
        f'<span class="ptext">{html.escape(e.paragraph_text)}</span></li>'
        for e in report.registry.entries
    )
    event = report.event
    return (
        "<!DOCTYPE html>\n"
        '<html lang="en"><head><meta charset="utf-8">'
        f"<title>{html.escape(event.name)}</title>"
        f"<style>{_PAGE_STYLE}</style></head><body>"
        f"<h1>{html.escape(event.name)}</h1>"
        f'<p class="subtitle">{html.escape(event.country)} &middot; '
        f"{event.start_date.isoformat()} to {event.end_date.isoformat()}</p>"
        f"<noscript><style>section.view{{display:block}}</style></noscript>"
        f"<nav>{nav}</nav>{sections}"
        f'<h2 id="sources">Sources</h2><ol class="registry">{registry_items}</ol>'
        f"<script>{_PAGE_SCRIPT}</script>"
        "</body></html>\n"
    )


def render_report(
    report: Report,
    output_dir: Path | str,
    formats: Iterable[str] = KNOWN_FORMATS,
) -> dict[str, Path]:
    """Write the requested formats; rendering is a pure function of the report."""
    requested = set(formats)
    unknown = requested - KNOWN_FORMATS
    if unknown:
        raise ContractError(f"unknown report formats: {sorted(unknown)}")
    if not requested:
        raise ContractError("no report formats requested")
    directory = Path(output_dir)
    outputs: dict[str, Path] = {}
    try:
        directory.mkdir(parents=True, exist_ok=True)
        if STRUCTURED in requested:
            path = directory / "report.json"
            payload = json.dumps(report_to_dict(report), indent=2, ensure_ascii=False)
            path.write_text(payload + "\n", encoding="utf-8")
            outputs[STRUCTURED] = path
        if STATIC_PAGE in requested:
            path = directory / "report.html"
            path.write_text(render_static_page(report), encoding="utf-8")
            outputs[STATIC_PAGE] = path
    except OSError as exc:
        raise StageError(f"failed to write report output under {directory}: {exc}",
                         stage="report") from exc
    return outputs
