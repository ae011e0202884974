"""Corpus loading, event filtering, text normalization and segmentation.

The ingestion contract is deliberately strict: documents arrive as JSONL,
every record is validated individually (missing fields are reported with
their line numbers), duplicate document ids abort the load, and text is
normalized into plain ASCII-ish prose before being segmented into
paragraphs of at most four sentences.  Segmentation preserves content:
joining a document's paragraph texts with single spaces reconstructs the
normalized document text exactly.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable

from .errors import ContractError, CorpusError

logger = logging.getLogger(__name__)

#: Number of sentences grouped into one paragraph.
SENTENCES_PER_PARAGRAPH = 4

#: Default event window length in days (inclusive of both endpoints).
DEFAULT_WINDOW_DAYS = 7

#: Lowercased abbreviations (trailing periods stripped) that do not end a
#: sentence even when followed by whitespace and a capital letter.
SENTENCE_ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "gen", "col", "lt", "sgt", "rev",
        "sr", "jr", "st", "no", "vs", "etc", "approx", "dept", "est",
        "fig", "e.g", "i.e", "u.s", "u.n", "u.k", "a.m", "p.m",
    }
)

_REQUIRED_FIELDS = ("id", "title", "url", "source", "published_at", "country", "text")

# Unicode punctuation folded to ASCII during normalization.
_CHAR_MAP = str.maketrans(
    {
        "‘": "'", "’": "'", "‚": "'", "‛": "'",
        "“": '"', "”": '"', "„": '"', "‟": '"',
        "‐": "-", "‑": "-", "‒": "-", "–": "-",
        "—": "-", "―": "-", "−": "-",
        " ": " ", " ": " ", " ": " ", " ": " ",
        "…": "...",
    }
)

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_BULLET_RE = re.compile(r"[•‣▪●◦·⁃∙]")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class Document:
    """One source document as published (text already normalized)."""

    id: str
    title: str
    url: str
    source: str
    published_at: date
    country: str
    text: str


@dataclass(frozen=True)
class EventSpec:
    """A named event scoped to a country and an inclusive date window."""

    name: str
    country: str
    start_date: date
    end_date: date

    def __post_init__(self) -> None:
        if self.end_date < self.start_date:
            raise ContractError(
                f"event {self.name!r}: end_date {self.end_date} precedes "
                f"start_date {self.start_date}"
            )

    @classmethod
    def week(cls, name: str, country: str, start_date: date) -> "EventSpec":
        """Build an event with the default seven-day inclusive window."""
        return cls(name, country, start_date, start_date + timedelta(days=DEFAULT_WINDOW_DAYS - 1))


@dataclass(frozen=True)
class Paragraph:
    """A contiguous run of up to four sentences from one document.

    ``id`` embeds the parent document id and the paragraph's ordinal so it
    stays unique across the corpus and readable in citations.
    """

    id: str
    doc_id: str
    ordinal: int
    text: str
    sentence_count: int


def load_corpus(path: str | Path) -> list[Document]:
    """Load a JSONL corpus file into validated :class:`Document` records.

    Each non-blank line must be a JSON object carrying all required fields
    with non-empty ``id`` and ``text``.  Invalid records are collected and
    reported together in a :class:`CorpusError` keyed by line number; a
    duplicate document id aborts immediately.  Document text is normalized
    on load.  An empty file yields an empty list with a warning.
    """
    path = Path(path)
    documents: list[Document] = []
    seen_ids: dict[str, int] = {}
    problems: list[str] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
                continue
            if not isinstance(record, dict):
                problems.append(f"line {lineno}: record is not an object")
                continue
            missing = [f for f in _REQUIRED_FIELDS if f not in record]
            if missing:
                problems.append(f"line {lineno}: missing field(s) {', '.join(missing)}")
                continue
            wrong_type = [f for f in _REQUIRED_FIELDS if not isinstance(record[f], str)]
            if wrong_type:
                problems.append(
                    f"line {lineno}: non-string field(s) {', '.join(wrong_type)}"
                )
                continue
            doc_id = str(record["id"])
            if not doc_id:
                problems.append(f"line {lineno}: empty id")
                continue
            if doc_id in seen_ids:
                raise CorpusError(
                    f"{path}: duplicate document id {doc_id!r} on line {lineno} "
                    f"(first seen on line {seen_ids[doc_id]})"
                )
            seen_ids[doc_id] = lineno
            try:
                published = date.fromisoformat(str(record["published_at"]))
            except ValueError:
                problems.append(
                    f"line {lineno}: published_at {record['published_at']!r} "
                    "is not an ISO date"
                )
                continue
            text = normalize_text(str(record["text"]))
            if not text:
                problems.append(f"line {lineno}: text is empty after normalization")
                continue
            documents.append(
                Document(
                    id=doc_id,
                    title=str(record["title"]),
                    url=str(record["url"]),
                    source=str(record["source"]),
                    published_at=published,
                    country=str(record["country"]),
                    text=text,
                )
            )
    if problems:
        raise CorpusError(f"{path}: {len(problems)} invalid record(s):\n  " + "\n  ".join(problems))
    if not documents:
        logger.warning("corpus %s contained no documents", path)
    return documents


def filter_event(documents: Iterable[Document], event: EventSpec) -> list[Document]:
    """Select documents matching the event country and date window.

    Both window endpoints are inclusive.  Input order is preserved.  An
    empty selection is legal but logged as a warning because downstream
    stages will have nothing to work with.
    """
    selected = [
        doc
        for doc in documents
        if doc.country == event.country
        and event.start_date <= doc.published_at <= event.end_date
    ]
    if not selected:
        logger.warning(
            "event %r (%s, %s..%s) matched no documents",
            event.name, event.country, event.start_date, event.end_date,
        )
    return selected


def normalize_text(raw: str) -> str:
    """Normalize raw document text into single-spaced plain prose.

    Smart quotes and typographic dashes fold to ASCII, non-breaking and
    thin spaces become ordinary spaces, URLs and bullet glyphs are removed,
    and all whitespace runs (tabs and newlines included) collapse to single
    spaces.  The function is idempotent: normalizing twice equals
    normalizing once.
    """
    text = raw.translate(_CHAR_MAP)
    text = _URL_RE.sub(" ", text)
    text = _BULLET_RE.sub(" ", text)
    text = _WS_RE.sub(" ", text)
    return text.strip()


def split_sentences(text: str) -> list[str]:
    """Split normalized text into sentences, preserving content exactly.

    A boundary is terminal punctuation (``.``, ``!`` or ``?``, optionally
    repeated and optionally followed by a closing quote or bracket) that is
    followed by a space and a capital letter, digit or opening quote.
    Common abbreviations and single-letter initials do not end sentences.
    Joining the result with single spaces reconstructs the input.
    """
    if not text:
        return []
    sentences: list[str] = []
    start = 0
    for match in re.finditer(r"([.!?]+)([\"')\]]*)(?= \S)", text):
        boundary = match.end()
        nxt = text[boundary + 1]
        if not (nxt.isupper() or nxt.isdigit() or nxt in "\"'(["):
            continue
        prefix = text[start : match.start()]
        last_word = prefix.split()[-1] if prefix.split() else ""
        token = (last_word + match.group(1)).strip(".").lower()
        if token in SENTENCE_ABBREVIATIONS:
            continue
        if len(token) == 1 and token.isalpha():
            continue  # single-letter initial such as "J." in a name
        sentences.append(text[start:boundary])
        start = boundary + 1
    if start < len(text):
        sentences.append(text[start:])
    return sentences


def segment_document(doc: Document) -> list[Paragraph]:
    """Segment a document into paragraphs of up to four sentences each.

    Sentences are grouped in reading order into runs of
    :data:`SENTENCES_PER_PARAGRAPH`; a shorter remainder still becomes a
    paragraph.  Joining the paragraph texts with single spaces equals the
    document text.  A document with no sentences yields no paragraphs and
    a warning.
    """
    sentences = split_sentences(doc.text)
    if not sentences:
        logger.warning("document %s has no sentences; skipping", doc.id)
        return []
    paragraphs: list[Paragraph] = []
    for ordinal, pos in enumerate(range(0, len(sentences), SENTENCES_PER_PARAGRAPH)):
        group = sentences[pos : pos + SENTENCES_PER_PARAGRAPH]
        paragraphs.append(
            Paragraph(
                id=f"{doc.id}#p{ordinal}",
                doc_id=doc.id,
                ordinal=ordinal,
                text=" ".join(group),
                sentence_count=len(group),
            )
        )
    return paragraphs


def segment_corpus(documents: Iterable[Document]) -> list[Paragraph]:
    """Segment every document, concatenating paragraphs in document order."""
    out: list[Paragraph] = []
    for doc in documents:
        out.extend(segment_document(doc))
    return out
