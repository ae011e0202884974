"""Tests for summaries, citation reindexing and report rendering."""

from __future__ import annotations

import json
import logging
from datetime import date
from pathlib import Path

import pytest

from sitrepgen.answers import Answer, Claim, RetrievedPassage
from sitrepgen.errors import ContractError, ReportIntegrityError, StageError
from sitrepgen.ingest import Document, EventSpec, Paragraph
from sitrepgen.prompts import render_prompt
from sitrepgen.providers import MockChatProvider
from sitrepgen.questions import Question, SDGLabel
from sitrepgen.reporting import (
    AnswerBlock,
    CitationRegistry,
    ClusterSummary,
    FlatBlock,
    RegistryEntry,
    Report,
    ReportDraft,
    ReportMetadata,
    SDGSummary,
    answer_block,
    build_sdg_sections,
    build_topic_sections,
    collect_cited_paragraphs,
    executive_summary,
    format_marker,
    qa_entry_draft,
    reindex_citations,
    render_report,
    render_static_page,
    report_from_dict,
    report_to_dict,
    strip_unknown_markers,
    summarize_cluster,
    summarize_sdg,
)


def make_document(doc_id: str = "d1", title: str = "Flood update") -> Document:
    return Document(
        id=doc_id,
        title=title,
        url=f"https://example.org/{doc_id}",
        source="Relief Agency",
        published_at=date(2024, 7, 10),
        country="JM",
        text="",
    )


def make_paragraph(pid: str, text: str = "Shelters opened across the parish.") -> Paragraph:
    doc_id = pid.split("#")[0]
    ordinal = int(pid.split("#p")[1])
    return Paragraph(id=pid, doc_id=doc_id, ordinal=ordinal, text=text, sentence_count=1)


def make_event() -> EventSpec:
    return EventSpec(
        name="Hurricane Beryl",
        country="JM",
        start_date=date(2024, 7, 8),
        end_date=date(2024, 7, 14),
    )


def make_answer(
    question_id: str,
    claims: list[tuple[str, tuple[int, ...]]],
    passages: list[tuple[int, str]],
    low_confidence: bool = False,
) -> Answer:
    claim_objs = [
        Claim(text=text, citation_ids=ids, raw_span=text) for text, ids in claims
    ]
    passage_objs = tuple(
        RetrievedPassage(paragraph_id=pid, score=1.0 / rank, rank=rank)
        for rank, pid in passages
    )
    return Answer(
        question_id=question_id,
        raw_text=" ".join(text for text, _ in claims),
        claims=claim_objs,
        passages=passage_objs,
        low_confidence=low_confidence,
    )


def make_question(
    question_id: str = "c0-r0-q0",
    cluster_label: int = 0,
    text: str = "How many shelters are open?",
    sdgs: tuple[int, ...] = (),
) -> Question:
    return Question(
        id=question_id,
        cluster_label=cluster_label,
        text=text,
        origin_round=0,
        sdgs=tuple(SDGLabel(v) for v in sdgs),
    )


class TestAnswerBlock:
    def test_segments_mirror_claims_and_map_mirrors_passages(self) -> None:
        answer = make_answer(
            "c0-r0-q0",
            claims=[("Twelve shelters opened.", (1, 3)), ("Roads remain closed.", ())],
            passages=[(1, "d1#p0"), (2, "d1#p1"), (3, "d2#p0")],
        )
        block = answer_block(answer)
        assert [s.text for s in block.segments] == [
            "Twelve shelters opened.",
            "Roads remain closed.",
        ]
        assert block.segments[0].citations == (1, 3)
        assert block.citations == {1: "d1#p0", 2: "d1#p1", 3: "d2#p0"}

    def test_cited_numbers_deduplicate_in_first_appearance_order(self) -> None:
        answer = make_answer(
            "c0-r0-q0",
            claims=[("A.", (2,)), ("B.", (1, 2))],
            passages=[(1, "d1#p0"), (2, "d1#p1")],
        )
        assert answer_block(answer).cited_numbers() == [2, 1]

    def test_citation_outside_context_rejected(self) -> None:
        answer = make_answer(
            "c0-r0-q0", claims=[("A.", (5,))], passages=[(1, "d1#p0")]
        )
        with pytest.raises(ContractError, match="outside its context"):
            answer_block(answer)

    def test_entry_requires_matching_question_and_answer(self) -> None:
        question = make_question("c0-r0-q0")
        answer = make_answer("c9-r0-q9", claims=[("A.", ())], passages=[])
        with pytest.raises(ContractError, match="paired with"):
            qa_entry_draft(question, answer)


class TestBuildSections:
    def _pairs(self) -> list[tuple[Question, Answer]]:
        q1 = make_question("c0-r0-q0", cluster_label=0, sdgs=(3, 6))
        q2 = make_question("c1-r0-q0", cluster_label=1, sdgs=())
        q3 = make_question("c1-r0-q1", cluster_label=1, sdgs=(3,))
        answers = [
            make_answer(q.id, claims=[("A.", (1,))], passages=[(1, "d1#p0")])
            for q in (q1, q2, q3)
        ]
        return list(zip([q1, q2, q3], answers))

    def test_topic_sections_sorted_by_label(self) -> None:
        pairs = self._pairs()
        sections = build_topic_sections(list(reversed(pairs)))
        assert [s.cluster_label for s in sections] == [0, 1]
        assert [e.question_id for e in sections[1].entries] == ["c1-r0-q1", "c1-r0-q0"]

    def test_sdg_sections_ascending_with_unclassified_last(self) -> None:
        sections = build_sdg_sections(self._pairs())
        assert [s.sdg for s in sections] == [3, 6, None]

    def test_multi_sdg_question_appears_under_each_tag(self) -> None:
        sections = build_sdg_sections(self._pairs())
        by_sdg = {s.sdg: [e.question_id for e in s.entries] for s in sections}
        assert by_sdg[3] == ["c0-r0-q0", "c1-r0-q1"]
        assert by_sdg[6] == ["c0-r0-q0"]
        assert by_sdg[None] == ["c1-r0-q0"]


class TestStripUnknownMarkers:
    def test_known_runs_are_normalized(self) -> None:
        assert strip_unknown_markers("Aid arrived. [1,2]", {1, 2}, "t") == "Aid arrived. [1, 2]"
        assert strip_unknown_markers("Aid arrived.[1,2]", {1, 2}, "t") == "Aid arrived.[1, 2]"

    def test_unknown_run_removed_without_double_space(
        self, caplog: pytest.LogCaptureFixture
    ) -> None:
        with caplog.at_level(logging.WARNING):
            cleaned = strip_unknown_markers("Aid arrived. [99] More follows.", {1}, "t")
        assert cleaned == "Aid arrived. More follows."
        assert any("[99]" in r.message for r in caplog.records)

    def test_partially_known_run_keeps_known_numbers(self) -> None:
        assert strip_unknown_markers("Aid arrived. [1, 99]", {1}, "t") == "Aid arrived. [1]"

    def test_marker_format_round_trip(self) -> None:
        assert format_marker([3, 7]) == "[3, 7]"
        with pytest.raises(ContractError):
            format_marker([])


def scripted_chat(script: dict[str, str]) -> MockChatProvider:
    return MockChatProvider.from_prompts(script)


class TestSummarizeCluster:
    def _pairs(self) -> list[tuple[Question, Answer]]:
        q1 = make_question("c0-r0-q0", text="How many shelters?")
        q2 = make_question("c0-r0-q1", text="What about water?")
        a1 = make_answer(
            q1.id,
            claims=[("Twelve shelters opened.", (1,))],
            passages=[(1, "d1#p0"), (2, "d1#p1")],
        )
        # Cites the same paragraph d1#p0 under a different local rank.
        a2 = make_answer(
            q2.id,
            claims=[("Water trucks arrived.", (2,))],
            passages=[(1, "d2#p0"), (2, "d1#p0")],
        )
        return [(q1, a1), (q2, a2)]

    def test_group_numbering_merges_shared_paragraphs(self) -> None:
        pairs = self._pairs()
        chat = MockChatProvider(responder=lambda req: "Relief is under way. [1]")
        summary = summarize_cluster(0, pairs, chat, seed=1)
        # Both answers cite d1#p0; in the prompt they must share number 1.
        qa_prompt = chat.calls[0].prompt
        assert "Twelve shelters opened. [1]" in qa_prompt
        assert "Water trucks arrived. [1]" in qa_prompt
        assert summary.citations == {1: "d1#p0"}

    def test_novel_marker_stripped_with_warning(
        self, caplog: pytest.LogCaptureFixture
    ) -> None:
        replies = iter(["Relief is under way. [99]", "Relief headline"])
        chat = MockChatProvider(responder=lambda req: next(replies))
        with caplog.at_level(logging.WARNING):
            summary = summarize_cluster(0, self._pairs(), chat)
        assert summary.body == "Relief is under way."
        assert any("stripped" in r.message for r in caplog.records)

    def test_headline_comes_from_second_prompt_over_body(self) -> None:
        replies = iter(["Shelters and water restored. [1]", '"Shelters Reopen"'])
        chat = MockChatProvider(responder=lambda req: next(replies))
        summary = summarize_cluster(0, self._pairs(), chat)
        assert summary.headline == "Shelters Reopen"
        headline_prompt = chat.calls[1].prompt
        assert "Shelters and water restored. [1]" in headline_prompt

    def test_headline_markers_removed(self) -> None:
        replies = iter(["Body text. [1]", "Headline [1] with marker"])
        chat = MockChatProvider(responder=lambda req: next(replies))
        assert summarize_cluster(0, self._pairs(), chat).headline == "Headline with marker"

    def test_empty_cluster_rejected(self) -> None:
        with pytest.raises(ContractError, match="no answers"):
            summarize_cluster(0, [], MockChatProvider())

    def test_cluster_without_claims_rejected(self) -> None:
        question = make_question()
        answer = make_answer(question.id, claims=[], passages=[(1, "d1#p0")])
        with pytest.raises(ContractError, match="no claims"):
            summarize_cluster(0, [(question, answer)], MockChatProvider())

    def test_persistently_empty_summary_is_a_stage_error(self) -> None:
        chat = MockChatProvider(responder=lambda req: "   ")
        with pytest.raises(StageError, match="empty"):
            summarize_cluster(0, self._pairs(), chat)

    def test_summaries_run_deterministically_at_zero_temperature(self) -> None:
        chat = MockChatProvider(responder=lambda req: "Body. [1]")
        summarize_cluster(0, self._pairs(), chat, seed=7)
        assert all(call.temperature == 0.0 for call in chat.calls)
        assert all(call.seed is not None for call in chat.calls)


class TestSummarizeSDG:
    def test_prompt_names_the_goal(self) -> None:
        question = make_question(sdgs=(6,))
        answer = make_answer(question.id, claims=[("A.", (1,))], passages=[(1, "d1#p0")])
        chat = MockChatProvider(responder=lambda req: "Water access improved. [1]")
        summary = summarize_sdg(6, [(question, answer)], chat)
        assert summary.sdg == 6
        assert "SDG 6: Clean Water and Sanitation" in chat.calls[0].prompt

    def test_unclassified_group_supported(self) -> None:
        question = make_question()
        answer = make_answer(question.id, claims=[("A.", (1,))], passages=[(1, "d1#p0")])
        chat = MockChatProvider(responder=lambda req: "Assorted updates. [1]")
        summary = summarize_sdg(None, [(question, answer)], chat)
        assert summary.sdg is None
        assert "Unclassified" in chat.calls[0].prompt

    def test_empty_group_rejected(self) -> None:
        with pytest.raises(ContractError, match="no answers"):
            summarize_sdg(3, [], MockChatProvider())


class TestCollectCitedParagraphs:
    def test_union_over_post_correction_citations_sorted_by_id(self) -> None:
        a1 = make_answer(
            "q1", claims=[("A.", (2,))], passages=[(1, "d9#p0"), (2, "d1#p0")]
        )
        a2 = make_answer("q2", claims=[("B.", (1,)), ("C.", ())], passages=[(1, "d5#p0")])
        catalog = {pid: make_paragraph(pid) for pid in ("d1#p0", "d5#p0", "d9#p0")}
        cited = collect_cited_paragraphs([a1, a2], catalog)
        assert [p.id for p in cited] == ["d1#p0", "d5#p0"]

    def test_missing_paragraph_rejected(self) -> None:
        answer = make_answer("q1", claims=[("A.", (1,))], passages=[(1, "ghost#p0")])
        with pytest.raises(ContractError, match="missing from corpus"):
            collect_cited_paragraphs([answer], {})


class TestExecutiveSummary:
    def test_numbers_subset_in_order_and_validates_markers(
        self, caplog: pytest.LogCaptureFixture
    ) -> None:
        paragraphs = [make_paragraph("d1#p0", "First."), make_paragraph("d2#p0", "Second.")]
        chat = MockChatProvider(responder=lambda req: "Overview. [2] Detail. [7]")
        with caplog.at_level(logging.WARNING):
            block = executive_summary(paragraphs, make_event(), chat)
        assert block.citations == {1: "d1#p0", 2: "d2#p0"}
        assert block.text == "Overview. [2] Detail."
        assert "[1] First." in chat.calls[0].prompt
        assert "[2] Second." in chat.calls[0].prompt

    def test_empty_subset_is_a_stage_error(self) -> None:
        with pytest.raises(StageError, match="no sources"):
            executive_summary([], make_event(), MockChatProvider())


def build_draft() -> tuple[ReportDraft, list[Paragraph], list[Document]]:
    """A small two-cluster draft where one paragraph is cited everywhere."""
    documents = [make_document("d1", "Flood update"), make_document("d2", "Relief brief")]
    paragraphs = [
        make_paragraph("d1#p0", "Shelters opened in St. Mary."),
        make_paragraph("d1#p1", "Roads to the coast were cleared."),
        make_paragraph("d2#p0", "Water trucks reached three towns."),
    ]
    q1 = make_question("c0-r0-q0", cluster_label=0, text="How many shelters?", sdgs=(3,))
    q2 = make_question("c1-r0-q0", cluster_label=1, text="Water status?", sdgs=(3, 6))
    a1 = make_answer(
        q1.id,
        claims=[("Shelters opened.", (3,)), ("Roads cleared.", (1,))],
        passages=[(1, "d1#p1"), (2, "d2#p0"), (3, "d1#p0")],
    )
    a2 = make_answer(
        q2.id,
        claims=[("Trucks arrived.", (7,))],
        passages=[(7, "d2#p0"), (8, "d1#p0")],
    )
    pairs = [(q1, a1), (q2, a2)]
    executive = FlatBlock(
        text="Relief reached shelters. [2] Water followed. [1]",
        citations={1: "d2#p0", 2: "d1#p0"},
    )
    topic_summaries = (
        ClusterSummary(0, "Shelter recovery", "Shelters and roads recovered. [1]",
                       {1: "d1#p0", 2: "d1#p1"}),
        ClusterSummary(1, "Water logistics", "Water arrived by truck. [1]", {1: "d2#p0"}),
    )
    sdg_summaries = (
        SDGSummary(3, "Health access held up. [1]", {1: "d1#p0"}),
        SDGSummary(6, "Clean water was restored. [1]", {1: "d2#p0"}),
    )
    draft = ReportDraft(
        event=make_event(),
        executive=executive,
        qa_by_topic=build_topic_sections(pairs),
        qa_by_sdg=build_sdg_sections(pairs),
        topic_summaries=topic_summaries,
        sdg_summaries=sdg_summaries,
    )
    return draft, paragraphs, documents


class TestReindexCitations:
    def test_first_appearance_order_starts_with_executive_summary(self) -> None:
        draft, paragraphs, documents = build_draft()
        report = reindex_citations(draft, paragraphs, documents)
        # Executive summary cites [2]=d1#p0 first, then [1]=d2#p0.
        assert [e.paragraph_id for e in report.registry.entries] == [
            "d1#p0", "d2#p0", "d1#p1",
        ]
        assert report.executive_summary == "Relief reached shelters. [1] Water followed. [2]"

    def test_shared_paragraph_gets_one_global_number(self) -> None:
        draft, paragraphs, documents = build_draft()
        report = reindex_citations(draft, paragraphs, documents)
        # d1#p0 is local [3] in answer 1 and local [8] in answer 2; both
        # must render as the global [1].
        topic_entries = {
            e.question_id: e.answer_text
            for s in report.qa_by_topic
            for e in s.entries
        }
        assert topic_entries["c0-r0-q0"] == "Shelters opened. [1] Roads cleared. [3]"
        assert topic_entries["c1-r0-q0"] == "Trucks arrived. [2]"

    def test_registry_is_contiguous_and_unique(self) -> None:
        draft, paragraphs, documents = build_draft()
        report = reindex_citations(draft, paragraphs, documents)
        numbers = [e.number for e in report.registry.entries]
        assert numbers == list(range(1, len(numbers) + 1))
        pids = [e.paragraph_id for e in report.registry.entries]
        assert len(set(pids)) == len(pids)

    def test_registry_carries_title_url_and_text(self) -> None:
        draft, paragraphs, documents = build_draft()
        report = reindex_citations(draft, paragraphs, documents)
        first = report.registry.entries[0]
        assert first == RegistryEntry(
            number=1,
            paragraph_id="d1#p0",
            doc_title="Flood update",
            doc_url="https://example.org/d1",
            paragraph_text="Shelters opened in St. Mary.",
        )

    def test_summaries_rewritten_to_global_numbers(self) -> None:
        draft, paragraphs, documents = build_draft()
        report = reindex_citations(draft, paragraphs, documents)
        assert report.topic_summaries[0].body == "Shelters and roads recovered. [1]"
        assert report.sdg_summaries[1].body == "Clean water was restored. [2]"

    def test_unknown_marker_is_a_pipeline_bug(self) -> None:
        draft, paragraphs, documents = build_draft()
        broken = ReportDraft(
            event=draft.event,
            executive=FlatBlock(text="Summary. [9]", citations={1: "d1#p0"}),
            qa_by_topic=draft.qa_by_topic,
            qa_by_sdg=draft.qa_by_sdg,
            topic_summaries=draft.topic_summaries,
            sdg_summaries=draft.sdg_summaries,
        )
        with pytest.raises(ReportIntegrityError, match=r"\[9\]"):
            reindex_citations(broken, paragraphs, documents)

    def test_cited_paragraph_missing_from_corpus_rejected(self) -> None:
        draft, paragraphs, documents = build_draft()
        with pytest.raises(ReportIntegrityError, match="not in the event corpus"):
            reindex_citations(draft, paragraphs[1:], documents)

    def test_duplicate_question_in_topic_view_rejected(self) -> None:
        draft, paragraphs, documents = build_draft()
        doubled = ReportDraft(
            event=draft.event,
            executive=draft.executive,
            qa_by_topic=draft.qa_by_topic + (draft.qa_by_topic[0],),
            qa_by_sdg=draft.qa_by_sdg,
            topic_summaries=draft.topic_summaries,
            sdg_summaries=draft.sdg_summaries,
        )
        with pytest.raises(ReportIntegrityError, match="appears twice"):
            reindex_citations(doubled, paragraphs, documents)

    def test_sdg_placement_must_match_question_tags(self) -> None:
        draft, paragraphs, documents = build_draft()
        trimmed = ReportDraft(
            event=draft.event,
            executive=draft.executive,
            qa_by_topic=draft.qa_by_topic,
            qa_by_sdg=draft.qa_by_sdg[:1],  # drop SDG 6 section
            topic_summaries=draft.topic_summaries,
            sdg_summaries=draft.sdg_summaries,
        )
        with pytest.raises(ReportIntegrityError, match="does not match its tags"):
            reindex_citations(trimmed, paragraphs, documents)

    def test_literal_brackets_in_claim_text_survive(self) -> None:
        question = make_question("c0-r0-q0", sdgs=())
        answer = make_answer(
            question.id,
            claims=[("In [2019] floods hit twice.", (1,))],
            passages=[(1, "d1#p0")],
        )
        pairs = [(question, answer)]
        draft = ReportDraft(
            event=make_event(),
            executive=FlatBlock(text="Overview. [1]", citations={1: "d1#p0"}),
            qa_by_topic=build_topic_sections(pairs),
            qa_by_sdg=build_sdg_sections(pairs),
            topic_summaries=(),
            sdg_summaries=(),
        )
        report = reindex_citations(draft, [make_paragraph("d1#p0")], [make_document("d1")])
        entry = report.qa_by_topic[0].entries[0]
        assert entry.answer_text == "In [2019] floods hit twice. [1]"


class TestRendering:
    def _report(self) -> Report:
        draft, paragraphs, documents = build_draft()
        metadata = ReportMetadata(
            models={"chat": "mock-chat", "embedding": "mock-embed"},
            config_hash="abc123",
            timings_path="timings.json",
        )
        return reindex_citations(draft, paragraphs, documents, metadata)

    def test_structured_output_has_versioned_schema(self, tmp_path: Path) -> None:
        outputs = render_report(self._report(), tmp_path, formats={"structured"})
        payload = json.loads(outputs["structured"].read_text())
        assert payload["schema_version"] == 1
        assert set(payload["views"]) == {
            "qa_by_topic", "qa_by_sdg", "topic_summaries", "sdg_summaries",
        }
        assert payload["registry"][0]["doc_title"] == "Flood update"
        assert payload["metadata"]["config_hash"] == "abc123"

    def test_rendering_twice_is_byte_identical(self, tmp_path: Path) -> None:
        report = self._report()
        first = render_report(report, tmp_path / "a")
        second = render_report(report, tmp_path / "b")
        for key in ("structured", "static-page"):
            assert first[key].read_bytes() == second[key].read_bytes()

    def test_page_has_four_views_each_with_executive_summary(self) -> None:
        page = render_static_page(self._report())
        assert page.count('<section class="view"') == 4
        assert page.count("Executive summary") == 4
        for label in ("Q&amp;A by topic", "Q&amp;A by SDG", "Topic summaries", "SDG summaries"):
            assert label in page

    def test_page_citations_show_text_title_and_link(self) -> None:
        page = render_static_page(self._report())
        assert 'href="https://example.org/d1"' in page
        assert "Flood update" in page
        assert "Shelters opened in St. Mary." in page
        assert 'id="cite-1"' in page
        assert 'href="#cite-1"' in page

    def test_page_is_self_contained(self) -> None:
        page = render_static_page(self._report())
        assert "<script src" not in page
        assert '<link rel="stylesheet"' not in page

    def test_unknown_format_rejected(self, tmp_path: Path) -> None:
        with pytest.raises(ContractError, match="unknown report formats"):
            render_report(self._report(), tmp_path, formats={"pdf"})

    def test_write_failure_surfaces_path(self, tmp_path: Path) -> None:
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        with pytest.raises(StageError, match="blocked"):
            render_report(self._report(), blocker)

    def test_report_dict_round_trips_through_json(self) -> None:
        payload = report_to_dict(self._report())
        assert json.loads(json.dumps(payload)) == payload

    def test_report_rebuilds_from_structured_form(self) -> None:
        report = self._report()
        rebuilt = report_from_dict(report_to_dict(report))
        assert report_to_dict(rebuilt) == report_to_dict(report)
        assert render_static_page(rebuilt) == render_static_page(report)

    def test_unsupported_schema_version_rejected(self) -> None:
        payload = report_to_dict(self._report())
        payload["schema_version"] = 99
        with pytest.raises(ContractError, match="schema_version"):
            report_from_dict(payload)


class TestRegistryInvariants:
    def test_non_contiguous_numbers_rejected(self) -> None:
        entries = (
            RegistryEntry(1, "d1#p0", "T", "https://x", "text"),
            RegistryEntry(3, "d1#p1", "T", "https://x", "text"),
        )
        with pytest.raises(ContractError, match="not contiguous"):
            CitationRegistry(entries=entries)

    def test_duplicate_paragraphs_rejected(self) -> None:
        entries = (
            RegistryEntry(1, "d1#p0", "T", "https://x", "text"),
            RegistryEntry(2, "d1#p0", "T", "https://x", "text"),
        )
        with pytest.raises(ContractError, match="not unique"):
            CitationRegistry(entries=entries)

    def test_number_lookup_by_paragraph(self) -> None:
        registry = CitationRegistry(
            entries=(RegistryEntry(1, "d1#p0", "T", "https://x", "text"),)
        )
        assert registry.number_for("d1#p0") == 1
        with pytest.raises(KeyError):
            registry.number_for("ghost")

    def test_citation_closure_on_reindexed_report(self) -> None:
        draft, paragraphs, documents = build_draft()
        report = reindex_citations(draft, paragraphs, documents)
        import re as _re

        cited: set[int] = set()
        texts = [report.executive_summary]
        texts += [e.answer_text for s in report.qa_by_topic for e in s.entries]
        texts += [e.answer_text for s in report.qa_by_sdg for e in s.entries]
        texts += [s.body for s in report.topic_summaries]
        texts += [s.body for s in report.sdg_summaries]
        for text in texts:
            for run in _re.findall(r"\[(\d+(?:, \d+)*)\]", text):
                cited.update(int(n) for n in run.split(", "))
        assert cited == {e.number for e in report.registry.entries}
