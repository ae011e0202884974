"""Tests for retrieval, query expansion, rank fusion and claim parsing."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from fusion_reference import reference_rrf
from sitrepgen.answers import (
    Answer,
    Claim,
    DenseRetrieverBackend,
    RetrievedPassage,
    answer_question,
    build_index,
    expand_query,
    generate_answer,
    parse_claims,
    retrieve,
    rrf_fuse,
)
from sitrepgen.errors import ContractError, ProviderError, StageError
from sitrepgen.ingest import Paragraph
from sitrepgen.providers import MockChatProvider, MockEmbeddingProvider
from sitrepgen.questions import Question


def make_paragraph(i: int, text: str) -> Paragraph:
    return Paragraph(id=f"d{i}#p0", doc_id=f"d{i}", ordinal=0, text=text, sentence_count=1)


def corpus() -> list[Paragraph]:
    return [
        make_paragraph(0, "Flood waters closed the coastal highway near Black River."),
        make_paragraph(1, "Shelters in Saint Elizabeth hosted four hundred displaced people."),
        make_paragraph(2, "Cholera vaccination teams resumed clinics on Wednesday."),
        make_paragraph(3, "Power crews restored electricity to half the parish."),
        make_paragraph(4, "Farm losses include bananas, plantains and cassava fields."),
    ]


def make_question(text: str = "How many people are in shelters?") -> Question:
    return Question(id="c0-r0-q0", cluster_label=0, text=text, origin_round=0)


class TestBuildIndexAndRetrieve:
    def test_index_covers_every_paragraph(self):
        index = build_index(corpus(), MockEmbeddingProvider(dim=64))
        assert index.paragraph_ids == tuple(p.id for p in corpus())

    def test_empty_corpus_rejected(self):
        with pytest.raises(ContractError):
            build_index([], MockEmbeddingProvider(dim=64))

    def test_duplicate_paragraph_ids_rejected(self):
        paragraph = make_paragraph(0, "Text.")
        with pytest.raises(ContractError, match="unique"):
            build_index([paragraph, paragraph], MockEmbeddingProvider(dim=64))

    def test_retrieve_ranks_lexical_match_first(self):
        index = build_index(corpus(), MockEmbeddingProvider(dim=256))
        hits = retrieve(index, "How many displaced people are in shelters?", k=3)
        assert hits[0].paragraph_id == "d1#p0"

    def test_ranks_are_gapless_and_scores_non_increasing(self):
        index = build_index(corpus(), MockEmbeddingProvider(dim=64))
        hits = retrieve(index, "flood impact", k=5)
        assert [h.rank for h in hits] == [1, 2, 3, 4, 5]
        scores = [h.score for h in hits]
        assert scores == sorted(scores, reverse=True)

    def test_k_larger_than_corpus_returns_everything(self):
        index = build_index(corpus(), MockEmbeddingProvider(dim=64))
        assert len(retrieve(index, "anything", k=50)) == len(corpus())

    def test_retrieval_is_deterministic(self):
        index = build_index(corpus(), MockEmbeddingProvider(dim=64))
        first = retrieve(index, "flood", k=5)
        second = retrieve(index, "flood", k=5)
        assert first == second

    def test_invalid_arguments(self):
        index = build_index(corpus(), MockEmbeddingProvider(dim=64))
        with pytest.raises(ContractError):
            retrieve(index, "  ", k=3)
        with pytest.raises(ContractError):
            retrieve(index, "flood", k=0)


class TestExpandQuery:
    def test_original_first_plus_parsed_variants(self):
        reply = "1. How many are sheltered?\n2. What is the shelter population?"
        chat = MockChatProvider(responder=lambda req: reply)
        variants = expand_query("How many people are in shelters?", chat, n_variants=3)
        assert variants == [
            "How many people are in shelters?",
            "How many are sheltered?",
            "What is the shelter population?",
        ]

    def test_duplicates_and_blanks_dropped(self):
        reply = "How many people are in shelters?\n\nWhere are shelters located?"
        chat = MockChatProvider(responder=lambda req: reply)
        variants = expand_query("How many people are in shelters?", chat, n_variants=4)
        assert variants == [
            "How many people are in shelters?",
            "Where are shelters located?",
        ]

    def test_truncates_to_n_variants(self):
        reply = "\n".join(f"Variant number {i}?" for i in range(10))
        chat = MockChatProvider(responder=lambda req: reply)
        assert len(expand_query("Original?", chat, n_variants=4)) == 4

    def test_single_variant_skips_chat(self):
        chat = MockChatProvider()  # would raise if called
        assert expand_query("Original?", chat, n_variants=1) == ["Original?"]
        assert chat.calls == []

    def test_provider_failure_falls_back_to_original(self, caplog):
        def explode(req):
            raise ProviderError("boom", status=500)

        chat = MockChatProvider(responder=explode)
        with caplog.at_level("WARNING"):
            variants = expand_query("Original?", chat, n_variants=4)
        assert variants == ["Original?"]
        assert "question only" in caplog.text


class TestRrfFuse:
    def test_hand_checked_example(self):
        # p1 and p3 each take a first and a third place (1/61 + 1/63); p2
        # takes two seconds (2/62), which is strictly smaller.  The p1/p3
        # tie breaks lexicographically.
        fused = rrf_fuse([["p1", "p2", "p3"], ["p3", "p2", "p1"]], k_const=60.0)
        assert [p.paragraph_id for p in fused] == ["p1", "p3", "p2"]
        assert fused[0].score == pytest.approx(1 / 61 + 1 / 63)
        assert fused[2].score == pytest.approx(2 / 62)
        assert fused[0].score > fused[2].score

    def test_matches_reference_on_random_fixtures(self):
        rng = random.Random(99)
        for _ in range(25):
            universe = [f"p{i}" for i in range(rng.randint(2, 10))]
            rankings = []
            for _ in range(rng.randint(1, 4)):
                pool = universe[:]
                rng.shuffle(pool)
                rankings.append(pool[: rng.randint(1, len(pool))])
            fused = rrf_fuse(rankings)
            expected = reference_rrf(rankings)
            assert [(p.paragraph_id, pytest.approx(p.score)) for p in fused] == [
                (pid, pytest.approx(score)) for pid, score in expected
            ]

    def test_ranking_order_of_inputs_is_irrelevant(self):
        rankings = [["a", "b", "c"], ["c", "a"], ["b"]]
        forward = rrf_fuse(rankings)
        backward = rrf_fuse(list(reversed(rankings)))
        assert forward == backward

    def test_repeated_id_within_ranking_rejected(self):
        with pytest.raises(ContractError):
            rrf_fuse([["a", "a"]])

    def test_empty_input_rejected(self):
        with pytest.raises(ContractError):
            rrf_fuse([])


class TestParseClaims:
    def test_post_punctuation_citations(self):
        claims = parse_claims("Roads closed. [1] Shelters opened. [2]")
        assert [(c.text, c.citation_ids) for c in claims] == [
            ("Roads closed.", (1,)),
            ("Shelters opened.", (2,)),
        ]

    def test_pre_punctuation_citations(self):
        claims = parse_claims("Roads closed [1]. Shelters opened [2][3].")
        assert [(c.text, c.citation_ids) for c in claims] == [
            ("Roads closed.", (1,)),
            ("Shelters opened.", (2, 3)),
        ]

    def test_comma_groups(self):
        (claim,) = parse_claims("Aid arrived by boat [3, 7].")
        assert claim.citation_ids == (3, 7)
        assert claim.text == "Aid arrived by boat."

    def test_mid_sentence_brackets_are_text(self):
        (claim,) = parse_claims("Shelters [3, 4] opened early.")
        assert claim.citation_ids == ()
        assert claim.text == "Shelters [3, 4] opened early."

    def test_year_bracket_not_a_citation(self):
        claims = parse_claims("In [2019] rainfall peaked. Roads flooded [2].")
        assert claims[0].citation_ids == ()
        assert claims[1].citation_ids == (2,)

    def test_tail_without_terminator(self):
        claims = parse_claims("Roads closed. Shelters remain open [4]")
        assert [(c.text, c.citation_ids) for c in claims] == [
            ("Roads closed.", ()),
            ("Shelters remain open", (4,)),
        ]

    def test_duplicate_citation_numbers_collapse(self):
        (claim,) = parse_claims("Roads closed [2][2].")
        assert claim.citation_ids == (2,)

    def test_abbreviations_do_not_split(self):
        (claim,) = parse_claims("Dr. Lee toured the approx. 40 damaged farms [1].")
        assert claim.text == "Dr. Lee toured the approx. 40 damaged farms."
        assert claim.citation_ids == (1,)

    def test_spans_reconstruct_raw_text(self):
        raw = "Roads closed [1].  Shelters opened. [2] Final note [3]"
        claims = parse_claims(raw)
        assert "".join(c.raw_span for c in claims) == raw

    def test_empty_text(self):
        assert parse_claims("") == []
        assert parse_claims("   ") == []

    @given(
        st.lists(
            st.tuples(
                st.sampled_from(
                    [
                        "Roads were closed",
                        "Shelters opened early",
                        "Water levels keep rising",
                        "Crews restored power lines",
                    ]
                ),
                st.lists(st.integers(min_value=1, max_value=9), min_size=0, max_size=3),
                st.sampled_from(["pre", "post"]),
            ),
            min_size=1,
            max_size=6,
        )
    )
    def test_reconstruction_property(self, pieces):
        parts = []
        expected = []
        for body, cites, style in pieces:
            run = "".join(f"[{n}]" for n in cites)
            if cites and style == "pre":
                parts.append(f"{body} {run}. ")
            elif cites:
                parts.append(f"{body}. {run} ")
            else:
                parts.append(f"{body}. ")
            expected.append((f"{body}.", tuple(dict.fromkeys(cites))))
        raw = "".join(parts).rstrip()
        claims = parse_claims(raw)
        assert "".join(c.raw_span for c in claims) == raw
        assert [(c.text, c.citation_ids) for c in claims] == expected


class TestGenerateAnswer:
    def context(self, n: int = 3):
        paragraphs = corpus()[:n]
        context = [
            RetrievedPassage(paragraph_id=p.id, score=1.0 - 0.1 * i, rank=i + 1)
            for i, p in enumerate(paragraphs)
        ]
        return context, {p.id: p for p in paragraphs}

    def test_passages_numbered_in_prompt_and_claims_parsed(self):
        context, lookup = self.context()
        chat = MockChatProvider(responder=lambda req: "Shelters hosted 400 people [2]. Roads stayed closed [1].")
        answer = generate_answer(make_question(), context, lookup, chat)
        prompt = chat.calls[0].prompt
        assert "[1] Flood waters closed" in prompt
        assert "[2] Shelters in Saint Elizabeth" in prompt
        assert [c.citation_ids for c in answer.claims] == [(2,), (1,)]
        assert not answer.low_confidence

    def test_out_of_range_citation_flagged(self, caplog):
        context, lookup = self.context(2)
        chat = MockChatProvider(responder=lambda req: "Power was restored [7].")
        with caplog.at_level("WARNING"):
            answer = generate_answer(make_question(), context, lookup, chat)
        assert answer.claims[0].out_of_range is True
        assert "outside 1..2" in caplog.text

    def test_uncited_claim_flagged(self, caplog):
        context, lookup = self.context()
        chat = MockChatProvider(responder=lambda req: "Power was restored. Roads reopened [1].")
        with caplog.at_level("WARNING"):
            answer = generate_answer(make_question(), context, lookup, chat)
        assert answer.claims[0].uncited is True
        assert answer.claims[1].uncited is False

    def test_disclaimer_marks_low_confidence(self):
        context, lookup = self.context()
        chat = MockChatProvider(
            responder=lambda req: "The sources do not provide clear answers to that."
        )
        answer = generate_answer(make_question(), context, lookup, chat)
        assert answer.low_confidence is True
        assert answer.raw_text == "The sources do not provide clear answers to that."

    def test_empty_reply_is_stage_error(self):
        context, lookup = self.context()
        chat = MockChatProvider(responder=lambda req: "   ")
        with pytest.raises(StageError, match="empty answer"):
            generate_answer(make_question(), context, lookup, chat)

    def test_empty_context_rejected(self):
        with pytest.raises(ContractError):
            generate_answer(make_question(), [], {}, MockChatProvider(responder=lambda r: "x"))


class TestAnswerQuestion:
    def test_end_to_end_over_mock_index(self):
        index = build_index(corpus(), MockEmbeddingProvider(dim=256))

        def responder(req):
            if "Rewrite the question" in req.prompt:
                return "What is the shelter population?\nHow many residents were displaced?"
            return "Shelters hosted four hundred displaced people [1]."

        chat = MockChatProvider(responder=responder)
        answer = answer_question(
            make_question(), index, chat, n_variants=3, retrieval_depth=4, context_size=2
        )
        assert answer.question_id == "c0-r0-q0"
        assert len(answer.passages) == 2
        assert answer.claims[0].citation_ids == (1,)
        assert all(p.rank == i + 1 for i, p in enumerate(answer.passages))
