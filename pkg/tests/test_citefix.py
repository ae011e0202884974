"""Tests for citation correction: scores, actions and audit records."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest

from sitrepgen.answers import Answer, Claim, RetrievedPassage
from sitrepgen.citefix import (
    CorrectionAction,
    CorrectionConfig,
    CorrectionRecord,
    claim_doc_score,
    correct_citations,
    correction_counts,
    cosine,
    jaccard,
)
from sitrepgen.errors import ContractError
from sitrepgen.ingest import Paragraph

PASSAGE_TEXTS = [
    "Flood waters closed the coastal highway near Black River.",
    "Shelters hosted four hundred displaced people in church halls.",
    "Power crews restored electricity across the parish on Friday.",
]


def make_passages() -> list[Paragraph]:
    return [
        Paragraph(id=f"d{i}#p0", doc_id=f"d{i}", ordinal=0, text=text, sentence_count=1)
        for i, text in enumerate(PASSAGE_TEXTS)
    ]


def make_answer(claim_specs: list[tuple[str, tuple[int, ...]]]) -> Answer:
    claims = [
        Claim(text=text, citation_ids=cites, raw_span=text + " ")
        for text, cites in claim_specs
    ]
    passages = tuple(
        RetrievedPassage(paragraph_id=f"d{i}#p0", score=1.0 - i * 0.1, rank=i + 1)
        for i in range(len(PASSAGE_TEXTS))
    )
    return Answer(
        question_id="q0",
        raw_text="".join(c.raw_span for c in claims),
        claims=claims,
        passages=passages,
    )


def embeddings():
    query = np.array([1.0, 0.0])
    passages = [np.array([1.0, 0.0]), np.array([0.6, 0.8]), np.array([0.0, 1.0])]
    return query, passages


LEXICAL_ONLY = CorrectionConfig(lambda_weight=1.0, threshold=0.3)


class TestJaccard:
    def test_known_overlap(self):
        assert jaccard("a b c", "b c d") == pytest.approx(0.5)

    def test_case_and_punctuation_folded(self):
        assert jaccard("Flood, waters!", "flood waters") == 1.0

    def test_both_empty_is_one(self):
        assert jaccard("", "...") == 1.0

    def test_one_empty_is_zero(self):
        assert jaccard("", "flood") == 0.0

    def test_symmetric(self):
        assert jaccard("a b", "b c") == jaccard("b c", "a b")


class TestCosine:
    def test_known_value(self):
        assert cosine(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(
            1 / math.sqrt(2)
        )

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ContractError):
            cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0]))

    def test_zero_vector_rejected(self):
        with pytest.raises(ContractError):
            cosine(np.zeros(2), np.array([1.0, 0.0]))


class TestClaimDocScore:
    def test_hand_computed_blend(self):
        config = CorrectionConfig(lambda_weight=0.8, threshold=0.3)
        score = claim_doc_score(
            "a b c", "b c d", np.array([1.0, 0.0]), np.array([1.0, 1.0]), config
        )
        expected = 0.8 * 0.5 + 0.2 * (1 / math.sqrt(2))
        assert score == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("lam", [0.0, 0.5, 0.8, 1.0])
    def test_matches_direct_formula_on_random_inputs(self, lam):
        rng = random.Random(lam)
        words = ["flood", "shelter", "water", "power", "road", "farm", "aid", "team"]
        for _ in range(5):
            claim = " ".join(rng.sample(words, rng.randint(1, 5)))
            passage = " ".join(rng.sample(words, rng.randint(1, 6)))
            query_vec = np.array([rng.uniform(-1, 1) for _ in range(4)]) + 0.01
            passage_vec = np.array([rng.uniform(-1, 1) for _ in range(4)]) + 0.01
            config = CorrectionConfig(lambda_weight=lam, threshold=0.3)
            got = claim_doc_score(claim, passage, query_vec, passage_vec, config)
            expected = lam * jaccard(claim, passage) + (1 - lam) * cosine(query_vec, passage_vec)
            assert got == pytest.approx(expected, abs=1e-12)


class TestCorrectionConfig:
    @pytest.mark.parametrize("kwargs", [{"lambda_weight": 1.1}, {"threshold": -0.2}])
    def test_validation(self, kwargs):
        with pytest.raises(ContractError):
            CorrectionConfig(**kwargs)


class TestCorrectionRecord:
    def test_removed_cannot_keep_citations(self):
        with pytest.raises(ContractError):
            CorrectionRecord(0, (1,), (1,), 0.1, 1, CorrectionAction.REMOVED)

    def test_non_removed_requires_citations(self):
        with pytest.raises(ContractError):
            CorrectionRecord(0, (1,), (), 0.9, 1, CorrectionAction.CONFIRMED)


class TestCorrectCitations:
    def run(self, claim_specs, config=LEXICAL_ONLY):
        answer = make_answer(claim_specs)
        query, passage_vecs = embeddings()
        return correct_citations(answer, make_passages(), query, passage_vecs, config)

    def test_correct_citation_confirmed(self):
        answer, records = self.run(
            [("Shelters hosted four hundred displaced people in church halls.", (2,))]
        )
        (record,) = records
        assert record.action is CorrectionAction.CONFIRMED
        assert answer.claims[0].citation_ids == (2,)
        assert record.best_passage == 2

    def test_multi_citation_claim_survives_confirmation(self):
        answer, records = self.run(
            [("Flood waters closed the coastal highway near Black River.", (1, 3))]
        )
        assert records[0].action is CorrectionAction.CONFIRMED
        assert answer.claims[0].citation_ids == (1, 3)

    def test_wrong_citation_replaced_with_argmax(self):
        answer, records = self.run(
            [("Flood waters closed the coastal highway near Black River.", (3,))]
        )
        assert records[0].action is CorrectionAction.REPLACED
        assert answer.claims[0].citation_ids == (1,)

    def test_uncited_claim_gets_added_citation(self):
        answer, records = self.run(
            [("Power crews restored electricity across the parish on Friday.", ())]
        )
        assert records[0].action is CorrectionAction.ADDED
        assert answer.claims[0].citation_ids == (3,)

    def test_unsupported_claim_loses_citations(self, caplog):
        with caplog.at_level("WARNING"):
            answer, records = self.run([("Bananas and cassava crops were ruined.", (1,))])
        assert records[0].action is CorrectionAction.REMOVED
        assert answer.claims[0].citation_ids == ()
        assert answer.claims[0].unsupported is True
        assert "unsupported" in caplog.text
        assert records[0].best_score < 0.3

    def test_out_of_range_citation_never_survives(self):
        answer, records = self.run(
            [("Flood waters closed the coastal highway near Black River.", (9,))]
        )
        assert records[0].action is CorrectionAction.REPLACED
        assert answer.claims[0].citation_ids == (1,)

    def test_confirmed_claim_drops_out_of_range_extras(self, caplog):
        with caplog.at_level("WARNING"):
            answer, records = self.run(
                [("Flood waters closed the coastal highway near Black River.", (1, 9))]
            )
        assert records[0].action is CorrectionAction.CONFIRMED
        assert answer.claims[0].citation_ids == (1,)
        assert "out-of-range" in caplog.text

    def test_best_score_recorded_for_every_action(self):
        answer, records = self.run(
            [
                ("Shelters hosted four hundred displaced people in church halls.", (2,)),
                ("Bananas and cassava crops were ruined.", ()),
            ]
        )
        assert all(isinstance(r.best_score, float) for r in records)
        assert records[0].best_score > records[1].best_score

    def test_claim_text_never_modified(self):
        text = "Flood waters closed the coastal highway near Black River."
        answer, _ = self.run([(text, (3,))])
        assert answer.claims[0].text == text

    def test_semantic_component_can_rescue_short_claims(self):
        # With lambda 0 the score is pure cosine; every best passage is the
        # one whose embedding matches the query direction.
        config = CorrectionConfig(lambda_weight=0.0, threshold=0.3)
        answer, records = self.run([("Totally unrelated words.", ())], config=config)
        assert records[0].action is CorrectionAction.ADDED
        assert answer.claims[0].citation_ids == (1,)

    def test_alignment_validation(self):
        answer = make_answer([("Anything.", ())])
        query, passage_vecs = embeddings()
        with pytest.raises(ContractError):
            correct_citations(answer, make_passages()[:2], query, passage_vecs, LEXICAL_ONLY)
        with pytest.raises(ContractError):
            correct_citations(answer, make_passages(), query, passage_vecs[:2], LEXICAL_ONLY)

    def test_counts_histogram(self):
        _, records = self.run(
            [
                ("Shelters hosted four hundred displaced people in church halls.", (2,)),
                ("Bananas and cassava crops were ruined.", (1,)),
            ]
        )
        counts = correction_counts(records)
        assert counts["confirmed"] == 1
        assert counts["removed"] == 1
        assert counts["replaced"] == 0
