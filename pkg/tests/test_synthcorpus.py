"""Tests for the bundled synthetic corpus and its generator."""

from __future__ import annotations

import json

from sitrepgen.ingest import filter_event, load_corpus, segment_corpus
from sitrepgen.synthcorpus import (
    EVENT,
    TOPICS,
    bundled_corpus_path,
    generate_corpus,
    main,
    write_corpus,
)


class TestGenerator:
    def test_same_seed_same_corpus(self) -> None:
        assert generate_corpus(seed=4) == generate_corpus(seed=4)

    def test_different_seed_different_corpus(self) -> None:
        assert generate_corpus(seed=0) != generate_corpus(seed=1)

    def test_topic_strands_plus_two_distractors(self) -> None:
        records = generate_corpus(docs_per_topic=3)
        assert len(records) == len(TOPICS) * 3 + 2
        ids = [record["id"] for record in records]
        assert len(set(ids)) == len(ids)

    def test_distractors_fall_outside_the_event(self) -> None:
        by_id = {record["id"]: record for record in generate_corpus()}
        off_island = by_id["offisland-90"]
        stale = by_id["stale-91"]
        assert off_island["country"] != EVENT.country
        assert stale["published_at"] < EVENT.start_date.isoformat()

    def test_in_window_documents_match_the_event(self) -> None:
        for record in generate_corpus():
            if record["id"] in ("offisland-90", "stale-91"):
                continue
            assert record["country"] == EVENT.country
            assert (
                EVENT.start_date.isoformat()
                <= record["published_at"]
                <= EVENT.end_date.isoformat()
            )


class TestBundledFile:
    def test_bundled_corpus_is_regenerable(self) -> None:
        # The shipped file must equal the generator's seed-0 output so the
        # fixture can always be audited and rebuilt.
        shipped = bundled_corpus_path().read_text(encoding="utf-8")
        lines = [
            json.dumps(record, ensure_ascii=False, sort_keys=True)
            for record in generate_corpus(seed=0)
        ]
        assert shipped == "\n".join(lines) + "\n"

    def test_bundled_corpus_loads_and_filters(self) -> None:
        documents = load_corpus(bundled_corpus_path())
        in_window = filter_event(documents, EVENT)
        assert len(documents) - len(in_window) == 2
        paragraphs = segment_corpus(in_window)
        assert len(paragraphs) > len(in_window)

    def test_every_document_is_segmentable(self) -> None:
        documents = filter_event(load_corpus(bundled_corpus_path()), EVENT)
        paragraphs = segment_corpus(documents)
        assert {p.doc_id for p in paragraphs} == {d.id for d in documents}


class TestWriter:
    def test_write_round_trips_through_corpus_loader(self, tmp_path) -> None:
        path = write_corpus(tmp_path / "corpus.jsonl", generate_corpus(seed=2))
        documents = load_corpus(path)
        assert len(documents) == len(TOPICS) * 7 + 2

    def test_main_writes_requested_path(self, tmp_path, capsys) -> None:
        target = tmp_path / "out" / "corpus.jsonl"
        assert main(["--out", str(target), "--seed", "0"]) == 0
        assert target.read_text(encoding="utf-8") == bundled_corpus_path().read_text(
            encoding="utf-8"
        )
        assert str(target) in capsys.readouterr().out
