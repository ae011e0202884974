"""Deterministic synthetic corpus for offline runs and tests.

The bundled corpus describes one fictional storm response in Jamaica
over the week of 2024-07-08 to 2024-07-14.  It contains four topic
strands — shelters, water and sanitation, agriculture, and power — each
with its own heavy vocabulary so that token-based embeddings separate
them cleanly, plus two distractor documents (wrong country, stale date)
that event filtering must drop.

Everything is generated from a seeded RNG: regenerating with the same
seed reproduces the bundled file byte for byte, which a test asserts so
the checked-in data cannot drift from the generator.
"""

from __future__ import annotations

import argparse
import json
import random
from dataclasses import dataclass
from datetime import date, timedelta
from importlib import resources
from pathlib import Path
from typing import Iterable

from .ingest import EventSpec

EVENT = EventSpec(
    name="Tropical Storm Mirella",
    country="JM",
    start_date=date(2024, 7, 8),
    end_date=date(2024, 7, 14),
)

DOCS_PER_TOPIC = 7

_SOURCES = ("Relief Desk", "Island Wire", "Crisis Monitor", "Parish Bulletin")


@dataclass(frozen=True)
class TopicSpec:
    slug: str
    title: str
    sentences: tuple[str, ...]


TOPICS: tuple[TopicSpec, ...] = (
    TopicSpec(
        slug="shelter",
        title="Shelter network",
        sentences=(
            "Emergency shelters in Portland registered 1,240 residents overnight.",
            "Evacuation orders moved coastal families into parish shelters before nightfall.",
            "Shelter managers reported cots and blankets running low in Clarendon.",
            "Volunteers expanded shelter capacity at two schools in Trelawny.",
            "Families returning from shelters found roofs stripped by the storm.",
            "The shelter registry lists 38 active sites across six parishes.",
            "Evacuees at the Hanover shelter asked for baby formula and hygiene kits.",
            "Red Cross teams delivered bedding to shelters in Westmoreland.",
            "Two shelters lost access roads and received supplies by boat.",
            "Shelter occupancy fell as repairs allowed evacuees to return home.",
            "Officials opened an additional shelter after flooding in Manchester.",
            "Shelter wardens recorded medical needs among elderly evacuees.",
            "Evacuation buses carried residents from low-lying districts to shelters.",
            "Damaged shelters were consolidated and residents moved to safer sites.",
        ),
    ),
    TopicSpec(
        slug="water",
        title="Water and sanitation",
        sentences=(
            "Water trucks reached cut-off communities in Clarendon with 20,000 litres.",
            "The utility restored piped water to half of the affected parishes.",
            "Chlorine tablets were distributed to households using rain barrels.",
            "Engineers repaired the Trelawny pumping station after flood damage.",
            "Sanitation teams cleared blocked drains to prevent contaminated runoff.",
            "Residents queued for drinking water at distribution points in Hanover.",
            "Testing found elevated turbidity in three rural water systems.",
            "Hygiene kits with soap and purification sachets reached 2,400 families.",
            "A burst main left Westmoreland villages relying on trucked water.",
            "Latrines at relief sites were serviced to reduce sanitation risks.",
            "The water authority published a boil-water advisory for flooded districts.",
            "Desilting crews worked to bring the Manchester treatment plant back online.",
            "Aid agencies installed bladder tanks at clinics lacking running water.",
            "Leak repairs cut water losses along the damaged coastal pipeline.",
        ),
    ),
    TopicSpec(
        slug="crops",
        title="Agriculture impact",
        sentences=(
            "Banana plantations in Portland lost most of their standing crop.",
            "Farmers reported flattened plantain fields across the eastern parishes.",
            "The agriculture ministry estimated crop losses above 60 percent.",
            "Livestock farmers moved goats and cattle to higher pastures.",
            "Extension officers surveyed damaged coffee farms in the highlands.",
            "Seed and fertiliser distributions began for smallholder farmers.",
            "Cold storage failures spoiled harvested produce awaiting transport.",
            "Fisher cooperatives lost traps and boats along the southern coast.",
            "Irrigation channels silted up after the rivers burst their banks.",
            "Market prices for vegetables rose as farm supply contracted.",
            "Poultry houses in Clarendon reported significant bird losses.",
            "Agronomists advised replanting fast-maturing crops before August.",
            "Cane fields near Westmoreland stood underwater for a third day.",
            "Farm roads remained impassable, delaying harvest collection.",
        ),
    ),
    TopicSpec(
        slug="power",
        title="Power restoration",
        sentences=(
            "Utility crews replaced snapped poles along the northern grid.",
            "Power was restored to 70 percent of customers by Thursday.",
            "A damaged substation kept Manchester communities in darkness.",
            "Generators supported hospitals while grid repairs continued.",
            "Fallen lines blocked two highways until crews cleared them.",
            "The electricity company flew in transformers for storm repairs.",
            "Outage maps showed scattered faults across rural feeders.",
            "Line inspectors found salt damage on coastal insulators.",
            "Crews prioritised water pumping stations for reconnection.",
            "Street lighting remained out in parts of Trelawny.",
            "The grid operator warned of rotating cuts during peak hours.",
            "Solar kits were issued to clinics awaiting grid reconnection.",
            "Telecom towers ran on batteries where mains power failed.",
            "Restoration targets slipped in districts with flooded access roads.",
        ),
    ),
)


def _document(
    rng: random.Random,
    topic: TopicSpec,
    index: int,
    published: date,
    country: str,
    doc_id: str | None = None,
) -> dict:
    count = rng.choice((8, 12))
    sentences = rng.sample(topic.sentences, k=count)
    return {
        "id": doc_id or f"{topic.slug}-{index:02d}",
        "title": f"{topic.title} update {index}",
        "url": f"https://news.example/{doc_id or f'{topic.slug}-{index:02d}'}",
        "source": _SOURCES[index % len(_SOURCES)],
        "published_at": published.isoformat(),
        "country": country,
        "text": " ".join(sentences),
    }


def generate_corpus(seed: int = 0, docs_per_topic: int = DOCS_PER_TOPIC) -> list[dict]:
    """The full synthetic corpus: topic strands plus two distractors."""
    rng = random.Random(seed)
    records: list[dict] = []
    for topic in TOPICS:
        for index in range(1, docs_per_topic + 1):
            published = EVENT.start_date + timedelta(days=(index - 1) % 7)
            records.append(_document(rng, topic, index, published, EVENT.country))
    # Same week, different country: event filtering must drop it.
    records.append(
        _document(rng, TOPICS[0], 90, EVENT.start_date + timedelta(days=2), "HT",
                  doc_id="offisland-90")
    )
    # Same country, stale date: event filtering must drop it.
    records.append(
        _document(rng, TOPICS[1], 91, EVENT.start_date - timedelta(days=18),
                  EVENT.country, doc_id="stale-91")
    )
    return records


def write_corpus(path: Path | str, records: Iterable[dict]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(record, ensure_ascii=False, sort_keys=True) for record in records]
    target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return target


def bundled_corpus_path() -> Path:
    """Filesystem path of the corpus shipped inside the package."""
    return Path(str(resources.files("sitrepgen") / "data" / "synthetic_corpus.jsonl"))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Regenerate the synthetic corpus.")
    parser.add_argument("--out", default="synthetic_corpus.jsonl", help="output JSONL path")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    path = write_corpus(args.out, generate_corpus(seed=args.seed))
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
