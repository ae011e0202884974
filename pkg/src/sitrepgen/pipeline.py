"""Pipeline orchestration: staged execution, caching and resume.

A run executes six stages in order — ingest, cluster, questions,
answers, citefix, report — and persists each stage's output under the
run's output directory as a JSON envelope.  Every envelope records the
stage's *cache key*: a hash of the stage name, the slice of the
configuration that stage actually consumes (plus the model identities
it calls), and the key of its input stage, chained back to a content
hash of the corpus file.  A rerun recomputes a stage only when its key
no longer matches — so editing, say, the correction threshold reruns
citefix and report but leaves ingest through answers untouched, while
editing the corpus file invalidates everything.

Provider construction is lazy: a fully cached run (including the
re-render of a finished report) never builds or calls a provider at
all.  Per-stage wall-clock timings go to a ``timings.json`` sidecar —
never into the report itself, which must stay byte-identical across
same-seed runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .answers import Answer, Claim, RetrievedPassage, answer_question, build_index
from .citefix import CorrectionRecord, correct_citations, correction_counts
from .clustering import (
    ClusterAssignment,
    ClusteringHyperparams,
    SearchResult,
    TrialRecord,
    group_by_cluster,
    search_hyperparams,
)
from .config import RunConfig, validate_paths
from .errors import ConfigError, ContractError
from .ingest import Document, EventSpec, Paragraph, filter_event, load_corpus, segment_corpus
from .offline import OfflineChat
from .providers import (
    CachingEmbeddingProvider,
    ChatProvider,
    DuplicateScorer,
    EmbeddingProvider,
    HttpChatProvider,
    HttpDuplicateScorer,
    HttpEmbeddingProvider,
    MockDuplicateScorer,
    MockEmbeddingProvider,
)
from .questions import (
    FilterVerdict,
    Question,
    SDGLabel,
    classify_sdg,
    dedupe_and_sample,
    derive_seed,
    filter_question,
    generate_questions,
)
from .reporting import (
    Report,
    ReportDraft,
    ReportMetadata,
    build_sdg_sections,
    build_topic_sections,
    collect_cited_paragraphs,
    executive_summary,
    reindex_citations,
    render_report,
    report_from_dict,
    report_to_dict,
    summarize_cluster,
    summarize_sdg,
)

logger = logging.getLogger(__name__)

#: Stage names in execution order.
STAGES = ("ingest", "cluster", "questions", "answers", "citefix", "report")


@dataclass(frozen=True)
class StageOutcome:
    name: str
    key: str
    cached: bool
    seconds: float
    detail: str


@dataclass(frozen=True)
class PipelineResult:
    config_hash: str
    stages: tuple[StageOutcome, ...]
    report: Report | None
    output_files: Mapping[str, Path]
    timings_path: Path | None


@dataclass
class ProviderBundle:
    chat: ChatProvider
    embedder: EmbeddingProvider
    scorer: DuplicateScorer
    models: dict[str, str]


def build_providers(config: RunConfig, mock: bool) -> ProviderBundle:
    """Construct the providers a run will use.

    Mock mode wires the offline stage-aware chat, hashed-token embeddings
    and the token-overlap duplicate scorer.  Real mode requires chat and
    embedding endpoints in the config; the duplicate scorer falls back to
    the local token-overlap heuristic when no endpoint is configured.
    """
    if mock:
        return ProviderBundle(
            chat=OfflineChat(seed=config.seed),
            embedder=MockEmbeddingProvider(),
            scorer=MockDuplicateScorer(),
            models={
                "chat": "offline-stage-chat",
                "embedding": "hashed-token-embedding",
                "duplicate_scorer": "token-overlap",
            },
        )
    roles = config.providers
    missing = [
        name
        for name, cfg in (("chat", roles.chat), ("embedding", roles.embedding))
        if cfg is None or not cfg.endpoint or not cfg.model_id
    ]
    if missing:
        raise ConfigError(
            f"providers.{' and providers.'.join(missing)} must configure an endpoint "
            "and model_id (or run with mock providers)"
        )
    assert roles.chat is not None and roles.embedding is not None
    embedder: EmbeddingProvider = HttpEmbeddingProvider(roles.embedding)
    if config.cache_dir is not None:
        embedder = CachingEmbeddingProvider(
            embedder, cache_dir=config.cache_dir, model_id=roles.embedding.model_id
        )
    if roles.duplicate_scorer is not None and roles.duplicate_scorer.endpoint:
        scorer: DuplicateScorer = HttpDuplicateScorer(roles.duplicate_scorer)
        scorer_model = roles.duplicate_scorer.model_id
    else:
        scorer = MockDuplicateScorer()
        scorer_model = "token-overlap"
    return ProviderBundle(
        chat=HttpChatProvider(roles.chat),
        embedder=embedder,
        scorer=scorer,
        models={
            "chat": roles.chat.model_id,
            "embedding": roles.embedding.model_id,
            "duplicate_scorer": scorer_model,
        },
    )


# ---------------------------------------------------------------------------
# Serialization of domain objects for stage envelopes.


def _document_dict(doc: Document) -> dict:
    return {
        "id": doc.id, "title": doc.title, "url": doc.url, "source": doc.source,
        "published_at": doc.published_at.isoformat(), "country": doc.country,
        "text": doc.text,
    }


def _document_from(data: Mapping) -> Document:
    from datetime import date

    return Document(
        id=data["id"], title=data["title"], url=data["url"], source=data["source"],
        published_at=date.fromisoformat(data["published_at"]),
        country=data["country"], text=data["text"],
    )


def _paragraph_dict(paragraph: Paragraph) -> dict:
    return {
        "id": paragraph.id, "doc_id": paragraph.doc_id, "ordinal": paragraph.ordinal,
        "text": paragraph.text, "sentence_count": paragraph.sentence_count,
    }


def _paragraph_from(data: Mapping) -> Paragraph:
    return Paragraph(
        id=data["id"], doc_id=data["doc_id"], ordinal=data["ordinal"],
        text=data["text"], sentence_count=data["sentence_count"],
    )


def _params_dict(params: ClusteringHyperparams) -> dict:
    return {
        "n_neighbors": params.n_neighbors, "min_dist": params.min_dist,
        "min_cluster_size": params.min_cluster_size, "min_samples": params.min_samples,
        "target_dim": params.target_dim, "seed": params.seed,
    }


def _params_from(data: Mapping) -> ClusteringHyperparams:
    return ClusteringHyperparams(**data)


def _trial_dict(trial: TrialRecord) -> dict:
    return {
        "index": trial.index, "params": _params_dict(trial.params),
        "dbcv": trial.dbcv, "llm_score": trial.llm_score,
        "combined": trial.combined, "error": trial.error,
    }


def _question_dict(question: Question) -> dict:
    verdict = question.verdict
    return {
        "id": question.id,
        "cluster_label": question.cluster_label,
        "text": question.text,
        "origin_round": question.origin_round,
        "verdict": None if verdict is None else {
            "specific_to_country": verdict.specific_to_country,
            "non_political": verdict.non_political,
            "current_not_historical": verdict.current_not_historical,
            "concrete_not_vague": verdict.concrete_not_vague,
            "keep": verdict.keep,
            "invalid": verdict.invalid,
        },
        "sdgs": [label.value for label in question.sdgs],
    }


def _question_from(data: Mapping) -> Question:
    verdict_data = data["verdict"]
    verdict = None if verdict_data is None else FilterVerdict(**verdict_data)
    return Question(
        id=data["id"],
        cluster_label=data["cluster_label"],
        text=data["text"],
        origin_round=data["origin_round"],
        verdict=verdict,
        sdgs=tuple(SDGLabel(v) for v in data["sdgs"]),
    )


def _answer_dict(answer: Answer) -> dict:
    return {
        "question_id": answer.question_id,
        "raw_text": answer.raw_text,
        "claims": [
            {
                "text": c.text, "citation_ids": list(c.citation_ids),
                "raw_span": c.raw_span, "out_of_range": c.out_of_range,
                "uncited": c.uncited, "unsupported": c.unsupported,
            }
            for c in answer.claims
        ],
        "passages": [
            {"paragraph_id": p.paragraph_id, "score": p.score, "rank": p.rank}
            for p in answer.passages
        ],
        "low_confidence": answer.low_confidence,
        "relevant": answer.relevant,
    }


def _answer_from(data: Mapping) -> Answer:
    return Answer(
        question_id=data["question_id"],
        raw_text=data["raw_text"],
        claims=[
            Claim(
                text=c["text"], citation_ids=tuple(c["citation_ids"]),
                raw_span=c["raw_span"], out_of_range=c["out_of_range"],
                uncited=c["uncited"], unsupported=c["unsupported"],
            )
            for c in data["claims"]
        ],
        passages=tuple(
            RetrievedPassage(
                paragraph_id=p["paragraph_id"], score=p["score"], rank=p["rank"]
            )
            for p in data["passages"]
        ),
        low_confidence=data["low_confidence"],
        relevant=data["relevant"],
    )


def _correction_dict(record: CorrectionRecord) -> dict:
    return {
        "claim_index": record.claim_index,
        "original_citations": list(record.original_citations),
        "corrected_citations": list(record.corrected_citations),
        "best_score": record.best_score,
        "best_passage": record.best_passage,
        "action": record.action.value,
    }


# ---------------------------------------------------------------------------
# Stage persistence.


class StageStore:
    """One JSON envelope per stage under ``<output_dir>/stages``."""

    def __init__(self, output_dir: Path) -> None:
        self.directory = output_dir / "stages"

    def path(self, stage: str) -> Path:
        return self.directory / f"{stage}.json"

    def load(self, stage: str, key: str) -> Any | None:
        path = self.path(stage)
        if not path.is_file():
            return None
        try:
            envelope = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            logger.warning("stage %s envelope at %s is unreadable; recomputing", stage, path)
            return None
        if envelope.get("stage") != stage or envelope.get("key") != key:
            logger.info("stage %s cache key changed; recomputing", stage)
            return None
        return envelope["payload"]

    def save(self, stage: str, key: str, payload: Any) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        envelope = {"stage": stage, "key": key, "payload": payload}
        self.path(stage).write_text(
            json.dumps(envelope, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )


def _stage_key(stage: str, fingerprint: str, input_key: str) -> str:
    material = f"{stage}\0{fingerprint}\0{input_key}"
    return hashlib.sha256(material.encode("utf-8")).hexdigest()[:16]


def _models_fingerprint(models: Mapping[str, str], *roles: str) -> str:
    return json.dumps({role: models.get(role, "") for role in roles}, sort_keys=True)


def _file_hash(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()[:16]


# ---------------------------------------------------------------------------
# The run itself.


class _Run:
    def __init__(self, config: RunConfig, mock_providers: bool, resume: bool) -> None:
        self.config = config
        self.mock_providers = mock_providers
        self.resume = resume
        self.store = StageStore(config.output_dir)
        self.outcomes: list[StageOutcome] = []
        self._bundle: ProviderBundle | None = None
        # Model identities are part of cache keys, so they must be known
        # without constructing providers (construction is lazy).
        if mock_providers:
            self.models = {
                "chat": "offline-stage-chat",
                "embedding": "hashed-token-embedding",
                "duplicate_scorer": "token-overlap",
            }
        else:
            roles = config.providers
            self.models = {
                "chat": roles.chat.model_id if roles.chat else "",
                "embedding": roles.embedding.model_id if roles.embedding else "",
                "duplicate_scorer": (
                    roles.duplicate_scorer.model_id
                    if roles.duplicate_scorer and roles.duplicate_scorer.endpoint
                    else "token-overlap"
                ),
            }

    @property
    def bundle(self) -> ProviderBundle:
        if self._bundle is None:
            self._bundle = build_providers(self.config, self.mock_providers)
        return self._bundle

    def run_stage(
        self, stage: str, key: str, compute: Callable[[], Any], describe: Callable[[Any], str]
    ) -> Any:
        cached = self.store.load(stage, key) if self.resume else None
        if cached is not None:
            outcome = StageOutcome(stage, key, True, 0.0, describe(cached))
            self.outcomes.append(outcome)
            logger.info("stage %-9s cached   %s", stage, outcome.detail)
            return cached
        started = time.perf_counter()
        payload = compute()
        elapsed = time.perf_counter() - started
        self.store.save(stage, key, payload)
        outcome = StageOutcome(stage, key, False, elapsed, describe(payload))
        self.outcomes.append(outcome)
        logger.info("stage %-9s %6.2fs  %s", stage, elapsed, outcome.detail)
        return payload


def run_pipeline(
    config: RunConfig,
    mock_providers: bool = False,
    resume: bool = True,
    until: str = "report",
) -> PipelineResult:
    """Execute the pipeline through ``until`` (inclusive).

    Stage outputs are persisted and reused across runs whenever their
    cache keys still match; pass ``resume=False`` to recompute everything.
    """
    if until not in STAGES:
        raise ContractError(f"unknown stage {until!r}; expected one of {STAGES}")
    validate_paths(config)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    (config.output_dir / "run_config.json").write_text(
        json.dumps(
            {"config_hash": config.config_hash(), "config": config.canonical_dict()},
            indent=2,
            ensure_ascii=False,
        )
        + "\n",
        encoding="utf-8",
    )
    run = _Run(config, mock_providers, resume)
    last = STAGES.index(until)
    report: Report | None = None
    output_files: dict[str, Path] = {}

    # -- ingest --------------------------------------------------------
    corpus_hash = _file_hash(config.corpus_path)
    ingest_key = _stage_key("ingest", config.config_slice("event", "corpus_path"), corpus_hash)

    def compute_ingest() -> dict:
        documents = filter_event(load_corpus(config.corpus_path), config.event)
        paragraphs = segment_corpus(documents)
        return {
            "documents": [_document_dict(d) for d in documents],
            "paragraphs": [_paragraph_dict(p) for p in paragraphs],
        }

    ingest_payload = run.run_stage(
        "ingest",
        ingest_key,
        compute_ingest,
        lambda p: f"{len(p['documents'])} documents, {len(p['paragraphs'])} paragraphs",
    )
    documents = [_document_from(d) for d in ingest_payload["documents"]]
    paragraphs = [_paragraph_from(p) for p in ingest_payload["paragraphs"]]
    paragraphs_by_id = {p.id: p for p in paragraphs}
    if last == STAGES.index("ingest"):
        return _finish(run, config, report, output_files)

    # -- cluster ---------------------------------------------------------
    cluster_key = _stage_key(
        "cluster",
        config.config_slice("clustering", "seed")
        + _models_fingerprint(run.models, "chat", "embedding"),
        ingest_key,
    )

    def compute_cluster() -> dict:
        vectors = run.bundle.embedder.embed([p.text for p in paragraphs])
        log_path = config.output_dir / "logs" / "cluster_trials.jsonl"
        log_path.parent.mkdir(parents=True, exist_ok=True)
        trials_log = log_path.open("w", encoding="utf-8")
        try:
            def on_trial(trial: TrialRecord) -> None:
                trials_log.write(json.dumps(_trial_dict(trial), ensure_ascii=False) + "\n")

            result: SearchResult = search_hyperparams(
                vectors,
                paragraphs,
                run.bundle.chat,
                space=config.clustering.space,
                trials=config.clustering.trials,
                seed=derive_seed(config.seed, "cluster-search"),
                target_dim=config.clustering.target_dim,
                reducer_backend=config.clustering.reducer_backend,
                on_trial=on_trial,
            )
        finally:
            trials_log.close()
        return {
            "best_params": _params_dict(result.params),
            "score": {
                "dbcv": result.score.dbcv,
                "llm_score": result.score.llm_score,
                "combined": result.score.combined,
            },
            "assignments": [
                {"paragraph_id": a.paragraph_id, "label": a.label}
                for a in result.assignments
            ],
            "trials": [_trial_dict(t) for t in result.trials],
        }

    def describe_cluster(payload: dict) -> str:
        labels = {a["label"] for a in payload["assignments"] if a["label"] >= 0}
        return (
            f"{len(labels)} clusters, combined score "
            f"{payload['score']['combined']:.3f} over {len(payload['trials'])} trials"
        )

    cluster_payload = run.run_stage("cluster", cluster_key, compute_cluster, describe_cluster)
    assignments = [
        ClusterAssignment(paragraph_id=a["paragraph_id"], label=a["label"])
        for a in cluster_payload["assignments"]
    ]
    if last == STAGES.index("cluster"):
        return _finish(run, config, report, output_files)

    # -- questions -------------------------------------------------------
    questions_key = _stage_key(
        "questions",
        config.config_slice("questions", "seed")
        + _models_fingerprint(run.models, "chat", "duplicate_scorer"),
        cluster_key,
    )

    def compute_questions() -> dict:
        clusters = group_by_cluster(assignments, paragraphs_by_id)
        recorded: list[dict] = []
        kept_count = 0
        for label in sorted(clusters):
            candidates = generate_questions(
                label,
                clusters[label],
                config.event,
                run.bundle.chat,
                rounds=config.questions.rounds,
                temperature=config.questions.temperature,
                top_p=config.questions.top_p,
                seed=config.seed,
            )
            survivors = dedupe_and_sample(
                candidates,
                run.bundle.scorer,
                dup_threshold=config.questions.dup_threshold,
                target=config.questions.target,
                seed=derive_seed(config.seed, "question-sample", label),
            )
            surviving_ids = {q.id for q in survivors}
            for question in survivors:
                filter_question(question, config.event, run.bundle.chat)
                if question.verdict is not None and question.verdict.keep:
                    classify_sdg(question, run.bundle.chat)
                    kept_count += 1
            for question in candidates:
                entry = _question_dict(question)
                entry["sampled"] = question.id in surviving_ids
                recorded.append(entry)
        logger.info("questions kept after filtering: %d", kept_count)
        return {"questions": recorded}

    def describe_questions(payload: dict) -> str:
        total = len(payload["questions"])
        kept = sum(
            1
            for q in payload["questions"]
            if q["verdict"] is not None and q["verdict"]["keep"]
        )
        return f"{kept} kept of {total} candidates"

    questions_payload = run.run_stage(
        "questions", questions_key, compute_questions, describe_questions
    )
    questions = [_question_from(q) for q in questions_payload["questions"]]
    kept_questions = [
        q for q in questions if q.verdict is not None and q.verdict.keep
    ]
    if last == STAGES.index("questions"):
        return _finish(run, config, report, output_files)

    # -- answers ---------------------------------------------------------
    answers_key = _stage_key(
        "answers",
        config.config_slice("retrieval", "seed")
        + _models_fingerprint(run.models, "chat", "embedding"),
        questions_key,
    )

    def compute_answers() -> dict:
        index = build_index(paragraphs, run.bundle.embedder)
        produced = []
        for question in kept_questions:
            answer = answer_question(
                question,
                index,
                run.bundle.chat,
                n_variants=config.retrieval.n_variants,
                retrieval_depth=config.retrieval.retrieval_depth,
                context_size=config.retrieval.context_size,
                k_const=config.retrieval.k_const,
                seed=derive_seed(config.seed, "answer", question.id),
            )
            produced.append(_answer_dict(answer))
        return {"answers": produced}

    answers_payload = run.run_stage(
        "answers",
        answers_key,
        compute_answers,
        lambda p: f"{len(p['answers'])} answers",
    )
    if last == STAGES.index("answers"):
        return _finish(run, config, report, output_files)

    # -- citefix -----------------------------------------------------------
    citefix_key = _stage_key(
        "citefix",
        config.config_slice("correction")
        + _models_fingerprint(run.models, "embedding"),
        answers_key,
    )

    def compute_citefix() -> dict:
        corrected_payload = []
        correction_payload = []
        action_totals: dict[str, int] = {}
        questions_by_id = {q.id: q for q in kept_questions}
        for data in answers_payload["answers"]:
            answer = _answer_from(data)
            question = questions_by_id[answer.question_id]
            context_paragraphs = [
                paragraphs_by_id[p.paragraph_id] for p in answer.passages
            ]
            embeddings = run.bundle.embedder.embed(
                [question.text] + [p.text for p in context_paragraphs]
            )
            corrected, records = correct_citations(
                answer,
                context_paragraphs,
                embeddings[0],
                embeddings[1:],
                config.correction,
            )
            corrected_payload.append(_answer_dict(corrected))
            correction_payload.append(
                {
                    "question_id": answer.question_id,
                    "records": [_correction_dict(r) for r in records],
                }
            )
            for action, count in correction_counts(records).items():
                action_totals[action] = action_totals.get(action, 0) + count
        return {
            "answers": corrected_payload,
            "corrections": correction_payload,
            "action_totals": action_totals,
        }

    def describe_citefix(payload: dict) -> str:
        totals = payload["action_totals"]
        summary = ", ".join(f"{k}={totals[k]}" for k in sorted(totals)) or "no claims"
        return f"citations: {summary}"

    citefix_payload = run.run_stage("citefix", citefix_key, compute_citefix, describe_citefix)
    corrected_answers = [_answer_from(a) for a in citefix_payload["answers"]]
    if last == STAGES.index("citefix"):
        return _finish(run, config, report, output_files)

    # -- report ------------------------------------------------------------
    report_key = _stage_key(
        "report",
        config.config_slice("seed") + _models_fingerprint(run.models, "chat"),
        citefix_key,
    )

    def compute_report() -> dict:
        answers_by_id = {a.question_id: a for a in corrected_answers}
        qa_pairs = [
            (question, answers_by_id[question.id])
            for question in sorted(kept_questions, key=lambda q: (q.cluster_label, q.id))
            if question.id in answers_by_id
        ]
        by_cluster: dict[int, list[tuple[Question, Answer]]] = {}
        for question, answer in qa_pairs:
            by_cluster.setdefault(question.cluster_label, []).append((question, answer))
        cluster_summaries = []
        for label in sorted(by_cluster):
            pairs = by_cluster[label]
            if not any(answer.claims for _, answer in pairs):
                logger.warning("cluster %d has no claims; omitted from summaries", label)
                continue
            cluster_summaries.append(
                summarize_cluster(label, pairs, run.bundle.chat, seed=config.seed)
            )
        by_sdg: dict[int | None, list[tuple[Question, Answer]]] = {}
        for question, answer in qa_pairs:
            if question.sdgs:
                for sdg in question.sdgs:
                    by_sdg.setdefault(sdg.value, []).append((question, answer))
            else:
                by_sdg.setdefault(None, []).append((question, answer))
        sdg_order: list[int | None] = sorted(k for k in by_sdg if k is not None)
        if None in by_sdg:
            sdg_order.append(None)
        sdg_summaries = []
        for sdg in sdg_order:
            pairs = by_sdg[sdg]
            if not any(answer.claims for _, answer in pairs):
                logger.warning("SDG %s has no claims; omitted from summaries", sdg)
                continue
            sdg_summaries.append(
                summarize_sdg(sdg, pairs, run.bundle.chat, seed=config.seed)
            )
        cited = collect_cited_paragraphs(
            [answer for _, answer in qa_pairs], paragraphs_by_id
        )
        executive = executive_summary(cited, config.event, run.bundle.chat, seed=config.seed)
        draft = ReportDraft(
            event=config.event,
            executive=executive,
            qa_by_topic=build_topic_sections(qa_pairs),
            qa_by_sdg=build_sdg_sections(qa_pairs),
            topic_summaries=tuple(cluster_summaries),
            sdg_summaries=tuple(sdg_summaries),
        )
        metadata = ReportMetadata(
            models=dict(sorted(run.models.items())),
            config_hash=config.config_hash(),
            timings_path="timings.json",
        )
        return report_to_dict(reindex_citations(draft, paragraphs, documents, metadata))

    report_payload = run.run_stage(
        "report",
        report_key,
        compute_report,
        lambda p: f"{len(p['registry'])} citations across 4 views",
    )
    report = report_from_dict(report_payload)
    output_files = render_report(report, config.output_dir)
    return _finish(run, config, report, output_files)


def _finish(
    run: _Run,
    config: RunConfig,
    report: Report | None,
    output_files: dict[str, Path],
) -> PipelineResult:
    timings_path = config.output_dir / "timings.json"
    timings = {
        "stages": {o.name: round(o.seconds, 6) for o in run.outcomes if not o.cached},
        "cached": [o.name for o in run.outcomes if o.cached],
        "total": round(sum(o.seconds for o in run.outcomes), 6),
    }
    timings_path.write_text(
        json.dumps(timings, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return PipelineResult(
        config_hash=config.config_hash(),
        stages=tuple(run.outcomes),
        report=report,
        output_files=dict(output_files),
        timings_path=timings_path,
    )
