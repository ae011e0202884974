"""Semantic clustering: dimensionality reduction, density clustering,
validity scoring and hyperparameter search.

Paragraph embeddings are reduced to a low-dimensional space and grouped by
a density clusterer that is allowed to label points as noise (``-1``).
Candidate hyperparameter configurations are scored by averaging two
judges: the density-based validity index (geometry) and an LLM rating of
cluster coherence (semantics), both in ``[-1, 1]``.  A seeded random
search picks the best-scoring configuration; failed trials score ``-1``
and the search only fails when every trial does.

The reducer is a pluggable contract.  The default backend is PCA (exact
SVD, deterministic); a spectral backend is available when a neighborhood
-based projection is preferred.  Either way the contract is the same:
``n_points >= n_neighbors + 1`` and output dimension ``target_dim``.
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from sklearn.cluster import HDBSCAN
from sklearn.decomposition import PCA
from sklearn.manifold import SpectralEmbedding

from . import dbcv
from .errors import ContractError, SearchError, SitrepError, UndefinedScoreError
from .ingest import Paragraph
from .providers import ChatProvider, ChatRequest, EmbeddingVector
from .prompts import render_prompt

logger = logging.getLogger(__name__)

#: Paragraph excerpts shown to the cluster-quality judge per cluster.
JUDGE_SAMPLE_SIZE = 12

_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


@dataclass(frozen=True)
class ClusteringHyperparams:
    """One clustering configuration (reduction + density clustering)."""

    n_neighbors: int = 15
    min_dist: float = 0.1
    min_cluster_size: int = 5
    min_samples: int = 5
    target_dim: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_neighbors < 2:
            raise ContractError(f"n_neighbors {self.n_neighbors} must be >= 2")
        if not 0.0 <= self.min_dist <= 1.0:
            raise ContractError(f"min_dist {self.min_dist} outside [0, 1]")
        if self.min_cluster_size < 2:
            raise ContractError(f"min_cluster_size {self.min_cluster_size} must be >= 2")
        if self.min_samples < 1:
            raise ContractError(f"min_samples {self.min_samples} must be >= 1")
        if self.target_dim < 2:
            raise ContractError(f"target_dim {self.target_dim} must be >= 2")
        if self.min_samples > self.min_cluster_size:
            logger.warning(
                "min_samples %d exceeds min_cluster_size %d; clustering will be conservative",
                self.min_samples, self.min_cluster_size,
            )


@dataclass(frozen=True)
class ClusterAssignment:
    """One paragraph's cluster membership (``-1`` means noise)."""

    paragraph_id: str
    label: int

    def __post_init__(self) -> None:
        if self.label < -1:
            raise ContractError(f"cluster label {self.label} is invalid")


@dataclass(frozen=True)
class ClusterScore:
    """Geometry and semantics judgments for one clustering, averaged."""

    dbcv: float
    llm_score: float
    combined: float

    def __post_init__(self) -> None:
        expected = (self.dbcv + self.llm_score) / 2.0
        if abs(self.combined - expected) > 1e-12:
            raise ContractError(
                f"combined score {self.combined} is not the mean of "
                f"dbcv={self.dbcv} and llm_score={self.llm_score}"
            )

    @classmethod
    def from_parts(cls, dbcv_value: float, llm_value: float) -> "ClusterScore":
        return cls(dbcv=dbcv_value, llm_score=llm_value, combined=(dbcv_value + llm_value) / 2.0)


@dataclass(frozen=True)
class SearchSpace:
    """Axes of the clustering hyperparameter search (uniform sampling)."""

    n_neighbors: tuple[int, ...] = (5, 10, 15, 30)
    min_dist: tuple[float, ...] = (0.0, 0.1, 0.25)
    min_cluster_size: tuple[int, ...] = (5, 10, 15, 25)
    min_samples: tuple[int, ...] = (1, 5, 10)

    def __post_init__(self) -> None:
        for axis in ("n_neighbors", "min_dist", "min_cluster_size", "min_samples"):
            if not getattr(self, axis):
                raise ContractError(f"search space axis {axis} is empty")

    def sample(self, rng: random.Random, target_dim: int, seed: int) -> ClusteringHyperparams:
        return ClusteringHyperparams(
            n_neighbors=rng.choice(self.n_neighbors),
            min_dist=rng.choice(self.min_dist),
            min_cluster_size=rng.choice(self.min_cluster_size),
            min_samples=rng.choice(self.min_samples),
            target_dim=target_dim,
            seed=seed,
        )


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one search trial (``error`` set when the trial failed)."""

    index: int
    params: ClusteringHyperparams
    dbcv: float | None
    llm_score: float | None
    combined: float
    error: str | None = None


@dataclass(frozen=True)
class SearchResult:
    params: ClusteringHyperparams
    score: ClusterScore
    assignments: list[ClusterAssignment]
    trials: list[TrialRecord] = field(repr=False, default_factory=list)


def to_matrix(vectors: Sequence[EmbeddingVector]) -> np.ndarray:
    """Stack embedding vectors into an ``(n, dim)`` float matrix."""
    if not vectors:
        raise ContractError("at least one embedding vector is required")
    dims = {v.dim for v in vectors}
    if len(dims) > 1:
        raise ContractError(f"mixed embedding dimensions {sorted(dims)}")
    return np.vstack([v.as_array() for v in vectors])


def reduce_dimensions(
    matrix: np.ndarray,
    params: ClusteringHyperparams,
    backend: str = "pca",
) -> np.ndarray:
    """Project embeddings to ``params.target_dim`` dimensions.

    Requires at least ``n_neighbors + 1`` points (the neighborhood size a
    manifold backend would need; enforced uniformly so swapping backends
    never loosens the contract) and ``target_dim`` strictly below the
    input dimension.  Same inputs give bit-identical outputs.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ContractError("embedding matrix must be 2-D")
    n_points, input_dim = matrix.shape
    if n_points < params.n_neighbors + 1:
        raise ContractError(
            f"{n_points} points cannot support n_neighbors={params.n_neighbors}; "
            f"need at least {params.n_neighbors + 1} (use a smaller n_neighbors)"
        )
    if params.target_dim >= input_dim:
        raise ContractError(
            f"target_dim {params.target_dim} must be below input dim {input_dim}"
        )
    if n_points <= params.target_dim:
        raise ContractError(
            f"{n_points} points cannot span target_dim={params.target_dim}"
        )
    if backend == "pca":
        reducer = PCA(
            n_components=params.target_dim,
            svd_solver="full",
            random_state=params.seed,
        )
        reduced = reducer.fit_transform(matrix)
    elif backend == "spectral":
        reducer = SpectralEmbedding(
            n_components=params.target_dim,
            n_neighbors=params.n_neighbors,
            random_state=params.seed,
        )
        reduced = reducer.fit_transform(matrix)
    else:
        raise ContractError(f"unknown reducer backend {backend!r}")
    if not np.all(np.isfinite(reduced)):
        raise ContractError(f"reducer backend {backend!r} produced non-finite output")
    return reduced


def density_cluster(
    points: np.ndarray,
    params: ClusteringHyperparams,
    paragraph_ids: Sequence[str],
) -> list[ClusterAssignment]:
    """Cluster reduced points, assigning every paragraph exactly once.

    Labels are noise (``-1``) or contiguous ``0..C-1``.  When there are
    fewer points than ``min_cluster_size`` no cluster can form, so all
    points become noise (with a warning) rather than erroring.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ContractError("points must be a non-empty 2-D array")
    if len(paragraph_ids) != points.shape[0]:
        raise ContractError(
            f"{len(paragraph_ids)} paragraph ids for {points.shape[0]} points"
        )
    if len(set(paragraph_ids)) != len(paragraph_ids):
        raise ContractError("paragraph ids must be unique")
    if points.shape[0] < params.min_cluster_size:
        logger.warning(
            "%d points is below min_cluster_size=%d; labelling all as noise",
            points.shape[0], params.min_cluster_size,
        )
        return [ClusterAssignment(pid, -1) for pid in paragraph_ids]

    clusterer = HDBSCAN(
        min_cluster_size=params.min_cluster_size,
        min_samples=params.min_samples,
        allow_single_cluster=False,
    )
    raw = clusterer.fit_predict(points)
    # Some backends use labels below -1 for special cases (infinite points
    # and such); everything negative is noise for our purposes.
    raw = np.where(raw < 0, -1, raw)
    remap = {old: new for new, old in enumerate(sorted({int(l) for l in raw if l >= 0}))}
    return [
        ClusterAssignment(pid, remap[int(label)] if label >= 0 else -1)
        for pid, label in zip(paragraph_ids, raw)
    ]


def group_by_cluster(
    assignments: Sequence[ClusterAssignment],
    paragraphs: Mapping[str, Paragraph],
) -> dict[int, list[Paragraph]]:
    """Group paragraphs by non-noise cluster label (ascending labels)."""
    grouped: dict[int, list[Paragraph]] = {}
    for assignment in assignments:
        if assignment.label < 0:
            continue
        grouped.setdefault(assignment.label, []).append(paragraphs[assignment.paragraph_id])
    return dict(sorted(grouped.items()))


def dbcv_score(points: np.ndarray, assignments: Sequence[ClusterAssignment]) -> float:
    """Density validity of ``assignments`` over ``points`` (aligned 1:1)."""
    labels = np.array([a.label for a in assignments], dtype=int)
    return dbcv.dbcv_index(np.asarray(points, dtype=float), labels)


def _parse_judge_score(reply: str) -> float:
    match = _NUMBER_RE.search(reply)
    if match is None:
        raise ValueError(f"no number in judge reply {reply[:80]!r}")
    value = float(match.group())
    if not -1.0 <= value <= 1.0:
        raise ValueError(f"judge score {value} outside [-1, 1]")
    return value


def judge_cluster_quality(
    clusters: Mapping[int, Sequence[Paragraph]],
    chat: ChatProvider,
) -> float:
    """LLM rating of cluster coherence: unweighted mean over clusters.

    Each cluster is rated once in ``[-1, 1]``; an unparseable or
    out-of-range reply is retried once, then the cluster is excluded with
    a warning.  All clusters excluded (or none given) is an undefined
    score.
    """
    if not clusters:
        raise UndefinedScoreError("no clusters to judge")
    scores: list[float] = []
    for label in sorted(clusters):
        members = clusters[label]
        excerpt = "\n".join(f"- {p.text}" for p in members[:JUDGE_SAMPLE_SIZE])
        prompt = render_prompt("cluster_judge", paragraphs=excerpt)
        value: float | None = None
        for attempt in range(2):
            reply = chat.chat(ChatRequest(prompt=prompt, temperature=0.0, seed=attempt))
            try:
                value = _parse_judge_score(reply)
                break
            except ValueError as exc:
                logger.warning("cluster %d: judge attempt %d failed: %s", label, attempt + 1, exc)
        if value is None:
            logger.warning("cluster %d excluded from quality score", label)
            continue
        scores.append(value)
    if not scores:
        raise UndefinedScoreError("every cluster was excluded by the judge")
    return float(np.mean(scores))


def search_hyperparams(
    vectors: Sequence[EmbeddingVector],
    paragraphs: Sequence[Paragraph],
    chat: ChatProvider,
    space: SearchSpace | None = None,
    trials: int = 20,
    seed: int = 0,
    target_dim: int = 10,
    reducer_backend: str = "pca",
    on_trial: Callable[[TrialRecord], None] | None = None,
) -> SearchResult:
    """Seeded random search over clustering hyperparameters.

    Each trial samples a configuration uniformly from ``space``, runs
    reduce -> cluster -> score, and records the outcome; any failure
    (reduction contract, undefined validity, provider error) marks the
    trial failed with combined score ``-1``.  The best combined score
    wins, earlier trial on ties.  ``on_trial`` (when given) observes every
    trial record as it is produced — the run log hook.  Raises
    :class:`SearchError` when every trial failed.
    """
    if trials < 1:
        raise ContractError("trials must be >= 1")
    if len(vectors) != len(paragraphs):
        raise ContractError(f"{len(vectors)} vectors for {len(paragraphs)} paragraphs")
    space = space or SearchSpace()
    matrix = to_matrix(vectors)
    paragraph_ids = [p.id for p in paragraphs]
    by_id = {p.id: p for p in paragraphs}
    rng = random.Random(seed)

    best: tuple[float, int] | None = None
    best_result: tuple[ClusteringHyperparams, ClusterScore, list[ClusterAssignment]] | None = None
    records: list[TrialRecord] = []
    for index in range(trials):
        params = space.sample(rng, target_dim=target_dim, seed=seed)
        record: TrialRecord
        try:
            reduced = reduce_dimensions(matrix, params, backend=reducer_backend)
            assignments = density_cluster(reduced, params, paragraph_ids)
            geometry = dbcv_score(reduced, assignments)
            semantics = judge_cluster_quality(group_by_cluster(assignments, by_id), chat)
            score = ClusterScore.from_parts(geometry, semantics)
            record = TrialRecord(index, params, geometry, semantics, score.combined)
        except SitrepError as exc:
            record = TrialRecord(index, params, None, None, -1.0, error=str(exc))
            logger.warning("trial %d failed: %s", index, exc)
        records.append(record)
        if on_trial is not None:
            on_trial(record)
        if record.error is None and (best is None or record.combined > best[0]):
            best = (record.combined, index)
            best_result = (params, score, assignments)
    if best_result is None:
        failures = "; ".join(f"trial {r.index}: {r.error}" for r in records)
        raise SearchError(f"all {trials} trials failed: {failures}")
    params, score, assignments = best_result
    logger.info(
        "search selected trial %d: combined=%.4f (dbcv=%.4f, llm=%.4f) params=%s",
        best[1], score.combined, score.dbcv, score.llm_score, params,
    )
    return SearchResult(params=params, score=score, assignments=assignments, trials=records)
