"""Run configuration: YAML loading, range validation and config identity.

A run is described by one YAML document.  Loading validates every field
against its documented range up front — a bad correction threshold, say,
fails here with a :class:`ConfigError` before any stage executes — and
resolves relative paths against the YAML file's directory.

``config_hash`` is the run's identity for caching and report metadata.
It deliberately excludes ``output_dir`` and ``cache_dir``: two runs of
the same configuration into different directories are the same run and
must produce byte-identical reports, and neither path influences any
computed value.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Mapping

import yaml

from .citefix import CorrectionConfig
from .clustering import SearchSpace
from .errors import ConfigError, ContractError
from .ingest import EventSpec
from .providers import ProviderConfig

_REDUCER_BACKENDS = ("pca", "spectral")


@dataclass(frozen=True)
class ClusteringStageConfig:
    trials: int = 20
    target_dim: int = 10
    reducer_backend: str = "pca"
    space: SearchSpace = field(default_factory=SearchSpace)


@dataclass(frozen=True)
class QuestionStageConfig:
    rounds: int = 3
    dup_threshold: float = 0.8
    target: int = 6
    temperature: float = 0.7
    top_p: float = 0.9


@dataclass(frozen=True)
class RetrievalStageConfig:
    n_variants: int = 4
    retrieval_depth: int = 20
    context_size: int = 8
    k_const: float = 60.0


@dataclass(frozen=True)
class BootstrapStageConfig:
    n_resamples: int = 1000
    level: float = 0.95


@dataclass(frozen=True)
class ProviderRoles:
    """Provider endpoints per role; any may be absent in mock runs."""

    chat: ProviderConfig | None = None
    embedding: ProviderConfig | None = None
    duplicate_scorer: ProviderConfig | None = None


@dataclass(frozen=True)
class RunConfig:
    event: EventSpec
    corpus_path: Path
    output_dir: Path
    cache_dir: Path | None = None
    seed: int = 0
    providers: ProviderRoles = field(default_factory=ProviderRoles)
    clustering: ClusteringStageConfig = field(default_factory=ClusteringStageConfig)
    questions: QuestionStageConfig = field(default_factory=QuestionStageConfig)
    retrieval: RetrievalStageConfig = field(default_factory=RetrievalStageConfig)
    correction: CorrectionConfig = field(default_factory=CorrectionConfig)
    bootstrap: BootstrapStageConfig = field(default_factory=BootstrapStageConfig)

    def canonical_dict(self) -> dict[str, Any]:
        """Everything that defines the run's identity (no output paths)."""

        def provider_dict(p: ProviderConfig | None) -> dict[str, Any] | None:
            if p is None:
                return None
            return {
                "endpoint": p.endpoint,
                "model_id": p.model_id,
                "api_key_env": p.api_key_env,
                "request_timeout": p.request_timeout,
                "max_retries": p.max_retries,
                "rate_limit_per_minute": p.rate_limit_per_minute,
            }

        return {
            "event": {
                "name": self.event.name,
                "country": self.event.country,
                "start_date": self.event.start_date.isoformat(),
                "end_date": self.event.end_date.isoformat(),
            },
            "corpus_path": str(self.corpus_path),
            "seed": self.seed,
            "providers": {
                "chat": provider_dict(self.providers.chat),
                "embedding": provider_dict(self.providers.embedding),
                "duplicate_scorer": provider_dict(self.providers.duplicate_scorer),
            },
            "clustering": {
                "trials": self.clustering.trials,
                "target_dim": self.clustering.target_dim,
                "reducer_backend": self.clustering.reducer_backend,
                "search_space": {
                    "n_neighbors": list(self.clustering.space.n_neighbors),
                    "min_dist": list(self.clustering.space.min_dist),
                    "min_cluster_size": list(self.clustering.space.min_cluster_size),
                    "min_samples": list(self.clustering.space.min_samples),
                },
            },
            "questions": {
                "rounds": self.questions.rounds,
                "dup_threshold": self.questions.dup_threshold,
                "target": self.questions.target,
                "temperature": self.questions.temperature,
                "top_p": self.questions.top_p,
            },
            "retrieval": {
                "n_variants": self.retrieval.n_variants,
                "retrieval_depth": self.retrieval.retrieval_depth,
                "context_size": self.retrieval.context_size,
                "k_const": self.retrieval.k_const,
            },
            "correction": {
                "lambda": self.correction.lambda_weight,
                "tau": self.correction.threshold,
            },
            "bootstrap": {
                "n_resamples": self.bootstrap.n_resamples,
                "level": self.bootstrap.level,
            },
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.canonical_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def config_slice(self, *sections: str) -> str:
        """Hash of named sections only, for per-stage cache keys."""
        full = self.canonical_dict()
        payload = json.dumps(
            {name: full[name] for name in sections}, sort_keys=True, ensure_ascii=False
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class _Problems:
    """Collects validation failures so they can be reported together."""

    def __init__(self) -> None:
        self.items: list[str] = []

    def check(self, condition: bool, message: str) -> bool:
        if not condition:
            self.items.append(message)
        return condition

    def raise_if_any(self) -> None:
        if self.items:
            raise ConfigError(
                f"{len(self.items)} configuration problem(s):\n  " + "\n  ".join(self.items)
            )


def _as_date(value: Any, key: str, problems: _Problems) -> date:
    if isinstance(value, date):
        return value
    if isinstance(value, str):
        try:
            return date.fromisoformat(value)
        except ValueError:
            pass
    problems.check(False, f"{key}: expected an ISO date, got {value!r}")
    return date(1970, 1, 1)


def _section(data: Mapping[str, Any], key: str, problems: _Problems) -> dict[str, Any]:
    value = data.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        problems.check(False, f"{key}: expected a mapping, got {type(value).__name__}")
        return {}
    return dict(value)


def _reject_unknown_keys(
    section: Mapping[str, Any], allowed: set[str], where: str, problems: _Problems
) -> None:
    unknown = sorted(set(section) - allowed)
    for key in unknown:
        problems.check(False, f"{where}: unknown key {key!r}")


def _provider_from(
    section: Mapping[str, Any] | None, where: str, problems: _Problems
) -> ProviderConfig | None:
    if not section:
        return None
    _reject_unknown_keys(
        section,
        {"endpoint", "model_id", "api_key_env", "request_timeout", "max_retries",
         "rate_limit_per_minute"},
        where,
        problems,
    )
    try:
        return ProviderConfig(
            endpoint=str(section.get("endpoint", "")),
            model_id=str(section.get("model_id", "")),
            api_key_env=str(section.get("api_key_env", "")),
            request_timeout=float(section.get("request_timeout", 30.0)),
            max_retries=int(section.get("max_retries", 3)),
            rate_limit_per_minute=float(section.get("rate_limit_per_minute", 600.0)),
        )
    except (ContractError, TypeError, ValueError) as exc:
        problems.check(False, f"{where}: {exc}")
        return None


def _tuple_of(section: Mapping[str, Any], key: str, cast, default: tuple,
              where: str, problems: _Problems) -> tuple:
    raw = section.get(key)
    if raw is None:
        return default
    if not isinstance(raw, (list, tuple)) or not raw:
        problems.check(False, f"{where}.{key}: expected a non-empty list")
        return default
    try:
        return tuple(cast(v) for v in raw)
    except (TypeError, ValueError):
        problems.check(False, f"{where}.{key}: values must be {cast.__name__}")
        return default


def from_mapping(data: Mapping[str, Any], base_dir: Path) -> RunConfig:
    """Build and validate a :class:`RunConfig` from parsed YAML."""
    if not isinstance(data, Mapping):
        raise ConfigError("configuration root must be a mapping")
    problems = _Problems()
    _reject_unknown_keys(
        data,
        {"event", "corpus_path", "output_dir", "cache_dir", "seed", "providers",
         "clustering", "questions", "retrieval", "correction", "bootstrap"},
        "config",
        problems,
    )

    event_section = _section(data, "event", problems)
    _reject_unknown_keys(
        event_section, {"name", "country", "start_date", "end_date"}, "event", problems
    )
    name = str(event_section.get("name", ""))
    country = str(event_section.get("country", ""))
    problems.check(bool(name), "event.name: required")
    problems.check(bool(country), "event.country: required")
    start = _as_date(event_section.get("start_date"), "event.start_date", problems)
    end = _as_date(event_section.get("end_date"), "event.end_date", problems)
    problems.check(end >= start, f"event: end_date {end} before start_date {start}")

    corpus_raw = data.get("corpus_path")
    problems.check(corpus_raw is not None, "corpus_path: required")
    output_raw = data.get("output_dir")
    problems.check(output_raw is not None, "output_dir: required")

    def resolve(raw: Any) -> Path:
        path = Path(str(raw))
        return path if path.is_absolute() else base_dir / path

    seed = data.get("seed", 0)
    problems.check(
        isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
        f"seed: expected a non-negative integer, got {seed!r}",
    )

    providers_section = _section(data, "providers", problems)
    _reject_unknown_keys(
        providers_section, {"chat", "embedding", "duplicate_scorer"}, "providers", problems
    )
    providers = ProviderRoles(
        chat=_provider_from(providers_section.get("chat"), "providers.chat", problems),
        embedding=_provider_from(
            providers_section.get("embedding"), "providers.embedding", problems
        ),
        duplicate_scorer=_provider_from(
            providers_section.get("duplicate_scorer"), "providers.duplicate_scorer", problems
        ),
    )

    clustering_section = _section(data, "clustering", problems)
    _reject_unknown_keys(
        clustering_section,
        {"trials", "target_dim", "reducer_backend", "search_space"},
        "clustering",
        problems,
    )
    space_section = _section(clustering_section, "search_space", problems)
    _reject_unknown_keys(
        space_section,
        {"n_neighbors", "min_dist", "min_cluster_size", "min_samples"},
        "clustering.search_space",
        problems,
    )
    defaults_space = SearchSpace()
    try:
        space = SearchSpace(
            n_neighbors=_tuple_of(space_section, "n_neighbors", int,
                                  defaults_space.n_neighbors, "clustering.search_space",
                                  problems),
            min_dist=_tuple_of(space_section, "min_dist", float,
                               defaults_space.min_dist, "clustering.search_space", problems),
            min_cluster_size=_tuple_of(space_section, "min_cluster_size", int,
                                       defaults_space.min_cluster_size,
                                       "clustering.search_space", problems),
            min_samples=_tuple_of(space_section, "min_samples", int,
                                  defaults_space.min_samples, "clustering.search_space",
                                  problems),
        )
    except ContractError as exc:
        problems.check(False, f"clustering.search_space: {exc}")
        space = defaults_space
    trials = clustering_section.get("trials", 20)
    target_dim = clustering_section.get("target_dim", 10)
    reducer = str(clustering_section.get("reducer_backend", "pca"))
    problems.check(isinstance(trials, int) and trials >= 1,
                   f"clustering.trials: expected an integer >= 1, got {trials!r}")
    problems.check(isinstance(target_dim, int) and target_dim >= 2,
                   f"clustering.target_dim: expected an integer >= 2, got {target_dim!r}")
    problems.check(reducer in _REDUCER_BACKENDS,
                   f"clustering.reducer_backend: {reducer!r} not one of {_REDUCER_BACKENDS}")

    question_section = _section(data, "questions", problems)
    _reject_unknown_keys(
        question_section,
        {"rounds", "dup_threshold", "target", "temperature", "top_p"},
        "questions",
        problems,
    )
    rounds = question_section.get("rounds", 3)
    dup_threshold = question_section.get("dup_threshold", 0.8)
    target = question_section.get("target", 6)
    temperature = question_section.get("temperature", 0.7)
    top_p = question_section.get("top_p", 0.9)
    problems.check(isinstance(rounds, int) and rounds >= 1,
                   f"questions.rounds: expected an integer >= 1, got {rounds!r}")
    problems.check(isinstance(dup_threshold, (int, float)) and 0.0 <= dup_threshold <= 1.0,
                   f"questions.dup_threshold: {dup_threshold!r} outside [0, 1]")
    problems.check(isinstance(target, int) and target >= 1,
                   f"questions.target: expected an integer >= 1, got {target!r}")
    problems.check(isinstance(temperature, (int, float)) and 0.0 <= temperature <= 2.0,
                   f"questions.temperature: {temperature!r} outside [0, 2]")
    problems.check(isinstance(top_p, (int, float)) and 0.0 < top_p <= 1.0,
                   f"questions.top_p: {top_p!r} outside (0, 1]")

    retrieval_section = _section(data, "retrieval", problems)
    _reject_unknown_keys(
        retrieval_section,
        {"n_variants", "retrieval_depth", "context_size", "k_const"},
        "retrieval",
        problems,
    )
    n_variants = retrieval_section.get("n_variants", 4)
    retrieval_depth = retrieval_section.get("retrieval_depth", 20)
    context_size = retrieval_section.get("context_size", 8)
    k_const = retrieval_section.get("k_const", 60.0)
    problems.check(isinstance(n_variants, int) and n_variants >= 1,
                   f"retrieval.n_variants: expected an integer >= 1, got {n_variants!r}")
    problems.check(isinstance(retrieval_depth, int) and retrieval_depth >= 1,
                   f"retrieval.retrieval_depth: expected an integer >= 1, got {retrieval_depth!r}")
    problems.check(
        isinstance(context_size, int) and 1 <= context_size,
        f"retrieval.context_size: expected an integer >= 1, got {context_size!r}",
    )
    if isinstance(context_size, int) and isinstance(retrieval_depth, int):
        problems.check(
            context_size <= retrieval_depth,
            f"retrieval.context_size {context_size} exceeds retrieval_depth {retrieval_depth}",
        )
    problems.check(isinstance(k_const, (int, float)) and k_const > 0,
                   f"retrieval.k_const: {k_const!r} must be positive")

    correction_section = _section(data, "correction", problems)
    _reject_unknown_keys(correction_section, {"lambda", "tau"}, "correction", problems)
    try:
        correction = CorrectionConfig(
            lambda_weight=float(correction_section.get("lambda", 0.8)),
            threshold=float(correction_section.get("tau", 0.3)),
        )
    except (ContractError, TypeError, ValueError) as exc:
        problems.check(False, f"correction: {exc}")
        correction = CorrectionConfig()

    bootstrap_section = _section(data, "bootstrap", problems)
    _reject_unknown_keys(bootstrap_section, {"n_resamples", "level"}, "bootstrap", problems)
    n_resamples = bootstrap_section.get("n_resamples", 1000)
    level = bootstrap_section.get("level", 0.95)
    problems.check(isinstance(n_resamples, int) and n_resamples >= 1,
                   f"bootstrap.n_resamples: expected an integer >= 1, got {n_resamples!r}")
    problems.check(isinstance(level, (int, float)) and 0.0 < level < 1.0,
                   f"bootstrap.level: {level!r} outside (0, 1)")

    problems.raise_if_any()
    return RunConfig(
        event=EventSpec(name=name, country=country, start_date=start, end_date=end),
        corpus_path=resolve(corpus_raw),
        output_dir=resolve(output_raw),
        cache_dir=resolve(data["cache_dir"]) if data.get("cache_dir") else None,
        seed=int(seed),
        providers=providers,
        clustering=ClusteringStageConfig(
            trials=int(trials), target_dim=int(target_dim),
            reducer_backend=reducer, space=space,
        ),
        questions=QuestionStageConfig(
            rounds=int(rounds), dup_threshold=float(dup_threshold), target=int(target),
            temperature=float(temperature), top_p=float(top_p),
        ),
        retrieval=RetrievalStageConfig(
            n_variants=int(n_variants), retrieval_depth=int(retrieval_depth),
            context_size=int(context_size), k_const=float(k_const),
        ),
        correction=correction,
        bootstrap=BootstrapStageConfig(n_resamples=int(n_resamples), level=float(level)),
    )


def from_yaml(path: Path | str) -> RunConfig:
    """Load, parse and validate a run configuration file."""
    config_path = Path(path)
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {config_path} is not valid YAML: {exc}") from exc
    if data is None:
        raise ConfigError(f"config {config_path} is empty")
    return from_mapping(data, base_dir=config_path.resolve().parent)


def validate_paths(config: RunConfig) -> None:
    """Check run-start path preconditions (corpus must exist)."""
    if not config.corpus_path.is_file():
        raise ConfigError(f"corpus_path {config.corpus_path} does not exist")
