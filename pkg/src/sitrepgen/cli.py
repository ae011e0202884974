"""Command-line interface: stage subcommands, full runs, and evaluation.

One command per pipeline stage (each runs its predecessors from cache),
``run`` for the whole pipeline, and ``eval`` for scoring annotation
files.  Exit codes: 0 success, 2 configuration error (bad flags, bad
config file, missing inputs), 3 provider error, 4 stage error.
"""

from __future__ import annotations

import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .config import RunConfig, from_yaml
from .errors import ConfigError, ProviderError, SitrepError, TransportError
from .evalharness import (
    AnnotationRecord,
    ClaimCitationAnnotation,
    MetricWithCI,
    SupportLabel,
    agreement_stats,
    bootstrap_ci,
    citation_metrics,
    mean_metric_with_ci,
    precision_recall_f1,
    resolve_disagreements,
)
from .pipeline import PipelineResult, run_pipeline

logger = logging.getLogger(__name__)


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not verbose:
        logging.getLogger("sitrepgen").setLevel(logging.WARNING)
        logging.getLogger("sitrepgen.pipeline").setLevel(logging.INFO)


@click.group()
def cli() -> None:
    """Turn event-scoped crisis corpora into citation-grounded reports."""


def pipeline_options(fn):
    for option in reversed(
        (
            click.option(
                "--config",
                "-c",
                "config_path",
                required=True,
                type=click.Path(exists=True, dir_okay=False, path_type=Path),
                help="Run configuration YAML.",
            ),
            click.option(
                "--output",
                "-o",
                "output_dir",
                type=click.Path(file_okay=False, path_type=Path),
                default=None,
                help="Override the configured output directory.",
            ),
            click.option(
                "--mock-providers",
                is_flag=True,
                help="Use the bundled offline providers instead of hosted models.",
            ),
            click.option("--seed", type=int, default=None, help="Override the configured seed."),
            click.option(
                "--resume/--no-resume",
                default=True,
                show_default=True,
                help="Reuse cached stage outputs whose inputs are unchanged.",
            ),
            click.option("-v", "--verbose", is_flag=True, help="Debug logging."),
        )
    ):
        fn = option(fn)
    return fn


def _execute(
    until: str,
    config_path: Path,
    output_dir: Path | None,
    mock_providers: bool,
    seed: int | None,
    resume: bool,
    verbose: bool,
) -> PipelineResult:
    _setup_logging(verbose)
    config: RunConfig = from_yaml(config_path)
    if output_dir is not None:
        config = replace(config, output_dir=output_dir.resolve())
    if seed is not None:
        config = replace(config, seed=seed)
    result = run_pipeline(
        config, mock_providers=mock_providers, resume=resume, until=until
    )
    for outcome in result.stages:
        state = "cached" if outcome.cached else f"{outcome.seconds:.2f}s"
        click.echo(f"{outcome.name:<10} {state:>8}  {outcome.detail}")
    for kind in sorted(result.output_files):
        click.echo(f"{kind}: {result.output_files[kind]}")
    return result


@cli.command()
@pipeline_options
def ingest(**kwargs) -> None:
    """Load the corpus, filter it to the event, and segment paragraphs."""
    _execute("ingest", **kwargs)


@cli.command()
@pipeline_options
def cluster(**kwargs) -> None:
    """Embed paragraphs and search clustering hyperparameters."""
    _execute("cluster", **kwargs)


@cli.command()
@pipeline_options
def questions(**kwargs) -> None:
    """Draft, dedupe, filter and tag questions for every cluster."""
    _execute("questions", **kwargs)


@cli.command()
@pipeline_options
def answers(**kwargs) -> None:
    """Answer every kept question with fused retrieval."""
    _execute("answers", **kwargs)


@cli.command()
@pipeline_options
def citefix(**kwargs) -> None:
    """Re-score every claim's citations and correct them."""
    _execute("citefix", **kwargs)


@cli.command()
@pipeline_options
def report(**kwargs) -> None:
    """Assemble, number and render the report (prior stages from cache)."""
    _execute("report", **kwargs)


@cli.command()
@pipeline_options
def run(**kwargs) -> None:
    """Run the full pipeline: ingest through rendered report."""
    _execute("report", **kwargs)


# ---------------------------------------------------------------------------
# Evaluation.


def _read_jsonl(path: Path) -> list[dict]:
    records: list[dict] = []
    for lineno, line in enumerate(
        path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    if not records:
        raise ConfigError(f"{path} holds no records")
    return records


def _load_annotations(path: Path) -> list[AnnotationRecord]:
    records = []
    for lineno, data in enumerate(_read_jsonl(path), start=1):
        try:
            records.append(
                AnnotationRecord(
                    task=data["task"],
                    item_id=str(data["item_id"]),
                    annotator_id=str(data["annotator_id"]),
                    label=str(data["label"]),
                )
            )
        except (KeyError, SitrepError) as exc:
            raise ConfigError(f"{path} record {lineno}: {exc}") from exc
    return records


def _load_citation_annotations(path: Path) -> list[ClaimCitationAnnotation]:
    annotations = []
    for lineno, data in enumerate(_read_jsonl(path), start=1):
        try:
            recall = data.get("recall_label")
            annotations.append(
                ClaimCitationAnnotation(
                    claim_id=str(data["claim_id"]),
                    citation_labels=tuple(
                        SupportLabel(v) for v in data["citation_labels"]
                    ),
                    recall_label=SupportLabel(recall) if recall is not None else None,
                )
            )
        except (KeyError, ValueError, SitrepError) as exc:
            raise ConfigError(f"{path} record {lineno}: {exc}") from exc
    return annotations


@contextmanager
def _quiet_resample_warnings():
    """Silence degenerate-denominator warnings while bootstrapping.

    A resample may easily drop every positive item; that is expected
    sampling noise, not a data problem worth one warning per resample.
    """
    log = logging.getLogger("sitrepgen.evalharness")
    before = log.level
    log.setLevel(logging.ERROR)
    try:
        yield
    finally:
        log.setLevel(before)


def _ci_dict(metric: MetricWithCI) -> dict:
    return {
        "point": metric.point,
        "ci_low": metric.ci_low,
        "ci_high": metric.ci_high,
        "level": metric.level,
    }


def _format_ci(metric: MetricWithCI) -> str:
    return f"{metric.point:.3f} [{metric.ci_low:.3f}, {metric.ci_high:.3f}]"


def _evaluate_task(
    task: str,
    records: list[AnnotationRecord],
    judge_id: str,
    positive_label: str,
    resamples: int,
    level: float,
    seed: int,
) -> dict:
    humans = [r for r in records if r.annotator_id != judge_id]
    judge = {r.item_id: r.label for r in records if r.annotator_id == judge_id}
    result: dict = {"task": task, "n_records": len(records)}

    by_annotator: dict[str, dict[str, str]] = {}
    for record in humans:
        by_annotator.setdefault(record.annotator_id, {})[record.item_id] = record.label
    if len(by_annotator) >= 2:
        first, second = sorted(by_annotator)[:2]
        shared = sorted(set(by_annotator[first]) & set(by_annotator[second]))
        if shared:
            stats = agreement_stats(
                [by_annotator[first][i] for i in shared],
                [by_annotator[second][i] for i in shared],
            )
            result["human_agreement"] = {
                "annotators": [first, second],
                "n_items": stats.n_items,
                "percent_agreement": stats.percent_agreement,
                "kappa": stats.kappa,
                "pabak": stats.pabak,
            }

    if not humans:
        return result
    gold = resolve_disagreements(humans, seed=seed)
    result["n_items"] = len(gold)
    shared = sorted(set(gold) & set(judge))
    if not shared:
        return result

    gold_labels = [gold[i] for i in shared]
    judge_labels = [judge[i] for i in shared]
    stats = agreement_stats(gold_labels, judge_labels)
    agreement_ci = mean_metric_with_ci(
        [float(g == j) for g, j in zip(gold_labels, judge_labels)],
        n_resamples=resamples,
        level=level,
        seed=seed,
    )
    pairs = np.array(
        [(label == positive_label, gold[i] == positive_label)
         for i, label in zip(shared, judge_labels)],
        dtype=bool,
    )
    point = precision_recall_f1(pairs[:, 0], pairs[:, 1])

    def metric_statistic(index: int):
        def statistic(sample) -> float:
            rows = np.asarray(sample, dtype=bool)
            return precision_recall_f1(rows[:, 0], rows[:, 1])[index]

        return statistic

    with _quiet_resample_warnings():
        intervals = [
            bootstrap_ci(
                metric_statistic(index),
                pairs,
                n_resamples=resamples,
                level=level,
                seed=seed,
            )
            for index in range(3)
        ]
    result["judge_vs_gold"] = {
        "n_items": len(shared),
        "agreement": _ci_dict(agreement_ci),
        "kappa": stats.kappa,
        "pabak": stats.pabak,
        "positive_label": positive_label,
        "precision": _ci_dict(intervals[0]) | {"point": point.precision},
        "recall": _ci_dict(intervals[1]) | {"point": point.recall},
        "f1": _ci_dict(intervals[2]) | {"point": point.f1},
    }
    result["_intervals"] = intervals
    result["_agreement_ci"] = agreement_ci
    return result


def _print_task_table(result: dict) -> None:
    click.echo(f"task {result['task']} ({result['n_records']} records)")
    human = result.get("human_agreement")
    if human:
        pabak_text = "n/a" if human["pabak"] is None else f"{human['pabak']:.3f}"
        click.echo(
            f"  human agreement ({human['annotators'][0]} vs {human['annotators'][1]},"
            f" n={human['n_items']}): "
            f"{human['percent_agreement']:.3f}  kappa {human['kappa']:.3f}"
            f"  pabak {pabak_text}"
        )
    judged = result.get("judge_vs_gold")
    if judged:
        agreement = result["_agreement_ci"]
        intervals = result["_intervals"]
        pabak_text = "n/a" if judged["pabak"] is None else f"{judged['pabak']:.3f}"
        click.echo(
            f"  judge vs gold (n={judged['n_items']}): agreement"
            f" {_format_ci(agreement)}  kappa {judged['kappa']:.3f}  pabak {pabak_text}"
        )
        click.echo(
            f"  judge P/R/F1 (positive={judged['positive_label']!r}): "
            f"P {_format_ci(intervals[0])}"
            f"  R {_format_ci(intervals[1])}"
            f"  F1 {_format_ci(intervals[2])}"
        )


@cli.command(name="eval")
@click.option(
    "--annotations",
    "annotations_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="JSONL of {task, item_id, annotator_id, label} records.",
)
@click.option(
    "--citations",
    "citations_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="JSONL of {claim_id, citation_labels, recall_label} records.",
)
@click.option(
    "--judge",
    "judge_id",
    default="judge",
    show_default=True,
    help="Annotator id holding model judgements.",
)
@click.option("--positive-label", default="1", show_default=True)
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Also write the metrics as JSON to this path.",
)
@click.option("--resamples", default=1000, show_default=True, type=int)
@click.option("--level", default=0.95, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def eval_command(
    annotations_path: Path | None,
    citations_path: Path | None,
    judge_id: str,
    positive_label: str,
    out_path: Path | None,
    resamples: int,
    level: float,
    seed: int,
    verbose: bool,
) -> None:
    """Score annotation files: agreement, judge accuracy, citation support."""
    _setup_logging(verbose)
    if annotations_path is None and citations_path is None:
        raise ConfigError("eval needs --annotations and/or --citations")
    metrics: dict = {}

    if annotations_path is not None:
        records = _load_annotations(annotations_path)
        by_task: dict[str, list[AnnotationRecord]] = {}
        for record in records:
            by_task.setdefault(record.task, []).append(record)
        tasks = []
        for task in sorted(by_task):
            result = _evaluate_task(
                task, by_task[task], judge_id, positive_label, resamples, level, seed
            )
            _print_task_table(result)
            tasks.append(
                {key: value for key, value in result.items() if not key.startswith("_")}
            )
        metrics["tasks"] = tasks

    if citations_path is not None:
        support = citation_metrics(_load_citation_annotations(citations_path))
        click.echo(
            f"citation support ({support.n_citations} citations"
            f" over {support.n_claims} claims)"
        )
        click.echo(
            "  precision shares: fully {0.fully:.3f}  partially {0.partially:.3f}"
            "  none {0.none:.3f}".format(support.precision)
        )
        click.echo(
            "  recall shares:    fully {0.fully:.3f}  partially {0.partially:.3f}"
            "  none {0.none:.3f}".format(support.recall)
        )
        metrics["citations"] = {
            "n_citations": support.n_citations,
            "n_claims": support.n_claims,
            "precision_shares": {
                "fully": support.precision.fully,
                "partially": support.precision.partially,
                "none": support.precision.none,
            },
            "recall_shares": {
                "fully": support.recall.fully,
                "partially": support.recall.partially,
                "none": support.recall.none,
            },
        }

    if out_path is not None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(
            json.dumps(metrics, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        click.echo(f"metrics: {out_path}")


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping failures to documented exit codes."""
    try:
        cli.main(args=argv, prog_name="sitrepgen", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 130
    except click.ClickException as exc:
        exc.show()
        return 2
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return 2
    except (ProviderError, TransportError) as exc:
        click.echo(f"provider error: {exc}", err=True)
        return 3
    except SitrepError as exc:
        click.echo(f"stage error: {exc}", err=True)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
