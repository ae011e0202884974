"""Exception hierarchy shared across the pipeline.

Every error raised deliberately by this package derives from
:class:`SitrepError`.  The CLI maps the branches of the hierarchy onto
process exit codes (config -> 2, provider -> 3, stage -> 4), so new
exception types should subclass whichever branch matches how the failure
ought to surface to an operator.
"""

from __future__ import annotations


class SitrepError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SitrepError):
    """A run configuration is malformed or out of range.

    Raised during config loading/validation, before any stage executes.
    """


class ContractError(SitrepError):
    """A caller violated a documented precondition of an operation."""


class CorpusError(SitrepError):
    """A corpus file could not be parsed into valid documents.

    The message itemizes each offending record with its line number.
    """


class ProviderError(SitrepError):
    """A model provider rejected a request (non-transient HTTP failure).

    ``status`` carries the HTTP status code when one is available.
    """

    def __init__(self, message: str, status: int | None = None) -> None:
        super().__init__(message)
        self.status = status


class TransportError(SitrepError):
    """A provider could not be reached after exhausting retries."""


class StageError(SitrepError):
    """A pipeline stage failed in a way that invalidates its output.

    ``stage`` names the failing stage so partial results from earlier
    stages can still be trusted (and reused on resume).
    """

    def __init__(self, message: str, stage: str | None = None) -> None:
        super().__init__(message)
        self.stage = stage


class UndefinedScoreError(StageError):
    """A validity score is mathematically undefined for this input.

    Example: relative density validation needs at least two clusters of
    at least two points each; anything less has no defined value.
    """


class SearchError(StageError):
    """Every trial of a hyperparameter search failed to produce a score."""


class ReportIntegrityError(StageError):
    """Report assembly found a citation marker with no registry target."""
