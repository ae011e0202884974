"""Versioned prompt templates and their loader.

Templates live as ``.txt`` assets next to this module, one file per task,
with ``str.format`` placeholders.  They are part of the package's behavior
surface: edits change model outputs, so :data:`PROMPT_VERSION` is bumped
whenever any template changes and is recorded in report metadata.

:func:`static_prefix` exposes the fixed text before a template's first
placeholder.  The offline chat provider uses it to recognize which task a
rendered prompt belongs to without re-parsing template internals.
"""

from __future__ import annotations

import re
import string
from functools import lru_cache
from importlib.resources import files

from ..errors import ContractError

#: Bump on any template change; recorded in report metadata.
PROMPT_VERSION = "1"

PROMPT_NAMES = (
    "cluster_judge",
    "question_generation",
    "question_filter",
    "sdg_classification",
    "query_expansion",
    "answer_generation",
    "cluster_summary",
    "headline",
    "sdg_summary",
    "executive_summary",
    "relevance_judge",
)


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    """Return the raw template text for ``name``."""
    if name not in PROMPT_NAMES:
        raise ContractError(f"unknown prompt template {name!r}")
    return files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def placeholders(name: str) -> frozenset[str]:
    """Placeholder names used by template ``name``."""
    fields = {
        field
        for _, field, _, _ in string.Formatter().parse(load_prompt(name))
        if field
    }
    return frozenset(fields)


def render_prompt(name: str, **values: object) -> str:
    """Fill template ``name``; every placeholder must be supplied."""
    needed = placeholders(name)
    missing = needed - values.keys()
    if missing:
        raise ContractError(f"prompt {name!r} missing placeholder(s): {sorted(missing)}")
    extra = values.keys() - needed
    if extra:
        raise ContractError(f"prompt {name!r} got unknown placeholder(s): {sorted(extra)}")
    return load_prompt(name).format(**values)


@lru_cache(maxsize=None)
def static_prefix(name: str) -> str:
    """Template text before the first placeholder (stage fingerprint)."""
    template = load_prompt(name)
    match = re.search(r"\{[A-Za-z_]", template)
    prefix = template[: match.start()] if match else template
    if not prefix.strip():
        raise ContractError(f"prompt {name!r} has no static prefix")
    return prefix
