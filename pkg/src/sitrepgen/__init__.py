"""sitrepgen: event-scoped crisis corpora to citation-grounded reports."""

from __future__ import annotations

__version__ = "0.1.0"
