"""Text normalization applied to every text entering the pipeline."""

from __future__ import annotations

import re
import unicodedata

_WHITESPACE_RE = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Canonicalize a text for deduplication and filtering.

    Applies Unicode NFC, strips leading and trailing whitespace, and replaces
    every internal run of whitespace (tabs and newlines included) with a
    single space. Idempotent; may return the empty string.
    """
    text = unicodedata.normalize("NFC", text)
    return _WHITESPACE_RE.sub(" ", text.strip())
