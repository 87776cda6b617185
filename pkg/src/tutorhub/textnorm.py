"""Unicode-aware text normalization and tokenization.

Matching across the service (curriculum lookups, search tokens, guardrail
patterns, WER word tokens) goes through these helpers so behaviour stays
identical everywhere. Twi/Ewe text carries non-ASCII letters, so byte-level
casing is wrong; we rely on str.casefold and \\w word extraction instead.
"""

from __future__ import annotations

import re

_WORD_RE = re.compile(r"\w+")
_WS_RE = re.compile(r"\s+")


def squash_ws(text: str) -> str:
    """Collapse internal whitespace runs to single spaces and strip the ends.

    Preserves case: this is the stored/display form of record fields.
    """
    return _WS_RE.sub(" ", text).strip()


def normalize(text: str) -> str:
    """Full match-key normalization: casefold + whitespace collapse + strip.

    Idempotent: normalize(normalize(s)) == normalize(s).
    """
    return squash_ws(text.casefold())


def tokenize(text: str) -> list[str]:
    """Casefolded word tokens, punctuation treated as separators."""
    return _WORD_RE.findall(text.casefold())
