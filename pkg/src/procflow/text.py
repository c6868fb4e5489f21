"""Shared tokenization conventions.

Every module that compares text (statistics, coarse filtering, metric
tokenization, scene graphs) goes through these helpers so behaviour stays
consistent across the pipeline.
"""
from __future__ import annotations

import re

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")

# Small fixed set: articles and the common prepositions/conjunctions that
# show up in verb-noun action phrases. Callers may pass their own set.
DEFAULT_STOP_WORDS = frozenset(
    {
        "the", "a", "an",
        "of", "with", "to", "in", "on", "over", "into", "from", "at", "by", "for",
        "and", "or",
    }
)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric run."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def content_tokens(text: str, stop_words: frozenset[str] | None = None) -> list[str]:
    """Tokens of ``text`` with stop-words removed (order preserved)."""
    stops = DEFAULT_STOP_WORDS if stop_words is None else stop_words
    return [t for t in tokenize(text) if t not in stops]


def split_verb_noun(phrase: str, stop_words: frozenset[str] | None = None) -> tuple[str, list[str]]:
    """Split a verb-noun action phrase into its verb and noun tokens.

    The verb is the first whitespace token, lowercased but otherwise kept
    as-is (gerunds included). Noun tokens are the content tokens of the
    remainder.
    """
    parts = phrase.split(None, 1)
    if not parts:
        return "", []
    verb = parts[0].lower()
    rest = parts[1] if len(parts) > 1 else ""
    return verb, content_tokens(rest, stop_words)
