"""Minimal cleaning for transformer input.

Strips citations, URLs, and markup, then drops symbols outside the keep-set
{letters, digits, space, '.', ',', '-'}. No stemming, no lemmatization, no
stop-word removal; case is preserved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_CITATION_RE = re.compile(r"\(Citation:[^)]*\)")
_MARKUP_RE = re.compile(r"<[^<>]*>")
# A URL starts where no keep-set character precedes it, so removal never
# splits a word and a second cleaning pass finds nothing new.
_URL_RE = re.compile(
    r"(?<![0-9A-Za-z.,\-])(?:(?:https?|ftp)://|www\.)\S+", re.IGNORECASE
)
# Everything outside the keep-set becomes a space so adjacent words never merge.
_DROP_RE = re.compile(r"[^0-9A-Za-z.,\- \t\r\n]+")
_WS_RE = re.compile(r"\s+")


@dataclass
class CleaningReport:
    """Counts of what was removed; chars_out never exceeds chars_in."""

    removed_urls: int = 0
    removed_citations: int = 0
    removed_markup: int = 0
    chars_in: int = 0
    chars_out: int = 0


def clean_text(raw: str) -> tuple[str, CleaningReport]:
    """Clean one document, returning the cleaned string and a removal report."""
    report = CleaningReport(chars_in=len(raw))

    text, report.removed_citations = _CITATION_RE.subn(" ", raw)
    text, report.removed_markup = _MARKUP_RE.subn(" ", text)
    text, report.removed_urls = _URL_RE.subn(" ", text)
    text = _DROP_RE.sub(" ", text)
    text = _WS_RE.sub(" ", text).strip()

    report.chars_out = len(text)
    return text, report


def clean_only(raw: str) -> str:
    """Cleaned text without the report."""
    return clean_text(raw)[0]
