"""Canonical corpus model: entry identifiers, records, and the line-delimited format.

One record per line, JSON-encoded, fields: kind, id, title, text, links.
An optional "clean" field carries preprocessed text so a corpus round-trips
losslessly after cleaning.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Iterator

logger = logging.getLogger(__name__)


class CorpusError(Exception):
    """Raised when a corpus load cannot proceed (corrupted export)."""


class DuplicateEntryError(CorpusError):
    """Same entry ID appears on two lines; the whole load is rejected."""


class EntryKind(str, Enum):
    """Repository entry categories, tagged as in the canonical file format."""

    TACTIC = "Tactic"
    TECHNIQUE = "Technique"
    PROCEDURE = "Procedure"
    ATTACK_PATTERN = "AttackPattern"
    WEAKNESS = "Weakness"
    VULNERABILITY = "Vulnerability"
    NEWS_REPORT = "NewsReport"


ATTACK_KINDS = frozenset(
    {EntryKind.TACTIC, EntryKind.TECHNIQUE, EntryKind.PROCEDURE, EntryKind.ATTACK_PATTERN}
)

# Published CVE IDs use a 4-digit year and 4 to 7 digits of sequence number.
CVE_ID_RE = re.compile(r"\bCVE-(\d{4})-(\d{4,7})\b", re.IGNORECASE)

_TACTIC_RE = re.compile(r"^TA\d{4}$")
_TECHNIQUE_RE = re.compile(r"^T\d{4}(\.\d{3})?$")
_CAPEC_RE = re.compile(r"^CAPEC-\d+$")
_CWE_RE = re.compile(r"^CWE-\d+$")
_CVE_FULL_RE = re.compile(r"^CVE-\d{4}-\d{4,7}$")


def detect_kind(raw_id: str) -> EntryKind | None:
    """Infer the entry kind from a known ID prefix, or None if no prefix matches."""
    upper = raw_id.upper()
    if _CVE_FULL_RE.match(upper):
        return EntryKind.VULNERABILITY
    if _CWE_RE.match(upper):
        return EntryKind.WEAKNESS
    if _CAPEC_RE.match(upper):
        return EntryKind.ATTACK_PATTERN
    if _TACTIC_RE.match(upper):
        return EntryKind.TACTIC
    if _TECHNIQUE_RE.match(upper):
        return EntryKind.TECHNIQUE
    if upper.startswith("NEWS-"):
        return EntryKind.NEWS_REPORT
    return None


@dataclass(frozen=True, order=True)
class EntryId:
    """Typed identifier of a repository entry."""

    kind: EntryKind
    raw_id: str

    def __post_init__(self) -> None:
        if not self.raw_id:
            raise ValueError("entry ID must be non-empty")
        if self.kind is EntryKind.VULNERABILITY and not _CVE_FULL_RE.match(self.raw_id):
            raise ValueError(f"not a valid CVE identifier: {self.raw_id!r}")
        detected = detect_kind(self.raw_id)
        if detected is not None and detected is not self.kind:
            raise ValueError(
                f"ID {self.raw_id!r} has the prefix of a {detected.value}, "
                f"declared as {self.kind.value}"
            )

    def __str__(self) -> str:
        return self.raw_id

    @staticmethod
    def from_raw(raw_id: str, kind: EntryKind | None = None) -> "EntryId":
        """Build an EntryId, inferring the kind from the prefix when not given."""
        resolved = kind or detect_kind(raw_id)
        if resolved is None:
            raise ValueError(f"cannot infer entry kind from ID {raw_id!r}")
        return EntryId(resolved, raw_id)


def cve_id(raw: str) -> EntryId:
    """Shorthand for a Vulnerability EntryId, normalizing case."""
    return EntryId(EntryKind.VULNERABILITY, raw.upper())


def extract_cve_ids(text: str) -> list[EntryId]:
    """Find all CVE identifiers in text, upper-cased, first-occurrence order, deduplicated."""
    seen: set[str] = set()
    out: list[EntryId] = []
    for match in CVE_ID_RE.finditer(text):
        normalized = f"CVE-{match.group(1)}-{match.group(2)}"
        if normalized not in seen:
            seen.add(normalized)
            out.append(EntryId(EntryKind.VULNERABILITY, normalized))
    return out


@dataclass
class CorpusEntry:
    """One repository record: identifier, texts, and page-listed outbound links."""

    id: EntryId
    title: str = ""
    raw_text: str = ""
    clean_text: str = ""
    explicit_links: list[EntryId] = field(default_factory=list)

    @property
    def embed_text(self) -> str:
        """Text used downstream: the cleaned form when present, else the raw one."""
        return self.clean_text or self.raw_text


@dataclass
class NewsReport:
    """An unstructured attack report with the CVE IDs it mentions, in first-mention order."""

    id: EntryId
    body: str
    mentioned_cves: list[EntryId] = field(default_factory=list)

    @staticmethod
    def from_entry(entry: CorpusEntry) -> "NewsReport":
        return NewsReport(
            id=entry.id, body=entry.raw_text, mentioned_cves=extract_cve_ids(entry.raw_text)
        )


@dataclass
class ParseIssue:
    """A record-level problem found while loading; the line was skipped."""

    line_no: int
    message: str


@dataclass
class Corpus:
    """Immutable-after-load collection of entries keyed by ID."""

    entries: dict[EntryId, CorpusEntry] = field(default_factory=dict)
    issues: list[ParseIssue] = field(default_factory=list, compare=False)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, entry_id: EntryId) -> bool:
        return entry_id in self.entries

    def get(self, entry_id: EntryId) -> CorpusEntry:
        try:
            return self.entries[entry_id]
        except KeyError:
            raise LookupError(f"no such entry in corpus: {entry_id}") from None

    def by_kind(self, kind: EntryKind) -> Iterator[CorpusEntry]:
        return (e for e in self.entries.values() if e.id.kind is kind)

    def attacks(self) -> Iterator[CorpusEntry]:
        return (e for e in self.entries.values() if e.id.kind in ATTACK_KINDS)

    def counts(self) -> dict[EntryKind, int]:
        out = {kind: 0 for kind in EntryKind}
        for entry_id in self.entries:
            out[entry_id.kind] += 1
        return out

    def news_reports(self) -> list[NewsReport]:
        return [NewsReport.from_entry(e) for e in self.by_kind(EntryKind.NEWS_REPORT)]


def _parse_record(obj: dict, line_no: int, issues: list[ParseIssue]) -> CorpusEntry | None:
    kind_tag = obj.get("kind")
    try:
        kind = EntryKind(kind_tag)
    except ValueError:
        issues.append(ParseIssue(line_no, f"unknown kind tag {kind_tag!r}"))
        return None
    raw_id = obj.get("id")
    if not isinstance(raw_id, str) or not raw_id:
        issues.append(ParseIssue(line_no, "missing or empty id"))
        return None
    try:
        entry_id = EntryId(kind, raw_id)
    except ValueError as exc:
        issues.append(ParseIssue(line_no, str(exc)))
        return None

    links: list[EntryId] = []
    seen: set[EntryId] = set()
    for raw_link in obj.get("links", []):
        link_kind = detect_kind(str(raw_link))
        if link_kind is None:
            issues.append(ParseIssue(line_no, f"link with unknown prefix skipped: {raw_link!r}"))
            continue
        link = EntryId(link_kind, str(raw_link))
        if link == entry_id or link in seen:
            continue
        seen.add(link)
        links.append(link)

    return CorpusEntry(
        id=entry_id,
        title=str(obj.get("title", "")),
        raw_text=str(obj.get("text", "")),
        clean_text=str(obj.get("clean", "")),
        explicit_links=links,
    )


def parse_corpus(stream: Iterable[str] | IO[str]) -> Corpus:
    """Load a line-delimited canonical corpus.

    Malformed lines and unknown kind tags are skipped and reported with their
    line numbers; a duplicate ID rejects the whole load.
    """
    entries: dict[EntryId, CorpusEntry] = {}
    issues: list[ParseIssue] = []
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            issues.append(ParseIssue(line_no, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(obj, dict):
            issues.append(ParseIssue(line_no, "record is not an object"))
            continue
        entry = _parse_record(obj, line_no, issues)
        if entry is None:
            continue
        if entry.id in entries:
            raise DuplicateEntryError(
                f"duplicate entry ID {entry.id} on line {line_no}; load rejected"
            )
        entries[entry.id] = entry
    for issue in issues:
        logger.warning("corpus line %d skipped: %s", issue.line_no, issue.message)
    return Corpus(entries=entries, issues=issues)


def load_corpus(path: str) -> Corpus:
    """Parse a corpus file; invalid UTF-8 byte sequences are replaced, never fatal."""
    with open(path, encoding="utf-8", errors="replace") as fh:
        return parse_corpus(fh)


def serialize_entry(entry: CorpusEntry) -> str:
    record: dict = {
        "kind": entry.id.kind.value,
        "id": entry.id.raw_id,
        "title": entry.title,
        "text": entry.raw_text,
        "links": [link.raw_id for link in entry.explicit_links],
    }
    if entry.clean_text:
        record["clean"] = entry.clean_text
    return json.dumps(record, ensure_ascii=False)


def serialize_corpus(corpus: Corpus, sort: bool = False) -> Iterator[str]:
    """Yield one canonical line per entry; sort=True gives a normalized, stable order."""
    entries: Iterable[CorpusEntry] = corpus.entries.values()
    if sort:
        entries = sorted(entries, key=lambda e: (e.id.kind.value, e.id.raw_id))
    for entry in entries:
        yield serialize_entry(entry)


def save_corpus(corpus: Corpus, path: str, sort: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in serialize_corpus(corpus, sort=sort):
            fh.write(line + "\n")
