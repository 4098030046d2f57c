"""Shared fixtures: the four-record chain corpus, random graph corpora, and
an independent brute-force chain enumerator used as the annotation oracle."""

from __future__ import annotations

import json
import random

import pytest

from attack2cve.corpus import Corpus, CorpusEntry, EntryId, EntryKind, parse_corpus
from attack2cve.linkgraph import KIND_SEQUENCES


def record(kind: str, raw_id: str, text: str, links: list[str] | None = None,
           title: str = "") -> str:
    return json.dumps(
        {"kind": kind, "id": raw_id, "title": title, "text": text, "links": links or []}
    )


CHAIN_LINES = [
    record(
        "Technique",
        "T1574.007",
        "Adversaries may execute their own malicious payloads by hijacking environment "
        "variables used to load libraries. Adversaries may place a program in an earlier "
        "entry in the list of directories stored in the PATH environment variable.",
        ["CAPEC-38"],
        title="Path Interception by PATH Environment Variable",
    ),
    record(
        "AttackPattern",
        "CAPEC-38",
        "This pattern of attack sees an adversary load a malicious resource into a "
        "program's standard path so that when a known command is executed then the "
        "system instead executes the malicious component.",
        ["CWE-427"],
        title="Leveraging/Manipulating Configuration File Search Paths",
    ),
    record(
        "Weakness",
        "CWE-427",
        "The product searches for critical resources using an externally-supplied "
        "search path that can point to resources that are not under the product's "
        "direct control.",
        ["CVE-2022-4826"],
        title="Uncontrolled Search Path Element",
    ),
    record(
        "Vulnerability",
        "CVE-2022-4826",
        "The Simple Tooltips WordPress plugin before 2.1.4 does not validate and escape "
        "some of its shortcode attributes before outputting them back in a page or post, "
        "which could allow users with the contributor role and above to perform Stored "
        "Cross-Site Scripting attacks.",
    ),
]


@pytest.fixture
def chain_corpus() -> Corpus:
    return parse_corpus(CHAIN_LINES)


@pytest.fixture
def chain_lines() -> list[str]:
    return list(CHAIN_LINES)


def eid(raw: str, kind: EntryKind | None = None) -> EntryId:
    return EntryId.from_raw(raw, kind)


def make_entry(entry_id: EntryId, links: list[EntryId] | None = None,
               text: str = "some text") -> CorpusEntry:
    return CorpusEntry(id=entry_id, raw_text=text, explicit_links=links or [])


def random_graph_corpus(rng: random.Random, max_nodes: int = 50) -> Corpus:
    """A corpus with random kinds, random edge directions, and occasional dangling links."""
    ids: list[EntryId] = []
    kind_pools = [
        (EntryKind.TACTIC, rng.randint(0, 2), lambda i: f"TA{i:04d}"),
        (EntryKind.TECHNIQUE, rng.randint(1, 8), lambda i: f"T{1000 + i:04d}"),
        (EntryKind.PROCEDURE, rng.randint(0, 4), lambda i: f"PROC-{i:03d}"),
        (EntryKind.ATTACK_PATTERN, rng.randint(0, 8), lambda i: f"CAPEC-{i + 1}"),
        (EntryKind.WEAKNESS, rng.randint(0, 8), lambda i: f"CWE-{i + 1}"),
        (EntryKind.VULNERABILITY, rng.randint(1, 12), lambda i: f"CVE-2020-{1000 + i}"),
    ]
    for kind, count, fmt in kind_pools:
        for i in range(count):
            ids.append(EntryId(kind, fmt(i)))
    ids = ids[:max_nodes]

    corpus = Corpus()
    for entry_id in ids:
        corpus.entries[entry_id] = make_entry(entry_id)
    n_edges = rng.randint(0, min(3 * len(ids), 120))
    for _ in range(n_edges):
        src = rng.choice(ids)
        dst = rng.choice(ids)
        if src == dst:
            continue
        entry = corpus.entries[src]
        if dst not in entry.explicit_links:
            entry.explicit_links.append(dst)
    # a few dangling references
    for _ in range(rng.randint(0, 3)):
        src = rng.choice(ids)
        ghost = EntryId(EntryKind.WEAKNESS, f"CWE-{9000 + rng.randint(0, 99)}")
        entry = corpus.entries[src]
        if ghost != src and ghost not in entry.explicit_links and ghost not in corpus.entries:
            entry.explicit_links.append(ghost)
    return corpus


def brute_force_cves(corpus: Corpus, attack: EntryId, directed: bool = False) -> set[EntryId]:
    """Naive path enumeration over the raw link lists, independent of LinkGraph."""
    edges = {
        (entry.id, target)
        for entry in corpus.entries.values()
        for target in entry.explicit_links
    }
    nodes = set(corpus.entries) | {dst for _, dst in edges}

    def connected(a: EntryId, b: EntryId) -> bool:
        if directed:
            return (a, b) in edges
        return (a, b) in edges or (b, a) in edges

    sequence = KIND_SEQUENCES[attack.kind]
    found: set[EntryId] = set()

    def walk(node: EntryId, level: int) -> None:
        if level == len(sequence) - 1:
            found.add(node)
            return
        for candidate in nodes:
            if candidate.kind is sequence[level + 1] and connected(node, candidate):
                walk(candidate, level + 1)

    walk(attack, 0)
    return found
