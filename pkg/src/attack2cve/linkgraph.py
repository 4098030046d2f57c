"""Explicit-link graph over corpus entries and chain-derived ground truth.

An attack maps to the CVEs reachable through the canonical kind sequence
(Tactic -> Technique -> AttackPattern -> Weakness -> Vulnerability, entered
at the attack's own kind; Procedures go through their parent Techniques).
A link counts regardless of which page listed it unless directed mode is on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator

from .corpus import ATTACK_KINDS, Corpus, EntryId, EntryKind

Chain = tuple[EntryId, ...]


class LinkVia(str, Enum):
    """Where an edge was found. Only page-listed links exist today."""

    PAGE_LISTED = "page-listed"


@dataclass(frozen=True)
class Edge:
    src: EntryId
    dst: EntryId
    via: LinkVia = LinkVia.PAGE_LISTED


KIND_SEQUENCES: dict[EntryKind, tuple[EntryKind, ...]] = {
    EntryKind.TACTIC: (
        EntryKind.TACTIC,
        EntryKind.TECHNIQUE,
        EntryKind.ATTACK_PATTERN,
        EntryKind.WEAKNESS,
        EntryKind.VULNERABILITY,
    ),
    EntryKind.TECHNIQUE: (
        EntryKind.TECHNIQUE,
        EntryKind.ATTACK_PATTERN,
        EntryKind.WEAKNESS,
        EntryKind.VULNERABILITY,
    ),
    EntryKind.PROCEDURE: (
        EntryKind.PROCEDURE,
        EntryKind.TECHNIQUE,
        EntryKind.ATTACK_PATTERN,
        EntryKind.WEAKNESS,
        EntryKind.VULNERABILITY,
    ),
    EntryKind.ATTACK_PATTERN: (
        EntryKind.ATTACK_PATTERN,
        EntryKind.WEAKNESS,
        EntryKind.VULNERABILITY,
    ),
}


@dataclass(frozen=True)
class LinkGraph:
    """Read-only graph of page-listed links; dangling targets are kept, not dropped."""

    nodes: frozenset[EntryId]
    edges: frozenset[Edge]
    dangling: frozenset[EntryId]

    @cached_property
    def _succ(self) -> dict[EntryId, frozenset[EntryId]]:
        out: dict[EntryId, set[EntryId]] = {}
        for edge in self.edges:
            out.setdefault(edge.src, set()).add(edge.dst)
        return {k: frozenset(v) for k, v in out.items()}

    @cached_property
    def _adj(self) -> dict[EntryId, frozenset[EntryId]]:
        out: dict[EntryId, set[EntryId]] = {}
        for edge in self.edges:
            out.setdefault(edge.src, set()).add(edge.dst)
            out.setdefault(edge.dst, set()).add(edge.src)
        return {k: frozenset(v) for k, v in out.items()}

    def neighbors(self, node: EntryId, kind: EntryKind, directed: bool = False) -> list[EntryId]:
        """Nodes of the given kind mentioned together with `node`, sorted for determinism."""
        table = self._succ if directed else self._adj
        return sorted(n for n in table.get(node, ()) if n.kind is kind)


def build_link_graph(corpus: Corpus) -> LinkGraph:
    """One node per entry, one edge per page-listed link; unresolved targets are data."""
    nodes = frozenset(corpus.entries.keys())
    edges = set()
    dangling = set()
    for entry in corpus.entries.values():
        for target in entry.explicit_links:
            edges.add(Edge(entry.id, target))
            if target not in nodes:
                dangling.add(target)
    return LinkGraph(nodes=nodes, edges=frozenset(edges), dangling=frozenset(dangling))


@dataclass
class AttackAnnotation:
    """CVEs derived for one attack, with every chain that produced each of them."""

    attack: EntryId
    cves: frozenset[EntryId]
    chains: dict[EntryId, list[Chain]]


def annotate_attack(graph: LinkGraph, attack: EntryId, directed: bool = False) -> AttackAnnotation:
    """Derive the linked-CVE set for one attack by kind-sequence chain traversal."""
    if attack.kind not in KIND_SEQUENCES:
        raise ValueError(f"not an attack kind: {attack.kind.value}")
    if attack not in graph.nodes and attack not in graph.dangling:
        raise LookupError(f"unknown attack ID: {attack}")
    sequence = KIND_SEQUENCES[attack.kind]
    chains: dict[EntryId, list[Chain]] = {}

    def expand(path: Chain, level: int) -> None:
        if level == len(sequence) - 1:
            chains.setdefault(path[-1], []).append(path)
            return
        for nxt in graph.neighbors(path[-1], sequence[level + 1], directed=directed):
            expand(path + (nxt,), level + 1)

    expand((attack,), 0)
    return AttackAnnotation(attack=attack, cves=frozenset(chains), chains=chains)


def replay_chain(graph: LinkGraph, chain: Chain, directed: bool = False) -> bool:
    """Check a stored chain still holds in the graph (provenance soundness)."""
    if len(chain) < 2:
        return False
    expected = KIND_SEQUENCES.get(chain[0].kind)
    if expected is None or tuple(n.kind for n in chain) != expected:
        return False
    for a, b in zip(chain, chain[1:]):
        if b not in graph.neighbors(a, b.kind, directed=directed):
            return False
    return True


@dataclass
class GroundTruthMap:
    """Per attack, the derived set of linked CVEs plus the chains behind each pair."""

    mapping: dict[EntryId, frozenset[EntryId]] = field(default_factory=dict)
    provenance: dict[EntryId, dict[EntryId, list[Chain]]] = field(default_factory=dict)

    def __contains__(self, attack: EntryId) -> bool:
        return attack in self.mapping

    def cves_for(self, attack: EntryId) -> frozenset[EntryId]:
        try:
            return self.mapping[attack]
        except KeyError:
            raise LookupError(f"attack not in ground truth: {attack}") from None

    def attacks(self) -> Iterator[EntryId]:
        return iter(self.mapping)

    def to_lines(self, with_provenance: bool = True) -> Iterator[str]:
        """One line per attack: ID, CVE array, optional provenance chains."""
        for attack in sorted(self.mapping, key=lambda a: (a.kind.value, a.raw_id)):
            record: dict = {
                "attack": attack.raw_id,
                "kind": attack.kind.value,
                "cves": sorted(c.raw_id for c in self.mapping[attack]),
            }
            if with_provenance and attack in self.provenance:
                record["provenance"] = {
                    cve.raw_id: sorted([n.raw_id for n in chain] for chain in chains)
                    for cve, chains in sorted(self.provenance[attack].items())
                }
            yield json.dumps(record, sort_keys=True)

    @staticmethod
    def from_lines(lines: Iterable[str]) -> "GroundTruthMap":
        truth = GroundTruthMap()
        for line in lines:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "attack" not in obj:
                continue
            attack = EntryId(EntryKind(obj["kind"]), obj["attack"])
            cves = frozenset(EntryId.from_raw(c) for c in obj["cves"])
            truth.mapping[attack] = cves
            if "provenance" in obj:
                truth.provenance[attack] = {
                    EntryId.from_raw(cve): [
                        tuple(EntryId.from_raw(n) for n in chain) for chain in chains
                    ]
                    for cve, chains in obj["provenance"].items()
                }
        return truth


@dataclass
class KindStats:
    linked: int = 0
    not_linked: int = 0

    @property
    def total(self) -> int:
        return self.linked + self.not_linked


@dataclass
class RepoStats:
    """In-corpus CVE/CWE entries participating in chains for one attack kind."""

    cve_linked: int = 0
    cve_not_linked: int = 0
    cwe_linked: int = 0
    cwe_not_linked: int = 0


@dataclass
class LinkStats:
    per_kind: dict[EntryKind, KindStats] = field(default_factory=dict)
    per_repo: dict[str, RepoStats] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "attacks": {
                kind.value: {"linked": s.linked, "not_linked": s.not_linked, "total": s.total}
                for kind, s in sorted(self.per_kind.items(), key=lambda kv: kv[0].value)
            },
            "repositories": {
                label: {
                    "cve_linked": s.cve_linked,
                    "cve_not_linked": s.cve_not_linked,
                    "cwe_linked": s.cwe_linked,
                    "cwe_not_linked": s.cwe_not_linked,
                }
                for label, s in sorted(self.per_repo.items())
            },
        }


def annotate_all(
    graph: LinkGraph, corpus: Corpus, directed: bool = False
) -> tuple[GroundTruthMap, LinkStats]:
    """Annotate every attack entry and tally linked/not-linked counts per kind."""
    truth = GroundTruthMap()
    stats = LinkStats(per_kind={kind: KindStats() for kind in sorted(ATTACK_KINDS)})
    linked_cves: dict[EntryKind, set[EntryId]] = {k: set() for k in ATTACK_KINDS}
    linked_cwes: dict[EntryKind, set[EntryId]] = {k: set() for k in ATTACK_KINDS}

    for entry in corpus.attacks():
        annotation = annotate_attack(graph, entry.id, directed=directed)
        truth.mapping[entry.id] = annotation.cves
        truth.provenance[entry.id] = annotation.chains
        kind = entry.id.kind
        if annotation.cves:
            stats.per_kind[kind].linked += 1
            linked_cves[kind].update(annotation.cves)
            for chains in annotation.chains.values():
                for chain in chains:
                    linked_cwes[kind].update(n for n in chain if n.kind is EntryKind.WEAKNESS)
        else:
            stats.per_kind[kind].not_linked += 1

    corpus_cves = {e.id for e in corpus.by_kind(EntryKind.VULNERABILITY)}
    corpus_cwes = {e.id for e in corpus.by_kind(EntryKind.WEAKNESS)}
    for kind in sorted(ATTACK_KINDS):
        cves_in = linked_cves[kind] & corpus_cves
        cwes_in = linked_cwes[kind] & corpus_cwes
        stats.per_repo[kind.value] = RepoStats(
            cve_linked=len(cves_in),
            cve_not_linked=len(corpus_cves - cves_in),
            cwe_linked=len(cwes_in),
            cwe_not_linked=len(corpus_cwes - cwes_in),
        )
    all_cves = set().union(*linked_cves.values()) & corpus_cves
    all_cwes = set().union(*linked_cwes.values()) & corpus_cwes
    stats.per_repo["all"] = RepoStats(
        cve_linked=len(all_cves),
        cve_not_linked=len(corpus_cves - all_cves),
        cwe_linked=len(all_cwes),
        cwe_not_linked=len(corpus_cwes - all_cwes),
    )
    return truth, stats
