"""Attack-to-CVE scoring, exhaustive ranking, and threshold/top-K cuts.

Scores live on two scales: the raw similarity value, and a 0-100 display
scale (negative cosines clamp to 0) on which thresholds are expressed.
Ranking is an exact full scan; ties break by CVE ID ascending.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import numpy as np

from .corpus import EntryId, EntryKind
from .embedding import EmbeddingStore


class SimilarityError(Exception):
    """Undefined similarity (zero vector, dimension mismatch, empty store)."""


class SimilarityKind(str, Enum):
    COSINE = "cosine"
    DOT = "dot"


Ranking = list[tuple[EntryId, float]]


def cosine(p: np.ndarray, q: np.ndarray) -> float:
    """Cosine of two equal-dimension vectors, computed in float64."""
    p64 = np.asarray(p, dtype=np.float64)
    q64 = np.asarray(q, dtype=np.float64)
    if p64.shape != q64.shape:
        raise SimilarityError(f"dimension mismatch: {p64.shape} vs {q64.shape}")
    pp = float(np.dot(p64, p64))
    qq = float(np.dot(q64, q64))
    if pp == 0.0 or qq == 0.0:
        raise SimilarityError("cosine undefined for a zero-norm vector")
    return float(np.dot(p64, q64)) / float(np.sqrt(pp * qq))


def dot(p: np.ndarray, q: np.ndarray) -> float:
    p64 = np.asarray(p, dtype=np.float64)
    q64 = np.asarray(q, dtype=np.float64)
    if p64.shape != q64.shape:
        raise SimilarityError(f"dimension mismatch: {p64.shape} vs {q64.shape}")
    return float(np.dot(p64, q64))


def scaled_score(value: float) -> float:
    """Raw similarity mapped onto the continuous 0-100 threshold scale.

    Rounded at the ninth decimal so decimal-exact scores sit exactly on
    integer thresholds instead of a float ulp below them.
    """
    return round(100.0 * max(0.0, value), 9)


def display_score(value: float) -> int:
    """Integer 0-100 presentation of a similarity value."""
    return int(round(scaled_score(value)))


def rank_cves(
    attack_vec: np.ndarray,
    store: EmbeddingStore,
    sim: SimilarityKind = SimilarityKind.COSINE,
) -> Ranking:
    """Rank every Vulnerability vector in the store against one attack vector.

    The scan is exact and complete; order is score descending with CVE ID
    ascending on ties, so results are reproducible bit for bit.
    """
    ids = store.ids_of_kind(EntryKind.VULNERABILITY)
    if not ids:
        raise SimilarityError("store holds no Vulnerability vectors")
    query = np.asarray(attack_vec, dtype=np.float64)
    if query.shape != (store.dim,):
        raise SimilarityError(f"attack vector has shape {query.shape}, store dim {store.dim}")
    matrix = store.matrix(ids).astype(np.float64)
    dots = matrix @ query
    if sim is SimilarityKind.COSINE:
        qq = float(np.dot(query, query))
        row_sq = np.einsum("ij,ij->i", matrix, matrix)
        if qq == 0.0 or np.any(row_sq == 0.0):
            raise SimilarityError("cosine undefined for a zero-norm vector")
        scores = dots / np.sqrt(row_sq * qq)
    else:
        scores = dots
    # ids are pre-sorted ascending; a stable sort on -score keeps the tie rule.
    order = np.argsort(-scores, kind="stable")
    return [(ids[i], float(scores[i])) for i in order]


@dataclass
class PredictionSet:
    """One attack's ranked candidates and the retained threshold/top-K cut."""

    attack: EntryId | None
    ranked: Ranking
    rho: float | None
    k: int | None
    inclusive: bool = False
    cut: Ranking = field(default_factory=list)

    @property
    def cut_ids(self) -> frozenset[EntryId]:
        return frozenset(cve for cve, _ in self.cut)

    @property
    def topk(self) -> Ranking:
        return self.ranked if self.k is None else self.ranked[: self.k]

    def to_record(self) -> dict:
        items = []
        kept = self.cut_ids
        for cve, score in self.topk:
            items.append(
                {
                    "cve": cve.raw_id,
                    "score": round(scaled_score(score), 6),
                    "display": display_score(score),
                    "kept": cve in kept,
                }
            )
        record: dict = {"rho": self.rho, "k": self.k, "items": items}
        if self.attack is not None:
            record["attack"] = self.attack.raw_id
            record["kind"] = self.attack.kind.value
        return record


def predict_set(
    ranking: Ranking,
    rho: float | None,
    k: int | None = None,
    inclusive: bool = False,
    attack: EntryId | None = None,
) -> PredictionSet:
    """Apply the top-K bound first, then the threshold filter, yielding the cut.

    An empty cut means the model predicts no vulnerabilities for this attack.
    rho=None skips the threshold entirely (pure top-K framing).
    """
    if k is not None and k < 1:
        raise ValueError("k must be positive")
    head = ranking if k is None else ranking[:k]
    if rho is None:
        cut = list(head)
    elif inclusive:
        cut = [(c, s) for c, s in head if scaled_score(s) >= rho]
    else:
        cut = [(c, s) for c, s in head if scaled_score(s) > rho]
    return PredictionSet(attack=attack, ranked=list(ranking), rho=rho, k=k,
                         inclusive=inclusive, cut=cut)


def rank_all(
    attack_vectors: dict[EntryId, np.ndarray],
    store: EmbeddingStore,
    sim: SimilarityKind = SimilarityKind.COSINE,
) -> dict[EntryId, Ranking]:
    """Full rankings for many attacks over one read-only store."""
    return {attack: rank_cves(vec, store, sim) for attack, vec in sorted(attack_vectors.items())}
