"""Applying the engine to unstructured attack news, with automated oracles.

Each report is embedded and ranked against all CVEs (pure top-K framing);
the oracles then partition that top-K list: M2 keeps candidates scoring at
or above the threshold against the report itself, M3 against the report's
first-mentioned CVE, M4 against the concatenation of every mentioned CVE
description. Comparisons here are inclusive (>=) by contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .corpus import Corpus, EntryId, NewsReport
from .embedding import EmbeddingProvider, EmbeddingStore, embed_text
from .preprocess import clean_only
from .similarity import (
    PredictionSet,
    SimilarityKind,
    cosine,
    dot,
    predict_set,
    rank_cves,
    scaled_score,
)

DEFAULT_NEWS_RHO = 58.0
DEFAULT_NEWS_K = 20


class NewsError(Exception):
    """News prediction or validation cannot proceed."""


class MethodInapplicable(NewsError):
    """The oracle's precondition does not hold for this report (e.g. no CVE mentions)."""


class ValidationMethod(str, Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"


class MatchCategory(str, Enum):
    MATCHING_CVE_ID = "matching-cve-id"
    NO_MATCHING_CVE_ID = "no-matching-cve-id"
    NO_CVE_ID_IN_REPORT = "no-cve-id-in-report"


@dataclass
class NewsValidation:
    """Kept/dropped partition of one report's top-K list under one oracle."""

    report: EntryId
    method: ValidationMethod
    kept: list[tuple[EntryId, float]]
    dropped: list[tuple[EntryId, float]]
    reference: str | None = None

    def to_record(self) -> dict:
        return {
            "report": self.report.raw_id,
            "method": self.method.value,
            "kept": [[c.raw_id, round(scaled_score(s), 6)] for c, s in self.kept],
            "dropped": [[c.raw_id, round(scaled_score(s), 6)] for c, s in self.dropped],
            "reference": self.reference,
        }


def predict_from_news(
    report: NewsReport,
    provider: EmbeddingProvider,
    store: EmbeddingStore,
    k: int = DEFAULT_NEWS_K,
    sim: SimilarityKind = SimilarityKind.COSINE,
) -> PredictionSet:
    """Clean and embed a report body, then take the top-K ranked CVEs (no threshold)."""
    body = clean_only(report.body)
    if not body:
        raise NewsError(f"report {report.id} has no text after cleaning")
    vec = embed_text(provider, body, normalize=store.normalized)
    ranking = rank_cves(vec, store, sim)
    return predict_set(ranking, rho=None, k=k, attack=report.id)


def _sim(a: np.ndarray, b: np.ndarray, kind: SimilarityKind) -> float:
    return cosine(a, b) if kind is SimilarityKind.COSINE else dot(a, b)


def _partition(
    pairs: list[tuple[EntryId, float, float]], rho: float, inclusive: bool
) -> tuple[list[tuple[EntryId, float]], list[tuple[EntryId, float]]]:
    kept, dropped = [], []
    for cve, rank_score, oracle_score in pairs:
        passes = scaled_score(oracle_score) >= rho if inclusive else scaled_score(oracle_score) > rho
        (kept if passes else dropped).append((cve, rank_score))
    return kept, dropped


def m2_threshold(
    preds: PredictionSet, rho: float = DEFAULT_NEWS_RHO, inclusive: bool = True
) -> NewsValidation:
    """Keep top-K candidates whose similarity to the report itself meets the threshold."""
    pairs = [(cve, score, score) for cve, score in preds.topk]
    kept, dropped = _partition(pairs, rho, inclusive)
    return NewsValidation(preds.attack, ValidationMethod.M2, kept, dropped)


def m3_first_cve(
    preds: PredictionSet,
    report: NewsReport,
    store: EmbeddingStore,
    rho: float = DEFAULT_NEWS_RHO,
    inclusive: bool = True,
    sim: SimilarityKind = SimilarityKind.COSINE,
    full_store: bool = False,
) -> NewsValidation:
    """Keep candidates similar enough to the first CVE the report mentions.

    Default filters the model's top-K list; full_store re-scores every stored
    CVE against the reference instead.
    """
    if not report.mentioned_cves:
        raise MethodInapplicable(f"report {report.id} mentions no CVE IDs")
    first = report.mentioned_cves[0]
    reference = store.get(first)
    candidates = (
        rank_cves(reference, store, sim) if full_store else preds.topk
    )
    pairs = [(cve, score, _sim(reference, store.get(cve), sim)) for cve, score in candidates]
    kept, dropped = _partition(pairs, rho, inclusive)
    return NewsValidation(preds.attack, ValidationMethod.M3, kept, dropped, reference=first.raw_id)


def m4_all_cves(
    preds: PredictionSet,
    report: NewsReport,
    corpus: Corpus,
    provider: EmbeddingProvider,
    store: EmbeddingStore,
    rho: float = DEFAULT_NEWS_RHO,
    inclusive: bool = True,
    sim: SimilarityKind = SimilarityKind.COSINE,
) -> NewsValidation:
    """Keep candidates similar enough to all mentioned CVE descriptions concatenated.

    Concatenation is in first-mention order with single-space joints and goes
    through the same clean-embed-normalize path as store ingestion, so a
    single-mention report reduces exactly to the M3 reference.
    """
    if not report.mentioned_cves:
        raise MethodInapplicable(f"report {report.id} mentions no CVE IDs")
    texts = []
    for cve in report.mentioned_cves:
        entry = corpus.get(cve)
        texts.append(entry.clean_text or clean_only(entry.raw_text))
    reference = embed_text(provider, " ".join(texts), normalize=store.normalized)
    pairs = [(cve, score, _sim(reference, store.get(cve), sim)) for cve, score in preds.topk]
    kept, dropped = _partition(pairs, rho, inclusive)
    return NewsValidation(
        preds.attack, ValidationMethod.M4, kept, dropped,
        reference="+".join(c.raw_id for c in report.mentioned_cves),
    )


def match_mentions(preds: PredictionSet, report: NewsReport) -> MatchCategory:
    """Did any top-K prediction hit a CVE the report explicitly mentions?"""
    if not report.mentioned_cves:
        return MatchCategory.NO_CVE_ID_IN_REPORT
    topk_ids = {cve for cve, _ in preds.topk}
    if topk_ids & set(report.mentioned_cves):
        return MatchCategory.MATCHING_CVE_ID
    return MatchCategory.NO_MATCHING_CVE_ID


def evaluate_news(
    reports: list[NewsReport],
    corpus: Corpus,
    provider: EmbeddingProvider,
    store: EmbeddingStore,
    rho: float = DEFAULT_NEWS_RHO,
    k: int = DEFAULT_NEWS_K,
    sim: SimilarityKind = SimilarityKind.COSINE,
) -> dict:
    """Run M2-M4 and mention matching over a report set; emit summary tables.

    Per method: total retrieved, kept (relevant) and dropped counts. Match
    summary counts reports by category. Reports where M3/M4 are inapplicable
    or reference CVEs missing from the corpus are tallied separately.
    """
    method_totals = {m.value: {"retrieved": 0, "relevant": 0, "not_relevant": 0}
                     for m in (ValidationMethod.M2, ValidationMethod.M3, ValidationMethod.M4)}
    match_counts = {c.value: 0 for c in MatchCategory}
    skipped: dict[str, int] = {"inapplicable": 0, "missing_reference": 0}
    validations: list[NewsValidation] = []

    for report in reports:
        preds = predict_from_news(report, provider, store, k=k, sim=sim)
        match_counts[match_mentions(preds, report).value] += 1
        results = [m2_threshold(preds, rho)]
        for runner in (
            lambda: m3_first_cve(preds, report, store, rho, sim=sim),
            lambda: m4_all_cves(preds, report, corpus, provider, store, rho, sim=sim),
        ):
            try:
                results.append(runner())
            except MethodInapplicable:
                skipped["inapplicable"] += 1
            except LookupError:
                skipped["missing_reference"] += 1
        for validation in results:
            tally = method_totals[validation.method.value]
            tally["retrieved"] += len(validation.kept) + len(validation.dropped)
            tally["relevant"] += len(validation.kept)
            tally["not_relevant"] += len(validation.dropped)
            validations.append(validation)

    return {
        "reports": len(reports),
        "rho": rho,
        "k": k,
        "methods": method_totals,
        "match_summary": match_counts,
        "skipped": skipped,
        "validations": validations,
    }
