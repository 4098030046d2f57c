"""Evaluation suite: attack-level classification, P/R/F1, ROC/PR sweeps,
set-overlap magnitude metrics, and the top-K sensitivity analysis.

All metrics are pure folds over immutable inputs; degenerate denominators
yield 0.0 with an explicit flag instead of NaN so aggregate tables stay
finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet, Iterable, Mapping, Sequence

from .corpus import EntryId
from .similarity import Ranking, predict_set

DEFAULT_GRID: tuple[int, ...] = tuple(range(1, 101))


class MetricsError(Exception):
    """Evaluation cannot proceed (missing truth, undefined curve)."""


class UncoveredPolicy(str, Enum):
    """How to count an attack whose prediction and truth are both non-empty but disjoint."""

    AS_FP = "fp"
    AS_FN = "fn"
    UNCLASSIFIED = "unclassified"


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    # Audit tally of disjoint-nonempty attacks; under AS_FP/AS_FN these are
    # also inside fp/fn, under UNCLASSIFIED they are counted nowhere else.
    unclassified: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def classify_attacks(
    predictions: Mapping[EntryId, AbstractSet[EntryId]],
    truth: Mapping[EntryId, AbstractSet[EntryId]],
    policy: UncoveredPolicy = UncoveredPolicy.AS_FP,
) -> ConfusionCounts:
    """Bin every predicted attack into TP/FP/FN/TN by set intersection with truth."""
    counts = ConfusionCounts()
    for attack, predicted in predictions.items():
        if attack not in truth:
            raise MetricsError(f"attack missing from ground truth: {attack}")
        actual = truth[attack]
        if predicted and actual:
            if predicted & actual:
                counts.tp += 1
            else:
                counts.unclassified += 1
                if policy is UncoveredPolicy.AS_FP:
                    counts.fp += 1
                elif policy is UncoveredPolicy.AS_FN:
                    counts.fn += 1
        elif predicted:
            counts.fp += 1
        elif actual:
            counts.fn += 1
        else:
            counts.tn += 1
    return counts


@dataclass
class PrfResult:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def prf(counts: ConfusionCounts) -> PrfResult:
    """Precision, recall, and F1 from confusion counts; zero denominators flag degenerate."""
    degenerate = False
    if counts.tp + counts.fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = counts.tp / (counts.tp + counts.fn)
    return PrfResult(precision, recall, f1_score(precision, recall), degenerate)


@dataclass
class CurvePoint:
    rho: int
    tpr: float
    fpr: float
    precision: float
    recall: float
    degenerate: bool = False


@dataclass
class RocResult:
    points: list[CurvePoint]
    auc: float
    rho_star: int


@dataclass
class PrResult:
    points: list[CurvePoint]
    eer_rho: int


def _cut_sets(
    rankings: Mapping[EntryId, Ranking], rho: float, k: int | None, inclusive: bool
) -> dict[EntryId, frozenset[EntryId]]:
    return {
        attack: predict_set(ranking, rho, k, inclusive=inclusive).cut_ids
        for attack, ranking in rankings.items()
    }


def _rates(counts: ConfusionCounts) -> tuple[float, float]:
    tpr = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    fpr = counts.fp / (counts.tn + counts.fp) if counts.tn + counts.fp else 0.0
    return tpr, fpr


def _sweep_points(
    rankings: Mapping[EntryId, Ranking],
    truth: Mapping[EntryId, AbstractSet[EntryId]],
    grid: Sequence[int],
    k: int | None,
    inclusive: bool,
    policy: UncoveredPolicy,
) -> list[CurvePoint]:
    points = []
    for rho in grid:
        counts = classify_attacks(_cut_sets(rankings, rho, k, inclusive), truth, policy)
        tpr, fpr = _rates(counts)
        scores = prf(counts)
        points.append(
            CurvePoint(rho, tpr, fpr, scores.precision, scores.recall, scores.degenerate)
        )
    return points


def trapezoid_auc(points: Iterable[tuple[float, float]]) -> float:
    """Trapezoidal area under (fpr, tpr) points, anchored at (0,0) and (1,1)."""
    pts = sorted(set(points) | {(0.0, 0.0), (1.0, 1.0)})
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def roc_sweep(
    rankings: Mapping[EntryId, Ranking],
    truth: Mapping[EntryId, AbstractSet[EntryId]],
    grid: Sequence[int] = DEFAULT_GRID,
    k: int | None = None,
    inclusive: bool = False,
    policy: UncoveredPolicy = UncoveredPolicy.AS_FP,
) -> RocResult:
    """TPR/FPR per grid threshold, AUC, and the threshold nearest the ideal (0,1) point.

    Ties in distance resolve to the larger threshold.
    """
    positives = sum(1 for a in rankings if truth.get(a))
    negatives = sum(1 for a in rankings if not truth.get(a))
    if positives == 0 or negatives == 0:
        raise MetricsError("AUC undefined: truth labels are all one class")
    points = _sweep_points(rankings, truth, grid, k, inclusive, policy)
    auc = trapezoid_auc((p.fpr, p.tpr) for p in points)
    best_rho, best_dist = None, None
    for p in points:
        dist = (p.fpr**2 + (1.0 - p.tpr) ** 2) ** 0.5
        if best_dist is None or dist <= best_dist:
            best_rho, best_dist = p.rho, dist
    return RocResult(points=points, auc=auc, rho_star=int(best_rho))


def pr_sweep(
    rankings: Mapping[EntryId, Ranking],
    truth: Mapping[EntryId, AbstractSet[EntryId]],
    grid: Sequence[int] = DEFAULT_GRID,
    k: int | None = None,
    inclusive: bool = False,
    policy: UncoveredPolicy = UncoveredPolicy.AS_FP,
) -> PrResult:
    """Precision/recall per threshold; the equal-error point is where they meet.

    Points where either metric is degenerate (no predictions at all, or no
    positives) cannot host a genuine intersection and are skipped unless the
    whole grid is degenerate. Ties in |P - R| resolve to the larger threshold.
    """
    points = _sweep_points(rankings, truth, grid, k, inclusive, policy)
    candidates = [p for p in points if not p.degenerate] or points
    best_rho, best_gap = None, None
    for p in candidates:
        gap = abs(p.precision - p.recall)
        if best_gap is None or gap <= best_gap:
            best_rho, best_gap = p.rho, gap
    return PrResult(points=points, eer_rho=int(best_rho))


@dataclass
class OverlapMetrics:
    """Set agreement between a predicted CVE list and its ground truth."""

    jaccard: float
    mapping_acc: float
    detection_acc: float
    size_predicted: int
    size_truth: int
    size_intersection: int
    degenerate: bool = False


def overlap(predicted: AbstractSet[EntryId], actual: AbstractSet[EntryId]) -> OverlapMetrics:
    """Jaccard (union-normalized), mapping accuracy (|L∩M|/|M|), detection accuracy (|L∩M|/|L|)."""
    inter = len(predicted & actual)
    union = len(predicted | actual)
    degenerate = not predicted or not actual
    return OverlapMetrics(
        jaccard=inter / union if union else 0.0,
        mapping_acc=inter / len(actual) if actual else 0.0,
        detection_acc=inter / len(predicted) if predicted else 0.0,
        size_predicted=len(predicted),
        size_truth=len(actual),
        size_intersection=inter,
        degenerate=degenerate,
    )


def tukey_five(values: Sequence[float]) -> dict[str, float]:
    """Five-number summary with Tukey hinges (halves include the median when odd)."""
    if not values:
        raise MetricsError("cannot summarize an empty distribution")
    data = sorted(values)
    n = len(data)

    def median(xs: Sequence[float]) -> float:
        m = len(xs)
        mid = m // 2
        return xs[mid] if m % 2 else (xs[mid - 1] + xs[mid]) / 2.0

    lower = data[: (n + 1) // 2]
    upper = data[n // 2 :]
    return {
        "min": data[0],
        "q1": median(lower),
        "median": median(data),
        "q3": median(upper),
        "max": data[-1],
    }


@dataclass
class TopkPoint:
    k: int
    mean_precision: float
    mean_recall: float
    precision_summary: dict[str, float] = field(default_factory=dict)
    recall_summary: dict[str, float] = field(default_factory=dict)


@dataclass
class TopkResult:
    points: list[TopkPoint]
    crossing_k: int
    quantile_method: str = "tukey"


def per_attack_pr(
    ranking: Ranking, actual: AbstractSet[EntryId], k: int
) -> tuple[float, float]:
    """Set-level precision/recall of the plain top-k cut for one attack."""
    predicted = {cve for cve, _ in ranking[:k]}
    inter = len(predicted & actual)
    precision = inter / len(predicted) if predicted else 0.0
    recall = inter / len(actual) if actual else 0.0
    return precision, recall


def topk_sweep(
    rankings: Mapping[EntryId, Ranking],
    truth: Mapping[EntryId, AbstractSet[EntryId]],
    ks: Sequence[int],
) -> TopkResult:
    """Per-k precision/recall distributions over attacks, plus the k where means meet.

    Ties in |meanP - meanR| resolve to the larger k.
    """
    if not rankings:
        raise MetricsError("no rankings to sweep")
    points = []
    for k in ks:
        pairs = [per_attack_pr(r, truth.get(a, frozenset()), k) for a, r in sorted(rankings.items())]
        precisions = [p for p, _ in pairs]
        recalls = [r for _, r in pairs]
        points.append(
            TopkPoint(
                k=k,
                mean_precision=sum(precisions) / len(precisions),
                mean_recall=sum(recalls) / len(recalls),
                precision_summary=tukey_five(precisions),
                recall_summary=tukey_five(recalls),
            )
        )
    best_k, best_gap = None, None
    for p in points:
        gap = abs(p.mean_precision - p.mean_recall)
        if best_gap is None or gap <= best_gap:
            best_k, best_gap = p.k, gap
    return TopkResult(points=points, crossing_k=int(best_k))
