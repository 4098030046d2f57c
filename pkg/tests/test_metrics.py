"""Classification, P/R/F1, ROC/PR sweeps, overlap, and top-K analysis.

Sweep fixtures are verified against independent brute-force recomputation
inside the tests, never against values the sweeps themselves produced.
"""

import random

import pytest

from attack2cve.corpus import EntryId, EntryKind
from attack2cve.metrics import (
    ConfusionCounts,
    MetricsError,
    UncoveredPolicy,
    classify_attacks,
    f1_score,
    overlap,
    pr_sweep,
    prf,
    roc_sweep,
    topk_sweep,
    trapezoid_auc,
    tukey_five,
)


def attack(i: int) -> EntryId:
    return EntryId(EntryKind.TECHNIQUE, f"T{1000 + i:04d}")


def cve(i: int) -> EntryId:
    return EntryId(EntryKind.VULNERABILITY, f"CVE-2020-{1000 + i}")


def single_cve_fixture(scores_and_labels):
    """Each attack ranks exactly one CVE; label says whether truth holds it."""
    rankings, truth = {}, {}
    for i, (score, positive) in enumerate(scores_and_labels):
        a = attack(i)
        rankings[a] = [(cve(i), score / 100.0)]
        truth[a] = frozenset({cve(i)}) if positive else frozenset()
    return rankings, truth


class TestClassifyAttacks:
    def test_four_canonical_cases(self):
        predictions = {
            attack(0): {cve(0)},        # TP: overlap with truth
            attack(1): {cve(1)},        # FP: truth empty
            attack(2): set(),           # FN: truth non-empty
            attack(3): set(),           # TN: both empty
        }
        truth = {
            attack(0): {cve(0)},
            attack(1): set(),
            attack(2): {cve(2)},
            attack(3): set(),
        }
        counts = classify_attacks(predictions, truth)
        assert (counts.tp, counts.fp, counts.fn, counts.tn) == (1, 1, 1, 1)
        assert counts.unclassified == 0

    def test_all_empty_is_all_tn(self):
        predictions = {attack(i): set() for i in range(7)}
        truth = {attack(i): set() for i in range(7)}
        counts = classify_attacks(predictions, truth)
        assert counts.tn == 7 and counts.total == 7

    def test_disjoint_nonempty_default_fp_and_tallied(self):
        predictions = {attack(i): {cve(i)} for i in range(4)}
        predictions[attack(4)] = {cve(99)}
        truth = {
            attack(0): {cve(0)},
            attack(1): set(),
            attack(2): {cve(2)},
            attack(3): set(),
            attack(4): {cve(4)},
        }
        predictions[attack(2)] = set()
        predictions[attack(3)] = set()
        counts = classify_attacks(predictions, truth)
        assert counts.unclassified == 1
        assert counts.fp == 2  # the truth-empty FP plus the disjoint case

    def test_disjoint_policies(self):
        predictions = {attack(0): {cve(1)}}
        truth = {attack(0): {cve(0)}}
        as_fn = classify_attacks(predictions, truth, UncoveredPolicy.AS_FN)
        assert (as_fn.fn, as_fn.unclassified) == (1, 1)
        keep_out = classify_attacks(predictions, truth, UncoveredPolicy.UNCLASSIFIED)
        assert keep_out.total == 0 and keep_out.unclassified == 1

    def test_missing_truth_raises(self):
        with pytest.raises(MetricsError):
            classify_attacks({attack(0): set()}, {})


class TestPrf:
    def test_one_one_one(self):
        result = prf(ConfusionCounts(tp=1, fp=1, fn=1))
        assert (result.precision, result.recall, result.f1) == (0.5, 0.5, 0.5)

    def test_f1_from_rates(self):
        assert f1_score(0.84, 0.947) == pytest.approx(0.890, abs=0.001)

    def test_all_zero_degenerate(self):
        result = prf(ConfusionCounts())
        assert result.precision == result.recall == result.f1 == 0.0
        assert result.degenerate

    def test_permutation_invariance(self):
        rng = random.Random(31)
        predictions = {attack(i): ({cve(i)} if rng.random() < 0.5 else set()) for i in range(20)}
        truth = {attack(i): ({cve(i)} if rng.random() < 0.5 else set()) for i in range(20)}
        base = prf(classify_attacks(predictions, truth))
        shuffled_keys = list(predictions)
        rng.shuffle(shuffled_keys)
        again = prf(classify_attacks({k: predictions[k] for k in shuffled_keys}, truth))
        assert base == again


class TestRocSweep:
    def test_perfectly_separated(self):
        rankings, truth = single_cve_fixture(
            [(90.0, True)] * 10 + [(10.0, False)] * 10
        )
        result = roc_sweep(rankings, truth)
        assert result.auc == pytest.approx(1.0, abs=1e-12)
        assert 10 < result.rho_star < 90

    def test_constant_scores_shuffled_labels(self):
        rng = random.Random(17)
        labels = [True] * 50 + [False] * 50
        rng.shuffle(labels)
        rankings, truth = single_cve_fixture([(50.0, lab) for lab in labels])
        result = roc_sweep(rankings, truth)
        assert result.auc == pytest.approx(0.5, abs=1e-12)

    def test_all_one_class_raises(self):
        rankings, truth = single_cve_fixture([(90.0, True), (10.0, True)])
        with pytest.raises(MetricsError):
            roc_sweep(rankings, truth)

    def test_sweep_matches_from_scratch(self):
        rng = random.Random(18)
        rankings, truth = single_cve_fixture(
            [(rng.uniform(0, 100), rng.random() < 0.5) for _ in range(60)]
        )
        result = roc_sweep(rankings, truth)
        for point in result.points:
            fresh = {
                a: {c for c, s in ranking if 100 * s > point.rho}
                for a, ranking in rankings.items()
            }
            counts = classify_attacks(fresh, truth)
            tpr = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
            fpr = counts.fp / (counts.tn + counts.fp) if counts.tn + counts.fp else 0.0
            assert point.tpr == pytest.approx(tpr, abs=1e-12)
            assert point.fpr == pytest.approx(fpr, abs=1e-12)

    def test_label_reversal_flips_auc(self):
        rng = random.Random(19)
        pairs = [(rng.uniform(0, 100), rng.random() < 0.5) for _ in range(80)]
        if all(lab for _, lab in pairs) or not any(lab for _, lab in pairs):
            pairs[0] = (pairs[0][0], not pairs[0][1])
        rankings, truth = single_cve_fixture(pairs)
        flipped = {
            a: (frozenset() if cves else frozenset({ranking[0][0]}))
            for (a, cves), ranking in zip(truth.items(), rankings.values())
        }
        auc = roc_sweep(rankings, truth).auc
        auc_flipped = roc_sweep(rankings, flipped).auc
        assert auc + auc_flipped == pytest.approx(1.0, abs=1e-9)

    def test_rho_star_tie_takes_larger(self):
        rankings, truth = single_cve_fixture([(90.0, True), (10.0, False)])
        result = roc_sweep(rankings, truth)
        # distance is zero for every rho in [10, 89]; the largest wins
        assert result.rho_star == 89

    def test_auc_in_unit_interval(self):
        rng = random.Random(20)
        for _ in range(20):
            pairs = [(rng.uniform(0, 100), rng.random() < 0.5) for _ in range(30)]
            if all(lab for _, lab in pairs) or not any(lab for _, lab in pairs):
                continue
            rankings, truth = single_cve_fixture(pairs)
            assert 0.0 <= roc_sweep(rankings, truth).auc <= 1.0


class TestPrSweep:
    def eer_fixture(self):
        # positives score 1..100; negatives: 58 high (90) and 42 low (10),
        # engineered so P(58) = R(58) = 0.42 exactly.
        pairs = [(float(i), True) for i in range(1, 101)]
        pairs += [(90.0, False)] * 58 + [(10.0, False)] * 42
        return single_cve_fixture(pairs)

    def test_engineered_crossing_at_58(self):
        rankings, truth = self.eer_fixture()
        result = pr_sweep(rankings, truth)
        # independent brute-force argmin over the same grid; a point with no
        # predictions at all has no defined precision and cannot host the
        # intersection
        best_rho, best_gap = None, None
        for rho in range(1, 101):
            tp = sum(1 for i in range(1, 101) if i > rho)
            fp = (58 if rho < 90 else 0) + (42 if rho < 10 else 0)
            fn = 100 - tp
            if tp + fp == 0 or tp + fn == 0:
                continue
            gap = abs(tp / (tp + fp) - tp / (tp + fn))
            if best_gap is None or gap <= best_gap:
                best_rho, best_gap = rho, gap
        assert best_rho == 58, "fixture no longer crosses at 58"
        assert result.eer_rho == 58

    def test_all_correct_every_rho(self):
        rankings, truth = single_cve_fixture([(100.0, True)] * 5 + [(0.0, False)] * 5)
        # positives score display 100 > rho for rho<100; negatives score 0 never kept
        result = pr_sweep(rankings, truth, grid=range(1, 100))
        assert all(p.precision == 1.0 and p.recall == 1.0 for p in result.points)
        assert result.eer_rho == 99

    def test_matches_from_scratch(self):
        rng = random.Random(23)
        rankings, truth = single_cve_fixture(
            [(rng.uniform(0, 100), rng.random() < 0.4) for _ in range(50)]
        )
        result = pr_sweep(rankings, truth)
        for point in result.points:
            fresh = {
                a: {c for c, s in ranking if 100 * s > point.rho}
                for a, ranking in rankings.items()
            }
            scores = prf(classify_attacks(fresh, truth))
            assert point.precision == pytest.approx(scores.precision, abs=1e-12)
            assert point.recall == pytest.approx(scores.recall, abs=1e-12)


class TestOverlap:
    def test_set_arithmetic(self):
        L = {cve(1), cve(2), cve(3)}
        M = {cve(2), cve(3), cve(4)}
        m = overlap(L, M)
        assert m.jaccard == 0.5
        assert m.mapping_acc == pytest.approx(2 / 3)
        assert m.detection_acc == pytest.approx(2 / 3)

    def test_identity(self):
        s = {cve(1), cve(2)}
        m = overlap(s, s)
        assert (m.jaccard, m.mapping_acc, m.detection_acc) == (1.0, 1.0, 1.0)
        assert not m.degenerate

    def test_large_overlap_shape(self):
        # |L|=150, |M|=125, |L∩M|=124 -> Jaccard ≈ 0.82
        L = {cve(i) for i in range(150)}
        M = {cve(i) for i in range(124)} | {cve(900 + i) for i in range(1)}
        assert len(M) == 125 and len(L & M) == 124
        m = overlap(L, M)
        assert m.jaccard == pytest.approx(124 / 151, abs=1e-12)
        assert round(m.jaccard, 2) == 0.82

    def test_empty_sets_degenerate(self):
        m = overlap(set(), set())
        assert (m.jaccard, m.mapping_acc, m.detection_acc) == (0.0, 0.0, 0.0)
        assert m.degenerate

    def test_jaccard_bounded_by_both(self):
        rng = random.Random(29)
        for _ in range(2000):
            L = {cve(rng.randint(0, 30)) for _ in range(rng.randint(0, 12))}
            M = {cve(rng.randint(0, 30)) for _ in range(rng.randint(0, 12))}
            m = overlap(L, M)
            assert m.jaccard <= min(m.mapping_acc, m.detection_acc) + 1e-15

    def test_relabeling_invariance(self):
        L, M = {cve(1), cve(2)}, {cve(2), cve(3)}
        relabel = {cve(1): cve(11), cve(2): cve(12), cve(3): cve(13)}
        a = overlap(L, M)
        b = overlap({relabel[x] for x in L}, {relabel[x] for x in M})
        assert (a.jaccard, a.mapping_acc, a.detection_acc) == (
            b.jaccard, b.mapping_acc, b.detection_acc)


class TestTopkSweep:
    def perfect_fixture(self, n_attacks=6, relevant=3, store=10):
        rankings, truth = {}, {}
        for i in range(n_attacks):
            ranked = [(cve(100 * i + j), (store - j) / store) for j in range(store)]
            rankings[attack(i)] = ranked
            truth[attack(i)] = frozenset(c for c, _ in ranked[:relevant])
        return rankings, truth

    def test_monotone_precision_recall_on_perfect_ranking(self):
        rankings, truth = self.perfect_fixture()
        result = topk_sweep(rankings, truth, ks=list(range(1, 11)))
        precisions = [p.mean_precision for p in result.points]
        recalls = [p.mean_recall for p in result.points]
        assert all(a >= b - 1e-12 for a, b in zip(precisions, precisions[1:]))
        assert all(a <= b + 1e-12 for a, b in zip(recalls, recalls[1:]))

    def test_engineered_crossing_at_3(self):
        rankings, truth = self.perfect_fixture(relevant=3)
        result = topk_sweep(rankings, truth, ks=[1, 2, 3, 4, 5])
        # brute force: with all relevants at the top, P=min(k,3)/k, R=min(k,3)/3
        gaps = {k: abs(min(k, 3) / k - min(k, 3) / 3) for k in [1, 2, 3, 4, 5]}
        assert min(gaps, key=lambda k: (gaps[k], -k)) == 3
        assert result.crossing_k == 3

    def test_recall_monotone_on_random_rankings(self):
        rng = random.Random(37)
        rankings, truth = {}, {}
        for i in range(10):
            ids = [cve(100 * i + j) for j in range(8)]
            rng.shuffle(ids)
            rankings[attack(i)] = [(c, (8 - j) / 8) for j, c in enumerate(ids)]
            truth[attack(i)] = frozenset(rng.sample(ids, rng.randint(1, 4)))
        result = topk_sweep(rankings, truth, ks=list(range(1, 9)))
        recalls = [p.mean_recall for p in result.points]
        assert all(a <= b + 1e-12 for a, b in zip(recalls, recalls[1:]))

    def test_summaries_are_tukey(self):
        rankings, truth = self.perfect_fixture()
        result = topk_sweep(rankings, truth, ks=[2])
        assert result.quantile_method == "tukey"
        summary = result.points[0].precision_summary
        assert set(summary) == {"min", "q1", "median", "q3", "max"}


class TestHelpers:
    def test_tukey_five_odd(self):
        summary = tukey_five([1, 2, 3, 4, 5])
        assert summary == {"min": 1, "q1": 2, "median": 3, "q3": 4, "max": 5}

    def test_tukey_five_even(self):
        summary = tukey_five([1, 2, 3, 4])
        assert summary["q1"] == 1.5 and summary["median"] == 2.5 and summary["q3"] == 3.5

    def test_trapezoid_anchors(self):
        assert trapezoid_auc([]) == pytest.approx(0.5)
        assert trapezoid_auc([(0.0, 1.0)]) == pytest.approx(1.0)
