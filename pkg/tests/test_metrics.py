"""Metrics: accuracy, macro F1, and the rank-statistic AUC."""

import numpy as np
import pytest

from cogcad.metrics import binary_auc, compute_metrics, confusion_counts, macro_f1

from oracles import auc_pair_oracle


class TestBinaryAuc:
    def test_perfect_separation(self):
        scores = [0.9, 0.8, 0.7, 0.2, 0.1, 0.3]
        labels = [1, 1, 1, 0, 0, 0]
        assert binary_auc(scores, labels) == 1.0

    def test_constant_scores_half(self):
        assert binary_auc([0.5] * 10, [1, 0] * 5) == 0.5

    def test_scrambled_scores_match_pair_oracle(self):
        rng = np.random.default_rng(0)
        for trial in range(30):
            scores = rng.random(20)
            if trial % 3 == 0:
                scores = np.round(scores, 1)  # force ties
            labels = rng.integers(0, 2, size=20)
            if labels.sum() in (0, 20):
                labels[0] = 1 - labels[0]
            got = binary_auc(scores, labels)
            want = auc_pair_oracle(scores, labels)
            assert abs(got - want) < 1e-9

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(1)
        scores = rng.random(25)
        labels = rng.integers(0, 2, size=25)
        labels[0], labels[1] = 0, 1
        base = binary_auc(scores, labels)
        for fn in (lambda s: 3 * s + 2, np.exp, lambda s: s**3):
            assert binary_auc(fn(scores), labels) == pytest.approx(base, abs=1e-12)


class TestReports:
    def test_perfect_predictor_balanced(self):
        probs = np.array([[0.1, 0.9]] * 5 + [[0.9, 0.1]] * 5)
        labels = [1] * 5 + [0] * 5
        rep = compute_metrics(probs, labels)
        assert rep.acc == 100.0
        assert rep.f1 == 100.0
        assert rep.auc == 100.0

    def test_constant_predictor_balanced(self):
        probs = np.array([[0.4, 0.6]] * 10)
        labels = [1, 0] * 5
        rep = compute_metrics(probs, labels)
        assert rep.acc == 50.0
        assert rep.auc == 50.0

    def test_acc_and_f1_match_confusion_recomputation(self):
        rng = np.random.default_rng(2)
        probs = rng.random((40, 3))
        probs /= probs.sum(axis=1, keepdims=True)
        labels = rng.integers(0, 3, size=40)
        rep = compute_metrics(probs, labels)
        preds = probs.argmax(axis=1)
        counts = confusion_counts(preds, labels, 3)
        acc = sum(counts[c]["tp"] for c in counts) / 40
        assert rep.acc == pytest.approx(100 * acc, abs=1e-12)
        assert rep.f1 == pytest.approx(100 * macro_f1(counts), abs=1e-12)
        for c in range(3):
            assert rep.per_class[c]["support"] == int((labels == c).sum())

    def test_report_serializes(self):
        rep = compute_metrics(np.array([[0.2, 0.8], [0.7, 0.3]]), [1, 0])
        d = rep.to_dict()
        assert set(d) == {"acc", "auc", "f1", "per_class"}
