"""Metric tests, each against an independent oracle where one exists."""

import numpy as np
import pytest

from labelcal.core import LabelMatrix, ProbMatrix
from labelcal.metrics import (
    UndefinedMetricError,
    balanced_accuracy,
    expected_calibration_error,
    label_count_error_rate,
    macro_roc_auc,
    roc_auc,
    tendency_error,
    tendency_series_from_matrix,
    tendency_values,
)


def auc_pair_counting(scores, labels):
    """Brute-force oracle: fraction of (pos, neg) pairs ranked correctly."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


class TestRocAuc:
    def test_hand_example(self):
        scores = [0.1, 0.4, 0.35, 0.8]
        labels = [0, 0, 1, 1]
        assert auc_pair_counting(scores, labels) == 0.75
        np.testing.assert_allclose(roc_auc(scores, labels), 0.75)

    def test_perfect_separation(self):
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties(self):
        assert roc_auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_matches_pair_counting_on_random_inputs(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            n = int(rng.integers(4, 30))
            scores = rng.choice([0.1, 0.25, 0.5, 0.7, 0.9], size=n)  # force ties
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                continue
            np.testing.assert_allclose(
                roc_auc(scores, labels), auc_pair_counting(scores, labels), rtol=1e-12
            )

    def test_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(22)
        scores = rng.random(40)
        labels = rng.integers(0, 2, size=40)
        np.testing.assert_allclose(
            roc_auc(scores, labels), roc_auc(np.exp(3 * scores), labels), rtol=1e-12
        )

    def test_negation_complements_without_ties(self):
        rng = np.random.default_rng(23)
        scores = rng.permutation(30) / 30.0  # distinct
        labels = np.array([0, 1] * 15)
        total = roc_auc(scores, labels) + roc_auc(-scores, labels)
        np.testing.assert_allclose(total, 1.0, rtol=1e-12)

    def test_degenerate_labels_undefined(self):
        with pytest.raises(UndefinedMetricError):
            roc_auc([0.1, 0.2], [1, 1])


class TestMacroRocAuc:
    def test_arithmetic_mean(self):
        # label a separates perfectly (AUC 1.0); label b is all ties (0.5)
        probs = ProbMatrix(("a", "b"), np.array([[0.1, 0.5], [0.9, 0.5]]))
        truth = LabelMatrix(("a", "b"), np.array([[0, 1], [1, 0]]))
        out = macro_roc_auc(probs, truth)
        np.testing.assert_allclose(out.per_label["a"], 1.0)
        np.testing.assert_allclose(out.per_label["b"], 0.5)
        np.testing.assert_allclose(out.value, 0.75)

    def test_undefined_labels_excluded(self):
        probs = ProbMatrix(("a", "b"), np.array([[0.1, 0.4], [0.9, 0.6]]))
        truth = LabelMatrix(("a", "b"), np.array([[1, 1], [1, 0]]))  # 'a' all-positive
        out = macro_roc_auc(probs, truth)
        assert out.undefined == ("a",)
        np.testing.assert_allclose(out.value, out.per_label["b"])

    def test_random_scores_near_half(self):
        rng = np.random.default_rng(24)
        probs = ProbMatrix(("a", "b"), rng.random((10000, 2)))
        truth = LabelMatrix(("a", "b"), rng.integers(0, 2, size=(10000, 2)))
        out = macro_roc_auc(probs, truth)
        assert abs(out.value - 0.5) < 0.02

    def test_all_undefined_raises(self):
        probs = ProbMatrix(("a",), np.array([[0.1], [0.9]]))
        truth = LabelMatrix(("a",), np.array([[1], [1]]))
        with pytest.raises(UndefinedMetricError):
            macro_roc_auc(probs, truth)


class TestBalancedAccuracy:
    def test_perfect(self):
        assert balanced_accuracy([0, 1, 2], [0, 1, 2]) == 1.0

    def test_hand_count(self):
        # class 0 recall 1/2, class 1 recall 2/2
        assert balanced_accuracy([0, 1, 1, 1], [0, 0, 1, 1]) == 0.75

    def test_constant_prediction_two_balanced_classes(self):
        assert balanced_accuracy([0, 0, 0, 0], [0, 0, 1, 1]) == 0.5

    def test_class_permutation_invariance(self):
        rng = np.random.default_rng(25)
        truth = rng.integers(0, 4, size=60)
        pred = rng.integers(0, 4, size=60)
        perm = rng.permutation(4)
        np.testing.assert_allclose(
            balanced_accuracy(pred, truth),
            balanced_accuracy(perm[pred], perm[truth]),
        )

    def test_empty_rejected(self):
        with pytest.raises(Exception):
            balanced_accuracy([], [])


class TestExpectedCalibrationError:
    def test_single_bin_arithmetic(self):
        probs = np.full(10, 0.9)
        labels = np.array([1] * 5 + [0] * 5)
        np.testing.assert_allclose(
            expected_calibration_error(probs, labels), 0.4, rtol=1e-12
        )

    def test_exact_predictions_have_zero_error(self):
        labels = np.array([0, 1, 0, 1])
        assert expected_calibration_error(labels.astype(float), labels) == 0.0

    def test_empty_bins_contribute_nothing(self):
        # everything lands in two bins; the other eight add nothing
        probs = np.array([0.05, 0.05, 0.95, 0.95])
        labels = np.array([0, 0, 1, 1])
        np.testing.assert_allclose(
            expected_calibration_error(probs, labels), 0.05, rtol=1e-12
        )

    def test_final_bin_right_closed(self):
        assert expected_calibration_error(np.array([1.0]), np.array([1])) == 0.0


class TestLabelCountErrorRate:
    def test_identical_matrices_zero(self):
        truth = LabelMatrix(("a", "b"), np.array([[1, 0], [0, 1]]))
        probs = ProbMatrix(("a", "b"), truth.values.astype(float))
        assert label_count_error_rate(probs, truth).value == 0.0

    def test_ten_percent_overshoot(self):
        # true count 10, predicted sum 11 -> |11 - 10| / 10 = 0.10
        truth = LabelMatrix(("a",), np.vstack([np.ones((10, 1), int), [[0]]]))
        probs = ProbMatrix(("a",), np.ones((11, 1)))
        out = label_count_error_rate(probs, truth)
        np.testing.assert_allclose(out.value, 0.1, rtol=1e-12)

    def test_mean_of_per_label_errors(self):
        # label a: predicted sum 6 vs true 5 -> 0.2 ; label b: exact -> 0.0
        truth = LabelMatrix(("a", "b"), np.vstack([np.ones((5, 2), int), [[0, 1]]]))
        probs = ProbMatrix(("a", "b"), np.ones((6, 2)))
        out = label_count_error_rate(probs, truth)
        np.testing.assert_allclose(out.per_label["a"], 0.2, rtol=1e-12)
        np.testing.assert_allclose(out.per_label["b"], 0.0, atol=1e-15)
        np.testing.assert_allclose(out.value, 0.1, rtol=1e-12)

    def test_zero_count_labels_excluded(self):
        truth = LabelMatrix(("a", "b"), np.array([[1, 0], [1, 0]]))
        probs = ProbMatrix(("a", "b"), np.array([[1.0, 0.3], [1.0, 0.2]]))
        out = label_count_error_rate(probs, truth)
        assert out.excluded == ("b",)
        np.testing.assert_allclose(out.value, 0.0, atol=1e-15)

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(26)
        values = rng.random((30, 4))
        y = rng.integers(0, 2, size=(30, 4))
        y[0] = 1  # ensure positive counts
        labels = ("a", "b", "c", "d")
        perm = rng.permutation(30)
        a = label_count_error_rate(ProbMatrix(labels, values), LabelMatrix(labels, y))
        b = label_count_error_rate(
            ProbMatrix(labels, values[perm]), LabelMatrix(labels, y[perm])
        )
        np.testing.assert_allclose(a.value, b.value, rtol=1e-12)

    def test_all_zero_counts_raise(self):
        truth = LabelMatrix(("a",), np.zeros((3, 1), dtype=int))
        probs = ProbMatrix(("a",), np.full((3, 1), 0.2))
        with pytest.raises(UndefinedMetricError):
            label_count_error_rate(probs, truth)


class TestTendencyValues:
    def test_constant_counts_are_flat(self):
        series = tendency_values({2000: 5.0, 2001: 5.0, 2002: 5.0}, total=15.0)
        np.testing.assert_array_equal(series.values, [0, 0])

    def test_small_total_tick_floor(self):
        # max(5/40, 1) = 1; jump of 5 >= 1
        series = tendency_values({1980: 0.0, 1981: 5.0}, total=5.0)
        assert series.tick == 1.0
        np.testing.assert_array_equal(series.values, [1])

    def test_large_total_tick(self):
        # max(400/40, 1) = 10; jump of 5 < 10
        series = tendency_values({1980: 100.0, 1981: 105.0}, total=400.0)
        assert series.tick == 10.0
        np.testing.assert_array_equal(series.values, [0])

    def test_values_stay_in_range(self):
        rng = np.random.default_rng(27)
        for _ in range(50):
            years = {1980 + i: float(rng.integers(0, 50)) for i in range(10)}
            series = tendency_values(years, total=float(rng.integers(1, 2000)))
            assert set(np.unique(series.values)).issubset({-1, 0, 1})

    def test_scaling_counts_and_total_together(self):
        rng = np.random.default_rng(28)
        for _ in range(30):
            counts = {1980 + i: float(rng.uniform(0, 30)) for i in range(8)}
            total = float(rng.uniform(40.0, 400.0))  # C/40 >= 1
            lam = float(rng.uniform(1.0, 5.0))
            base = tendency_values(counts, total)
            scaled = tendency_values(
                {y: lam * c for y, c in counts.items()}, lam * total
            )
            np.testing.assert_array_equal(base.values, scaled.values)

    def test_non_consecutive_years_rejected(self):
        with pytest.raises(Exception, match="consecutive"):
            tendency_values({1980: 1.0, 1982: 2.0}, total=3.0)

    def test_single_year_rejected(self):
        with pytest.raises(Exception, match="2 years"):
            tendency_values({1980: 1.0}, total=1.0)


class TestTendencyError:
    def make(self, values, label="a", start=1980):
        counts = {start: 100.0}
        level = 100.0
        for i, v in enumerate(values):
            level += v * 50.0  # +-50 clears any tick decisively, 0 stays flat
            counts[start + i + 1] = level
        return {label: tendency_values(counts, total=sum(counts.values()))}

    def test_identical_series_zero_percent(self):
        pred = self.make([1, 0, -1, 0])
        assert tendency_error(pred, pred) == 0.0

    def test_maximal_disagreement_two_hundred_percent(self):
        pred = self.make([1, 1, 1])
        truth = self.make([-1, -1, -1])
        np.testing.assert_array_equal(pred["a"].values, [1, 1, 1])
        np.testing.assert_array_equal(truth["a"].values, [-1, -1, -1])
        assert tendency_error(pred, truth) == 200.0

    def test_mean_of_absolute_differences(self):
        pred = self.make([1, 0, 0, 1])
        truth = self.make([0, 0, 0, 0])
        # differences [1, 0, 0, 1] -> mean 0.5 -> 50%
        assert tendency_error(pred, truth) == 50.0

    def test_mismatched_year_ranges_rejected(self):
        pred = self.make([1, 0])
        truth = self.make([1, 0, 1])
        with pytest.raises(Exception, match="year ranges"):
            tendency_error(pred, truth)


class TestTendencyFromMatrix:
    def test_column_sums_per_year(self):
        probs = ProbMatrix(("a",), np.array([[0.5], [0.5], [1.0], [0.0]]))
        series = tendency_series_from_matrix(probs, [1980, 1980, 1981, 1981])
        assert series["a"].yearly_counts == (1.0, 1.0)
        np.testing.assert_array_equal(series["a"].values, [0])
