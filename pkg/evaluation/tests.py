"""
Tests for the Evaluation app - predictive measures, verification, calibration, McNemar and convergence.
"""
import itertools
import math

import numpy as np
from django.test import SimpleTestCase

from dataio.datasets import PairSet
from geometry.proxies import ProxyBank, init_proxy_bank
from numkit.exceptions import ContractViolation
from numkit.rng import make_rng

from .calibration import ece, reliability_bins, scaled_confidence, temperature_calibrate
from .convergence import PLATEAU_TOLERANCE, convergence_summary, moving_average
from .predict import (
    accuracy,
    confidence_from_magnitudes,
    confidence_scores,
    predict_linear_head,
    predict_linear_head_batch,
    predict_radial_angular,
    predict_radial_angular_batch,
    triangle_magnitudes,
)
from .stats import mcnemar
from .verification import COSINE, EUCLIDEAN, pair_distances, sweep_distances, verification_sweep


class RadialAngularPredictionTest(SimpleTestCase):
    """Tests for predict_radial_angular."""

    def test_sample_on_scaled_proxy(self):
        """x at class 3's scaled proxy predicts 3 with magnitude 0."""
        bank = init_proxy_bank(make_rng(0), 3, 5)
        report = predict_radial_angular(bank.scaled_proxies()[:, 3], bank)
        self.assertEqual(report.predicted, 3)
        self.assertEqual(report.magnitudes[3], 0.0)

    def test_hand_norms(self):
        """x = (1, 1) against radii (1, 2) on the axes gives magnitudes (1, sqrt 2)."""
        bank = ProxyBank(W=np.eye(2), radii=[1.0, 2.0])
        report = predict_radial_angular([1.0, 1.0], bank)
        np.testing.assert_allclose(report.magnitudes, [1.0, math.sqrt(2.0)], rtol=1e-15)
        self.assertEqual(report.predicted, 0)
        self.assertAlmostEqual(float(report.confidence.sum()), 1.0, delta=1e-9)

    def test_brute_force_agreement(self):
        """Batch argmin equals a per-class distance loop on 1000 random instances."""
        rng = make_rng(1)
        for _ in range(1000):
            d, k = int(rng.integers(2, 6)), int(rng.integers(2, 7))
            bank = init_proxy_bank(rng, d, k, gap=float(rng.uniform(0.5, 10.0)))
            x = rng.normal(size=d) * 10.0
            WR = bank.scaled_proxies()
            best, best_norm = 0, math.inf
            for c in range(k):
                norm = math.sqrt(sum((x[i] - WR[i, c]) ** 2 for i in range(d)))
                if norm < best_norm:
                    best, best_norm = c, norm
            self.assertEqual(predict_radial_angular(x, bank).predicted, best)
            self.assertEqual(int(predict_radial_angular_batch(x[None, :], bank)[0]), best)

    def test_triangle_form_agrees(self):
        """The projection-law triangle magnitudes match the direct norms."""
        rng = make_rng(2)
        for _ in range(200):
            bank = init_proxy_bank(rng, 3, 4, gap=5.0)
            x = rng.normal(size=3) * 8.0
            report = predict_radial_angular(x, bank)
            triangle = triangle_magnitudes(x, bank)
            np.testing.assert_allclose(triangle, report.magnitudes, rtol=1e-8, atol=1e-8)
            self.assertEqual(int(np.argmin(triangle)), report.predicted)

    def test_permutation_invariance(self):
        """Reordering classes relabels the prediction consistently."""
        rng = make_rng(3)
        bank = init_proxy_bank(rng, 4, 6)
        perm = rng.permutation(6)
        permuted = ProxyBank(W=bank.W[:, perm], radii=bank.radii[perm])
        for _ in range(50):
            x = rng.normal(size=4) * 20.0
            self.assertEqual(perm[predict_radial_angular(x, permuted).predicted], predict_radial_angular(x, bank).predicted)

    def test_tie_goes_to_lowest_index(self):
        """Equidistant proxies resolve to the smaller class index."""
        bank = ProxyBank(W=np.array([[1.0, -1.0], [0.0, 0.0]]), radii=[1.0, 1.0])
        self.assertEqual(predict_radial_angular([0.0, 1.0], bank).predicted, 0)

    def test_dimension_mismatch(self):
        """x must match the proxy dimension."""
        with self.assertRaises(ContractViolation):
            predict_radial_angular([1.0, 2.0, 3.0], ProxyBank(W=np.eye(2), radii=[1.0, 2.0]))


class ConfidenceTest(SimpleTestCase):
    """Tests for confidence_scores."""

    def test_equal_magnitudes_uniform(self):
        """Equal magnitudes give 1/K each."""
        np.testing.assert_allclose(confidence_from_magnitudes([2.0, 2.0, 2.0, 2.0]), [0.25] * 4, rtol=1e-15)

    def test_small_temperature_one_hot(self):
        """T close to zero concentrates all mass on the argmin."""
        np.testing.assert_allclose(confidence_from_magnitudes([3.0, 1.0, 2.0], 1e-6), [0.0, 1.0, 0.0], atol=1e-12)

    def test_hand_softmax(self):
        """Magnitudes (1, sqrt 2) at T = 1."""
        bank = ProxyBank(W=np.eye(2), radii=[1.0, 2.0])
        report = predict_radial_angular([1.0, 1.0], bank)
        first = math.exp(-1.0) / (math.exp(-1.0) + math.exp(-math.sqrt(2.0)))
        np.testing.assert_allclose(confidence_scores(report, 1.0), [first, 1.0 - first], rtol=1e-12)

    def test_shift_keeps_prediction(self):
        """Adding a constant to every magnitude changes neither the argmin nor the confidences."""
        R = np.array([4.0, 1.5, 3.0])
        self.assertEqual(int(np.argmax(confidence_from_magnitudes(R + 7.0))), int(np.argmin(R)))
        np.testing.assert_allclose(confidence_from_magnitudes(R + 7.0), confidence_from_magnitudes(R), rtol=1e-12)

    def test_temperature_must_be_positive(self):
        """T = 0 is rejected."""
        with self.assertRaises(ContractViolation):
            confidence_from_magnitudes([1.0, 2.0], 0.0)


class LinearHeadTest(SimpleTestCase):
    """Tests for the classification-layer prediction and accuracy."""

    def test_one_hot_weights(self):
        """Identity weights pick the largest coordinate."""
        self.assertEqual(predict_linear_head([0.1, 0.7, 0.2], np.eye(3), np.zeros(3)), 1)

    def test_bias_only(self):
        """Zero weights defer to the largest bias."""
        self.assertEqual(predict_linear_head([5.0, -5.0], np.zeros((2, 3)), [0.0, 0.0, 1.0]), 2)

    def test_matches_logit_loop(self):
        """Batch argmax equals a direct logit loop."""
        rng = make_rng(4)
        X, W, b = rng.normal(size=(30, 4)), rng.normal(size=(4, 5)), rng.normal(size=5)
        expected = [max(range(5), key=lambda k: sum(X[i, j] * W[j, k] for j in range(4)) + b[k]) for i in range(30)]
        np.testing.assert_array_equal(predict_linear_head_batch(X, W, b), expected)

    def test_accuracy(self):
        """All right, all wrong and half right."""
        self.assertEqual(accuracy([1, 2, 3], [1, 2, 3]), 1.0)
        self.assertEqual(accuracy([0, 0], [1, 1]), 0.0)
        self.assertEqual(accuracy([1, 0, 1, 0], [1, 1, 1, 1]), 0.5)
        with self.assertRaises(ContractViolation):
            accuracy([], [])


class VerificationTest(SimpleTestCase):
    """Tests for verification_sweep."""

    def test_perfect_separation(self):
        """Genuine pairs all closer than impostors give accuracy 1."""
        result = sweep_distances([0.1, 0.2, 0.3, 1.0, 1.5], [True, True, True, False, False])
        self.assertEqual(result.best_accuracy, 1.0)
        self.assertTrue(0.3 < result.best_threshold < 1.0)

    def test_identical_distances(self):
        """With no spread the best accuracy is the larger class prior."""
        result = sweep_distances([2.0] * 5, [True, False, False, True, False])
        self.assertEqual(result.best_accuracy, 0.6)

    def test_exhaustive_oracle(self):
        """A random 20-pair instance matches trying every possible cut."""
        rng = make_rng(5)
        distances = rng.uniform(0.0, 3.0, size=20)
        same = rng.random(20) < 0.5
        best = max(np.mean((distances <= t) == same) for t in np.concatenate([[-1.0], distances]))
        self.assertAlmostEqual(sweep_distances(distances, same).best_accuracy, best, places=15)

    def test_monotone_transform_invariance(self):
        """exp of the distances keeps the best accuracy."""
        rng = make_rng(6)
        distances = rng.uniform(0.0, 2.0, size=40)
        same = rng.random(40) < 0.5
        self.assertEqual(sweep_distances(distances, same).best_accuracy, sweep_distances(np.exp(distances), same).best_accuracy)

    def test_roc_points(self):
        """The extreme thresholds reject or accept everything."""
        result = sweep_distances([0.1, 0.9], [True, False])
        self.assertEqual((result.roc[0].true_positive_rate, result.roc[0].false_positive_rate), (0.0, 0.0))
        self.assertEqual((result.roc[-1].true_positive_rate, result.roc[-1].false_positive_rate), (1.0, 1.0))

    def test_metrics(self):
        """Euclidean and cosine distances on a hand fixture."""
        E = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]])
        pairs = PairSet([0, 0], [1, 2], [False, True])
        np.testing.assert_allclose(pair_distances(E, pairs, EUCLIDEAN), [math.sqrt(5.0), 2.0])
        np.testing.assert_allclose(pair_distances(E, pairs, COSINE), [1.0, 0.0], atol=1e-15)
        self.assertEqual(verification_sweep(E, pairs, COSINE).best_accuracy, 1.0)

    def test_empty_pairs(self):
        """Zero pairs is an error."""
        with self.assertRaises(ContractViolation):
            verification_sweep(np.zeros((2, 2)), PairSet([], [], []))


class CalibrationTest(SimpleTestCase):
    """Tests for ECE, reliability bins and temperature search."""

    def test_calibrated_constant_confidence(self):
        """Confidence 0.75 with three of four right has zero ECE."""
        self.assertEqual(ece([0.75] * 4, [True, True, True, False], bins=10), 0.0)

    def test_confident_and_wrong(self):
        """Confidence 1 with accuracy 0 gives ECE 1."""
        self.assertEqual(ece([1.0, 1.0], [False, False]), 1.0)

    def test_three_bin_fixture(self):
        """Hand-computed three-bin value."""
        conf = [0.1, 0.2, 0.5, 0.6, 0.9, 0.95]
        hits = [False, True, True, False, True, True]
        expected = 2 / 6 * abs(0.5 - 0.15) + 2 / 6 * abs(0.5 - 0.55) + 2 / 6 * abs(1.0 - 0.925)
        self.assertAlmostEqual(ece(conf, hits, bins=3), expected, delta=1e-12)
        table = reliability_bins(conf, hits, bins=3)
        self.assertEqual([row.count for row in table], [2, 2, 2])
        self.assertAlmostEqual(table[2].confidence, 0.925, delta=1e-15)

    def test_ece_bounded(self):
        """ECE stays in [0, 1] on random inputs."""
        rng = make_rng(7)
        for _ in range(50):
            value = ece(rng.random(30), rng.random(30) < 0.5, bins=int(rng.integers(1, 20)))
            self.assertTrue(0.0 <= value <= 1.0)

    def test_symmetric_fixture_keeps_unit_temperature(self):
        """Flat scores are calibrated at every T, so T = 1 is kept."""
        result = temperature_calibrate(np.zeros((10, 2)), [True, False] * 5)
        self.assertEqual(result.temperature, 1.0)
        self.assertEqual(result.ece_after, result.ece_before)

    def test_overconfident_scores_raise_temperature(self):
        """Confident scores that are often wrong pick T > 1."""
        rng = make_rng(8)
        scores = rng.normal(size=(200, 4)) * 6.0
        correct = rng.random(200) < 0.5
        result = temperature_calibrate(scores, correct)
        self.assertGreater(result.temperature, 1.0)
        self.assertLess(result.ece_after, result.ece_before)

    def test_grid_argmin_matches_loop(self):
        """The chosen T is the exhaustive argmin over {1} and the grid."""
        rng = make_rng(9)
        scores = rng.normal(size=(60, 3)) * 3.0
        correct = rng.random(60) < 0.7
        grid = np.linspace(0.2, 5.0, 25)
        result = temperature_calibrate(scores, correct, grid=grid)
        values = {t: ece(scaled_confidence(scores, t), correct) for t in [1.0] + grid.tolist()}
        self.assertAlmostEqual(result.ece_after, min(values.values()), delta=1e-15)
        self.assertLessEqual(result.ece_after, values[1.0])


class McNemarTest(SimpleTestCase):
    """Tests for mcnemar."""

    def test_one_sided_discordance(self):
        """b = 10, c = 0 gives 8.1 and a significant p-value."""
        result = mcnemar([True] * 10 + [False] * 5, [False] * 10 + [False] * 5)
        self.assertEqual((result.b, result.c), (10, 0))
        self.assertAlmostEqual(result.statistic, 8.1, places=12)
        self.assertAlmostEqual(result.p_value, math.erfc(math.sqrt(8.1 / 2.0)), places=12)
        self.assertTrue(result.significant)

    def test_balanced_discordance(self):
        """b = c = 5 gives 0.1."""
        a = [True] * 5 + [False] * 5 + [True] * 3
        b = [False] * 5 + [True] * 5 + [True] * 3
        result = mcnemar(a, b)
        self.assertAlmostEqual(result.statistic, 0.1, places=12)
        self.assertFalse(result.significant)

    def test_no_discordance(self):
        """Agreeing models give 0."""
        result = mcnemar([True, False], [True, False])
        self.assertEqual(result.statistic, 0.0)
        self.assertEqual(result.p_value, 1.0)

    def test_length_mismatch(self):
        """Both flag vectors must cover the same samples."""
        with self.assertRaises(ContractViolation):
            mcnemar([True], [True, False])


class ConvergenceTest(SimpleTestCase):
    """Tests for moving averages and the convergence summary."""

    def test_moving_average(self):
        """Window 2 over 1..4."""
        np.testing.assert_allclose(moving_average([1.0, 2.0, 3.0, 4.0], 2), [1.5, 2.5, 3.5])
        self.assertEqual(moving_average([1.0], 3).size, 0)

    def test_summary_of_decaying_curve(self):
        """A noisy exponential decay decreases and smooths monotonically."""
        epochs = np.arange(1, 201)
        losses = 2.0 * np.exp(-epochs / 30.0) + 0.2
        summary = convergence_summary(losses)
        self.assertTrue(summary.decreased)
        self.assertTrue(summary.smoothed_non_increasing)
        self.assertEqual(summary.min_epoch, 200)
        self.assertAlmostEqual(summary.min_loss, losses[-1])

    def test_rising_tail_detected(self):
        """A curve that climbs after warm-up is flagged."""
        losses = list(itertools.chain(np.linspace(2.0, 1.0, 30), np.linspace(1.0, 3.0, 30)))
        summary = convergence_summary(losses)
        self.assertFalse(summary.smoothed_non_increasing)
        self.assertEqual(summary.min_epoch, 30)

    def test_plateau_jitter_within_relative_tolerance(self):
        """Small noise on a flat tail passes only with a tolerance scaled to the total drop."""
        rng = make_rng(3)
        descent = 2.0 * np.exp(-np.arange(60) / 10.0) + 0.2
        plateau = 0.2 + 1e-3 * rng.uniform(-1.0, 1.0, size=140)
        losses = np.concatenate([descent, plateau])
        self.assertFalse(convergence_summary(losses).smoothed_non_increasing)
        summary = convergence_summary(losses, relative_tolerance=PLATEAU_TOLERANCE)
        self.assertTrue(summary.smoothed_non_increasing)
        self.assertTrue(summary.decreased)

    def test_relative_tolerance_still_flags_a_climb(self):
        """The plateau allowance does not hide a real rise."""
        losses = list(itertools.chain(np.linspace(2.0, 1.0, 30), np.linspace(1.0, 3.0, 30)))
        summary = convergence_summary(losses, relative_tolerance=PLATEAU_TOLERANCE)
        self.assertFalse(summary.smoothed_non_increasing)
