"""
Tests for the Losses app - DistArc forward/backward, masks, baselines, heads and the lambda schedule.
"""
import itertools
import math

import numpy as np
from django.test import SimpleTestCase

from geometry.batch import delta_matrix, delta_matrix_backward
from geometry.proxies import ProxyBank, init_proxy_bank
from numkit.exceptions import ContractViolation, NonFiniteError
from numkit.gradcheck import gradient_error
from numkit.linalg import normalize_columns, normalize_rows, ordered_mean
from numkit.rng import make_rng

from .baselines import (
    arcface_backward,
    arcface_forward,
    cosface_backward,
    cosface_forward,
    cross_entropy_backward,
    cross_entropy_forward,
)
from .distarc import (
    ABLATION_ROWS,
    MASK_COS_THETA,
    MASK_FULL,
    AblationMask,
    DistArcConfig,
    distarc_backward,
    distarc_forward,
)
from .heads import ARCFACE, COSFACE, CROSS_ENTROPY, DISTARC, HeadSettings, head_loss_and_grads
from .schedule import lambda_schedule


def _axis_bank():
    return ProxyBank(W=np.array([[1.0, 0.0], [0.0, 1.0]]), radii=[1.0, 2.0])


def _random_instance(rng, n, d, k, gap=3.0):
    X = rng.normal(size=(n, d)) * 3.0
    labels = rng.integers(0, k, size=n)
    bank = init_proxy_bank(rng, d, k, gap=gap)
    return X, labels, bank


def _distarc_loss(X, labels, bank, cfg):
    return distarc_forward(X, labels, bank, cfg).loss


class DistArcForwardTest(SimpleTestCase):
    """Tests for distarc_forward."""

    def test_full_mask_worked_example(self):
        """x on its own proxy with r = 1: loss is log(e + 1) - 2, which is negative."""
        cfg = DistArcConfig(margin=0.0, lambda_=0.0, mask=MASK_FULL)
        out = distarc_forward(np.array([[1.0, 0.0]]), [0], _axis_bank(), cfg)
        self.assertAlmostEqual(out.loss, math.log(math.e + 1.0) - 2.0, places=12)
        self.assertLess(out.loss, 0.0)
        sample = out.sample(0)
        self.assertEqual(sample.cos_theta_true, 1.0)
        self.assertEqual(sample.cos_phi_true, 1.0)
        self.assertEqual(sample.delta_true, 0.0)
        np.testing.assert_allclose(sample.logits, [1.0, 0.0], atol=1e-15)

    def test_cos_theta_only_worked_example(self):
        """Same instance with cos(theta) alone: log(1 + e^-1)."""
        cfg = DistArcConfig(margin=0.0, lambda_=0.0, mask=MASK_COS_THETA)
        out = distarc_forward(np.array([[1.0, 0.0]]), [0], _axis_bank(), cfg)
        self.assertAlmostEqual(out.loss, math.log1p(math.exp(-1.0)), places=12)
        self.assertAlmostEqual(out.loss, 0.313262, places=6)

    def test_delta_enters_both_sides(self):
        """-lambda delta appears on other-class logits and in the numerator."""
        cfg = DistArcConfig(margin=0.0, lambda_=0.5, mask=AblationMask(use_cos_phi=False, use_delta=True))
        out = distarc_forward(np.array([[1.0, 0.0]]), [0], _axis_bank(), cfg)
        # delta to class 1 proxy (0, 2) is 1 + 4
        np.testing.assert_allclose(out.logits[0], [1.0, -2.5], atol=1e-15)
        expected = math.log(math.e + math.exp(-2.5)) - 1.0
        self.assertAlmostEqual(out.loss, expected, places=12)

    def test_batch_mean_linearity(self):
        """Batch loss equals the mean of per-sample losses."""
        rng = make_rng(3)
        for _ in range(20):
            X, labels, bank = _random_instance(rng, 7, 4, 3)
            out = distarc_forward(X, labels, bank, DistArcConfig(lambda_=0.005))
            self.assertAlmostEqual(out.loss, float(np.mean(out.per_sample_loss)), delta=1e-12)
            self.assertEqual(len(out.per_sample), 7)

    def test_margin_monotonicity(self):
        """Per-sample loss is non-decreasing in m over [0, 0.5] while theta + m < pi."""
        rng = make_rng(4)
        X, labels, bank = _random_instance(rng, 30, 3, 4)
        margins = np.linspace(0.0, 0.5, 11)
        losses = np.array([
            distarc_forward(X, labels, bank, DistArcConfig(margin=m, lambda_=0.003)).per_sample_loss
            for m in margins
        ])
        cos_true = distarc_forward(X, labels, bank, DistArcConfig()).cos_theta_true
        valid = np.arccos(np.clip(cos_true, -1.0, 1.0)) + 0.5 < math.pi
        self.assertTrue(valid.any())
        self.assertTrue(np.all(np.diff(losses[:, valid], axis=0) >= -1e-12))

    def test_reduces_to_arcface_bitwise(self):
        """lambda = 0 without cos(phi) equals ArcFace(s=1) forward and backward bit for bit."""
        rng = make_rng(5)
        for mask in (MASK_COS_THETA, AblationMask(use_cos_phi=False, use_delta=True)):
            for m in (0.0, 0.4):
                X, labels, bank = _random_instance(rng, 6, 5, 4)
                cfg = DistArcConfig(margin=m, lambda_=0.0, mask=mask)
                ours = distarc_forward(X, labels, bank, cfg)
                theirs = arcface_forward(X, labels, bank.W, m, 1.0)
                self.assertEqual(np.float64(ours.loss).tobytes(), np.float64(theirs.loss).tobytes())
                self.assertEqual(ours.per_sample_loss.tobytes(), theirs.per_sample.tobytes())
                ours_grad = distarc_backward(X, labels, bank, cfg, ours)
                theirs_grad = arcface_backward(X, labels, bank.W, m, 1.0, theirs)
                self.assertEqual(ours_grad.d_x.tobytes(), theirs_grad.d_x.tobytes())
                self.assertEqual(ours_grad.d_w.tobytes(), theirs_grad.d_w.tobytes())

    def test_symmetric_denominator_is_nonnegative(self):
        """With the full target in the denominator the loss is a proper cross-entropy."""
        rng = make_rng(6)
        X, labels, bank = _random_instance(rng, 12, 3, 3)
        out = distarc_forward(X, labels, bank, DistArcConfig(lambda_=0.005, symmetric_denominator=True))
        self.assertTrue(np.all(out.per_sample_loss >= 0.0))
        cfg = DistArcConfig(margin=0.0, lambda_=0.0, symmetric_denominator=True)
        worked = distarc_forward(np.array([[1.0, 0.0]]), [0], _axis_bank(), cfg)
        self.assertAlmostEqual(worked.loss, math.log1p(math.exp(-2.0)), places=12)

    def test_rejects_bad_inputs(self):
        """Out-of-range labels, empty batches, non-finite features and bad configs raise."""
        bank = _axis_bank()
        with self.assertRaises(ContractViolation):
            distarc_forward(np.array([[1.0, 0.0]]), [2], bank, DistArcConfig())
        with self.assertRaises(ContractViolation):
            distarc_forward(np.zeros((0, 2)), [], bank, DistArcConfig())
        with self.assertRaises(NonFiniteError) as ctx:
            distarc_forward(np.array([[1.0, 0.0], [np.nan, 0.0]]), [0, 1], bank, DistArcConfig())
        self.assertEqual(ctx.exception.index, 1)
        with self.assertRaises(ContractViolation):
            DistArcConfig(margin=math.pi / 2)
        with self.assertRaises(ContractViolation):
            DistArcConfig(lambda_=-0.1)

    def test_mask_labels(self):
        """Ablation rows are labelled in table order."""
        self.assertEqual(
            [mask.label for mask in ABLATION_ROWS],
            ["cos_theta", "cos_theta+cos_phi", "cos_theta+delta", "cos_theta+cos_phi+delta"],
        )
        self.assertTrue(all(mask.use_cos_theta for mask in ABLATION_ROWS))


class DistArcBackwardTest(SimpleTestCase):
    """Tests for distarc_backward against the finite-difference oracle."""

    def _check(self, X, labels, bank, cfg, tolerance):
        out = distarc_forward(X, labels, bank, cfg)
        grads = distarc_backward(X, labels, bank, cfg, out)
        n, d = X.shape
        err_x = gradient_error(
            lambda p: _distarc_loss(p.reshape(n, d), labels, bank, cfg), X.ravel(), grads.d_x.ravel()
        )
        err_w = gradient_error(
            lambda p: _distarc_loss(X, labels, bank.with_weights(p.reshape(bank.W.shape)), cfg),
            bank.W.ravel(),
            grads.d_w.ravel(),
        )
        self.assertLessEqual(err_x, tolerance, msg=f"d_x cfg={cfg}")
        self.assertLessEqual(err_w, tolerance, msg=f"d_w cfg={cfg}")

    def test_gradient_fidelity_grid(self):
        """Every mask, margin and lambda over d in {2, 8} and K in {2, 5} matches finite differences."""
        rng = make_rng(7)
        grid = itertools.product((2, 8), (2, 5), ABLATION_ROWS, (0.0, 0.4), (0.0, 0.005), range(4))
        checked = 0
        for d, k, mask, m, lam, _ in grid:
            X, labels, bank = _random_instance(rng, 3, d, k)
            self._check(X, labels, bank, DistArcConfig(margin=m, lambda_=lam, mask=mask), 1e-4)
            checked += 1
        self.assertGreaterEqual(checked, 200)

    def test_symmetric_denominator_gradient(self):
        """The symmetric variant has a matching analytic gradient."""
        rng = make_rng(8)
        for mask in ABLATION_ROWS:
            X, labels, bank = _random_instance(rng, 4, 3, 3)
            self._check(X, labels, bank, DistArcConfig(lambda_=0.005, mask=mask, symmetric_denominator=True), 1e-4)

    def test_delta_gradient_example(self):
        """d delta / dx at x = (0, 0) with w_r = (1, 0) is (-2, 0)."""
        _, diff = delta_matrix(np.zeros((1, 2)), np.array([[1.0], [0.0]]))
        d_x, _ = delta_matrix_backward(np.ones((1, 1)), diff)
        np.testing.assert_allclose(d_x, [[-2.0, 0.0]])

    def test_cos_theta_gradient_orthogonal_to_x(self):
        """With only cos(theta) active the feature gradient has no radial component."""
        rng = make_rng(9)
        X, labels, bank = _random_instance(rng, 6, 4, 3)
        cfg = DistArcConfig(margin=0.4, lambda_=0.0, mask=MASK_COS_THETA)
        grads = distarc_backward(X, labels, bank, cfg, distarc_forward(X, labels, bank, cfg))
        radial = np.sum(grads.d_x * X, axis=1) / np.linalg.norm(X, axis=1)
        np.testing.assert_allclose(radial, 0.0, atol=1e-12)

    def test_cache_mismatch_rejected(self):
        """Backward refuses a cache built from other labels or a missing cache."""
        rng = make_rng(10)
        X, labels, bank = _random_instance(rng, 4, 3, 3)
        cfg = DistArcConfig()
        out = distarc_forward(X, labels, bank, cfg)
        with self.assertRaises(ContractViolation):
            distarc_backward(X, (labels + 1) % 3, bank, cfg, out)
        with self.assertRaises(ContractViolation):
            distarc_backward(X, labels, bank, cfg, None)

    def test_loss_decreases_along_negative_gradient(self):
        """A 1e-3 step against the gradient lowers the loss for every head."""
        rng = make_rng(11)
        for trial in range(100):
            name = (DISTARC, ARCFACE, COSFACE, CROSS_ENTROPY)[trial % 4]
            settings = HeadSettings(name=name, distarc=DistArcConfig(lambda_=0.005), margin=0.3)
            X, labels, bank = _random_instance(rng, 5, 4, 3)
            bias = rng.normal(size=3)
            before = head_loss_and_grads(settings, X, labels, bank, bias)
            step = 1e-3
            moved = bank.with_weights(bank.W - step * before.d_w)
            after = head_loss_and_grads(settings, X - step * before.d_x, labels, moved, bias - step * before.d_b)
            self.assertLess(after.loss, before.loss, msg=f"{name} trial {trial}")


class CrossEntropyTest(SimpleTestCase):
    """Tests for the linear-head softmax cross-entropy."""

    def test_zero_logits(self):
        """Logits (0, 0) give log 2."""
        out = cross_entropy_forward(np.zeros((1, 2)), [0], np.eye(2), np.zeros(2))
        self.assertAlmostEqual(out.loss, math.log(2.0), places=15)

    def test_confident_logits(self):
        """Logits (10, -10) with the first class true give about 2.06e-9."""
        out = cross_entropy_forward(np.array([[10.0, -10.0]]), [0], np.eye(2), np.zeros(2))
        self.assertAlmostEqual(out.loss / math.log1p(math.exp(-20.0)), 1.0, places=5)
        self.assertAlmostEqual(out.loss / 2.06e-9, 1.0, places=2)

    def test_uniform_logits(self):
        """K equal logits give log K."""
        out = cross_entropy_forward(np.ones((1, 3)), [1], np.zeros((3, 7)), np.full(7, 0.25))
        self.assertAlmostEqual(out.loss, math.log(7.0), places=12)

    def test_gradient(self):
        """X, W and b gradients match finite differences."""
        rng = make_rng(12)
        X = rng.normal(size=(5, 3))
        W = rng.normal(size=(3, 4))
        b = rng.normal(size=4)
        labels = rng.integers(0, 4, size=5)
        grads = cross_entropy_backward(X, labels, W, b, cross_entropy_forward(X, labels, W, b))
        self.assertLess(gradient_error(lambda p: cross_entropy_forward(p.reshape(5, 3), labels, W, b).loss, X.ravel(), grads.d_x.ravel()), 1e-4)
        self.assertLess(gradient_error(lambda p: cross_entropy_forward(X, labels, p.reshape(3, 4), b).loss, W.ravel(), grads.d_w.ravel()), 1e-4)
        self.assertLess(gradient_error(lambda p: cross_entropy_forward(X, labels, W, p).loss, b, grads.d_b), 1e-4)

    def test_bias_length_checked(self):
        """A bias of the wrong length is rejected."""
        with self.assertRaises(ContractViolation):
            cross_entropy_forward(np.zeros((1, 2)), [0], np.eye(2), np.zeros(3))


class AngularBaselineTest(SimpleTestCase):
    """Tests for ArcFace and CosFace."""

    def setUp(self):
        self.rng = make_rng(13)

    def _cosine_cross_entropy(self, X, labels, W):
        x_hat, _ = normalize_rows(X)
        w_hat, _ = normalize_columns(W)
        return cross_entropy_forward(x_hat, labels, w_hat, np.zeros(W.shape[1])).loss

    def test_zero_margin_reduces_to_cosine_softmax(self):
        """m = 0, s = 1 is softmax cross-entropy on cosine logits for both heads."""
        X, labels, bank = _random_instance(self.rng, 6, 4, 3)
        expected = self._cosine_cross_entropy(X, labels, bank.W)
        self.assertAlmostEqual(arcface_forward(X, labels, bank.W, 0.0, 1.0).loss, expected, places=12)
        self.assertAlmostEqual(cosface_forward(X, labels, bank.W, 0.0, 1.0).loss, expected, places=12)

    def test_true_logit_decreases_with_margin(self):
        """The true-class logit strictly decreases as m grows."""
        X = np.array([[1.0, 1.0]])
        W = np.eye(2)
        for forward in (arcface_forward, cosface_forward):
            logits = [forward(X, [0], W, m, 1.0).logits[0, 0] for m in (0.0, 0.2, 0.4, 0.6)]
            self.assertTrue(all(a > b for a, b in zip(logits, logits[1:])), msg=forward.__name__)

    def test_scale_multiplies_logits(self):
        """s scales every logit."""
        X, labels, bank = _random_instance(self.rng, 3, 3, 3)
        base = arcface_forward(X, labels, bank.W, 0.3, 1.0).logits
        np.testing.assert_allclose(arcface_forward(X, labels, bank.W, 0.3, 64.0).logits, 64.0 * base, rtol=1e-12)

    def test_gradients(self):
        """ArcFace and CosFace gradients match finite differences at s = 1 and s = 8."""
        pairs = ((arcface_forward, arcface_backward), (cosface_forward, cosface_backward))
        for (forward, backward), s, m in itertools.product(pairs, (1.0, 8.0), (0.0, 0.4)):
            X, labels, bank = _random_instance(self.rng, 4, 3, 3)
            W = bank.W
            grads = backward(X, labels, W, m, s, forward(X, labels, W, m, s))
            err_x = gradient_error(lambda p: forward(p.reshape(4, 3), labels, W, m, s).loss, X.ravel(), grads.d_x.ravel())
            err_w = gradient_error(lambda p: forward(X, labels, p.reshape(3, 3), m, s).loss, W.ravel(), grads.d_w.ravel())
            self.assertLessEqual(err_x, 1e-4)
            self.assertLessEqual(err_w, 1e-4)

    def test_invalid_parameters(self):
        """Nonpositive scale, negative margin and an ArcFace margin of pi/2 are rejected."""
        X, labels, bank = _random_instance(self.rng, 2, 2, 2)
        with self.assertRaises(ContractViolation):
            arcface_forward(X, labels, bank.W, 0.1, 0.0)
        with self.assertRaises(ContractViolation):
            cosface_forward(X, labels, bank.W, -0.1, 1.0)
        with self.assertRaises(ContractViolation):
            arcface_forward(X, labels, bank.W, math.pi / 2, 1.0)


class HeadDispatchTest(SimpleTestCase):
    """Tests for head_loss_and_grads."""

    def test_dispatch_matches_direct_calls(self):
        """Each head name routes to its loss with the expected bias handling."""
        rng = make_rng(14)
        X, labels, bank = _random_instance(rng, 4, 3, 3)
        bias = rng.normal(size=3)
        distarc = head_loss_and_grads(HeadSettings(DISTARC), X, labels, bank, bias)
        self.assertEqual(distarc.loss, distarc_forward(X, labels, bank, DistArcConfig()).loss)
        np.testing.assert_array_equal(distarc.d_b, np.zeros(3))
        ce = head_loss_and_grads(HeadSettings(CROSS_ENTROPY), X, labels, bank, bias)
        self.assertEqual(ce.loss, cross_entropy_forward(X, labels, bank.W, bias).loss)
        self.assertTrue(np.any(ce.d_b != 0.0))
        cos = head_loss_and_grads(HeadSettings(COSFACE, margin=0.2, scale=2.0), X, labels, bank, bias)
        self.assertEqual(cos.loss, cosface_forward(X, labels, bank.W, 0.2, 2.0).loss)

    def test_unknown_head(self):
        """Unknown loss names are rejected."""
        with self.assertRaises(ContractViolation):
            HeadSettings(name="sphereface")

    def test_with_lambda(self):
        """with_lambda swaps only the DistArc weighing factor."""
        settings = HeadSettings(distarc=DistArcConfig(margin=0.3, lambda_=0.001)).with_lambda(0.004)
        self.assertEqual(settings.distarc.lambda_, 0.004)
        self.assertEqual(settings.distarc.margin, 0.3)


class LambdaScheduleTest(SimpleTestCase):
    """Tests for lambda_schedule."""

    def test_face_recognition_recipe(self):
        """0.001 + 0.001 every ten epochs, capped at 0.005."""
        values = {epoch: lambda_schedule(epoch, 0.001, 0.001, 10, 0.005) for epoch in (0, 9, 10, 20, 100)}
        self.assertEqual(values, {0: 0.001, 9: 0.001, 10: 0.002, 20: 0.003, 100: 0.005})

    def test_constant_schedule(self):
        """A zero increment keeps lambda fixed."""
        self.assertEqual(lambda_schedule(57, 0.003, 0.0, 1, 1.0), 0.003)

    def test_invalid_arguments(self):
        """Negative values and step_every below one raise."""
        with self.assertRaises(ContractViolation):
            lambda_schedule(0, -0.1, 0.0, 1, 1.0)
        with self.assertRaises(ContractViolation):
            lambda_schedule(0, 0.1, 0.0, 0, 1.0)


class OrderedMeanTest(SimpleTestCase):
    """The batch reduction is a fixed left-to-right sum."""

    def test_reduction_is_reproducible(self):
        """Repeated forwards give identical bytes."""
        rng = make_rng(15)
        X, labels, bank = _random_instance(rng, 50, 6, 5)
        first = distarc_forward(X, labels, bank, DistArcConfig(lambda_=0.005))
        second = distarc_forward(X, labels, bank, DistArcConfig(lambda_=0.005))
        self.assertEqual(np.float64(first.loss).tobytes(), np.float64(second.loss).tobytes())
        self.assertEqual(first.loss, ordered_mean(first.per_sample_loss))
