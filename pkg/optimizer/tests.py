"""
Tests for the Optimizer app - SGD with weight decay and momentum.
"""
from collections import OrderedDict

import numpy as np
from django.test import SimpleTestCase

from geometry.proxies import init_proxy_bank
from network.mlp import init_mlp
from numkit.exceptions import ContractViolation, NonFiniteError
from numkit.rng import make_rng

from .sgd import SgdConfig, SgdState, named_parameters, sgd_step


def _single(value):
    return OrderedDict(w=np.array(value, dtype=np.float64))


class SgdStepTest(SimpleTestCase):
    """Tests for sgd_step."""

    def test_plain_gradient_step(self):
        """lr = 1, no decay, no momentum subtracts the gradient exactly."""
        params = _single([1.0, -2.0, 3.5])
        sgd_step(params, _single([0.25, 0.5, -1.0]), SgdConfig(1.0, 0.0, 0.0), SgdState())
        np.testing.assert_array_equal(params["w"], [0.75, -2.5, 4.5])

    def test_pure_decay(self):
        """Zero gradient with weight decay 0.1 scales parameters by 0.9."""
        params = _single([2.0, -4.0])
        sgd_step(params, _single([0.0, 0.0]), SgdConfig(1.0, 0.1, 0.0), SgdState())
        np.testing.assert_allclose(params["w"], [1.8, -3.6], rtol=1e-14)

    def test_momentum_two_steps(self):
        """Two momentum steps follow the hand-unrolled recurrence."""
        cfg = SgdConfig(learning_rate=0.1, weight_decay=0.01, momentum=0.9)
        p0 = np.array([1.0, 2.0])
        g1, g2 = np.array([0.5, -0.5]), np.array([0.2, 0.1])
        v1 = g1 + 0.01 * p0
        p1 = p0 - 0.1 * v1
        v2 = 0.9 * v1 + (g2 + 0.01 * p1)
        p2 = p1 - 0.1 * v2

        params = _single(p0)
        state = SgdState()
        sgd_step(params, _single(g1), cfg, state)
        sgd_step(params, _single(g2), cfg, state)
        np.testing.assert_allclose(params["w"], p2, rtol=1e-15)
        self.assertEqual(state.steps, 2)

    def test_non_finite_gradient_aborts(self):
        """A NaN anywhere leaves every parameter untouched."""
        params = OrderedDict(a=np.array([1.0]), b=np.array([2.0]))
        grads = OrderedDict(a=np.array([1.0]), b=np.array([np.inf]))
        with self.assertRaises(NonFiniteError):
            sgd_step(params, grads, SgdConfig(1.0, 0.0, 0.0), SgdState())
        self.assertEqual(params["a"][0], 1.0)
        self.assertEqual(params["b"][0], 2.0)

    def test_mismatched_gradients(self):
        """Names and shapes must agree."""
        with self.assertRaises(ContractViolation):
            sgd_step(_single([1.0]), OrderedDict(v=np.array([1.0])), SgdConfig(), SgdState())
        with self.assertRaises(ContractViolation):
            sgd_step(_single([1.0]), _single([1.0, 2.0]), SgdConfig(), SgdState())

    def test_config_validation(self):
        """lr must be positive, decay nonnegative, momentum in [0, 1)."""
        for kwargs in ({"learning_rate": 0.0}, {"weight_decay": -1.0}, {"momentum": 1.0}):
            with self.assertRaises(ContractViolation):
                SgdConfig(**kwargs)

    def test_radii_untouched(self):
        """Stepping backbone, proxies and bias leaves radii bit-identical."""
        rng = make_rng(0)
        backbone = init_mlp(rng, [3, 4, 2])
        bank = init_proxy_bank(rng, 2, 3)
        bias = np.zeros(3)
        radii_before = bank.radii.tobytes()
        proxies_before = bank.W.copy()
        params = named_parameters(backbone, bank.W, bias)
        self.assertEqual(list(params), ["layer0.weight", "layer0.bias", "layer1.weight", "layer1.bias", "proxies", "head_bias"])
        state = SgdState()
        for _ in range(25):
            grads = OrderedDict((name, rng.normal(size=p.shape)) for name, p in params.items())
            sgd_step(params, grads, SgdConfig(momentum=0.5), state)
        self.assertEqual(bank.radii.tobytes(), radii_before)
        self.assertFalse(np.array_equal(bank.W, proxies_before))

    def test_quadratic_decreases(self):
        """On f(p) = 0.5 p^T A p a step below 2 / lambda_max lowers f."""
        rng = make_rng(1)
        Q = rng.normal(size=(4, 4))
        A = Q @ Q.T + np.eye(4)
        lr = 1.0 / np.linalg.eigvalsh(A).max()
        params = _single(rng.normal(size=4))
        state = SgdState()
        for _ in range(10):
            p = params["w"].copy()
            before = 0.5 * p @ A @ p
            sgd_step(params, _single(A @ p), SgdConfig(lr, 0.0, 0.0), state)
            after = 0.5 * params["w"] @ A @ params["w"]
            self.assertLess(after, before)
