"""
Tests for the Network app - MLP forward/backward and the checkpoint codec.
"""
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from geometry.proxies import init_proxy_bank
from losses.distarc import ABLATION_ROWS, DistArcConfig, distarc_backward, distarc_forward
from numkit.exceptions import ContractViolation
from numkit.gradcheck import gradient_error
from numkit.rng import make_rng

from .checkpoint import (
    MAGIC,
    CheckpointFormatError,
    ModelCheckpoint,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from .mlp import TANH, MlpParams, identity_mlp, init_mlp, mlp_backward, mlp_forward


def _flatten(params):
    return np.concatenate([a.ravel() for pair in zip(params.weights, params.biases) for a in pair])


def _unflatten(params, flat):
    out = params.copy()
    offset = 0
    for i in range(out.layer_count):
        for store in (out.weights, out.biases):
            size = store[i].size
            store[i] = flat[offset:offset + size].reshape(store[i].shape)
            offset += size
    return out


class MlpForwardTest(SimpleTestCase):
    """Tests for mlp_forward."""

    def test_identity_layer(self):
        """An identity single layer returns its inputs."""
        inputs = make_rng(0).normal(size=(5, 3))
        embeddings, _ = mlp_forward(identity_mlp(3), inputs)
        np.testing.assert_array_equal(embeddings, inputs)

    def test_zero_network(self):
        """Zero weights and biases give zero embeddings."""
        params = MlpParams(widths=[4, 3, 2], weights=[np.zeros((4, 3)), np.zeros((3, 2))], biases=[np.zeros(3), np.zeros(2)])
        embeddings, _ = mlp_forward(params, np.ones((2, 4)))
        np.testing.assert_array_equal(embeddings, np.zeros((2, 2)))

    def test_matches_straight_line_evaluation(self):
        """Forward equals a hand-chained affine + activation evaluation."""
        rng = make_rng(1)
        for activation, fn in (("relu", lambda z: np.maximum(z, 0.0)), (TANH, np.tanh)):
            params = init_mlp(rng, [5, 7, 6, 2], activation)
            inputs = rng.normal(size=(4, 5))
            h1 = fn(inputs @ params.weights[0] + params.biases[0])
            h2 = fn(h1 @ params.weights[1] + params.biases[1])
            expected = h2 @ params.weights[2] + params.biases[2]
            embeddings, _ = mlp_forward(params, inputs)
            np.testing.assert_allclose(embeddings, expected, rtol=1e-13, atol=1e-14)

    def test_deterministic(self):
        """Same params and inputs give identical bytes."""
        rng = make_rng(2)
        params = init_mlp(rng, [3, 8, 2])
        inputs = rng.normal(size=(6, 3))
        first, _ = mlp_forward(params, inputs)
        second, _ = mlp_forward(params, inputs)
        self.assertEqual(first.tobytes(), second.tobytes())

    def test_init_bounds(self):
        """Initial weights lie within 1/sqrt(fan_in) and biases are zero."""
        params = init_mlp(make_rng(3), [16, 4, 2])
        self.assertLessEqual(np.abs(params.weights[0]).max(), 0.25)
        self.assertTrue(all(not b.any() for b in params.biases))

    def test_shape_checks(self):
        """Wrong input width, bad widths and unknown activations raise."""
        params = init_mlp(make_rng(4), [3, 2])
        with self.assertRaises(ContractViolation):
            mlp_forward(params, np.ones((2, 4)))
        with self.assertRaises(ContractViolation):
            init_mlp(make_rng(4), [3])
        with self.assertRaises(ContractViolation):
            init_mlp(make_rng(4), [3, 2], "sigmoid")


class MlpBackwardTest(SimpleTestCase):
    """Tests for mlp_backward."""

    def test_zero_upstream(self):
        """Zero upstream gradient gives zero parameter gradients."""
        rng = make_rng(5)
        params = init_mlp(rng, [4, 5, 3])
        _, cache = mlp_forward(params, rng.normal(size=(3, 4)))
        grads = mlp_backward(params, cache, np.zeros((3, 3)))
        self.assertTrue(all(not g.any() for g in grads.weights + grads.biases))

    def test_linear_weight_gradient(self):
        """For a single linear layer dW = inputs^T upstream."""
        rng = make_rng(6)
        params = init_mlp(rng, [4, 3])
        inputs = rng.normal(size=(5, 4))
        upstream = rng.normal(size=(5, 3))
        _, cache = mlp_forward(params, inputs)
        grads = mlp_backward(params, cache, upstream)
        np.testing.assert_allclose(grads.weights[0], inputs.T @ upstream)
        np.testing.assert_allclose(grads.biases[0], upstream.sum(axis=0))
        np.testing.assert_allclose(grads.d_inputs, upstream @ params.weights[0].T)

    def test_end_to_end_distarc_gradient(self):
        """inputs -> MLP -> DistArc matches finite differences for every mask."""
        rng = make_rng(7)
        for mask in ABLATION_ROWS:
            for activation in ("relu", TANH):
                params = init_mlp(rng, [4, 8, 6, 3], activation)
                bank = init_proxy_bank(rng, 3, 4, gap=2.0)
                inputs = rng.normal(size=(5, 4))
                labels = rng.integers(0, 4, size=5)
                cfg = DistArcConfig(margin=0.4, lambda_=0.005, mask=mask)

                embeddings, cache = mlp_forward(params, inputs)
                breakdown = distarc_forward(embeddings, labels, bank, cfg)
                grads = mlp_backward(params, cache, distarc_backward(embeddings, labels, bank, cfg, breakdown).d_x)
                analytic = np.concatenate([a.ravel() for pair in zip(grads.weights, grads.biases) for a in pair])

                def loss(flat):
                    out, _ = mlp_forward(_unflatten(params, flat), inputs)
                    return distarc_forward(out, labels, bank, cfg).loss

                self.assertLessEqual(gradient_error(loss, _flatten(params), analytic), 1e-3, msg=f"{mask.label} {activation}")


class CheckpointTest(SimpleTestCase):
    """Tests for the binary checkpoint codec."""

    def setUp(self):
        rng = make_rng(8)
        self.checkpoint = ModelCheckpoint(
            loss_name="distarc",
            backbone=init_mlp(rng, [6, 5, 2], TANH),
            bank=init_proxy_bank(rng, 2, 3, gap=10.0),
            head_bias=rng.normal(size=3),
        )

    def test_file_roundtrip_is_exact(self):
        """Saving then loading restores every array bit for bit."""
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(Path(tmp) / "nested" / "model.ckpt", self.checkpoint)
            loaded = load_checkpoint(path)
        self.assertEqual(loaded.loss_name, "distarc")
        self.assertEqual(loaded.backbone.widths, [6, 5, 2])
        self.assertEqual(loaded.backbone.activation, TANH)
        for a, b in zip(loaded.backbone.weights + loaded.backbone.biases, self.checkpoint.backbone.weights + self.checkpoint.backbone.biases):
            self.assertEqual(a.tobytes(), b.tobytes())
        self.assertEqual(loaded.bank.W.tobytes(), self.checkpoint.bank.W.tobytes())
        self.assertEqual(loaded.bank.radii.tolist(), [10.0, 20.0, 30.0])
        self.assertEqual(loaded.head_bias.tobytes(), self.checkpoint.head_bias.tobytes())

    def test_header_layout(self):
        """Magic, version and loss tag lead the payload."""
        payload = encode_checkpoint(self.checkpoint)
        self.assertTrue(payload.startswith(MAGIC + b"\x01\x00\x00\x00\x07distarc\x01"))
        # header + weights + biases + K + proxies + radii + bias
        floats = 6 * 5 + 5 + 5 * 2 + 2 + 2 * 3 + 3 + 3
        self.assertEqual(len(payload), 8 + 4 + 1 + 7 + 1 + 4 + 3 * 4 + 4 + 8 * floats)

    def test_corrupt_payloads(self):
        """Bad magic, truncation, trailing bytes and unknown versions are rejected."""
        payload = encode_checkpoint(self.checkpoint)
        for broken in (b"NOTACKPT" + payload[8:], payload[:-1], payload + b"\x00", MAGIC + b"\x02\x00\x00\x00" + payload[12:]):
            with self.assertRaises(CheckpointFormatError):
                decode_checkpoint(broken)

    def test_dimension_mismatch(self):
        """Backbone width must equal the proxy dimension."""
        with self.assertRaises(ContractViolation):
            ModelCheckpoint("distarc", init_mlp(make_rng(9), [4, 3]), self.checkpoint.bank, np.zeros(3))
