"""
Tests for the Geometry app - proxies, angles, resultants, triangle law and decision boundaries.
"""
import math

import numpy as np
from django.test import SimpleTestCase

from geometry.batch import (
    cos_phi_rows,
    cos_phi_rows_backward,
    cos_theta_matrix,
    cos_theta_matrix_backward,
    delta_matrix,
    scaled_proxies,
    scaled_proxies_backward,
)
from geometry.measures import (
    SWAPPED_NORMS,
    PROJECTION_LAW,
    angle_between,
    cos_phi,
    cos_theta,
    decision_boundary_residual,
    delta_sq,
    resultant,
    sample_geometry,
    triangle_magnitude,
    triangle_magnitude_from_vectors,
)
from geometry.proxies import ProxyBank, assign_radii, init_proxy_bank, scaled_proxy
from numkit.exceptions import ContractViolation, DegenerateProxyError
from numkit.gradcheck import gradient_error
from numkit.linalg import l2_norm
from numkit.rng import make_rng


class ProxyBankTest(SimpleTestCase):
    """Tests for ProxyBank construction and scaled proxies."""

    def test_default_radii(self):
        """Default radii are gap * (k + 1) with gap 10."""
        np.testing.assert_array_equal(assign_radii(4), [10.0, 20.0, 30.0, 40.0])

    def test_shared_hyperspheres(self):
        """With H shells the radii cycle through gap .. H gap."""
        np.testing.assert_array_equal(assign_radii(5, 2.0, hyperspheres=2), [2.0, 4.0, 2.0, 4.0, 2.0])

    def test_scaled_proxy_axis(self):
        """Unit proxy (0,1) with radius 10 scales to (0,10)."""
        bank = ProxyBank(W=np.array([[0.0], [1.0]]), radii=[10.0])
        np.testing.assert_allclose(scaled_proxy(bank, 0), [0.0, 10.0])

    def test_scaled_proxy_three_four(self):
        """(3,4) with radius 5 stays (3,4)."""
        bank = ProxyBank(W=np.array([[3.0], [4.0]]), radii=[5.0])
        np.testing.assert_allclose(scaled_proxy(bank, 0), [3.0, 4.0], atol=1e-12)

    def test_scaled_proxy_unit_radius(self):
        """(2,0) with radius 1 becomes (1,0)."""
        bank = ProxyBank(W=np.array([[2.0], [0.0]]), radii=[1.0])
        np.testing.assert_allclose(scaled_proxy(bank, 0), [1.0, 0.0])

    def test_scaled_norm_equals_radius(self):
        """||omega_r_k|| = r_k for every class."""
        bank = init_proxy_bank(make_rng(0), 6, 8, gap=7.5)
        for k in range(8):
            self.assertAlmostEqual(l2_norm(scaled_proxy(bank, k)) / bank.radii[k], 1.0, delta=1e-9)
        np.testing.assert_allclose(np.linalg.norm(bank.scaled_proxies(), axis=0), bank.radii, rtol=1e-9)

    def test_degenerate_column_rejected(self):
        """A zero proxy column raises DegenerateProxyError."""
        with self.assertRaises(DegenerateProxyError) as ctx:
            ProxyBank(W=np.array([[1.0, 0.0], [0.0, 0.0]]), radii=[1.0, 2.0])
        self.assertEqual(ctx.exception.column, 1)

    def test_invalid_shapes_rejected(self):
        """d < 2, mismatched radii and nonpositive radii are rejected."""
        with self.assertRaises(ContractViolation):
            ProxyBank(W=np.ones((1, 2)), radii=[1.0, 2.0])
        with self.assertRaises(ContractViolation):
            ProxyBank(W=np.ones((2, 2)), radii=[1.0])
        with self.assertRaises(ContractViolation):
            ProxyBank(W=np.ones((2, 2)), radii=[1.0, 0.0])

    def test_class_index_out_of_range(self):
        """scaled_proxy rejects k >= K."""
        bank = init_proxy_bank(make_rng(1), 2, 3)
        with self.assertRaises(ContractViolation):
            scaled_proxy(bank, 3)

    def test_with_weights_keeps_radii(self):
        """Replacing proxies never touches radii."""
        bank = init_proxy_bank(make_rng(2), 3, 4)
        updated = bank.with_weights(bank.W * 2.0)
        self.assertEqual(updated.radii.tobytes(), bank.radii.tobytes())


class AngleTest(SimpleTestCase):
    """Tests for cos_theta and cos_phi."""

    def test_cos_theta_examples(self):
        """Aligned, orthogonal and (3,4)/(5,0) cases."""
        self.assertEqual(cos_theta([1.0, 0.0], [1.0, 0.0]), 1.0)
        self.assertEqual(cos_theta([1.0, 0.0], [0.0, 1.0]), 0.0)
        self.assertAlmostEqual(cos_theta([3.0, 4.0], [5.0, 0.0]), 0.6, places=15)

    def test_cos_theta_zero_vector(self):
        """A zero argument gives 0."""
        self.assertEqual(cos_theta([0.0, 0.0], [1.0, 2.0]), 0.0)

    def test_cos_theta_dimension_mismatch(self):
        """Different dimensions are a contract violation."""
        with self.assertRaises(ContractViolation):
            cos_theta([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_cos_theta_scale_invariant(self):
        """Positive scaling of either argument leaves cos_theta unchanged."""
        rng = make_rng(4)
        for _ in range(200):
            x, w = rng.normal(size=5), rng.normal(size=5)
            a, b = rng.uniform(0.01, 100, size=2)
            self.assertAlmostEqual(cos_theta(a * x, b * w), cos_theta(x, w), delta=1e-12)

    def test_cos_phi_examples(self):
        """Origin sample, orthogonal resultant and a sample beyond its proxy."""
        self.assertEqual(cos_phi([0.0, 0.0], [1.0, 0.0]), 1.0)
        self.assertAlmostEqual(cos_phi([1.0, 1.0], [1.0, 0.0]), 0.0, places=15)
        self.assertEqual(cos_phi([2.0, 0.0], [1.0, 0.0]), -1.0)

    def test_cos_phi_zero_resultant(self):
        """A sample on its scaled proxy counts as perfectly aligned."""
        self.assertEqual(cos_phi([3.0, 4.0], [3.0, 4.0]), 1.0)

    def test_cosines_always_clamped(self):
        """Batch cosines stay in [-1, 1] for a million pairs, near-collinear ones included."""
        rng = make_rng(5)
        X = rng.normal(size=(250_000, 2))
        W = rng.normal(size=(2, 4))
        W[:, 0] = X[0] * 3.0
        X[1] = -W[:, 1] * 1e-3
        cos, _ = cos_theta_matrix(X, W)
        self.assertTrue(np.all(np.abs(cos) <= 1.0))
        WR_rows = (W[:, rng.integers(0, 4, size=X.shape[0])]).T
        WR_rows[2] = X[2] * (1 + 1e-12)
        phi, _ = cos_phi_rows(X, WR_rows)
        self.assertTrue(np.all(np.abs(phi) <= 1.0))


class ResultantTest(SimpleTestCase):
    """Tests for resultant and delta_sq."""

    def test_resultant_examples(self):
        """x - omega_r on three small cases."""
        np.testing.assert_array_equal(resultant([1.0, 1.0], [1.0, 0.0]), [0.0, 1.0])
        np.testing.assert_array_equal(resultant([2.0, 3.0], [2.0, 3.0]), [0.0, 0.0])
        np.testing.assert_array_equal(resultant([0.0, 0.0], [3.0, 4.0]), [-3.0, -4.0])

    def test_delta_examples(self):
        """Squared distances on three small cases."""
        self.assertEqual(delta_sq([1.0, 2.0], [1.0, 2.0]), 0.0)
        self.assertEqual(delta_sq([0.0, 0.0], [3.0, 4.0]), 25.0)
        self.assertEqual(delta_sq([1.0, 1.0], [1.0, 0.0]), 1.0)

    def test_delta_is_squared_resultant_norm(self):
        """delta_sq = ||resultant||^2 for random pairs."""
        rng = make_rng(6)
        for _ in range(500):
            x, w = rng.normal(size=4) * 30, rng.normal(size=4) * 30
            expected = l2_norm(resultant(x, w)) ** 2
            self.assertAlmostEqual(delta_sq(x, w) / expected, 1.0, delta=1e-9)

    def test_sample_geometry(self):
        """SampleGeometry keeps delta = resultant_norm^2."""
        bank = init_proxy_bank(make_rng(7), 3, 4)
        geometry = sample_geometry(make_rng(8).normal(size=3) * 20, bank, label=2)
        np.testing.assert_allclose(geometry.delta, geometry.resultant_norms ** 2, rtol=1e-9)
        self.assertTrue(-1.0 <= geometry.cos_phi <= 1.0)


class TriangleMagnitudeTest(SimpleTestCase):
    """Tests for the triangle-law resultant magnitude."""

    def test_projection_law_worked_example(self):
        """x=(1,1), omega_r=(1,0): the projection law gives the true length 1."""
        value = triangle_magnitude(math.sqrt(2), 1.0, math.pi / 4, math.pi / 2, PROJECTION_LAW)
        self.assertAlmostEqual(value, 1.0, places=12)

    def test_swapped_norms_worked_example(self):
        """Same inputs, the swapped-norms form gives sqrt(2)/2 instead of 1."""
        value = triangle_magnitude(math.sqrt(2), 1.0, math.pi / 4, math.pi / 2, SWAPPED_NORMS)
        self.assertAlmostEqual(value, math.sqrt(2) / 2, places=12)
        self.assertNotAlmostEqual(value, 1.0, places=3)

    def test_collinear_degenerate(self):
        """theta = 0, phi = pi gives ||x|| - ||omega_r||."""
        self.assertAlmostEqual(triangle_magnitude(5.0, 2.0, 0.0, math.pi, PROJECTION_LAW), 3.0, places=12)

    def test_unknown_variant(self):
        """Unknown variant names are rejected."""
        with self.assertRaises(ContractViolation):
            triangle_magnitude(1.0, 1.0, 0.1, 0.1, "law-of-sines")

    def test_projection_law_matches_direct_norm(self):
        """Projection law equals ||x - omega_r|| over 10^5 random pairs."""
        rng = make_rng(9)
        n = 100_000
        X = rng.normal(size=(n, 3)) * rng.uniform(0.1, 50, size=(n, 1))
        WR = rng.normal(size=(n, 3)) * rng.uniform(0.1, 50, size=(n, 1))
        nx = np.linalg.norm(X, axis=1)
        nw = np.linalg.norm(WR, axis=1)
        theta = np.arccos(np.clip(np.sum(X * WR, axis=1) / (nx * nw), -1, 1))
        phi = np.arccos(cos_phi_rows(X, WR)[0])
        magnitudes = triangle_magnitude(nx, nw, theta, phi, PROJECTION_LAW)
        direct = np.linalg.norm(X - WR, axis=1)
        np.testing.assert_allclose(magnitudes, direct, rtol=1e-9, atol=1e-9)

    def test_from_vectors(self):
        """The vector convenience wrapper reproduces the worked example."""
        self.assertAlmostEqual(triangle_magnitude_from_vectors([1.0, 1.0], [1.0, 0.0]), 1.0, places=12)
        self.assertAlmostEqual(
            triangle_magnitude_from_vectors([1.0, 1.0], [1.0, 0.0], SWAPPED_NORMS), math.sqrt(2) / 2, places=12
        )


class DecisionBoundaryTest(SimpleTestCase):
    """Tests for the two-class decision boundary residual."""

    def test_mirror_symmetric_configuration(self):
        """Mirror-image samples and proxies with m = 0 lie on the boundary."""
        bank = ProxyBank(W=np.array([[1.0, 1.0], [1.0, -1.0]]), radii=[1.0, 2.0])
        for claimed in (1, 2):
            self.assertAlmostEqual(
                decision_boundary_residual([2.0, 0.5], [2.0, -0.5], bank, 0.0, claimed), 0.0, places=12
            )

    def test_identical_samples_equal_angles(self):
        """m = 0, x1 = x2 with equal angles to both proxies gives 0."""
        bank = ProxyBank(W=np.array([[1.0, 0.0], [0.0, 1.0]]), radii=[1.0, 2.0])
        self.assertAlmostEqual(decision_boundary_residual([1.0, 1.0], [1.0, 1.0], bank, 0.0, 1), 0.0, places=12)

    def test_random_matches_direct_recomputation(self):
        """Random instances agree with an independent scalar re-evaluation."""
        rng = make_rng(10)
        for _ in range(100):
            bank = init_proxy_bank(rng, 3, 2)
            x1, x2 = rng.normal(size=3) * 5, rng.normal(size=3) * 5
            m = rng.uniform(0, 0.5)
            t1 = angle_between(x1, bank.W[:, 0])
            t2 = angle_between(x2, bank.W[:, 1])
            n1, n2 = np.linalg.norm(x1), np.linalg.norm(x2)
            expected_1 = (math.cos(t1 + m) + n1) - (math.cos(t2) + n2)
            expected_2 = (math.cos(t1) + n1) - (math.cos(t2 + m) + n2)
            self.assertAlmostEqual(decision_boundary_residual(x1, x2, bank, m, 1), expected_1, places=9)
            self.assertAlmostEqual(decision_boundary_residual(x1, x2, bank, m, 2), expected_2, places=9)

    def test_requires_two_classes(self):
        """K != 2 is a contract violation."""
        bank = init_proxy_bank(make_rng(11), 2, 3)
        with self.assertRaises(ContractViolation):
            decision_boundary_residual([1.0, 0.0], [0.0, 1.0], bank, 0.0, 1)


class BatchGradientTest(SimpleTestCase):
    """Finite-difference checks of the vectorized building blocks."""

    def setUp(self):
        self.rng = make_rng(12)

    def test_cos_theta_matrix_gradients(self):
        """d/dX and d/dW of sum(G * cos) match finite differences."""
        X = self.rng.normal(size=(4, 3))
        W = self.rng.normal(size=(3, 5))
        G = self.rng.normal(size=(4, 5))
        _, cache = cos_theta_matrix(X, W)
        dX, dW = cos_theta_matrix_backward(G, cache)
        self.assertLess(gradient_error(lambda p: float(np.sum(G * cos_theta_matrix(p.reshape(4, 3), W)[0])), X.ravel(), dX.ravel()), 1e-6)
        self.assertLess(gradient_error(lambda p: float(np.sum(G * cos_theta_matrix(X, p.reshape(3, 5))[0])), W.ravel(), dW.ravel()), 1e-6)

    def test_cos_phi_rows_gradients(self):
        """d/dX and d/dWR of sum(g * cos_phi) match finite differences."""
        X = self.rng.normal(size=(5, 3)) * 4
        WR = self.rng.normal(size=(5, 3)) * 4
        g = self.rng.normal(size=5)
        _, cache = cos_phi_rows(X, WR)
        dX, dWR = cos_phi_rows_backward(g, cache)
        self.assertLess(gradient_error(lambda p: float(g @ cos_phi_rows(p.reshape(5, 3), WR)[0]), X.ravel(), dX.ravel()), 1e-6)
        self.assertLess(gradient_error(lambda p: float(g @ cos_phi_rows(X, p.reshape(5, 3))[0]), WR.ravel(), dWR.ravel()), 1e-6)

    def test_scaled_proxy_gradient(self):
        """Gradient through radius scaling and normalization matches finite differences."""
        W = self.rng.normal(size=(3, 4))
        radii = assign_radii(4, 3.0)
        G = self.rng.normal(size=(3, 4))
        _, unit_cache = scaled_proxies(W, radii)
        dW = scaled_proxies_backward(G, radii, unit_cache)
        self.assertLess(gradient_error(lambda p: float(np.sum(G * scaled_proxies(p.reshape(3, 4), radii)[0])), W.ravel(), dW.ravel()), 1e-6)

    def test_delta_matrix_matches_scalar(self):
        """Vectorized squared distances equal the scalar definition."""
        X = self.rng.normal(size=(3, 2)) * 10
        WR = self.rng.normal(size=(2, 4)) * 10
        deltas, _ = delta_matrix(X, WR)
        for i in range(3):
            for k in range(4):
                self.assertAlmostEqual(deltas[i, k], delta_sq(X[i], WR[:, k]), places=9)
