"""
Tests for the Numkit app - norms, normalization, log-sum-exp, RNG and the gradient oracle.
"""
import math

import numpy as np
from django.test import SimpleTestCase

from numkit.exceptions import ContractViolation, GradientCheckError
from numkit.gradcheck import finite_difference_gradient, gradient_error, relative_error
from numkit.linalg import (
    EPS,
    as_matrix,
    l2_norm,
    normalize,
    normalize_columns,
    ordered_mean,
    softmax_rows,
    stable_log_sum_exp,
    stable_log_sum_exp_rows,
)
from numkit.rng import make_rng, spawn_rngs


class L2NormTest(SimpleTestCase):
    """Tests for l2_norm."""

    def test_pythagorean(self):
        """(3,4) has norm 5."""
        self.assertEqual(l2_norm([3.0, 4.0]), 5.0)

    def test_zero_vector(self):
        """The zero vector has norm 0."""
        self.assertEqual(l2_norm([0.0, 0.0, 0.0]), 0.0)

    def test_all_ones(self):
        """100 ones have norm 10."""
        self.assertAlmostEqual(l2_norm(np.ones(100)), 10.0, places=12)

    def test_empty_vector_rejected(self):
        """An empty vector violates the precondition."""
        with self.assertRaises(ContractViolation):
            l2_norm([])

    def test_absolute_homogeneity(self):
        """l2_norm(c v) = |c| l2_norm(v) for random c, v."""
        rng = make_rng(7)
        for _ in range(200):
            v = rng.normal(size=rng.integers(1, 20))
            c = rng.normal() * 10
            self.assertAlmostEqual(
                l2_norm(c * v) / (abs(c) * l2_norm(v)), 1.0, delta=1e-12
            )


class NormalizeTest(SimpleTestCase):
    """Tests for normalize."""

    def test_axis_vector(self):
        """(0,2) normalizes to (0,1)."""
        np.testing.assert_array_equal(normalize([0.0, 2.0], 1e-12), [0.0, 1.0])

    def test_zero_vector_stays_zero(self):
        """The eps guard keeps the zero vector at zero."""
        np.testing.assert_array_equal(normalize([0.0, 0.0], 1e-12), [0.0, 0.0])

    def test_three_four(self):
        """(3,4) normalizes to (0.6,0.8)."""
        np.testing.assert_allclose(normalize([3.0, 4.0], 1e-12), [0.6, 0.8], atol=1e-15)

    def test_non_positive_eps_rejected(self):
        """eps must be strictly positive."""
        with self.assertRaises(ContractViolation):
            normalize([1.0, 0.0], 0.0)

    def test_idempotent(self):
        """normalize(normalize(v)) = normalize(v)."""
        rng = make_rng(11)
        for _ in range(200):
            v = rng.normal(size=5) * rng.uniform(0.01, 100)
            once = normalize(v)
            np.testing.assert_allclose(normalize(once), once, atol=1e-12)
            self.assertAlmostEqual(l2_norm(once), 1.0, delta=1e-12)

    def test_input_not_aliased(self):
        """The result never shares memory with the argument."""
        v = np.array([3.0, 4.0])
        out = normalize(v)
        self.assertFalse(np.shares_memory(v, out))

    def test_columns(self):
        """normalize_columns returns unit columns and the original norms."""
        unit, norms = normalize_columns(np.array([[3.0, 0.0], [4.0, 2.0]]))
        np.testing.assert_allclose(norms, [5.0, 2.0])
        np.testing.assert_allclose(unit, [[0.6, 0.0], [0.8, 1.0]])


class LogSumExpTest(SimpleTestCase):
    """Tests for stable_log_sum_exp."""

    def test_two_zeros(self):
        """log(e^0 + e^0) = log 2."""
        self.assertAlmostEqual(stable_log_sum_exp([0.0, 0.0]), math.log(2), places=12)

    def test_large_magnitude(self):
        """Large equal logits do not overflow."""
        self.assertAlmostEqual(
            stable_log_sum_exp([1000.0, 1000.0]), 1000.0 + math.log(2), places=9
        )

    def test_singleton(self):
        """A single logit is returned unchanged."""
        self.assertEqual(stable_log_sum_exp([-3.0]), -3.0)

    def test_bounded_range_never_overflows(self):
        """Logits up to |700| stay finite."""
        self.assertTrue(math.isfinite(stable_log_sum_exp([700.0, -700.0, 699.0])))

    def test_shift_equivariance(self):
        """lse(x + c) = lse(x) + c."""
        rng = make_rng(3)
        for _ in range(200):
            x = rng.normal(size=6) * 5
            c = rng.normal() * 20
            self.assertAlmostEqual(
                stable_log_sum_exp(x + c), stable_log_sum_exp(x) + c, delta=1e-12 * (1 + abs(c))
            )

    def test_rows_match_scalar_version(self):
        """The row-wise variant agrees with the scalar one."""
        rng = make_rng(5)
        m = rng.normal(size=(4, 3))
        rows = stable_log_sum_exp_rows(m)
        for i in range(4):
            self.assertAlmostEqual(rows[i], stable_log_sum_exp(m[i]), places=12)
        np.testing.assert_allclose(softmax_rows(m).sum(axis=1), np.ones(4), atol=1e-12)


class MatrixHelpersTest(SimpleTestCase):
    """Tests for matrix construction and ordered reductions."""

    def test_as_matrix_checks_shape(self):
        """A wrong column count is a contract violation."""
        with self.assertRaises(ContractViolation):
            as_matrix(np.zeros((2, 3)), cols=2)

    def test_as_matrix_copies(self):
        """as_matrix returns fresh storage."""
        source = np.zeros((2, 2))
        self.assertFalse(np.shares_memory(source, as_matrix(source)))

    def test_ordered_mean(self):
        """Left-to-right mean of a simple sequence."""
        self.assertEqual(ordered_mean([1.0, 2.0, 3.0]), 2.0)

    def test_eps_constant(self):
        """The library-wide eps is 1e-12."""
        self.assertEqual(EPS, 1e-12)


class RngTest(SimpleTestCase):
    """Tests for seeded generators."""

    def test_same_seed_same_bytes(self):
        """Identical seeds give byte-identical draws."""
        a = make_rng(1234).normal(size=100).tobytes()
        b = make_rng(1234).normal(size=100).tobytes()
        self.assertEqual(a, b)

    def test_different_seeds_differ(self):
        """Different seeds give different draws."""
        self.assertFalse(np.array_equal(make_rng(1).normal(size=10), make_rng(2).normal(size=10)))

    def test_spawned_streams_reproducible(self):
        """Spawned child streams are reproducible and independent."""
        first = [g.integers(0, 1 << 30) for g in spawn_rngs(9, 3)]
        second = [g.integers(0, 1 << 30) for g in spawn_rngs(9, 3)]
        self.assertEqual(first, second)
        self.assertEqual(len(set(first)), 3)


class FiniteDifferenceTest(SimpleTestCase):
    """Tests for the finite-difference oracle."""

    def test_quadratic(self):
        """Gradient of p.p at (1,2) is (2,4)."""
        grad = finite_difference_gradient(lambda p: float(p @ p), np.array([1.0, 2.0]), 1e-5)
        np.testing.assert_allclose(grad, [2.0, 4.0], atol=1e-8)

    def test_linear(self):
        """Gradient of sum(p) is all ones."""
        grad = finite_difference_gradient(lambda p: float(np.sum(p)), make_rng(0).normal(size=7))
        np.testing.assert_allclose(grad, np.ones(7), atol=1e-9)

    def test_non_finite_point_reports_coordinate(self):
        """A non-finite perturbed point names the offending coordinate."""

        def f(p):
            return float("inf") if p[1] > 0.5 else float(np.sum(p))

        with self.assertRaises(GradientCheckError) as ctx:
            finite_difference_gradient(f, np.array([0.0, 0.5]), 1e-3)
        self.assertEqual(ctx.exception.coordinate, 1)

    def test_non_positive_step_rejected(self):
        """h must be positive."""
        with self.assertRaises(ContractViolation):
            finite_difference_gradient(np.sum, np.array([1.0]), 0.0)

    def test_relative_error_and_gradient_error(self):
        """Relative error is zero for equal vectors and small for a correct gradient."""
        self.assertEqual(relative_error([1.0, 2.0], [1.0, 2.0]), 0.0)
        p = np.array([0.3, -1.2, 2.0])
        self.assertLess(gradient_error(lambda q: float(np.sum(np.sin(q))), p, np.cos(p)), 1e-8)
