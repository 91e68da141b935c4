import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from recovery.exceptions import ConvergenceError, DimensionMismatchError, NumericalError
from recovery.utils.dense_core import (
    as_matrix,
    balanced_factors,
    best_rank_approximation,
    frobenius_inner,
    matmul,
    orthonormality_error,
    procrustes_rotation,
    random_orthogonal,
    spectral_norm,
    subspace_distance,
    truncated_svd,
)


class AsMatrixTests(SimpleTestCase):
    def test_rejects_vectors(self):
        with self.assertRaises(DimensionMismatchError):
            as_matrix(np.ones(3))

    def test_rejects_non_finite_entries(self):
        with self.assertRaises(NumericalError):
            as_matrix([[1.0, np.nan]])

    def test_matmul_checks_inner_dimension(self):
        with self.assertRaises(DimensionMismatchError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_inner_product_checks_shapes(self):
        with self.assertRaises(DimensionMismatchError):
            frobenius_inner(np.ones((2, 3)), np.ones((3, 2)))

    def test_matmul_is_associative(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a, b, c = rng.standard_normal((5, 4)), rng.standard_normal((4, 6)), rng.standard_normal((6, 3))
            left = matmul(matmul(a, b), c)
            right = matmul(a, matmul(b, c))
            self.assertLessEqual(np.linalg.norm(left - right), 1e-10 * np.linalg.norm(left))


class TruncatedSvdTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(5)

    def test_leading_singular_values_match_lapack(self):
        a = self.rng.standard_normal((40, 25))
        svd = truncated_svd(a, 3)
        expected = np.linalg.svd(a, compute_uv=False)[:3]
        assert_allclose(svd.s, expected, rtol=1e-8)
        self.assertLess(orthonormality_error(svd.u), 1e-10)
        self.assertLess(orthonormality_error(svd.v), 1e-10)

    def test_rank_r_matrix_is_reproduced(self):
        x = self.rng.standard_normal((12, 2)) @ self.rng.standard_normal((9, 2)).T
        assert_allclose(truncated_svd(x, 2).reconstruct(), x, atol=1e-10)

    def test_leading_subspace_of_a_known_factorization(self):
        u0 = np.linalg.qr(self.rng.standard_normal((8, 2)))[0]
        v0 = np.linalg.qr(self.rng.standard_normal((6, 2)))[0]
        svd = truncated_svd((u0 * [5.0, 2.0]) @ v0.T, 1)
        assert_allclose(svd.s, [5.0], rtol=1e-8)
        self.assertLess(subspace_distance(svd.u, u0[:, :1]), 1e-8)
        self.assertLess(subspace_distance(svd.v, v0[:, :1]), 1e-8)

    def test_reconstruction_error_shrinks_with_k(self):
        a = self.rng.standard_normal((12, 9))
        errors = [np.linalg.norm(a - truncated_svd(a, k).reconstruct()) for k in range(1, 10)]
        for smaller, larger in zip(errors, errors[1:]):
            self.assertLessEqual(larger, smaller + 1e-10)
        self.assertLess(errors[-1], 1e-8 * np.linalg.norm(a))

    def test_first_nonzero_entry_of_left_vectors_is_positive(self):
        svd = truncated_svd(self.rng.standard_normal((8, 6)), 3)
        for j in range(3):
            column = svd.u[:, j]
            self.assertGreater(column[np.flatnonzero(np.abs(column) > 1e-14)[0]], 0)

    def test_rank_outside_range_is_rejected(self):
        with self.assertRaises(DimensionMismatchError):
            truncated_svd(np.ones((3, 4)), 4)

    def test_iteration_budget_is_enforced(self):
        # Nearly equal singular values around the cut keep the subspace moving.
        a = np.diag(np.linspace(1.0, 0.999, 30))
        with self.assertRaises(ConvergenceError):
            truncated_svd(a, 2, tol=1e-15, max_iter=2)

    def test_best_rank_approximation_agrees_with_dense_svd(self):
        a = self.rng.standard_normal((10, 7))
        u, s, vt = np.linalg.svd(a)
        assert_allclose(best_rank_approximation(a, 2), (u[:, :2] * s[:2]) @ vt[:2], atol=1e-8)


class SpectralNormTests(SimpleTestCase):
    def test_matches_two_norm(self):
        a = np.random.default_rng(1).standard_normal((15, 11))
        self.assertAlmostEqual(spectral_norm(a), np.linalg.norm(a, 2), delta=1e-8 * np.linalg.norm(a, 2))

    def test_zero_matrix(self):
        self.assertEqual(spectral_norm(np.zeros((4, 3))), 0.0)

    def test_bounded_by_frobenius_norm(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rng.standard_normal((7, 5))
            self.assertLessEqual(spectral_norm(a), np.linalg.norm(a) * (1 + 1e-12))

    def test_rank_one_equals_frobenius_norm(self):
        rng = np.random.default_rng(3)
        a = np.outer(rng.standard_normal(7), rng.standard_normal(5))
        self.assertAlmostEqual(spectral_norm(a), np.linalg.norm(a), delta=1e-8 * np.linalg.norm(a))


class FactorTests(SimpleTestCase):
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_procrustes_recovers_rotation(self, seed):
        rng = np.random.default_rng(seed)
        zstar = rng.standard_normal((9, 3))
        rotation = random_orthogonal(rng, 3)
        assert_allclose(procrustes_rotation(zstar @ rotation, zstar), rotation, atol=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_balanced_factors_are_balanced(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((7, 3)) @ rng.standard_normal((5, 3)).T
        u, v = balanced_factors(x, 3)
        assert_allclose(u.T @ u, v.T @ v, atol=1e-8)
        assert_allclose(u @ v.T, x, atol=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_inner_product_is_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.standard_normal((2, 4, 3))
        self.assertAlmostEqual(frobenius_inner(a, b), frobenius_inner(b, a), places=12)

    def test_procrustes_beats_random_rotations(self):
        rng = np.random.default_rng(8)
        z, zstar = rng.standard_normal((2, 10, 3))
        best = np.linalg.norm(z - zstar @ procrustes_rotation(z, zstar))
        for _ in range(100):
            self.assertLessEqual(best, np.linalg.norm(z - zstar @ random_orthogonal(rng, 3)) + 1e-12)
