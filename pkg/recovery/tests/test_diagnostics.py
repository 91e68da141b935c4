import json
import math

import numpy as np
from django.test import SimpleTestCase, tag
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from recovery.exceptions import ConfigurationError, DegenerateInputError, RankDeficiencyError
from recovery.utils.dense_core import random_orthogonal
from recovery.utils.diagnostics import (
    RIP_PRECONDITION,
    SpectralSummary,
    check_balanced_closeness,
    check_lifted_distance,
    check_regularizer_curvature,
    contraction_rho,
    distance,
    dump_report,
    inequality_suite,
    initialization_report,
    inner_product_deviation,
    isometry_ratio,
    noise_assumption_check,
    prescribed_inner_iterations,
    prescribed_step_size,
    probe_curvature_smoothness,
    probe_suite,
    random_factor_pair,
    random_low_rank,
    report,
    rip_estimate,
)
from recovery.utils.objective import FactorPair, grad_component
from recovery.utils.seeds import derive_rng
from recovery.utils.sensing import EnsembleSpec, NoiseSpec, generate_dataset


def dataset(seed=0, d1=8, d2=6, r=2, N=400, sigma=0.0):
    rng = np.random.default_rng(seed)
    xstar = rng.standard_normal((d1, r)) @ rng.standard_normal((d2, r)).T
    noise = NoiseSpec.gaussian(sigma) if sigma else NoiseSpec.none()
    return generate_dataset(EnsembleSpec(d1, d2), xstar, N, N, noise, seed), xstar


class DistanceTests(SimpleTestCase):
    def test_zero_on_the_rotation_orbit(self):
        rng = np.random.default_rng(0)
        zstar = random_factor_pair(rng, 6, 5, 3)
        self.assertLess(distance(zstar.rotated(random_orthogonal(rng, 3)), zstar).dist, 1e-10)

    def test_rank_one_is_a_sign_choice(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            z, zstar = random_factor_pair(rng, 4, 3, 1), random_factor_pair(rng, 4, 3, 1)
            expected = min(np.linalg.norm(z.stacked - zstar.stacked), np.linalg.norm(z.stacked + zstar.stacked))
            self.assertAlmostEqual(distance(z, zstar).dist, expected, places=10)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1), r=st.integers(min_value=1, max_value=3))
    def test_symmetric(self, seed, r):
        rng = np.random.default_rng(seed)
        z1, z2 = random_factor_pair(rng, 5, 4, r), random_factor_pair(rng, 5, 4, r)
        self.assertAlmostEqual(distance(z1, z2).dist, distance(z2, z1).dist, places=8)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            a, b, c = (random_factor_pair(rng, 5, 4, 2) for _ in range(3))
            self.assertLessEqual(distance(a, c).dist, distance(a, b).dist + distance(b, c).dist + 1e-8)

    def test_alignment_residual(self):
        rng = np.random.default_rng(2)
        z, zstar = random_factor_pair(rng, 5, 4, 2), random_factor_pair(rng, 5, 4, 2)
        result = distance(z, zstar)
        assert_allclose(result.h, z.stacked - zstar.stacked @ result.rotation)
        assert_allclose(result.rotation.T @ result.rotation, np.eye(2), atol=1e-12)


class RipTests(SimpleTestCase):
    def test_single_trial(self):
        ds, _ = dataset()
        estimate = rip_estimate(ds, 2, 1, seed=5)
        ratio = isometry_ratio(ds, random_low_rank(derive_rng(5, "rip", 0), 8, 6, 2))
        self.assertAlmostEqual(estimate.delta_hat, abs(ratio - 1.0))
        self.assertAlmostEqual(estimate.max_ratio_dev, ratio - 1.0)

    def test_estimate_shrinks_with_more_measurements(self):
        few, _ = dataset(N=100)
        many, _ = dataset(N=5000)
        self.assertLess(rip_estimate(many, 2, 50, 0).delta_hat, rip_estimate(few, 2, 50, 0).delta_hat)

    def test_rejects_bad_orders(self):
        ds, _ = dataset()
        with self.assertRaises(ConfigurationError):
            rip_estimate(ds, 7, 10, 0)
        with self.assertRaises(ConfigurationError):
            rip_estimate(ds, 2, 0, 0)

    def test_inner_product_deviation(self):
        ds, _ = dataset(N=600)
        rng = np.random.default_rng(3)
        x = random_low_rank(rng, 8, 6, 2)
        self.assertAlmostEqual(inner_product_deviation(ds, x, x), abs(isometry_ratio(ds, x) - 1.0))
        y = random_low_rank(rng, 8, 6, 2)
        self.assertGreaterEqual(inner_product_deviation(ds, x, y, delta_hat=1.0), 0.0)
        with self.assertRaises(DegenerateInputError):
            inner_product_deviation(ds, x, np.zeros((8, 6)))


class NoiseConditionTests(SimpleTestCase):
    def test_boundary(self):
        self.assertTrue(noise_assumption_check(np.full(4, 2.0), 1.0))
        self.assertFalse(noise_assumption_check(np.array([2.0, 2.0, 2.0, 2.1]), 1.0))

    def test_explicit_batch_size(self):
        self.assertTrue(noise_assumption_check(np.array([3.0]), 1.0, b=4))


class ContractionTests(SimpleTestCase):
    unit = SpectralSummary(sigma1=1.0, sigma_r=1.0, kappa=1.0, r=1)

    def test_prescribed_regime_golden_values(self):
        eta = prescribed_step_size(self.unit, 0.0)
        self.assertAlmostEqual(eta, 1.0 / 576.0)
        m = prescribed_inner_iterations(self.unit, eta)
        self.assertEqual(m, 51840)
        result = contraction_rho(eta, m, self.unit, 0.0)
        self.assertAlmostEqual(result.rho_simplified, 5.0 / 6.0, places=12)
        self.assertAlmostEqual(result.rho, 61.0 / 6.0, places=10)
        self.assertAlmostEqual(result.rho_limit, 10.0, places=10)
        self.assertTrue(result.prescribed_regime)
        self.assertFalse(result.converges)

    def test_closed_form_on_a_grid(self):
        for kappa in (1.0, 2.0, 5.0, 10.0):
            summary = SpectralSummary(sigma1=3.0, sigma_r=3.0 / kappa, kappa=kappa, r=2)
            for eta, m, delta in ((1e-4, 10, 0.0), (1e-3, 100, 0.1), (1e-5, 10**6, 0.05), (2e-4, 500, 0.2), (1e-6, 10**7, 0.0)):
                result = contraction_rho(eta, m, summary, delta)
                scaled = eta * 3.0
                expected = 15 * kappa * (1 / (scaled * m) + 384 * scaled * (1 + delta) ** 2)
                self.assertAlmostEqual(result.rho / expected, 1.0, places=12)
                self.assertEqual(result.converges, expected < 1)

    def test_small_steps_contract(self):
        result = contraction_rho(1e-6, 10**8, self.unit, 0.0)
        self.assertTrue(result.converges)
        self.assertFalse(result.prescribed_regime)

    def test_rejects_bad_inputs(self):
        with self.assertRaises(ConfigurationError):
            contraction_rho(0.0, 10, self.unit, 0.0)
        with self.assertRaises(ConfigurationError):
            contraction_rho(1e-3, 10, self.unit, -0.1)
        with self.assertRaises(ConfigurationError):
            prescribed_inner_iterations(self.unit, 1e-3, target=0.5)
        with self.assertRaises(ConfigurationError):
            SpectralSummary(sigma1=1.0, sigma_r=2.0, kappa=0.5, r=1)

    def test_rank_deficient_summary(self):
        with self.assertRaises(RankDeficiencyError):
            SpectralSummary.from_matrix(np.diag([1.0, 0.0, 0.0]), 2)


class InequalityTests(SimpleTestCase):
    def test_regularizer_curvature_on_random_points(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            zstar = FactorPair.balanced(random_factor_pair(rng, 6, 5, 2).product, 2)
            self.assertTrue(check_regularizer_curvature(random_factor_pair(rng, 6, 5, 2), zstar).passed)

    def test_lifted_distance_bounds_near_the_reference(self):
        rng = np.random.default_rng(5)
        z2 = random_factor_pair(rng, 6, 5, 2)
        z1 = FactorPair.from_stacked(z2.stacked + 1e-3 * rng.standard_normal(z2.stacked.shape), 6)
        check = check_lifted_distance(z1, z2)
        self.assertTrue(check.passed)
        self.assertIn("upper", check.margins)

    def test_balanced_closeness_skips_large_perturbations(self):
        rng = np.random.default_rng(6)
        m = random_factor_pair(rng, 6, 5, 2).product
        check = check_balanced_closeness(m, m + 100.0 * random_factor_pair(rng, 6, 5, 2).product, 2)
        self.assertFalse(check.applicable)
        self.assertTrue(check.passed)

    def test_suite_has_no_violations(self):
        suites = inequality_suite(500, seed=11)
        self.assertEqual(set(suites), {"regularizer_curvature", "balanced_closeness", "lifted_distance_lower", "lifted_distance_upper"})
        for name, summary in suites.items():
            self.assertEqual(summary["instances"], 500)
            self.assertEqual(summary["violations"], 0, msg=name)
        self.assertEqual(suites["regularizer_curvature"]["applicable"], 500)


class InitializationReportTests(SimpleTestCase):
    def test_exact_start(self):
        _, xstar = dataset()
        result = initialization_report(FactorPair.balanced(xstar, 2), xstar)
        self.assertLess(result.x_error, 1e-10)
        self.assertTrue(result.in_ball)
        self.assertIsNotNone(result.closeness_bound)


class ProbeTests(SimpleTestCase):
    def test_conditions_hold_at_the_solution(self):
        ds, xstar = dataset()
        zstar = FactorPair.balanced(xstar, 2)
        result = probe_curvature_smoothness(ds, zstar, zstar, 0.1)
        self.assertTrue(result.passed)
        self.assertEqual(len(result.smoothness_margins), 1)

    def test_smoothness_bound_survives_a_doubled_norm(self):
        ds, xstar = dataset(N=800)
        zstar = FactorPair.balanced(xstar, 2)
        sigma_r = SpectralSummary.from_matrix(xstar, 2).sigma_r
        rng = np.random.default_rng(13)
        for _ in range(10):
            direction = rng.standard_normal(zstar.stacked.shape)
            z = FactorPair.from_stacked(zstar.stacked + 0.2 * np.sqrt(sigma_r) * direction / np.linalg.norm(direction), 8)
            x_gap = np.linalg.norm(z.product - xstar) ** 2
            inflated = (8.0 * x_gap + np.linalg.norm(z.imbalance) ** 2) * (2.0 * np.linalg.norm(z.stacked, 2)) ** 2
            self.assertLessEqual(grad_component(ds, z, 0).norm() ** 2, inflated)

    def test_noisy_dataset_is_rejected(self):
        ds, xstar = dataset(sigma=0.1)
        zstar = FactorPair.balanced(xstar, 2)
        with self.assertRaises(ConfigurationError):
            probe_curvature_smoothness(ds, zstar, zstar, 0.1)

    def test_small_suite_shape(self):
        summary = probe_suite(3, seed=1, d1=8, d2=6, r=2, rip_trials=10)
        self.assertEqual(summary["N"], 800)
        self.assertEqual(summary["rip_order"], 6)
        self.assertEqual(summary["precondition_met"], summary["delta_hat"] < RIP_PRECONDITION)
        self.assertEqual(summary["probes"], 3)
        self.assertLessEqual(summary["curvature_violations"], 3)

    @tag("slow")
    def test_default_suite_has_no_violations(self):
        summary = probe_suite(200, seed=0)
        self.assertEqual(summary["curvature_violations"], 0)
        self.assertEqual(summary["smoothness_violations"], 0)


class ReportTests(SimpleTestCase):
    def test_report_layout(self):
        payload = json.loads(dump_report(report("rho", {"m": 3}, {"rho": 0.5}, True, 7)))
        self.assertEqual(payload, {"check": "rho", "inputs": {"m": 3}, "margins": {"rho": 0.5}, "pass": True, "seed": 7})

    def test_nan_margins_are_serialised(self):
        text = dump_report(report("rip", {}, {"delta_hat": math.nan}, False, None))
        self.assertIn("NaN", text)
