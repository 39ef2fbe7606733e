import math

import numpy as np
from django.test import SimpleTestCase
from scipy import linalg, stats

from spectral.exceptions import (InconsistentGrid, InsufficientPairs, SeedStreamExhausted, UnreachableTolerance,
                                 Unsupported)
from spectral.expressions import Expression
from spectral.gproc import (CHOLESKY, build_grid, char_functional_check, char_functional_scaling, gram_matrix,
                            grid_covariance, pointwise_covariance, rkhs_kernel, sample_paths, stationarity_check)
from spectral.measure import DensityMeasure, bundled_measures, dirac_comb, lebesgue
from spectral.testfn import GaussianPacket, HermiteExpansion, IncrementKernel

COMB_TIMES = np.array([math.pi / 4, math.pi / 2, math.pi, 3 * math.pi / 2])


def random_packets(count, seed):
    rng = np.random.default_rng(seed)
    return [GaussianPacket(center=rng.uniform(-1, 1), width=rng.uniform(0.7, 1.5)) for _ in range(count)]


class GridTests(SimpleTestCase):
    def test_comb_bins_hold_one_atom_each(self):
        grid = build_grid(dirac_comb(), 10.5, 21)
        n = np.arange(-10, 11)
        np.testing.assert_allclose(grid.bin_variance, 1 / (1 + n ** 2), rtol=1e-14)
        np.testing.assert_allclose(grid.nodes, n, atol=1e-12)
        outside = np.arange(11, 2_000_001, dtype=float)
        expected = 2 * (float(np.sum(1 / (1 + outside ** 2))) + 1 / 2_000_000.5)
        self.assertAlmostEqual(grid.truncation_mass, expected, delta=1e-9)

    def test_lebesgue_equal_mass_bins(self):
        grid = build_grid(lebesgue(), 50.0, 200, rule="equal_mass")
        np.testing.assert_allclose(grid.bin_variance, 2 * math.atan(50.0) / 200, rtol=1e-6)
        self.assertTrue(np.all(np.diff(grid.bin_edges) > 0))

    def test_invalid_grids(self):
        with self.assertRaises(ValueError):
            build_grid(lebesgue(), 10.0, 1)
        with self.assertRaises(ValueError):
            build_grid(lebesgue(), -1.0, 10)
        with self.assertRaises(ValueError):
            build_grid(lebesgue(), 10.0, 10, rule="chebyshev")

    def test_infinite_moment(self):
        with self.assertRaises(UnreachableTolerance):
            build_grid(lebesgue(), 10.0, 10, p=0)

    def test_grid_covariance_approaches_the_exact_value(self):
        grid = build_grid(dirac_comb(), 200.5, 401)
        for t in COMB_TIMES:
            with self.subTest(t=t):
                self.assertAlmostEqual(grid_covariance(grid, t, t), 2 * math.pi * t, delta=0.01 * 2 * math.pi * t)

    def test_refinement_converges(self):
        exact = 2 * math.pi
        gaps, grid = [], None
        for u_max in (25.0, 50.0, 100.0, 200.0):
            grid = build_grid(lebesgue(), u_max, int(20 * u_max) + 1)
            gaps.append(abs(grid_covariance(grid, 1.0, 1.0) - exact))
        self.assertEqual(gaps, sorted(gaps, reverse=True))
        bound = 4 * (1 + grid.u_max ** 2) / grid.u_max ** 2 * grid.truncation_mass
        self.assertLessEqual(gaps[-1], bound)

    def test_symmetry_flag_follows_the_measure(self):
        self.assertFalse(build_grid(lebesgue(), 10.0, 20, rule="equal_mass").symmetrized)
        self.assertFalse(build_grid(dirac_comb(), 10.5, 21).symmetrized)
        self.assertTrue(build_grid(lebesgue((0.0, 5.0)), 10.0, 20, rule="equal_mass").symmetrized)
        self.assertTrue(build_grid(lebesgue((0.0, 5.0)), 10.0, 20).symmetrized)


class CovarianceTests(SimpleTestCase):
    def test_comb_variance_closed_form(self):
        value = pointwise_covariance(dirac_comb(), math.pi, math.pi)
        self.assertAlmostEqual(value.value, 2 * math.pi ** 2, delta=1e-8)

    def test_lebesgue_variance(self):
        self.assertAlmostEqual(pointwise_covariance(lebesgue(), 1.5, 1.5).value, 3 * math.pi, delta=1e-7)

    def test_increment_gram_is_brownian_on_the_comb(self):
        times = [0.5, 1.0, 1.5, 2.0]
        gram = gram_matrix(dirac_comb(), [IncrementKernel(t) for t in times])
        expected = 2 * math.pi * np.minimum.outer(times, times)
        np.testing.assert_allclose(gram, expected, atol=1e-10)

    def test_repeated_input_makes_the_gram_singular(self):
        kernels = [IncrementKernel(0.5), IncrementKernel(1.0), IncrementKernel(1.0)]
        eigenvalues = linalg.eigvalsh(gram_matrix(dirac_comb(), kernels))
        self.assertAlmostEqual(eigenvalues[0], 0.0, delta=1e-9)

    def test_order_two_measure_is_unsupported(self):
        with self.assertRaises(Unsupported):
            pointwise_covariance(DensityMeasure(Expression("u^2")), 1.0, 1.0)


class PositiveDefiniteTests(SimpleTestCase):
    def test_gram_and_kernel_matrices(self):
        packets = random_packets(10, seed=3)
        for name, sigma in bundled_measures().items():
            with self.subTest(name=name):
                gram = gram_matrix(sigma, packets)
                self.assertGreaterEqual(linalg.eigvalsh(gram)[0], -1e-8 * max(1.0, float(np.abs(gram).max())))
                kernel = np.array([[rkhs_kernel(sigma, a, b) for b in packets] for a in packets])
                np.testing.assert_allclose(np.diag(kernel), 1.0)
                self.assertGreaterEqual(linalg.eigvalsh(kernel)[0], -1e-8)

    def test_orthogonal_inputs_give_a_diagonal_gram(self):
        basis = [HermiteExpansion((1.0,)), HermiteExpansion((0.0, 1.0)), HermiteExpansion((0.0, 0.0, 1.0))]
        gram = gram_matrix(lebesgue(), basis)
        np.testing.assert_allclose(gram - np.diag(np.diag(gram)), 0.0, atol=1e-9)
        self.assertTrue(np.all(np.diag(gram).real > 0))

    def test_kernel_identity(self):
        psi = GaussianPacket(width=0.8)
        self.assertEqual(rkhs_kernel(lebesgue(), psi, psi), 1.0)
        self.assertAlmostEqual(rkhs_kernel(dirac_comb(), psi, psi.translate(2 * math.pi)), 1.0, delta=1e-12)

    def test_kernel_needs_real_functions(self):
        with self.assertRaises(Unsupported):
            rkhs_kernel(lebesgue(), GaussianPacket(frequency=1.0), GaussianPacket())


class SamplingTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.comb = dirac_comb()
        cls.grid = build_grid(cls.comb, 200.5, 401)

    def test_synthesis_variance_is_2_pi_t(self):
        paths = 100000
        ensemble = sample_paths(self.comb, self.grid, COMB_TIMES, paths, seed=11)
        self.assertEqual(ensemble.values.shape, (paths, len(COMB_TIMES)))
        empirical = np.mean(ensemble.values ** 2, axis=0)
        for index, t in enumerate(COMB_TIMES):
            with self.subTest(t=t):
                target = 2 * math.pi * t
                self.assertLess(abs(empirical[index] - target), 4 * math.sqrt(2 / paths) * target)

    def test_worker_count_does_not_change_paths(self):
        single = sample_paths(self.comb, self.grid, COMB_TIMES, 2500, seed=5, workers=1)
        threaded = sample_paths(self.comb, self.grid, COMB_TIMES, 2500, seed=5, workers=3)
        np.testing.assert_array_equal(single.values, threaded.values)

    def test_prefix_of_a_larger_ensemble(self):
        small = sample_paths(self.comb, self.grid, COMB_TIMES, 100, seed=5)
        large = sample_paths(self.comb, self.grid, COMB_TIMES, 1500, seed=5)
        np.testing.assert_allclose(small.values, large.values[:100], rtol=1e-12, atol=1e-12)

    def test_origin_is_pinned(self):
        ensemble = sample_paths(self.comb, self.grid, [0.0, 1.0], 50, seed=2)
        np.testing.assert_array_equal(ensemble.values[:, 0], np.zeros(50))

    def test_cholesky_variance(self):
        paths = 20000
        ensemble = sample_paths(self.comb, None, COMB_TIMES, paths, seed=8, method=CHOLESKY)
        empirical = np.mean(ensemble.values ** 2, axis=0)
        np.testing.assert_allclose(empirical, 2 * math.pi * COMB_TIMES, rtol=4 * math.sqrt(2 / paths))

    def test_grid_of_another_measure(self):
        with self.assertRaises(InconsistentGrid):
            sample_paths(lebesgue(), self.grid, COMB_TIMES, 10, seed=1)

    def test_synthesis_without_a_grid(self):
        with self.assertRaises(InconsistentGrid):
            sample_paths(self.comb, None, COMB_TIMES, 10, seed=1)

    def test_seed_outside_the_stream_space(self):
        with self.assertRaises(SeedStreamExhausted):
            sample_paths(self.comb, self.grid, COMB_TIMES, 10, seed=-1)
        with self.assertRaises(SeedStreamExhausted):
            sample_paths(self.comb, self.grid, COMB_TIMES, 10, seed=2 ** 64)


class StationarityTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        comb = dirac_comb()
        times = np.arange(9) * math.pi / 4
        cls.ensemble = sample_paths(comb, build_grid(comb, 200.5, 401), times, 20000, seed=21)

    def test_increments_at_a_fixed_lag(self):
        report = stationarity_check(self.ensemble, math.pi / 2)
        self.assertEqual(len(report.pairs), 7)
        self.assertTrue(report.consistent)
        for variance in report.variances:
            self.assertAlmostEqual(variance, math.pi ** 2, delta=0.1 * math.pi ** 2)

    def test_zero_lag(self):
        report = stationarity_check(self.ensemble, 0.0)
        self.assertEqual(report.spread, 0.0)
        self.assertTrue(report.consistent)

    def test_single_pair(self):
        with self.assertRaises(InsufficientPairs):
            stationarity_check(self.ensemble, 2 * math.pi)


class CharacteristicFunctionalTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.sigma = lebesgue()
        cls.psi = GaussianPacket(amplitude=0.3)
        cls.grid = build_grid(cls.sigma, 6.0, 121)

    def test_z_scores_are_standard_normal(self):
        scores = [char_functional_check(self.sigma, self.psi, 100000, seed, grid=self.grid).z_score
                  for seed in range(100)]
        self.assertGreater(stats.kstest(scores, "norm").pvalue, 0.01)

    def test_target_is_the_gaussian_form(self):
        check = char_functional_check(self.sigma, self.psi, 1000, 0, grid=self.grid)
        q = 0.09 * 2 * math.pi * math.sqrt(math.pi)
        self.assertAlmostEqual(check.q_value, q, delta=1e-8)
        self.assertAlmostEqual(check.target, math.exp(-q / 2), delta=1e-9)
        self.assertAlmostEqual(check.grid_variance, q, delta=2e-3 * q)

    def test_estimate_follows_the_field_on_the_grid(self):
        truncated = build_grid(self.sigma, 0.5, 11)
        samples = 10000
        check = char_functional_check(self.sigma, self.psi, samples, 3, grid=truncated)
        self.assertLess(check.grid_variance, 0.6 * check.q_value)
        field_target = math.exp(-check.grid_variance / 2)
        spread = math.sqrt(((1 + math.exp(-2 * check.grid_variance)) / 2 - field_target ** 2) / samples)
        self.assertLess(abs(check.estimate.real - field_target), 4 * spread)
        self.assertGreater(abs(check.z_score), 4.0)

    def test_same_seed_same_estimate(self):
        first = char_functional_check(self.sigma, self.psi, 3000, 8, grid=self.grid)
        second = char_functional_check(self.sigma, self.psi, 3000, 8, grid=self.grid)
        self.assertEqual(first.estimate, second.estimate)

    def test_zero_function(self):
        check = char_functional_check(self.sigma, HermiteExpansion(coefficients=(0.0,)), 10, 0)
        self.assertEqual(check.estimate, 1 + 0j)
        self.assertEqual(check.z_score, 0.0)

    def test_complex_function_is_rejected(self):
        with self.assertRaises(Unsupported):
            char_functional_check(self.sigma, GaussianPacket(frequency=1.0), 10, 0)

    def test_scaling_slope(self):
        grid = build_grid(self.sigma, 6.0, 241)
        fit = char_functional_scaling(self.sigma, self.psi, (0.2, 0.3, 0.4, 0.5), 1000000, 4, grid=grid)
        self.assertLess(fit.relative_error, 0.01)
