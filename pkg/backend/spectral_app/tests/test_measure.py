import math

import numpy as np
from django.test import SimpleTestCase

from spectral.exceptions import ConfigError, NotAMeasure, Unsupported
from spectral.expressions import Expression
from spectral.measure import (AtomicMeasure, DensityMeasure, Integrand, LatticeMeasure, MixtureMeasure, SelfSimilarMeasure,
                              ShiftedMeasure, bundled_measures, cantor_measure, certify_class_C, certify_class_Cb,
                              convolve, dirac_comb, fbm_constant, fbm_density, lebesgue, lebesgue_decompose,
                              moment_integral, point_mass)


def ones(u):
    return np.ones_like(np.asarray(u, dtype=float))


class MomentTests(SimpleTestCase):
    def test_lebesgue_first_moment_is_pi(self):
        self.assertAlmostEqual(moment_integral(lebesgue(), 1), math.pi, delta=1e-9)

    def test_lebesgue_mass_diverges(self):
        self.assertTrue(math.isinf(moment_integral(lebesgue(), 0)))

    def test_comb_first_moment_closed_form(self):
        expected = math.pi / math.tanh(math.pi)
        self.assertAlmostEqual(moment_integral(dirac_comb(), 1), expected, delta=1e-12 * expected)

    def test_quarter_shifted_comb_moment(self):
        # sum of 1/(1+(n+a)^2) is pi sinh(2 pi) / (cosh(2 pi) - cos(2 pi a))
        shifted = ShiftedMeasure(dirac_comb(), 0.25)
        expected = math.pi * math.tanh(2 * math.pi)
        self.assertAlmostEqual(moment_integral(shifted, 1), expected, delta=1e-12 * expected)

    def test_weighted_lattice_moment_by_series(self):
        lattice = LatticeMeasure(spacing=1.0, weight=Expression("1/(1+n^2)", variable="n"), weight_growth=-2.0)
        n = np.arange(-2000, 2001, dtype=float)
        direct = float(np.sum(1 / (1 + n * n) ** 2))
        self.assertAlmostEqual(moment_integral(lattice, 1), direct, delta=1e-10)

    def test_cantor_measure_is_a_probability(self):
        cantor = cantor_measure()
        self.assertAlmostEqual(cantor.integrate(ones).real, 1.0, delta=1e-12)
        self.assertAlmostEqual(cantor.integrate(lambda u: np.asarray(u)).real, 0.5, delta=1e-10)

    def test_atomic_integral_is_a_weighted_sum(self):
        atoms = AtomicMeasure.from_table([(0.0, 1.0), (2.0, 0.5), (0.0, 0.5)])
        self.assertEqual(atoms.as_table(), {0.0: 1.5, 2.0: 0.5})
        self.assertAlmostEqual(atoms.integrate(lambda u: np.asarray(u) ** 2).real, 2.0)

    def test_integration_is_half_open(self):
        atoms = point_mass(1.0)
        self.assertEqual(atoms.integrate(ones, 0.0, 1.0).real, 0.0)
        self.assertEqual(atoms.integrate(ones, 1.0, 2.0).real, 1.0)


class BinnedTests(SimpleTestCase):
    def test_comb_bins_centered_on_integers(self):
        edges = np.arange(-10.5, 11.0, 1.0)
        values, _ = dirac_comb().binned(Integrand(lambda u: 1 / (1 + np.asarray(u) ** 2)), edges)
        n = np.arange(-10, 11)
        np.testing.assert_allclose(values, 1 / (1 + n ** 2), rtol=1e-14)

    def test_density_bins_add_up(self):
        density = lebesgue((-3.0, 3.0))
        values, _ = density.binned(ones, np.linspace(-3, 3, 7))
        np.testing.assert_allclose(values, np.ones(6), rtol=1e-12)


class CertificateTests(SimpleTestCase):
    def test_bundled_measures_are_in_class(self):
        expected = {"lebesgue": 1, "comb": 1, "fbm_0.7": 1, "cantor": 0, "mixture": 0}
        for name, sigma in bundled_measures().items():
            with self.subTest(name=name):
                certificate = certify_class_C(sigma)
                self.assertTrue(certificate.in_class)
                self.assertEqual(certificate.p, expected[name])

    def test_polynomial_growth_raises_the_order(self):
        sigma = DensityMeasure(Expression("u^2"))
        self.assertEqual(certify_class_C(sigma).p, 2)

    def test_super_polynomial_growth_is_rejected(self):
        sigma = DensityMeasure(Expression("exp(abs(u))"), decay_exponent=math.inf)
        self.assertFalse(certify_class_C(sigma).in_class)

    def test_gaussian_growth_read_from_the_expression(self):
        self.assertFalse(certify_class_C(DensityMeasure(Expression("exp(u^2)"))).in_class)

    def test_gaussian_decay_is_order_zero(self):
        density = DensityMeasure(Expression("exp(-u^2)"))
        lattice = LatticeMeasure(spacing=1.0, weight=Expression("exp(-n^2)", variable="n"))
        for sigma in (density, lattice):
            with self.subTest(sigma=sigma.to_config()["kind"]):
                certificate = certify_class_C(sigma)
                self.assertTrue(certificate.in_class)
                self.assertEqual(certificate.p, 0)
        self.assertAlmostEqual(moment_integral(density, 0), math.sqrt(math.pi), delta=1e-9)

    def test_bounded_shift_certificate(self):
        self.assertTrue(certify_class_Cb(cantor_measure()))
        self.assertFalse(certify_class_Cb(lebesgue()))


class FbmTests(SimpleTestCase):
    def test_constant_at_one_half(self):
        self.assertAlmostEqual(fbm_constant(0.5), 1 / math.pi)

    def test_constant_is_positive(self):
        for hurst in (0.1, 0.3, 0.7, 0.9):
            self.assertGreater(fbm_constant(hurst), 0)

    def test_hurst_out_of_range(self):
        with self.assertRaises(ConfigError):
            fbm_density(1.0)

    def test_variance_follows_the_power_law(self):
        for hurst in (0.3, 0.7):
            with self.subTest(hurst=hurst):
                sigma = fbm_density(hurst)
                times = 2.0 ** np.arange(-3, 4)
                variances = [sigma.increment_pairing(t, t, rtol=1e-9).real for t in times]
                slope = np.polyfit(np.log(times), np.log(variances), 1)[0]
                self.assertAlmostEqual(slope, 2 * hurst, delta=0.01)
                self.assertAlmostEqual(variances[3], 2.0, delta=2e-6)


class DecompositionTests(SimpleTestCase):
    def test_comb_and_lebesgue_are_singular(self):
        result = lebesgue_decompose(dirac_comb(), lebesgue())
        self.assertTrue(result.ac_part.is_zero())
        self.assertFalse(result.singular_part.is_zero())

    def test_overlapping_densities(self):
        result = lebesgue_decompose(lebesgue((0.0, 1.0)), lebesgue((0.5, 1.5)))
        self.assertEqual(result.ac_part.support(), (0.5, 1.0))
        self.assertEqual(result.singular_part.support(), (0.0, 0.5))
        self.assertAlmostEqual(result.rn_derivative.at(0.75), 1.0)

    def test_atoms_shared_with_a_comb(self):
        atoms = AtomicMeasure.from_table([(1.0, 2.0), (0.5, 1.0)])
        result = lebesgue_decompose(atoms, dirac_comb())
        self.assertEqual(result.ac_part.as_table(), {1.0: 2.0})
        self.assertAlmostEqual(result.rn_derivative.at(1.0), 2.0)

    def test_cantor_against_lebesgue(self):
        result = lebesgue_decompose(cantor_measure(), lebesgue((0.0, 1.0)))
        self.assertTrue(result.ac_part.is_zero())

    def test_self_similar_with_different_maps_is_unsupported(self):
        other = SelfSimilarMeasure(ratios=(0.25, 0.25), offsets=(0.0, 0.75), probabilities=(0.5, 0.5))
        with self.assertRaises(Unsupported):
            lebesgue_decompose(cantor_measure(), other)


class ConvolutionTests(SimpleTestCase):
    def test_convolution_with_atoms_stays_in_class(self):
        atoms = AtomicMeasure.from_table([(0.0, 1.0), (1.5, 0.5)])
        for sigma in (lebesgue(), dirac_comb(), fbm_density(0.7)):
            with self.subTest(sigma=sigma.to_config()["kind"]):
                self.assertTrue(certify_class_C(convolve(sigma, atoms)).in_class)

    def test_lebesgue_with_itself_is_not_a_measure(self):
        with self.assertRaises(NotAMeasure):
            convolve(lebesgue(), lebesgue())

    def test_atomic_convolution_aggregates(self):
        first = AtomicMeasure.from_table([(0.0, 1.0), (1.0, 1.0)])
        result = convolve(first, first)
        self.assertEqual(result.as_table(), {0.0: 1.0, 1.0: 2.0, 2.0: 1.0})

    def test_box_densities_give_a_triangle(self):
        box = lebesgue((0.0, 1.0))
        triangle = convolve(box, box)
        self.assertAlmostEqual(float(triangle.value(np.array([1.0]))[0]), 1.0, delta=1e-9)
        self.assertAlmostEqual(float(triangle.value(np.array([0.5]))[0]), 0.5, delta=1e-9)
        self.assertAlmostEqual(triangle.integrate(ones, rtol=1e-8).real, 1.0, delta=1e-7)

    def test_mixture_distributes(self):
        mixture = MixtureMeasure(((1.0, point_mass(0.0)), (2.0, point_mass(1.0))))
        result = convolve(mixture, point_mass(1.0)).canonical()
        self.assertAlmostEqual(result.integrate(lambda u: np.asarray(u)).real, 1.0 + 2.0 * 2.0)


class MomentLawTests(SimpleTestCase):
    def test_moments_decrease_with_the_order(self):
        for name, sigma in bundled_measures().items():
            moments = [moment_integral(sigma, p) for p in range(4)]
            for p in range(3):
                with self.subTest(name=name, p=p):
                    self.assertLessEqual(moments[p + 1], moments[p] * (1 + 1e-12))

    def test_moments_are_linear_over_mixtures(self):
        parts = (dirac_comb(), lebesgue(), cantor_measure())
        mixture = MixtureMeasure(tuple(zip((2.0, 0.5, 3.0), parts)))
        expected = sum(c * moment_integral(m, 1) for c, m in zip((2.0, 0.5, 3.0), parts))
        self.assertAlmostEqual(moment_integral(mixture, 1), expected, delta=1e-9 * expected)

    def test_fbm_density_reads_as_plain_floats(self):
        sigma = fbm_density(0.7)
        self.assertIsInstance(fbm_constant(0.7), float)
        self.assertNotIn("np.", sigma.density.source)
        self.assertAlmostEqual(float(sigma.value(np.array([1.0]))[0]), fbm_constant(0.7), delta=1e-15)


class DecompositionConsistencyTests(SimpleTestCase):
    def setUp(self):
        self.sigma = MixtureMeasure(((1.0, DensityMeasure(Expression("exp(-u^2)"))), (0.5, point_mass(0.5))))
        self.base = lebesgue((-1.0, 1.0))
        self.result = lebesgue_decompose(self.sigma, self.base)

    def test_parts_add_up(self):
        for weight in (ones, lambda u: 1 / (1 + np.asarray(u) ** 2), lambda u: np.cos(np.asarray(u))):
            total = self.sigma.integrate(weight, rtol=1e-10).real
            parts = (self.result.ac_part.integrate(weight, rtol=1e-10).real
                     + self.result.singular_part.integrate(weight, rtol=1e-10).real)
            self.assertAlmostEqual(parts, total, delta=1e-9)

    def test_continuous_part_has_the_derivative_as_density(self):
        derivative = self.result.rn_derivative
        for weight in (ones, lambda u: np.asarray(u) ** 2):
            direct = self.result.ac_part.integrate(weight, rtol=1e-10).real
            through_base = self.base.integrate(
                lambda u, weight=weight: weight(u) * np.nan_to_num(derivative(u)), rtol=1e-10).real
            self.assertAlmostEqual(through_base, direct, delta=1e-9)
        self.assertAlmostEqual(direct, math.sqrt(math.pi) * (math.erf(1.0) / 2 - math.exp(-1.0) / math.sqrt(math.pi)),
                               delta=1e-9)


class ConvolutionSymmetryTests(SimpleTestCase):
    def test_factor_order_does_not_matter(self):
        atoms = AtomicMeasure.from_table([(0.0, 1.0), (1.5, 0.5)])
        pairs = (
            (atoms, lebesgue((0.0, 1.0))),
            (atoms, dirac_comb()),
            (atoms, AtomicMeasure.from_table([(-1.0, 2.0), (0.25, 1.0)])),
            (lebesgue((-1.0, 0.0)), lebesgue((0.0, 1.0))),
            (cantor_measure(), lebesgue((0.0, 1.0))),
        )
        weights = (lambda u: np.exp(-np.asarray(u) ** 2), lambda u: np.exp(-np.abs(u)) * np.cos(u))
        for first, second in pairs:
            for weight in weights:
                with self.subTest(first=first.to_config()["kind"], second=second.to_config()["kind"]):
                    forward = convolve(first, second).integrate(weight, rtol=1e-9).real
                    backward = convolve(second, first).integrate(weight, rtol=1e-9).real
                    self.assertAlmostEqual(forward, backward, delta=1e-9 * max(1.0, abs(forward)))
