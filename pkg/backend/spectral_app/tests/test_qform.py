import math

import numpy as np
from django.test import SimpleTestCase

from spectral.measure import bundled_measures, cantor_measure, dirac_comb, fbm_density, lebesgue, point_mass
from spectral.qform import (closability_witness, form_axioms, frechet_bound, l_sigma, q_sigma,
                            translation_invariance_check, witness_function, witness_norm)
from spectral.testfn import ZERO_FUNCTION, GaussianPacket, HermiteExpansion


def random_packet(rng):
    amplitude = complex(rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5))
    return GaussianPacket(center=rng.uniform(-1, 1), width=rng.uniform(0.6, 1.5), frequency=rng.uniform(-1, 1),
                          amplitude=amplitude)


class FormValueTests(SimpleTestCase):
    def test_parseval_against_lebesgue(self):
        self.assertAlmostEqual(q_sigma(GaussianPacket(), lebesgue()).value, 2 * math.pi * math.sqrt(math.pi),
                               delta=1e-8)

    def test_comb_is_a_lattice_sum(self):
        n = np.arange(-40, 41)
        expected = 2 * math.pi * float(np.sum(np.exp(-n * n)))
        value = q_sigma(GaussianPacket(), dirac_comb()).value
        self.assertAlmostEqual(value, expected, delta=1e-10 * expected)

    def test_zero_function(self):
        self.assertEqual(q_sigma(ZERO_FUNCTION, fbm_density(0.7)).value, 0.0)

    def test_point_mass_reads_the_transform(self):
        packet = GaussianPacket(width=0.5, frequency=1.0)
        value = q_sigma(packet, point_mass(1.0)).value
        self.assertAlmostEqual(value, abs(complex(packet.fourier_transform(1.0))) ** 2, delta=1e-12)

    def test_sesquilinear_form_is_hermitian(self):
        phi = GaussianPacket(center=0.4, width=0.9)
        psi = HermiteExpansion(coefficients=(0.5, 1.0), shift=-0.3)
        for sigma in (lebesgue(), dirac_comb(), cantor_measure()):
            with self.subTest(sigma=sigma.to_config()["kind"]):
                forward = l_sigma(phi, psi, sigma).value
                backward = l_sigma(psi, phi, sigma).value
                self.assertAlmostEqual(forward, np.conj(backward), delta=1e-9 * max(abs(forward), 1.0))

    def test_sesquilinear_diagonal_is_the_form(self):
        psi = GaussianPacket(center=1.0)
        self.assertAlmostEqual(l_sigma(psi, psi, lebesgue()).value, q_sigma(psi, lebesgue()).value)

    def test_orthogonal_hermite_functions_pair_to_zero(self):
        value = l_sigma(HermiteExpansion((1.0,)), HermiteExpansion((0.0, 1.0)), lebesgue()).value
        self.assertAlmostEqual(abs(value), 0.0, delta=1e-9)

    def test_hermite_functions_are_orthogonal(self):
        basis = [HermiteExpansion(tuple([0.0] * k + [1.0])) for k in range(4)]
        for j in range(4):
            for k in range(j + 1, 4):
                with self.subTest(j=j, k=k):
                    self.assertAlmostEqual(abs(l_sigma(basis[j], basis[k], lebesgue()).value), 0.0, delta=1e-9)

    def test_cauchy_schwarz(self):
        rng = np.random.default_rng(17)
        measures = (lebesgue(), dirac_comb(), cantor_measure(), bundled_measures()["mixture"])
        for trial in range(50):
            phi, psi = random_packet(rng), random_packet(rng)
            sigma = measures[trial % len(measures)]
            with self.subTest(trial=trial):
                pairing = abs(l_sigma(phi, psi, sigma).value) ** 2
                self.assertLessEqual(pairing, q_sigma(phi, sigma).value * q_sigma(psi, sigma).value * (1 + 1e-9))


class ContinuityTests(SimpleTestCase):
    def test_bound_holds_for_bundled_examples(self):
        psi = GaussianPacket(center=0.5, width=0.8, frequency=0.5)
        for sigma in (lebesgue(), dirac_comb(), fbm_density(0.3)):
            with self.subTest(sigma=sigma.to_config()["kind"]):
                bound = frechet_bound(psi, sigma)
                self.assertTrue(bound.holds)
                self.assertEqual(bound.p, 1)

    def test_zero_function_bound(self):
        bound = frechet_bound(ZERO_FUNCTION, lebesgue())
        self.assertEqual(bound.bound, 0.0)
        self.assertTrue(bound.holds)


class WitnessTests(SimpleTestCase):
    def test_witness_transform(self):
        s = witness_function(4.0, center=1.0)
        u = np.linspace(-2, 4, 13)
        np.testing.assert_allclose(np.real(s.fourier_transform(u)), np.exp(-4.0 * (u - 1.0) ** 2), atol=1e-14)

    def test_lebesgue_form_vanishes(self):
        points = closability_witness(lebesgue(), [1.0, 10.0, 100.0, 1e4])
        for point in points:
            with self.subTest(k=point.k):
                self.assertAlmostEqual(point.q.value, math.sqrt(math.pi / (2 * point.k)), delta=1e-8)
                self.assertAlmostEqual(point.l2_norm_sq, witness_norm(point.k))

    def test_comb_form_stays_near_one(self):
        points = closability_witness(dirac_comb(), [1.0, 10.0, 100.0, 1e3, 1e4])
        for point in points:
            with self.subTest(k=point.k):
                self.assertGreaterEqual(point.q.value, 0.99)
                self.assertLessEqual(point.q.value, 1.28)
        norms = [point.l2_norm_sq for point in points]
        self.assertEqual(norms, sorted(norms, reverse=True))
        self.assertLess(points[-2].cauchy_gap.value, 1e-6)
        self.assertIsNone(points[-1].cauchy_gap)

    def test_non_positive_parameter(self):
        with self.assertRaises(ValueError):
            closability_witness(lebesgue(), [0.0, 1.0])


class AxiomTests(SimpleTestCase):
    def test_translation_invariance(self):
        psi = GaussianPacket(center=0.2, width=0.6, frequency=1.5)
        for sigma in (lebesgue(), dirac_comb(), cantor_measure(), fbm_density(0.7)):
            with self.subTest(sigma=sigma.to_config()["kind"]):
                self.assertLess(translation_invariance_check(psi, sigma, 1.7).relative_gap, 1e-9)

    def test_translation_invariance_for_random_shifts(self):
        rng = np.random.default_rng(23)
        measures = list(bundled_measures().values())
        for trial in range(50):
            psi, t = random_packet(rng), rng.uniform(-5, 5)
            sigma = measures[trial % len(measures)]
            with self.subTest(trial=trial):
                self.assertLessEqual(translation_invariance_check(psi, sigma, t).relative_gap, 1e-8)

    def test_parallelogram_and_homogeneity(self):
        phi = GaussianPacket(center=-0.5)
        psi = HermiteExpansion(coefficients=(0.0, 1.0, 0.5))
        axioms = form_axioms(phi, psi, dirac_comb(), factor=1.5)
        self.assertLess(axioms.parallelogram_gap, 1e-9)
        self.assertLess(axioms.homogeneity_gap, 1e-9)
        self.assertTrue(axioms.positive)
