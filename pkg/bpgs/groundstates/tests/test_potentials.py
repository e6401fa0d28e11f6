import math

import numpy as np
from django.test import SimpleTestCase
from scipy.special import erf

from bpgs.groundstates.errors import InvalidArgument
from bpgs.groundstates.potentials import (
    Kernel,
    KernelKind,
    _exponential_excess,
    _yukawa_excess,
    bilinear_form,
    dense_convolve,
    dense_k_beta,
    double_forms,
    k_beta_at_origin,
    k_beta_value,
    k_beta_values,
    kernel_value,
    potential_K_beta,
    radial_convolve,
    screened_self_energies,
)
from bpgs.groundstates.radial import RadialField, build_grid, gaussian

PI_32 = math.pi**1.5


class KernelTestCase(SimpleTestCase):
    def test_constructors(self):
        self.assertIs(Kernel.coulomb().kind, KernelKind.COULOMB)
        self.assertEqual(Kernel.yukawa(2.0).screening, 2.0)
        self.assertEqual(Kernel.exponential(0.5).mu, 0.5)

    def test_invalid(self):
        with self.assertRaises(InvalidArgument):
            Kernel(KernelKind.COULOMB, 1.0)
        for mu in (None, 0.0, -1.0, math.inf):
            with self.subTest(mu=mu), self.assertRaises(InvalidArgument):
                Kernel(KernelKind.YUKAWA, mu)

    def test_values(self):
        self.assertEqual(kernel_value(Kernel.coulomb(), 2.0), 0.5)
        self.assertAlmostEqual(kernel_value(Kernel.yukawa(1.0), 1.0), math.exp(-1.0))
        self.assertEqual(kernel_value(Kernel.exponential(1.0), 0.0), 1.0)
        with self.assertRaises(InvalidArgument):
            kernel_value(Kernel.coulomb(), 0.0)
        with self.assertRaises(InvalidArgument):
            kernel_value(Kernel.yukawa(1.0), -1.0)

    def test_k_beta(self):
        self.assertEqual(k_beta_value(0.0, 4.0), 0.25)
        self.assertAlmostEqual(k_beta_value(1.0, 1.0), 1.0 - math.exp(-1.0))
        # 𝒦_β(0⁺) = 1/β
        self.assertAlmostEqual(k_beta_value(0.5, 1e-9), 2.0, places=6)
        self.assertEqual(k_beta_at_origin(0.5), 2.0)
        with self.assertRaises(InvalidArgument):
            k_beta_at_origin(0.0)
        with self.assertRaises(InvalidArgument):
            k_beta_value(-1.0, 1.0)
        with self.assertRaises(InvalidArgument):
            k_beta_value(1.0, 0.0)

    def test_k_beta_below_coulomb(self):
        for r in (1e-3, 0.1, 1.0, 10.0):
            for beta in (0.01, 0.1, 1.0):
                self.assertLess(k_beta_value(beta, r), k_beta_value(0.0, r))


class ConvolutionTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = build_grid(10.0, 1024)
        cls.density = RadialField(cls.grid, np.exp(-(cls.grid.nodes**2)))

    def test_gaussian_coulomb_potential(self):
        grid = build_grid(10.0, 4096)
        density = RadialField(grid, np.exp(-(grid.nodes**2)))
        phi = radial_convolve(density, Kernel.coulomb()).values
        r = grid.nodes[1:-1]
        np.testing.assert_allclose(phi[1:-1], PI_32 * erf(r) / r, rtol=1e-5)
        self.assertAlmostEqual(phi[0] / (2.0 * math.pi), 1.0, delta=1e-5)

    def test_uniform_ball(self):
        grid = build_grid(4.0, 4096)
        inside = np.where(grid.nodes < 1.0, 1.0, 0.0)
        inside[1024] = 0.5
        phi = radial_convolve(RadialField(grid, inside), Kernel.coulomb()).values
        self.assertAlmostEqual(phi[0] / (2.0 * math.pi), 1.0, delta=1e-6)
        self.assertAlmostEqual(phi[2048] / (2.0 * math.pi / 3.0), 1.0, delta=1e-6)

    def test_scan_matches_dense(self):
        for kernel in (Kernel.coulomb(), Kernel.yukawa(2.0), Kernel.exponential(2.0)):
            with self.subTest(kernel=kernel.kind.value):
                scan = radial_convolve(self.density, kernel).values
                dense = dense_convolve(self.density, kernel).values
                error = np.max(np.abs(scan - dense)) / np.max(np.abs(dense))
                self.assertLessEqual(error, 1e-12)

    def test_split_matches_direct(self):
        v = gaussian(self.grid)
        sample = np.linspace(1, self.grid.n - 1, 10).astype(int)
        for beta in (1.0, 0.1):
            with self.subTest(beta=beta):
                split = potential_K_beta(v, beta).values[sample]
                direct = dense_k_beta(self.density, beta).values[sample]
                np.testing.assert_allclose(split, direct, rtol=1e-8)

    def test_poisson_limit(self):
        coulomb = radial_convolve(self.density, Kernel.coulomb()).values
        np.testing.assert_array_equal(k_beta_values(self.grid, self.density.values, 0.0), coulomb)

    def test_strong_screening_is_finite(self):
        # μh far beyond the underflow threshold
        phi = potential_K_beta(gaussian(self.grid), 1e-6).values
        self.assertTrue(np.all(np.isfinite(phi)))
        coulomb = radial_convolve(self.density, Kernel.coulomb()).values
        np.testing.assert_allclose(phi[1:-1], coulomb[1:-1], rtol=1e-3)

    def test_zero(self):
        for kernel in (Kernel.coulomb(), Kernel.yukawa(1.0), Kernel.exponential(1.0)):
            self.assertTrue(radial_convolve(self.grid.zeros(), kernel).is_zero)


class DoubleFormsTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = build_grid(10.0, 8192)
        cls.v = gaussian(cls.grid)

    def test_gaussian_coulomb(self):
        c_coul = double_forms(self.v, 0.0).c_coul
        self.assertAlmostEqual(c_coul / (math.sqrt(2.0) * math.pi**2.5), 1.0, delta=1e-6)

    def test_poisson_has_no_screening(self):
        forms = double_forms(self.v, 0.0)
        self.assertEqual((forms.y_beta, forms.e_beta), (0.0, 0.0))
        self.assertEqual(forms.k_beta, forms.c_coul)

    def test_ordering(self):
        previous = 0.0
        for beta in (2.0, 1.0, 0.5, 0.1, 0.01):
            forms = double_forms(self.v, beta)
            self.assertGreater(forms.y_beta, 0.0)
            self.assertGreater(forms.e_beta, 0.0)
            self.assertLess(forms.k_beta, forms.c_coul)
            # 𝒦_β grows pointwise as β decreases
            self.assertGreater(forms.k_beta, previous)
            previous = forms.k_beta

    def test_symmetric(self):
        grid = build_grid(10.0, 1024)
        f = gaussian(grid)
        g = grid.sample(lambda r: (1.0 + r) * np.exp(-r))
        for kernel in (Kernel.coulomb(), Kernel.yukawa(3.0), Kernel.exponential(0.7)):
            with self.subTest(kernel=kernel.kind.value):
                self.assertAlmostEqual(
                    bilinear_form(f, g, kernel) / bilinear_form(g, f, kernel), 1.0, delta=1e-10
                )

    def test_negative_beta(self):
        with self.assertRaises(InvalidArgument):
            double_forms(self.v, -1.0)


class ScreenedSelfEnergiesTestCase(SimpleTestCase):
    def test_yukawa_excess_lattice_sum(self):
        k = np.arange(-400, 401)
        for mu, h in ((1.0, 0.5), (2.0, 1.0), (10.0, 0.3)):
            with self.subTest(mu=mu, h=h):
                lattice = 2.0 * math.pi * h / mu * np.exp(-mu * h * np.abs(k)).sum()
                expected = lattice - 4.0 * math.pi / mu**2
                self.assertAlmostEqual(_yukawa_excess(mu, h) / expected, 1.0, delta=1e-10)

    def test_exponential_excess_lattice_sum(self):
        k = np.abs(np.arange(-400, 401))
        for mu, h in ((1.0, 0.5), (2.0, 1.0), (10.0, 0.3)):
            with self.subTest(mu=mu, h=h):
                u = k * h
                lattice = 2.0 * math.pi * h * ((u / mu + 1.0 / mu**2) * np.exp(-mu * u)).sum()
                expected = lattice - 8.0 * math.pi / mu**3
                self.assertAlmostEqual(_exponential_excess(mu, h) / expected, 1.0, delta=1e-9)

    def test_series_branch(self):
        below, above = 0.0199999, 0.0200001
        self.assertAlmostEqual(
            _yukawa_excess(1.0, below) / _yukawa_excess(1.0, above), 1.0, delta=1e-4
        )
        self.assertAlmostEqual(
            _exponential_excess(1.0, 0.0099999) / _exponential_excess(1.0, 0.0100001),
            1.0,
            delta=1e-3,
        )

    def test_resolved_grid_is_barely_touched(self):
        v = gaussian(build_grid(10.0, 4096))
        raw = double_forms(v, 1.0)
        corrected = screened_self_energies(v, 1.0)
        self.assertEqual(corrected.c_coul, raw.c_coul)
        self.assertLess(corrected.y_beta, raw.y_beta)
        self.assertAlmostEqual(corrected.y_beta / raw.y_beta, 1.0, delta=1e-5)
        self.assertAlmostEqual(corrected.e_beta / raw.e_beta, 1.0, delta=1e-8)

    def test_unresolved_grid(self):
        # β far below h: the corrected screened forms are of order β² and β³ times ∫v⁴
        v = gaussian(build_grid(10.0, 1024))
        beta = 1e-4
        forms = screened_self_energies(v, beta)
        local = float(np.dot(v.grid.weights, v.squared() ** 2))
        self.assertLess(forms.y_beta, 20.0 * math.pi * beta**2 * local)
        self.assertLess(forms.e_beta, 20.0 * math.pi * beta**3 * local)

    def test_requires_positive_beta(self):
        with self.assertRaises(InvalidArgument):
            screened_self_energies(gaussian(build_grid(4.0, 64)), 0.0)
