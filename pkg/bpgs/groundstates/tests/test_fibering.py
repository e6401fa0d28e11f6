import math

import numpy as np
from django.test import SimpleTestCase

from bpgs.groundstates.errors import InvalidArgument, NoConvergence
from bpgs.groundstates.fibering import (
    Fiber,
    _find_bracket,
    dilate,
    fiber_energy,
    np_along_fiber,
    poisson_projection,
    project_NP,
    resample,
    t_beta_of,
)
from bpgs.groundstates.functionals import field_forms, np_value
from bpgs.groundstates.potentials import double_forms
from bpgs.groundstates.radial import Params, build_grid, gaussian


class DilationTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = build_grid(12.0, 1024)
        cls.v = gaussian(cls.grid)

    def test_identity(self):
        self.assertIs(dilate(self.v, 1.0), self.v)
        self.assertIs(resample(self.v, self.grid), self.v)

    def test_matches_closed_form(self):
        r = self.grid.nodes
        for t in (0.5, 2.0):
            with self.subTest(t=t):
                exact = t * t * np.exp(-((t * r) ** 2) / 2.0)
                np.testing.assert_allclose(dilate(self.v, t).values[:-1], exact[:-1], atol=1e-6)

    def test_resample(self):
        fine = build_grid(12.0, 3000)
        np.testing.assert_allclose(
            resample(self.v, fine).values, gaussian(fine).values, atol=1e-6
        )

    def test_zero_beyond_domain(self):
        wide = build_grid(24.0, 64)
        values = resample(gaussian(build_grid(6.0, 64), width=3.0), wide).values
        self.assertFalse(np.any(values[wide.nodes > 6.0]))

    def test_coulomb_homogeneity(self):
        grid = build_grid(12.0, 4096)
        v = gaussian(grid)
        ratio = double_forms(dilate(v, 1.7), 0.0).c_coul / double_forms(v, 0.0).c_coul
        self.assertAlmostEqual(ratio / 1.7**3, 1.0, delta=1e-4)

    def test_invalid(self):
        for t in (0.0, -1.0, math.nan):
            with self.subTest(t=t), self.assertRaises(InvalidArgument):
                dilate(self.v, t)


class FiberTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = build_grid(12.0, 2048)
        cls.v = gaussian(cls.grid)

    def test_scaling_matches_dilated_forms(self):
        for beta in (0.0, 0.3):
            params = Params(p=4.0, beta=beta)
            fiber = Fiber(self.v, params)
            for t in (0.7, 1.5):
                with self.subTest(beta=beta, t=t):
                    forms = field_forms(dilate(self.v, t), params)
                    self.assertAlmostEqual(fiber.energy(t) / forms.energy(), 1.0, delta=1e-4)
                    scale = forms.h1_squared
                    self.assertAlmostEqual((fiber.np(t) - forms.np()) / scale, 0.0, delta=1e-4)

    def test_np_is_derivative_of_energy(self):
        # P(t²v(t·)) = t d/dt Ĩ(t²v(t·))
        eps = 1e-5
        for beta in (0.0, 0.3):
            params = Params(p=4.5, beta=beta)
            fiber = Fiber(self.v, params)
            for t in (0.5, 1.0, 2.0):
                with self.subTest(beta=beta, t=t):
                    rise = fiber.energy(t * (1 + eps)) - fiber.energy(t * (1 - eps))
                    slope = rise / (2 * eps)
                    self.assertAlmostEqual(slope / fiber.np(t), 1.0, delta=1e-6)

    def test_at_one(self):
        params = Params(p=4.0, beta=0.3)
        forms = field_forms(self.v, params)
        self.assertAlmostEqual(fiber_energy(self.v, params, 1.0), forms.energy(), places=10)
        self.assertAlmostEqual(np_along_fiber(self.v, params, 1.0), forms.np(), places=10)

    def test_sign_pattern(self):
        params = Params(p=4.0, beta=0.3)
        self.assertGreater(np_along_fiber(self.v, params, 1e-3), 0.0)
        self.assertLess(np_along_fiber(self.v, params, 1e3), 0.0)

    def test_invalid_t(self):
        with self.assertRaises(InvalidArgument):
            fiber_energy(self.v, Params(p=4.0, beta=0.0), 0.0)
        with self.assertRaises(InvalidArgument):
            np_along_fiber(self.v, Params(p=4.0, beta=0.0), -1.0)


class ProjectionTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = build_grid(20.0, 2048)
        cls.v = gaussian(cls.grid)

    def test_projected_field_is_on_manifold(self):
        for beta in (0.0, 0.1, 1.0):
            params = Params(p=4.0, beta=beta)
            with self.subTest(beta=beta):
                result = project_NP(self.v, params)
                scale = field_forms(result.projected, params).h1_squared
                self.assertLessEqual(abs(np_value(result.projected, params)) / scale, 1e-10)
                self.assertLessEqual(result.np_at_t / scale, 1e-10)
                lo, hi = result.bracket
                self.assertTrue(lo <= result.t_star <= hi)
                self.assertAlmostEqual(result.amplitude, 1.0, delta=1e-3)

    def test_projection_maximizes_fiber(self):
        params = Params(p=4.0, beta=0.1)
        t_star = project_NP(self.v, params).t_star
        fiber = Fiber(self.v, params)
        peak = fiber.energy(t_star)
        for factor in (0.9, 0.99, 1.01, 1.1):
            self.assertLess(fiber.energy(factor * t_star), peak)

    def test_idempotent(self):
        params = Params(p=5.0, beta=0.0)
        once = project_NP(self.v, params).projected
        self.assertAlmostEqual(project_NP(once, params).t_star, 1.0, delta=1e-10)

    def test_dilation_invariance(self):
        # the forms of a dilated field carry an O(h²) quadrature error
        v = gaussian(build_grid(20.0, 32768))
        params = Params(p=4.0, beta=0.0)
        t_star = project_NP(v, params).t_star
        for s in (0.5, 1.5, 2.0):
            with self.subTest(s=s):
                t_dilated = project_NP(dilate(v, s), params).t_star
                self.assertAlmostEqual(t_dilated * s / t_star, 1.0, delta=1e-6)

    def test_zero_field(self):
        with self.assertRaises(InvalidArgument):
            project_NP(self.grid.zeros(), Params(p=4.0, beta=0.0))

    def test_poisson_projection_dilates_outward(self):
        for beta in (1.0, 0.25, 0.05):
            with self.subTest(beta=beta):
                params = Params(p=4.0, beta=beta)
                anchored = project_NP(self.v, params).projected
                self.assertGreater(t_beta_of(anchored, params), 1.0)
                result = poisson_projection(self.v, params)
                poisson = Params(p=4.0, beta=0.0)
                scale = field_forms(result.projected, poisson).h1_squared
                self.assertLessEqual(abs(np_value(result.projected, poisson)) / scale, 1e-10)

    def test_bracket_failure(self):
        with self.assertRaises(NoConvergence):
            _find_bracket(lambda t: 1.0)
        with self.assertRaises(NoConvergence):
            _find_bracket(lambda t: -1.0)
