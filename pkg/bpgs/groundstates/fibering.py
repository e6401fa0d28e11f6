"""
The fibering map t ↦ Ĩ(t²v(t·)) and the projection onto the Nehari-Pohožaev manifold.

Under u = t²v(t·) the forms scale as

    a → t³a,  b → t·b,  d → t^{2p-3}d,
    k_β(u) = t³ k_{tβ}(v),  e_β(u) = t² e_{tβ}(v),

so the fiber is evaluated from forms of v alone, with the screened forms
recomputed at tβ. P(t²v(t·)) equals t·d/dt Ĩ(t²v(t·)), and it is positive
before the unique critical point t* and negative after it.
"""

import logging
import math
import typing as t
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect

from .errors import InvalidArgument, NoConvergence
from .functionals import FieldForms, field_forms
from .potentials import double_forms
from .radial import FloatArray, Params, RadialField, RadialGrid, norms

logger = logging.getLogger(__name__)

T_MIN = 1e-6
T_MAX = 1e6
XTOL = 1e-12
MAX_BISECTIONS = 200


def _evaluate(v: RadialField, r: FloatArray) -> FloatArray:
    """Cubic interpolant of v at radii r, even at the origin and zero beyond R_max."""
    spline = CubicSpline(v.grid.nodes, v.values, bc_type=((1, 0.0), "not-a-knot"))
    inside = r <= v.grid.r_max
    values = np.zeros_like(r)
    values[inside] = spline(r[inside])
    return values


def dilate(v: RadialField, t: float) -> RadialField:
    """t²v(t·) on the grid of v, by cubic interpolation."""
    if not (math.isfinite(t) and t > 0):
        raise InvalidArgument(f"dilation factor must be positive, got {t}")
    if t == 1.0:
        return v
    return RadialField(v.grid, t * t * _evaluate(v, t * v.grid.nodes))


def resample(v: RadialField, grid: RadialGrid) -> RadialField:
    """v carried onto another grid."""
    if v.grid == grid:
        return v
    return RadialField(grid, _evaluate(v, np.asarray(grid.nodes)))


class Fiber:
    """Scalar evaluation of t ↦ Ĩ(t²v(t·)) and t ↦ P(t²v(t·))."""

    def __init__(self, v: RadialField, params: Params):
        self.params = params
        self.a, self.b, self.d = norms(v, params.p)
        self.v = v
        # The Coulomb part is homogeneous; only the screened part moves with t.
        self.c = double_forms(v, 0.0).c_coul

    def _screened(self, t: float) -> tuple[float, float]:
        """(k_{tβ}(v), e_{tβ}(v)/β)."""
        beta = self.params.beta
        if beta == 0:
            return self.c, 0.0
        forms = double_forms(self.v, t * beta)
        return self.c - forms.y_beta, forms.e_beta / beta

    def energy(self, t: float) -> float:
        k, _ = self._screened(t)
        p = self.params.p
        return (
            0.5 * t**3 * self.a
            + 0.5 * t * self.b
            + 0.25 * t**3 * k
            - t ** (2.0 * p - 3.0) * self.d / p
        )

    def np(self, t: float) -> float:
        k, e_over_beta = self._screened(t)
        p = self.params.p
        return (
            1.5 * t**3 * self.a
            + 0.5 * t * self.b
            + 0.75 * t**3 * k
            - 0.25 * t * t * e_over_beta
            - (2.0 * p - 3.0) / p * t ** (2.0 * p - 3.0) * self.d
        )


def fiber_energy(v: RadialField, params: Params, t: float) -> float:
    """Ĩ_β(t²v(t·)) without interpolation."""
    if not t > 0:
        raise InvalidArgument(f"fiber parameter must be positive, got {t}")
    return Fiber(v, params).energy(t)


def np_along_fiber(v: RadialField, params: Params, t: float) -> float:
    """P_β(t²v(t·)) without interpolation."""
    if not t > 0:
        raise InvalidArgument(f"fiber parameter must be positive, got {t}")
    return Fiber(v, params).np(t)


@dataclass(frozen=True)
class FiberingResult:
    t_star: float
    projected: RadialField
    bracket: tuple[float, float]
    np_at_t: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.t_star > 0:
            raise InvalidArgument(f"t_star must be positive, got {self.t_star}")


def _find_bracket(fn: t.Callable[[float], float], start: float = 1.0) -> tuple[float, float]:
    """A (lo, hi) with fn(lo) > 0 > fn(hi), doubling or halving away from `start`."""
    lo = hi = start
    if fn(start) > 0:
        while fn(hi) > 0:
            lo, hi = hi, 2.0 * hi
            if hi > T_MAX:
                raise NoConvergence(f"no sign change of P for t up to {T_MAX:g}")
    else:
        while fn(lo) <= 0:
            lo, hi = 0.5 * lo, lo
            if lo < T_MIN:
                raise NoConvergence(f"no sign change of P for t down to {T_MIN:g}")
    return lo, hi


def _root(fn: t.Callable[[float], float], lo: float, hi: float) -> float:
    try:
        return float(bisect(fn, lo, hi, xtol=XTOL, maxiter=MAX_BISECTIONS))
    except RuntimeError as e:
        raise NoConvergence(f"bisection on [{lo:g}, {hi:g}] did not converge: {e}") from e


def _polish_amplitude(u: RadialField, forms: FieldForms) -> float:
    """
    The s near 1 with P(s·u) = 0.

    P(s·u)/s² = (3/2)a + ½b + s²((3/4)k - e/(4β)) - s^{p-2}((2p-3)/p)d has a
    single positive root, since it is positive at s = 0 and p - 2 > 2.
    """
    p = forms.params.p
    linear = 1.5 * forms.a + 0.5 * forms.b
    quartic = 0.75 * forms.k_beta - 0.25 * forms.screened()
    power = (2.0 * p - 3.0) / p * forms.d

    def residual(s: float) -> float:
        return linear + s * s * quartic - s ** (p - 2.0) * power

    if residual(1.0) == 0:
        return 1.0
    lo, hi = _find_bracket(residual)
    return _root(residual, lo, hi)


def project_NP(v: RadialField, params: Params) -> FiberingResult:
    """
    Project v onto 𝒫_β (𝒫_0 when β = 0) along its fiber.

    t* is found by bisection on the scalar fiber formula. The interpolated
    dilation t*²v(t*·) is then rescaled along its own ray so that the
    discrete P vanishes to round-off.
    """
    if v.is_zero:
        raise InvalidArgument("cannot project the zero field")
    fiber = Fiber(v, params)
    if fiber.d <= 0:
        raise InvalidArgument("field has no L^p mass to project")
    p_at_one = fiber.np(1.0)
    if p_at_one == 0:
        t_star, bracket = 1.0, (1.0, 1.0)
    else:
        bracket = _find_bracket(fiber.np)
        t_star = _root(fiber.np, *bracket)
    dilated = dilate(v, t_star)
    amplitude = _polish_amplitude(dilated, field_forms(dilated, params))
    projected = dilated.scaled(amplitude)
    residual = abs(field_forms(projected, params).np())
    logger.debug(
        "projected onto P (beta=%g): t*=%.15g amplitude=%.15g |P|=%.3g",
        params.beta,
        t_star,
        amplitude,
        residual,
    )
    return FiberingResult(
        t_star=t_star,
        projected=projected,
        bracket=bracket,
        np_at_t=residual,
        amplitude=amplitude,
    )


def poisson_projection(v_beta: RadialField, params: Params) -> FiberingResult:
    """
    Project a β-solution onto 𝒫_0.

    For β > 0 the field is first anchored on 𝒫_β, which makes P_0 of the
    anchor equal to ¼∫∫(3/|x-y| + 1/β)e^{-|x-y|/β}v²v² > 0 and therefore
    t_β > 1 regardless of the discretization error in P_β(v_β).
    """
    anchor = v_beta
    if not params.is_poisson:
        anchor = project_NP(v_beta, params).projected
    return project_NP(anchor, params.with_beta(0.0))


def t_beta_of(v_beta: RadialField, params: Params) -> float:
    """The t_β with t_β²v_β(t_β·) ∈ 𝒫_0; params carries the β of v_beta."""
    return poisson_projection(v_beta, params).t_star
