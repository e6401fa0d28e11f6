"""
Least energy solutions of the reduced Bopp-Podolsky equation

    -Δv + v + (v² * 𝒦_β)v = |v|^{p-2}v        (𝒦_0 = 1/|x|)

computed in two phases.

Phase A minimizes the energy on the Nehari-Pohožaev manifold: a descent
step along the L² gradient, linearly implicit in -Δ + 1 and made tangent to
P = 0 with the exact gradient of the discrete P, followed by the fibering
projection, with Armijo backtracking on the projected energy. Its energy is
the level m_β. It stops once the tangential part of the gradient is below
MANIFOLD_TOL relative to ‖v‖_{H¹}.

Phase B polishes the manifold minimizer with damped Newton on the
Euler-Lagrange equation. The Jacobian is applied matrix-free and inverted
with GMRES, preconditioned by the sparse LU of its local (tridiagonal) part.
The discrete P is built from continuum scaling laws, so the Newton solution
sits off the discrete manifold by the discretization error of P.

The unknowns are the samples at r_1..r_{N-1}; v(R_max) = 0 and v(0)
follows from evenness.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
import pathlib
import typing as t
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, splu

from .errors import DegenerateIterate, InvalidArgument, NoConvergence
from .fibering import project_NP, resample
from .formats import read_solution
from .functionals import (
    IdentityReport,
    el_residual_values,
    energy,
    identity_report,
    np_gradient_values,
    np_value,
)
from .potentials import k_beta_values
from .radial import (
    FloatArray,
    Params,
    RadialField,
    RadialGrid,
    even_origin_value,
    gaussian,
    h1_norm,
    integrate,
    norms,
)

logger = logging.getLogger(__name__)

MIN_H1 = 1e-10
ARMIJO = 1e-4
BACKTRACK = 0.5
STEP_GROWTH = 2.0
MAX_STEP = 10.0
MIN_STEP = 1e-14
# Phase A stops below this relative tangential residual.
MANIFOLD_TOL = 1e-6
MAX_NEWTON = 60
MIN_DAMPING = 1.0 / 64.0
GMRES_RTOL = 1e-10
GMRES_RESTART = 60
LOG_EVERY = 100


class InitKind(enum.Enum):
    GAUSSIAN = "gaussian"
    FILE = "file"
    WARM_START = "warm_start"


@dataclass(frozen=True)
class SolveOptions:
    init: InitKind = InitKind.GAUSSIAN
    width: float = 1.0
    path: pathlib.Path | None = None
    warm: RadialField | None = None
    step0: float = 1e-3
    tol_el: float = 1e-8
    tol_np: float = 1e-10
    max_iters: int = 20000
    phase_a_iters: int = 2000
    seed: int = 0
    # Relative multiplicative noise applied to the initial field.
    noise: float = 0.0

    def __post_init__(self):
        for name in ("step0", "tol_el", "tol_np", "width"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgument(f"{name} must be positive, got {value}")
        if self.max_iters < 1 or self.phase_a_iters < 0:
            raise InvalidArgument("iteration caps must be positive")
        if self.noise < 0:
            raise InvalidArgument(f"noise must be >= 0, got {self.noise}")
        if self.init is InitKind.FILE and self.path is None:
            raise InvalidArgument("file initialization needs a path")
        if self.init is InitKind.WARM_START and self.warm is None:
            raise InvalidArgument("warm-start initialization needs a field")

    def warm_started(self, warm: RadialField) -> t.Self:
        return dataclasses.replace(self, init=InitKind.WARM_START, warm=warm)

    def cold(self) -> t.Self:
        return dataclasses.replace(self, init=InitKind.GAUSSIAN, warm=None, path=None)


class HistoryEntry(t.NamedTuple):
    phase: str
    energy: float
    # Tangential residual during descent, Euler-Lagrange residual in Newton.
    residual: float


class ProfileCheck(t.NamedTuple):
    """Shape diagnostics of a computed profile; not asserted as theorems."""

    positive: bool
    nonincreasing: bool


def profile_check(v: RadialField) -> ProfileCheck:
    values = v.values[:-1]
    slack = 1e-12 * float(np.max(np.abs(v.values)) or 1.0)
    return ProfileCheck(
        positive=bool(np.all(values > 0)),
        nonincreasing=bool(np.all(np.diff(v.values) <= slack)),
    )


@dataclass(frozen=True)
class SolveReport:
    v: RadialField
    params: Params
    m: float
    iters: int
    identity: IdentityReport
    history: tuple[HistoryEntry, ...]
    init: str
    seed: int
    # Measured on the Phase A minimizer, which lies on the manifold to
    # round-off; `m` is its energy. `v` is the Newton solution.
    manifold_np: float
    manifold_energy: float
    # Ĩ(v) of the Newton solution.
    el_energy: float = math.nan
    newton_iters: int = 0
    converged: bool = True

    @property
    def h1(self) -> float:
        return math.sqrt(self.identity.h1_squared)

    @property
    def lp_bound_slack(self) -> float:
        """((2p-3)/p)‖v‖_{L^p}^p - ½‖v‖²_{H¹}, nonnegative on the manifold."""
        a, b, d = norms(self.v, self.params.p)
        p = self.params.p
        return (2.0 * p - 3.0) / p * d - 0.5 * (a + b)

    @property
    def profile(self) -> ProfileCheck:
        return profile_check(self.v)

    def to_json(self) -> dict[str, t.Any]:
        profile = self.profile
        return {
            **self.identity.to_json(),
            "m": self.m,
            "iters": self.iters,
            "newton_iters": self.newton_iters,
            "converged": self.converged,
            "grid": {"R_max": self.v.grid.r_max, "N": self.v.grid.n},
            "manifold_np": self.manifold_np,
            "manifold_energy": self.manifold_energy,
            "el_energy": self.el_energy,
            "lp_bound_slack": self.lp_bound_slack,
            "init": self.init,
            "seed": self.seed,
            "profile": {"positive": profile.positive, "nonincreasing": profile.nonincreasing},
            "radial_assumption": "radial class centered at the origin; translations fixed to 0",
        }


# -----------------------------------------------------------------------------
# Discrete operators on the interior unknowns
# -----------------------------------------------------------------------------


def _stiffness(grid: RadialGrid) -> sp.csc_matrix:
    """-Δ + 1 on r_1..r_{N-1} with v_N = 0; v_0 does not enter."""
    h2 = grid.h * grid.h
    n = grid.n
    main = np.full(n - 1, 2.0 / h2 + 1.0)
    i_up = np.arange(1, n - 1, dtype=np.float64)
    i_down = np.arange(2, n, dtype=np.float64)
    upper = -(i_up + 1.0) / (h2 * i_up)
    lower = -(i_down - 1.0) / (h2 * i_down)
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csc")


def _field(grid: RadialGrid, interior: FloatArray) -> RadialField:
    values = np.zeros(grid.n + 1)
    values[1:-1] = interior
    values[0] = even_origin_value(values)
    return RadialField(grid, values)


def _check_alive(v: RadialField) -> None:
    if h1_norm(v) < MIN_H1:
        raise DegenerateIterate(f"iterate collapsed to zero (‖v‖_H1 < {MIN_H1:g})")


def _initial_field(grid: RadialGrid, opts: SolveOptions) -> RadialField:
    match opts.init:
        case InitKind.GAUSSIAN:
            v = gaussian(grid, width=opts.width)
        case InitKind.FILE:
            assert opts.path is not None
            v, _ = read_solution(opts.path)
            v = resample(v, grid)
        case InitKind.WARM_START:
            assert opts.warm is not None
            v = resample(opts.warm, grid)
    if opts.noise > 0:
        v = perturbed(v, opts.noise, opts.seed)
    return v


class _Solve:
    """Mutable state of one solve; the public API is `solve_ground_state`."""

    def __init__(self, params: Params, grid: RadialGrid, opts: SolveOptions):
        self.params = params
        self.grid = grid
        self.opts = opts
        self.stiffness = _stiffness(grid)
        self.weights = grid.weights[1:-1]
        self.history: list[HistoryEntry] = []
        self.iters = 0
        self.newton_iters = 0
        self.manifold_np = math.nan
        self.manifold_energy = math.nan

    def residual(self, v: RadialField) -> FloatArray:
        return el_residual_values(v, self.params.beta, self.params.p)

    def relative_residual(self, v: RadialField, residual: FloatArray) -> float:
        return math.sqrt(max(integrate(self.grid, residual**2), 0.0)) / h1_norm(v)

    def inner(self, f: FloatArray, g: FloatArray) -> float:
        """Quadrature inner product of two interior vectors."""
        return float(np.dot(self.weights, f * g))

    def report(self, v: RadialField, converged: bool) -> SolveReport:
        el_energy = energy(v, self.params)
        level = self.manifold_energy if math.isfinite(self.manifold_energy) else el_energy
        return SolveReport(
            v=v,
            params=self.params,
            m=level,
            iters=self.iters,
            identity=identity_report(v, self.params),
            history=tuple(self.history),
            init=self.opts.init.value,
            seed=self.opts.seed,
            manifold_np=self.manifold_np,
            manifold_energy=self.manifold_energy,
            el_energy=el_energy,
            newton_iters=self.newton_iters,
            converged=converged,
        )

    def fail(self, v: RadialField, message: str) -> t.NoReturn:
        raise NoConvergence(message, partial=self.report(v, converged=False))

    # -- Phase A -------------------------------------------------------------

    def tangential(self, gradient: FloatArray, constraint: FloatArray) -> FloatArray:
        """The part of `gradient` orthogonal to the gradient of P."""
        weight = self.inner(constraint, gradient) / self.inner(constraint, constraint)
        return gradient - weight * constraint

    def direction(self, gradient: FloatArray, constraint: FloatArray, step: float) -> FloatArray:
        """
        M⁻¹(g - λ∇P) with M = 1 + step(-Δ + 1) and λ such that the result is
        orthogonal to ∇P, so a step along it leaves P = 0 to second order.
        """
        identity = sp.identity(self.grid.n - 1, format="csc")
        lu = splu((identity + step * self.stiffness).tocsc())
        along, across = lu.solve(gradient), lu.solve(constraint)
        return along - self.inner(constraint, along) / self.inner(constraint, across) * across

    def descend(self, v: RadialField) -> RadialField:
        params, grid = self.params, self.grid
        _check_alive(v)
        v = project_NP(v, params).projected
        current = energy(v, params)
        step = self.opts.step0
        relative = math.inf
        for k in range(self.opts.phase_a_iters):
            if self.iters >= self.opts.max_iters:
                break
            gradient = self.residual(v)[1:-1]
            constraint = np_gradient_values(v, params.beta, params.p)[1:-1]
            tangential = self.tangential(gradient, constraint)
            relative = math.sqrt(max(self.inner(tangential, tangential), 0.0)) / h1_norm(v)
            self.history.append(HistoryEntry("descent", current, relative))
            if relative <= MANIFOLD_TOL:
                break
            accepted = False
            while step >= MIN_STEP:
                direction = self.direction(gradient, constraint, step)
                slope = self.inner(gradient, direction)
                trial = _field(grid, v.values[1:-1] - step * direction)
                try:
                    _check_alive(trial)
                    trial = project_NP(trial, params).projected
                except (DegenerateIterate, NoConvergence, InvalidArgument):
                    step *= BACKTRACK
                    continue
                trial_energy = energy(trial, params)
                if trial_energy <= current - ARMIJO * step * slope:
                    accepted = True
                    break
                step *= BACKTRACK
            self.iters += 1
            if not accepted:
                # Only round-off is left in the energy differences.
                logger.info(
                    "descent stopped after %d steps: no decrease at tangential residual %.3e",
                    k,
                    relative,
                )
                break
            v, current = trial, trial_energy
            step = min(STEP_GROWTH * step, MAX_STEP)
            if k % LOG_EVERY == 0:
                logger.debug(
                    "descent %d: energy=%.15g tangential=%.3e step=%.3e", k, current, relative, step
                )
        if relative > MANIFOLD_TOL:
            logger.warning(
                "descent ended at tangential residual %.3e above %g", relative, MANIFOLD_TOL
            )
        self.manifold_np = abs(np_value(v, params)) / h1_norm(v) ** 2
        self.manifold_energy = current
        if self.manifold_np > self.opts.tol_np:
            self.fail(v, f"manifold residual {self.manifold_np:.3e} above {self.opts.tol_np:g}")
        logger.info(
            "descent done after %d iterations: energy=%.15g |P|/‖v‖²=%.3e",
            self.iters,
            current,
            self.manifold_np,
        )
        return v

    # -- Phase B -------------------------------------------------------------

    def jacobian(self, v: RadialField) -> tuple[LinearOperator, LinearOperator]:
        grid, params = self.grid, self.params
        values = v.values
        phi = k_beta_values(grid, v.squared(), params.beta)
        local = phi - (params.p - 1.0) * np.abs(values) ** (params.p - 2.0)
        local_part = (self.stiffness + sp.diags(local[1:-1], format="csc")).tocsc()
        lu = splu(local_part)
        inner = values[1:-1]

        def apply(delta: FloatArray) -> FloatArray:
            full = np.zeros(grid.n + 1)
            full[1:-1] = 2.0 * values[1:-1] * delta
            coupling = k_beta_values(grid, full, params.beta)[1:-1]
            return local_part @ delta + inner * coupling

        size = grid.n - 1
        operator = LinearOperator((size, size), matvec=apply, dtype=np.float64)
        preconditioner = LinearOperator((size, size), matvec=lu.solve, dtype=np.float64)
        return operator, preconditioner

    def polish(self, v: RadialField) -> RadialField:
        grid = self.grid
        residual = self.residual(v)
        relative = self.relative_residual(v, residual)
        while relative > self.opts.tol_el:
            if self.newton_iters >= MAX_NEWTON or self.iters >= self.opts.max_iters:
                self.fail(v, f"Newton stopped at relative residual {relative:.3e}")
            operator, preconditioner = self.jacobian(v)
            delta, info = gmres(
                operator,
                -residual[1:-1],
                rtol=GMRES_RTOL,
                atol=0.0,
                restart=GMRES_RESTART,
                M=preconditioner,
            )
            if info != 0:
                logger.warning("GMRES returned info=%d; using the inexact step", info)
            norm = math.sqrt(max(integrate(grid, residual**2), 0.0))
            damping = 1.0
            while True:
                trial = _field(grid, v.values[1:-1] + damping * delta)
                _check_alive(trial)
                trial_residual = self.residual(trial)
                trial_norm = math.sqrt(max(integrate(grid, trial_residual**2), 0.0))
                if trial_norm < (1.0 - ARMIJO * damping) * norm:
                    break
                damping *= BACKTRACK
                if damping < MIN_DAMPING:
                    self.fail(v, f"Newton line search failed at relative residual {relative:.3e}")
            v, residual = trial, trial_residual
            relative = self.relative_residual(v, residual)
            self.iters += 1
            self.newton_iters += 1
            self.history.append(HistoryEntry("newton", energy(v, self.params), relative))
            logger.debug("newton %d: el=%.3e damping=%g", self.newton_iters, relative, damping)
        logger.info(
            "converged (p=%g, beta=%g) after %d iterations, %d Newton: el=%.3e",
            self.params.p,
            self.params.beta,
            self.iters,
            self.newton_iters,
            relative,
        )
        return v


def solve_ground_state(
    params: Params, grid: RadialGrid, opts: SolveOptions | None = None
) -> SolveReport:
    """
    The least energy solution v_β and the level m_β, the minimum of Ĩ_β on 𝒫_β.

    Raises NoConvergence carrying the best report so far, or
    DegenerateIterate if an iterate collapses to zero.
    """
    opts = opts or SolveOptions()
    logger.info(
        "solving p=%g beta=%g on %s (init=%s)", params.p, params.beta, grid, opts.init.value
    )
    state = _Solve(params, grid, opts)
    v = _initial_field(grid, opts)
    v = state.descend(v)
    v = state.polish(v)
    _check_alive(v)
    report = state.report(v, converged=True)
    if report.m <= 0:
        raise DegenerateIterate(f"converged to a non-positive level m={report.m:.6g}")
    return report


def solve_sweep_point(
    params: Params,
    grid: RadialGrid,
    warm: RadialField | None = None,
    opts: SolveOptions | None = None,
) -> SolveReport:
    """`solve_ground_state`, warm-started from `warm` unless it is zero."""
    opts = opts or SolveOptions()
    if warm is None:
        return solve_ground_state(params, grid, opts)
    if h1_norm(warm) < MIN_H1:
        logger.info("warm field is zero; falling back to the Gaussian start")
        return solve_ground_state(params, grid, opts.cold())
    return solve_ground_state(params, grid, opts.warm_started(warm))


def perturbed(v: RadialField, relative: float, seed: int) -> RadialField:
    """v with independent relative noise of size `relative` at every node."""
    rng = np.random.default_rng(seed)
    return RadialField(v.grid, v.values * (1.0 + relative * rng.standard_normal(len(v))))
