"""
Energies, identity residuals and the Nehari-Pohožaev functional.

Every functional is an algebraic combination of six scalar forms of the
field (see `FieldForms`), so they are computed once and combined. With
k = ∫∫ 𝒦_β(x - y) v(x)² v(y)² and e = ∫∫ e^{-|x-y|/β} v(x)² v(y)²:

    energy     ½(a + b) + ¼k - d/p
    nehari     (a + b) + k - d
    pohozaev   ½a + (3/2)b + (5/4)k + e/(4β) - 3d/p
    np         (3/2)a + ½b + (3/4)k - e/(4β) - ((2p - 3)/p)d

so that np = 2·nehari - pohozaev identically. For β = 0 the kernel is the
Coulomb kernel and every e/β term is absent.
"""

import math
import typing as t
from dataclasses import dataclass

import numpy as np

from .potentials import Kernel, convolve_values, double_forms, k_beta_values
from .radial import FloatArray, Params, RadialField, integrate, laplacian_values, norms


@dataclass(frozen=True)
class FieldForms:
    """The scalar forms of one field at one (p, β)."""

    a: float
    b: float
    d: float
    c_coul: float
    y_beta: float
    e_beta: float
    params: Params

    @property
    def k_beta(self) -> float:
        return self.c_coul - self.y_beta

    @property
    def h1_squared(self) -> float:
        return self.a + self.b

    def screened(self) -> float:
        """e/β, which is absent at β = 0."""
        if self.params.is_poisson:
            return 0.0
        return self.e_beta / self.params.beta

    def energy(self) -> float:
        p = self.params.p
        return 0.5 * (self.a + self.b) + 0.25 * self.k_beta - self.d / p

    def nehari(self) -> float:
        return self.a + self.b + self.k_beta - self.d

    def pohozaev(self) -> float:
        p = self.params.p
        return (
            0.5 * self.a
            + 1.5 * self.b
            + 1.25 * self.k_beta
            + 0.25 * self.screened()
            - 3.0 * self.d / p
        )

    def np(self) -> float:
        p = self.params.p
        return (
            1.5 * self.a
            + 0.5 * self.b
            + 0.75 * self.k_beta
            - 0.25 * self.screened()
            - (2.0 * p - 3.0) / p * self.d
        )

    def manifold_energy(self) -> float:
        """The energy rewritten with P = 0 used to eliminate d."""
        p = self.params.p
        q = 2.0 * p - 3.0
        return (
            (p - 3.0) / q * self.a
            + (p - 2.0) / q * self.b
            + (p - 3.0) / (2.0 * q) * self.k_beta
            + self.screened() / (4.0 * q)
        )


def field_forms(v: RadialField, params: Params) -> FieldForms:
    a, b, d = norms(v, params.p)
    doubles = double_forms(v, params.beta)
    return FieldForms(
        a=a,
        b=b,
        d=d,
        c_coul=doubles.c_coul,
        y_beta=doubles.y_beta,
        e_beta=doubles.e_beta,
        params=params,
    )


def energy(v: RadialField, params: Params) -> float:
    """Ĩ_β(v), or Ĩ_0(v) when params.beta == 0."""
    return field_forms(v, params).energy()


def nehari_residual(v: RadialField, params: Params) -> float:
    return field_forms(v, params).nehari()


def pohozaev_residual(v: RadialField, params: Params) -> float:
    return field_forms(v, params).pohozaev()


def np_value(v: RadialField, params: Params) -> float:
    """P_β(v), or P_0(v) when params.beta == 0."""
    return field_forms(v, params).np()


def manifold_energy(v: RadialField, params: Params) -> float:
    """Equals `energy` whenever np_value(v) == 0."""
    return field_forms(v, params).manifold_energy()


# -----------------------------------------------------------------------------
# Euler-Lagrange residual
# -----------------------------------------------------------------------------


def el_residual_values(v: RadialField, beta: float, p: float) -> FloatArray:
    """
    -Δv + v + φv - |v|^{p-2}v at every node, φ = v² * 𝒦_β.

    On nodes 1..N-1 this is the energy gradient divided by the quadrature
    weight; the value at r = 0 carries no weight in any integral.
    """
    values = v.values
    phi = k_beta_values(v.grid, v.squared(), beta)
    out = (
        -laplacian_values(v.grid, values)
        + values
        + phi * values
        - np.abs(values) ** (p - 2.0) * values
    )
    out[-1] = 0.0
    return out


def euler_lagrange_residual(v: RadialField, params: Params) -> RadialField:
    return RadialField(v.grid, el_residual_values(v, params.beta, params.p))


def np_gradient_values(v: RadialField, beta: float, p: float) -> FloatArray:
    """
    Gradient of the discrete P divided by the quadrature weight, node by node
    as in `el_residual_values`:

        -3Δv + v + 3φv - (ψ/β)v - (2p - 3)|v|^{p-2}v,   ψ = v² * e^{-|·|/β}.
    """
    values = v.values
    density = v.squared()
    phi = k_beta_values(v.grid, density, beta)
    out = (
        -3.0 * laplacian_values(v.grid, values)
        + values
        + 3.0 * phi * values
        - (2.0 * p - 3.0) * np.abs(values) ** (p - 2.0) * values
    )
    if beta > 0:
        psi = convolve_values(v.grid, density, Kernel.exponential(1.0 / beta))
        out -= psi * values / beta
    out[-1] = 0.0
    return out


def weighted_l2(v: RadialField, values: FloatArray) -> float:
    return math.sqrt(max(integrate(v.grid, values**2), 0.0))


@dataclass(frozen=True)
class IdentityReport:
    """
    Raw residuals of one field.

    The `_rel` properties divide by ‖v‖²_{H¹}, and el_l2 by ‖v‖_{H¹}.
    """

    nehari: float
    pohozaev: float
    np: float
    el_l2: float
    h1_squared: float
    beta: float
    p: float

    def _scale(self, power: float) -> float:
        if self.h1_squared <= 0:
            return 1.0
        return self.h1_squared**power

    @property
    def nehari_rel(self) -> float:
        return self.nehari / self._scale(1.0)

    @property
    def pohozaev_rel(self) -> float:
        return self.pohozaev / self._scale(1.0)

    @property
    def np_rel(self) -> float:
        return self.np / self._scale(1.0)

    @property
    def el_l2_rel(self) -> float:
        return self.el_l2 / self._scale(0.5)

    def to_json(self) -> dict[str, float]:
        return {
            "nehari": self.nehari_rel,
            "pohozaev": self.pohozaev_rel,
            "np": self.np_rel,
            "el_l2": self.el_l2_rel,
            "nehari_raw": self.nehari,
            "pohozaev_raw": self.pohozaev,
            "np_raw": self.np,
            "el_l2_raw": self.el_l2,
            "beta": self.beta,
            "p": self.p,
        }


def identity_report(v: RadialField, params: Params) -> IdentityReport:
    forms = field_forms(v, params)
    residual = el_residual_values(v, params.beta, params.p)
    return IdentityReport(
        nehari=forms.nehari(),
        pohozaev=forms.pohozaev(),
        np=forms.np(),
        el_l2=weighted_l2(v, residual),
        h1_squared=forms.h1_squared,
        beta=params.beta,
        p=params.p,
    )


# -----------------------------------------------------------------------------
# Diagnostics
# -----------------------------------------------------------------------------


class ProfilePoint(t.NamedTuple):
    r: float
    mass: float


def concentration_profile(v: RadialField, p: float) -> list[ProfilePoint]:
    """
    r ↦ μ(B_r) for the Schrödinger-Poisson energy density

        (p-3)/(2p-3)|∇v|² + (p-2)/(2p-3)v² + (p-3)/(2(2p-3))(v² * |·|⁻¹)v²,

    whose total mass is Ĩ_0(v) on 𝒫_0. The kinetic term of the edge
    [r_{i-1}, r_i] is counted in B_{r_i}.
    """
    p = Params(p=p, beta=0.0).p
    grid = v.grid
    q = 2.0 * p - 3.0
    density = v.squared()
    phi = k_beta_values(grid, density, 0.0)
    node_terms = grid.weights * ((p - 2.0) / q * density + (p - 3.0) / (2.0 * q) * phi * density)
    slopes = np.diff(v.values) / grid.h
    edge_terms = (p - 3.0) / q * grid.edge_weights * slopes**2
    local = node_terms.copy()
    local[1:] += edge_terms
    cumulative = np.cumsum(local)
    return [ProfilePoint(float(r), float(m)) for r, m in zip(grid.nodes, cumulative)]


def coulomb_splitting_defect(reference: RadialField, bump: RadialField) -> float:
    """
    |c(v + s) - c(s) - c(v)| for the Coulomb double form c.

    For a bump s escaping to infinity the defect is the Brezis-Lieb error of
    the nonlocal term and tends to zero.
    """
    reference.same_grid(bump)
    whole = double_forms(reference + bump, 0.0).c_coul
    tail = double_forms(bump, 0.0).c_coul
    core = double_forms(reference, 0.0).c_coul
    return abs(whole - tail - core)
