"""
Radial convolutions against the Coulomb, Yukawa and exponential kernels.

For radial f and a radial kernel g, (f * g)(r) = ∫ 4π s² f(s) K(r, s) ds with
the shell average

    K(r, s) = (1 / 2rs) ∫_{|r-s|}^{r+s} t g(t) dt,

which is known in closed form for the three kernels:

    Coulomb          1/t          K = 1 / max(r, s)
    Yukawa(μ)        e^{-μt}/t    K = (e^{-μ|r-s|} - e^{-μ(r+s)}) / (2μrs)
    Exponential(μ)   e^{-μt}      K = (G(|r-s|) - G(r+s)) / (2rs),
                                  G(u) = (u/μ + 1/μ²) e^{-μu}

The outer integral is the grid's trapezoid sum. Because e^{-μ|r_i - r_j|} factors
along the grid, every sum is a pair of first-order linear recurrences (a
forward and a backward scan), so a convolution is O(N).

The Yukawa shell kernel has a derivative jump at s = r that the trapezoid sum
over-counts; `screened_self_energies` removes that local error for the
inequality checks. The potentials themselves stay uncorrected so that
𝒦_β = Coulomb - Yukawa(1/β) holds term by term; the shell kernel of 𝒦_β is
smooth.
"""

from __future__ import annotations

import enum
import math
import typing as t
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidArgument
from .radial import FloatArray, RadialField, RadialGrid

# e^{-μh} below e^{-700} is flushed to zero instead of producing denormals.
UNDERFLOW_EXPONENT = 700.0

# Rows per block in the dense oracle.
DENSE_BLOCK = 256


class KernelKind(enum.Enum):
    COULOMB = "coulomb"
    YUKAWA = "yukawa"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class Kernel:
    kind: KernelKind
    mu: float | None = None

    def __post_init__(self):
        if self.kind is KernelKind.COULOMB:
            if self.mu is not None:
                raise InvalidArgument("the Coulomb kernel takes no screening")
            return
        if self.mu is None or not (math.isfinite(self.mu) and self.mu > 0):
            raise InvalidArgument(f"{self.kind.value} kernel needs mu > 0, got {self.mu}")

    @classmethod
    def coulomb(cls) -> t.Self:
        return cls(KernelKind.COULOMB)

    @classmethod
    def yukawa(cls, mu: float) -> t.Self:
        return cls(KernelKind.YUKAWA, mu)

    @classmethod
    def exponential(cls, mu: float) -> t.Self:
        return cls(KernelKind.EXPONENTIAL, mu)

    @property
    def screening(self) -> float:
        assert self.mu is not None
        return self.mu


def k_beta_at_origin(beta: float) -> float:
    """The limit 𝒦_β(0⁺) = 1/β."""
    if beta <= 0:
        raise InvalidArgument(f"beta must be positive, got {beta}")
    return 1.0 / beta


def kernel_value(kernel: Kernel, r: float) -> float:
    """Pointwise kernel value at distance r."""
    if r < 0 or (r == 0 and kernel.kind is not KernelKind.EXPONENTIAL):
        raise InvalidArgument(f"{kernel.kind.value} kernel is singular at r = {r}")
    match kernel.kind:
        case KernelKind.COULOMB:
            return 1.0 / r
        case KernelKind.YUKAWA:
            return math.exp(-kernel.screening * r) / r
        case KernelKind.EXPONENTIAL:
            return math.exp(-kernel.screening * r)


def k_beta_value(beta: float, r: float) -> float:
    """𝒦_β(r) = (1 - e^{-r/β}) / r; β = 0 gives the Coulomb kernel."""
    if beta < 0:
        raise InvalidArgument(f"beta must be >= 0, got {beta}")
    if r <= 0:
        raise InvalidArgument(f"𝒦_β is evaluated at r > 0 only, got r = {r}")
    if beta == 0:
        return 1.0 / r
    return -math.expm1(-r / beta) / r


# -----------------------------------------------------------------------------
# O(N) scans
# -----------------------------------------------------------------------------


def _forward(decay: float, g: FloatArray) -> FloatArray:
    """out_i = Σ_{j<=i} decay^{i-j} g_j."""
    return lfilter([1.0], [1.0, -decay], g)


def _backward_strict(decay: float, g: FloatArray) -> FloatArray:
    """out_i = Σ_{j>i} decay^{j-i} g_j."""
    return lfilter([1.0], [1.0, -decay], g[::-1])[::-1] - g


def _decay(grid: RadialGrid, mu: float) -> float:
    if mu * grid.h > UNDERFLOW_EXPONENT:
        return 0.0
    return math.exp(-mu * grid.h)


def _coulomb_scan(grid: RadialGrid, f: FloatArray) -> FloatArray:
    r = grid.nodes
    wf = grid.weights * f
    g = np.zeros_like(f)
    g[1:] = wf[1:] / r[1:]
    inner = np.cumsum(wf)
    outer = g.sum() - np.cumsum(g)
    phi = np.empty_like(f)
    phi[1:] = inner[1:] / r[1:] + outer[1:]
    phi[0] = g.sum()
    return phi


def _yukawa_scan(grid: RadialGrid, f: FloatArray, mu: float) -> FloatArray:
    r = grid.nodes
    g = np.zeros_like(f)
    g[1:] = grid.weights[1:] * f[1:] / r[1:]
    decay = _decay(grid, mu)
    near = _forward(decay, g) + _backward_strict(decay, g)
    damp = np.exp(-mu * r)
    t0 = float(np.dot(damp, g))
    phi = np.empty_like(f)
    phi[1:] = (near[1:] - damp[1:] * t0) / (2.0 * mu * r[1:])
    phi[0] = t0
    return phi


def _exponential_scan(grid: RadialGrid, f: FloatArray, mu: float) -> FloatArray:
    r = grid.nodes
    g = np.zeros_like(f)
    g[1:] = grid.weights[1:] * f[1:] / r[1:]
    rg = r * g
    decay = _decay(grid, mu)
    left, left_r = _forward(decay, g), _forward(decay, rg)
    right, right_r = _backward_strict(decay, g), _backward_strict(decay, rg)
    # Σ_j |r_i - r_j| e^{-μ|r_i - r_j|} g_j
    spread = (r * left - left_r) + (right_r - r * right)
    near = spread / mu + (left + right) / mu**2
    damp = np.exp(-mu * r)
    t0 = float(np.dot(damp, g))
    t1 = float(np.dot(damp, rg))
    far = damp * ((r / mu + 1.0 / mu**2) * t0 + t1 / mu)
    phi = np.empty_like(f)
    phi[1:] = (near[1:] - far[1:]) / (2.0 * r[1:])
    phi[0] = t1
    return phi


def convolve_values(grid: RadialGrid, f: FloatArray, kernel: Kernel) -> FloatArray:
    """Array form of `radial_convolve`; f need not be a density."""
    match kernel.kind:
        case KernelKind.COULOMB:
            return _coulomb_scan(grid, f)
        case KernelKind.YUKAWA:
            return _yukawa_scan(grid, f, kernel.screening)
        case KernelKind.EXPONENTIAL:
            return _exponential_scan(grid, f, kernel.screening)


def radial_convolve(f: RadialField, kernel: Kernel) -> RadialField:
    """The potential f * kernel on the grid of f, in O(N)."""
    return RadialField(f.grid, convolve_values(f.grid, f.values, kernel))


# -----------------------------------------------------------------------------
# O(N²) oracle
# -----------------------------------------------------------------------------


def _shell_kernel(
    kind: KernelKind | None, mu: float, ri: FloatArray, rj: FloatArray
) -> FloatArray:
    """Shell averages K(r_i, r_j) for r_i, r_j > 0; kind None means 𝒦_β, β = 1/μ."""
    gap = np.abs(ri - rj)
    total = ri + rj
    match kind:
        case KernelKind.COULOMB:
            return 1.0 / np.maximum(ri, rj)
        case KernelKind.YUKAWA:
            return (np.exp(-mu * gap) - np.exp(-mu * total)) / (2.0 * mu * ri * rj)
        case KernelKind.EXPONENTIAL:

            def big_g(u: FloatArray) -> FloatArray:
                return (u / mu + 1.0 / mu**2) * np.exp(-mu * u)

            return (big_g(gap) - big_g(total)) / (2.0 * ri * rj)
        case None:
            beta = 1.0 / mu
            inner = 2.0 * np.minimum(ri, rj) - beta * (
                np.exp(-gap / beta) - np.exp(-total / beta)
            )
            return inner / (2.0 * ri * rj)


def _origin_kernel(kind: KernelKind | None, mu: float, s: FloatArray) -> FloatArray:
    match kind:
        case KernelKind.COULOMB:
            return 1.0 / s
        case KernelKind.YUKAWA:
            return np.exp(-mu * s) / s
        case KernelKind.EXPONENTIAL:
            return np.exp(-mu * s)
        case None:
            return -np.expm1(-mu * s) / s


def _dense(grid: RadialGrid, f: FloatArray, kind: KernelKind | None, mu: float) -> FloatArray:
    r = grid.nodes
    wf = (grid.weights * f)[1:]
    s = r[1:]
    phi = np.empty_like(f)
    phi[0] = float(np.dot(_origin_kernel(kind, mu, s), wf))
    for start in range(1, grid.n + 1, DENSE_BLOCK):
        stop = min(start + DENSE_BLOCK, grid.n + 1)
        rows = r[start:stop, np.newaxis]
        phi[start:stop] = _shell_kernel(kind, mu, rows, s[np.newaxis, :]) @ wf
    return phi


def dense_convolve(f: RadialField, kernel: Kernel) -> RadialField:
    """Same discretization as `radial_convolve`, summed as a dense matrix product."""
    mu = kernel.mu if kernel.mu is not None else 0.0
    return RadialField(f.grid, _dense(f.grid, f.values, kernel.kind, mu))


def dense_k_beta(f: RadialField, beta: float) -> RadialField:
    """Dense quadrature of f * 𝒦_β with the shell-averaged 𝒦_β kernel itself."""
    if beta <= 0:
        raise InvalidArgument(f"beta must be positive, got {beta}")
    return RadialField(f.grid, _dense(f.grid, f.values, None, 1.0 / beta))


# -----------------------------------------------------------------------------
# Bopp-Podolsky potential and double forms
# -----------------------------------------------------------------------------


def k_beta_values(grid: RadialGrid, f: FloatArray, beta: float) -> FloatArray:
    """f * 𝒦_β via the Coulomb - Yukawa split; β = 0 is the Coulomb potential."""
    if beta < 0:
        raise InvalidArgument(f"beta must be >= 0, got {beta}")
    coulomb = _coulomb_scan(grid, f)
    if beta == 0:
        return coulomb
    return coulomb - _yukawa_scan(grid, f, 1.0 / beta)


def potential_K_beta(v: RadialField, beta: float) -> RadialField:
    """φ = v² * 𝒦_β, the electric potential of the non-reduced system."""
    return RadialField(v.grid, k_beta_values(v.grid, v.squared(), beta))


class DoubleForms(t.NamedTuple):
    """∫∫ K(x - y) v(x)² v(y)² for K = 1/|x|, e^{-|x|/β}/|x| and e^{-|x|/β}."""

    c_coul: float
    y_beta: float
    e_beta: float

    @property
    def k_beta(self) -> float:
        return self.c_coul - self.y_beta


def double_forms(v: RadialField, beta: float) -> DoubleForms:
    """The three double integrals; for β = 0 the screened ones are 0."""
    if beta < 0:
        raise InvalidArgument(f"beta must be >= 0, got {beta}")
    grid = v.grid
    density = v.squared()
    wf = grid.weights * density
    c_coul = float(np.dot(wf, _coulomb_scan(grid, density)))
    if beta == 0:
        return DoubleForms(c_coul=c_coul, y_beta=0.0, e_beta=0.0)
    mu = 1.0 / beta
    y_beta = float(np.dot(wf, _yukawa_scan(grid, density, mu)))
    e_beta = float(np.dot(wf, _exponential_scan(grid, density, mu)))
    return DoubleForms(c_coul=c_coul, y_beta=y_beta, e_beta=e_beta)


def bilinear_form(f: RadialField, g: RadialField, kernel: Kernel) -> float:
    """B(f, g) = ∫∫ K(x - y) f(x) g(y); symmetric in f and g."""
    f.same_grid(g)
    return float(np.dot(f.grid.weights * f.values, convolve_values(g.grid, g.values, kernel)))


# -----------------------------------------------------------------------------
# Diagonal-corrected screened forms
# -----------------------------------------------------------------------------


def _yukawa_excess(mu: float, h: float) -> float:
    """(2πh/μ)coth(μh/2) - 4π/μ², the trapezoid over-count per unit density."""
    x = 0.5 * mu * h
    if x < 1e-2:
        x2 = x * x
        ratio = x2 / 3.0 - x2 * x2 / 45.0 + 2.0 * x2**3 / 945.0
    else:
        ratio = x / math.tanh(x) - 1.0
    return 4.0 * math.pi / mu**2 * ratio


def _exponential_excess(mu: float, h: float) -> float:
    """2πh Σ_k G(|k|h) - 8π/μ³, which is O(h⁴) for a resolved kernel."""
    x = mu * h
    if x < 1e-2:
        ratio = x**4 / 180.0
    else:
        tail = 0.0 if x > 50.0 else x * x / (2.0 * math.sinh(0.5 * x) ** 2)
        ratio = x / math.tanh(0.5 * x) + tail - 4.0
    return 2.0 * math.pi / mu**3 * ratio


def screened_self_energies(v: RadialField, beta: float) -> DoubleForms:
    """
    `double_forms` with the diagonal over-count of the screened kernels removed.

    Near s = r the trapezoid sum sees the Yukawa shell kernel as
    (2πh/μ)e^{-μ|s-r|} per node, which sums to (2πh/μ)coth(μh/2) instead of
    4π/μ², and likewise for the exponential kernel. The excess is subtracted
    node by node. It is πh²/3 for a resolved Yukawa kernel and removes the
    whole diagonal of an unresolved one, which keeps the 20πβ² bound testable
    on any grid.
    """
    if beta <= 0:
        raise InvalidArgument(f"beta must be positive, got {beta}")
    raw = double_forms(v, beta)
    mu = 1.0 / beta
    grid = v.grid
    density = v.squared()
    local = float(np.dot(grid.weights * density, density))
    return DoubleForms(
        c_coul=raw.c_coul,
        y_beta=max(raw.y_beta - _yukawa_excess(mu, grid.h) * local, 0.0),
        e_beta=max(raw.e_beta - _exponential_excess(mu, grid.h) * local, 0.0),
    )
