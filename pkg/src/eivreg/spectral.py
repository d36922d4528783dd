"""Fourier conventions, Gauss-Legendre panel quadrature and deconvolution smoothing.

Conventions
-----------
The forward transform is ``p*(t) = ∫ exp(itx) p(x) dx`` and the inverse is
``p(x) = (2π)^{-1} ∫ exp(-itx) p*(t) dt``.  With these, the deconvolution
kernel ``K_{n,Cn}`` has transform ``K*(t/Cn) / p_eps*(t)`` and smoothing a
function ``psi`` with it reads

    (psi ⋆ K_{n,Cn})(z) = (2π)^{-1} ∫_{-Cn}^{Cn} psi*(u) K*(u/Cn) / p_eps*(u) exp(-iuz) du.

All frequency integrals are computed with composite Gauss-Legendre panels whose
width is small enough to resolve ``exp(-iuz)`` for the largest ``|z|`` in play,
halving the width until two successive levels agree.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import (
    InvariantViolation,
    MissingFourierTransform,
    NonvanishingViolation,
    QuadratureFailure,
    SupportTruncationWarning,
)

TWO_PI = 2.0 * math.pi

#: Characteristic-function values below this magnitude are treated as zero.
CHARFN_FLOOR = 1e-300

# Max entries of a dense phase matrix built in one go.
_CHUNK = 2_000_000


@dataclass(frozen=True)
class QuadratureSpec:
    """Panel layout and stopping rule for composite Gauss-Legendre quadrature.

    Attributes
    ----------
    panels_per_unit : float
        Multiplier on the base panel density (base width ``min(1, π/|z|max)``).
    order : int
        Gauss-Legendre nodes per panel.
    rtol, atol : float
        Successive refinement levels must satisfy
        ``max|I_k - I_{k-1}| <= rtol * max|I_k| + atol``.
    max_depth : int
        Maximal number of halvings.
    residue_rtol : float
        Allowed imaginary residue relative to ``1 + |result|``.
    """

    panels_per_unit: float = 1.0
    order: int = 16
    rtol: float = 1e-8
    atol: float = 1e-12
    max_depth: int = 8
    residue_rtol: float = 1e-6

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.residue_rtol > 0):
            raise InvariantViolation("quadrature tolerances must be positive")
        if self.panels_per_unit <= 0 or self.order < 2 or self.max_depth < 1:
            raise InvariantViolation("invalid quadrature layout")


DEFAULT_QUAD = QuadratureSpec()


@lru_cache(maxsize=64)
def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def panel_rule(
    a: float,
    b: float,
    max_width: float,
    order: int = 16,
    breakpoints=(),
) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule on ``[a, b]``.

    The interval is first cut at ``breakpoints`` falling strictly inside it, then
    each piece is split into equal panels no wider than ``max_width``.
    """
    if not b > a:
        return np.empty(0), np.empty(0)
    cuts = sorted({float(a), float(b), *(float(c) for c in breakpoints if a < c < b)})
    t, v = _leggauss(order)
    nodes, weights = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        m = max(1, int(math.ceil((hi - lo) / max_width - 1e-12)))
        edges = np.linspace(lo, hi, m + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes.append((mid[:, None] + half[:, None] * t[None, :]).ravel())
        weights.append((half[:, None] * v[None, :]).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


# ---------------------------------------------------------------------------
# Fourier convention helpers
# ---------------------------------------------------------------------------


class FourierConvention:
    """The fixed sign convention used throughout: forward ``+i``, inverse ``-i``."""

    sign = 1

    @staticmethod
    def forward(values, x, weights, u):
        """``∑_j weights_j values_j exp(i u x_j)`` for every ``u`` (quadrature of p*)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        vw = np.asarray(values) * np.asarray(weights)
        out = np.empty(u.shape, dtype=complex)
        step = max(1, _CHUNK // max(1, len(x)))
        for s in range(0, u.size, step):
            out[s : s + step] = np.exp(1j * np.outer(u[s : s + step], x)) @ vw
        return out

    @staticmethod
    def inverse(values_u, u, weights_u, x):
        """``(2π)^{-1} ∑_k weights_k values_k exp(-i u_k x)`` for every ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vw = np.asarray(values_u) * np.asarray(weights_u) / TWO_PI
        out = np.empty(x.shape, dtype=complex)
        step = max(1, _CHUNK // max(1, len(u)))
        for s in range(0, x.size, step):
            out[s : s + step] = np.exp(-1j * np.outer(x[s : s + step], u)) @ vw
        return out


# ---------------------------------------------------------------------------
# Kernel and bandwidth
# ---------------------------------------------------------------------------


def indicator_ft(t):
    """Fourier transform of the sinc kernel: ``1{|t| <= 1}``."""
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) <= 1.0, 1.0, 0.0)


@dataclass(frozen=True)
class KernelSpec:
    """Smoothing kernel given by its Fourier transform ``K*`` on ``[-1, 1]``.

    ``K*`` must be even, real, equal to one at the origin and vanish outside
    ``[-1, 1]``.  The default is the indicator (sinc kernel).
    """

    ft: Callable = indicator_ft
    name: str = "indicator"

    def __post_init__(self):
        at0 = float(np.real(np.asarray(self.ft(np.array([0.0])))[0]))
        if abs(at0 - 1.0) > 1e-12:
            raise InvariantViolation(f"K*(0) must equal 1, got {at0}")
        outside = np.linspace(1.0 + 1e-9, 4.0, 301)
        vals = np.asarray(self.ft(np.concatenate([outside, -outside])))
        if np.any(np.abs(vals) > 0):
            raise InvariantViolation("K* must vanish outside [-1, 1]")

    def __call__(self, t):
        return np.asarray(self.ft(np.asarray(t, dtype=float)))

    @property
    def is_flat_top(self) -> bool:
        """Whether ``|1 - K*(t)| <= 1{|t| >= 1}`` holds on a test grid."""
        t = np.linspace(-1 + 1e-9, 1 - 1e-9, 401)
        return bool(np.all(np.abs(1.0 - self(t)) <= 1e-12))

    @classmethod
    def indicator(cls) -> "KernelSpec":
        return cls()


SINC = KernelSpec()

BANDWIDTH_RULES = ("manual", "ordinarySmoothRate", "superSmoothRate", "rootNLogRule")


@dataclass(frozen=True)
class Bandwidth:
    """Frequency cutoff ``Cn`` and the rule that produced it."""

    Cn: float
    rule: str = "manual"
    clamped: bool = False
    note: str = field(default="", compare=False)

    def __post_init__(self):
        if not (self.Cn > 0 and math.isfinite(self.Cn)):
            raise InvariantViolation(f"bandwidth must be positive and finite, got {self.Cn}")
        if self.rule not in BANDWIDTH_RULES:
            raise InvariantViolation(f"unknown bandwidth rule {self.rule!r}")

    def __float__(self):
        return float(self.Cn)


def _as_cutoff(Cn) -> float:
    return float(Cn.Cn if isinstance(Cn, Bandwidth) else Cn)


# ---------------------------------------------------------------------------
# Deconvolution smoothing on a frequency grid
# ---------------------------------------------------------------------------


def _charfn(noise, u):
    if noise is None:
        return np.ones_like(u)
    return noise.charfn(u)


def kernel_multiplier(kernel: KernelSpec, noise, Cn, u) -> np.ndarray:
    """``K*(u/Cn) / p_eps*(u)``, refusing characteristic-function underflow."""
    u = np.asarray(u, dtype=float)
    Cn = _as_cutoff(Cn)
    kk = kernel(u / Cn)
    pe = _charfn(noise, u)
    active = kk != 0
    if np.any(np.abs(pe[active]) < CHARFN_FLOOR):
        raise NonvanishingViolation(
            f"|p_eps*| drops below {CHARFN_FLOOR:g} inside [-{Cn:g}, {Cn:g}]"
        )
    out = np.zeros(u.shape, dtype=np.result_type(kk, pe, float))
    out[active] = kk[active] / pe[active]
    return out


class SpectralGrid:
    """Gauss-Legendre frequency nodes on ``[-U, U]`` with smoothing multipliers.

    Parameters
    ----------
    noise : NoiseModel or None
        ``None`` means no deconvolution (``p_eps* ≡ 1``).
    cutoff : float
        Half-width ``U`` of the frequency window (``Cn`` for kernel smoothing).
    kernel : KernelSpec
        Kernel transform, evaluated at ``u / cutoff``.
    zmax : float
        Largest ``|z|`` the grid has to resolve.
    level : int
        Number of panel halvings relative to the base layout.
    """

    def __init__(self, noise, cutoff, kernel=SINC, zmax=1.0, quad=DEFAULT_QUAD, level=0):
        self.noise = noise
        self.cutoff = _as_cutoff(cutoff)
        self.kernel = kernel
        self.zmax = float(zmax)
        self.quad = quad
        self.level = int(level)
        width = min(1.0, math.pi / max(self.zmax, 1e-300)) / quad.panels_per_unit
        width /= 2.0**self.level
        # even panel count keeps the node set symmetric about zero
        m = 2 * max(1, int(math.ceil(self.cutoff / width - 1e-12)))
        self.u, self.weights = panel_rule(-self.cutoff, self.cutoff, 2 * self.cutoff / m, quad.order)
        self.mult = self.weights * kernel_multiplier(kernel, noise, self.cutoff, self.u) / TWO_PI

    def refined(self) -> "SpectralGrid":
        return SpectralGrid(
            self.noise, self.cutoff, self.kernel, self.zmax, self.quad, self.level + 1
        )

    def __len__(self):
        return self.u.size

    def phases(self, z) -> np.ndarray:
        """Matrix ``exp(-i u_k z_i)`` with rows indexed by ``z``."""
        return np.exp(-1j * np.outer(np.asarray(z, dtype=float), self.u))

    def apply(self, psi_hat, z) -> np.ndarray:
        """Smooth a function given by its transform values at the grid nodes.

        ``psi_hat`` has shape ``(K,)`` or ``(..., K)``; the result has shape
        ``(..., len(z))``.
        """
        z = np.atleast_1d(np.asarray(z, dtype=float))
        coef = np.asarray(psi_hat) * self.mult
        lead = coef.shape[:-1]
        coef2 = coef.reshape(-1, coef.shape[-1])
        out = np.empty((coef2.shape[0], z.size), dtype=complex)
        step = max(1, _CHUNK // max(1, self.u.size))
        for s in range(0, z.size, step):
            out[:, s : s + step] = (self.phases(z[s : s + step]) @ coef2.T).T
        return self.real_part(out.reshape(*lead, z.size))

    def contract(self, psi_hat, spectrum) -> np.ndarray:
        """``Re ∑_k mult_k psi*(u_k) spectrum(u_k)`` over the last axis."""
        return self.real_part(np.sum(np.asarray(psi_hat) * self.mult * spectrum, axis=-1))

    def real_part(self, values):
        values = np.asarray(values)
        if np.iscomplexobj(values):
            re, im = values.real, values.imag
            bad = np.abs(im) > self.quad.residue_rtol * (1.0 + np.abs(re))
            if np.any(bad):
                raise QuadratureFailure(
                    f"imaginary residue {np.max(np.abs(im[bad])):.3g} exceeds tolerance"
                )
            return re
        return values


def _converged(prev, cur, quad: QuadratureSpec) -> bool:
    prev = np.asarray(prev)
    cur = np.asarray(cur)
    scale = float(np.max(np.abs(cur))) if cur.size else 0.0
    return bool(np.max(np.abs(cur - prev), initial=0.0) <= quad.rtol * scale + quad.atol)


def adaptive(evaluate, noise, cutoff, kernel=SINC, zmax=1.0, quad=DEFAULT_QUAD):
    """Refine a :class:`SpectralGrid` until ``evaluate(grid)`` stabilises.

    Returns ``(value, grid)`` where ``grid`` is the finer of the two agreeing levels.
    """
    grid = SpectralGrid(noise, cutoff, kernel, zmax, quad, level=0)
    prev = evaluate(grid)
    for _ in range(quad.max_depth):
        grid = grid.refined()
        cur = evaluate(grid)
        if _converged(prev, cur, quad):
            return cur, grid
        prev = cur
    raise QuadratureFailure(
        f"no convergence after {quad.max_depth} refinements (cutoff={cutoff:g}, zmax={zmax:g})"
    )


def _zmax(z) -> float:
    z = np.asarray(z, dtype=float)
    return max(1.0, float(np.max(np.abs(z)))) if z.size else 1.0


def _transform_of(psi) -> Callable:
    if psi is None:
        raise MissingFourierTransform("no target given")
    if hasattr(psi, "fourier"):
        return psi.fourier
    if callable(psi):
        return psi
    raise MissingFourierTransform(f"{psi!r} has no Fourier transform")


def deconv_kernel_value(kernel: KernelSpec, noise, Cn, x, quad=DEFAULT_QUAD):
    """Deconvolution kernel ``K_{n,Cn}(x)``; scalar in, scalar out."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    val, _ = adaptive(
        lambda g: g.apply(np.ones_like(g.u), x_arr), noise, Cn, kernel, _zmax(x_arr), quad
    )
    return val if np.ndim(x) else float(val[0])


def deconv_kernel_mass(kernel: KernelSpec, noise, Cn) -> float:
    """``∫ K_{n,Cn} = K*(0) / p_eps*(0)``, through the same multiplier used by the grids."""
    if not isinstance(kernel, KernelSpec):
        raise InvariantViolation("kernel must be a KernelSpec")
    at0 = kernel(np.array([0.0]))[0]
    if abs(at0 - 1.0) > 1e-12:
        raise InvariantViolation(f"K*(0) must equal 1, got {at0}")
    return float(np.real(kernel_multiplier(kernel, noise, Cn, np.array([0.0]))[0]))


def smoothed_functional(psi, noise, kernel, Cn, z, quad=DEFAULT_QUAD):
    """``(psi ⋆ K_{n,Cn})(z)`` computed in the frequency domain.

    ``psi`` is either an object with a ``fourier(u)`` method or a callable
    returning ``psi*(u)``.
    """
    fourier = _transform_of(psi)
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    val, _ = adaptive(lambda g: g.apply(fourier(g.u), z_arr), noise, Cn, kernel, _zmax(z_arr), quad)
    return val if np.ndim(z) else float(val[0])


# ---------------------------------------------------------------------------
# Numeric Fourier transforms
# ---------------------------------------------------------------------------


class XQuadrature:
    """Composite Gauss-Legendre rule in ``x`` used to transform tabulated functions."""

    def __init__(self, support, u_max, breakpoints=(), quad=DEFAULT_QUAD, level=0):
        a, b = map(float, support)
        self.support = (a, b)
        self.u_max = float(u_max)
        self.breakpoints = tuple(breakpoints)
        self.quad = quad
        self.level = level
        width = min(1.0, math.pi / max(self.u_max, 1.0)) / quad.panels_per_unit / 2.0**level
        self.x, self.weights = panel_rule(a, b, width, quad.order, self.breakpoints)
        self._phase_cache: tuple | None = None

    def refined(self) -> "XQuadrature":
        return XQuadrature(self.support, self.u_max, self.breakpoints, self.quad, self.level + 1)

    def phase_matrix(self, u) -> np.ndarray:
        """``weights_j exp(i u_k x_j)``, cached for the last ``u`` seen."""
        u = np.asarray(u, dtype=float)
        cache = self._phase_cache
        if cache is not None and cache[0].shape == u.shape and np.array_equal(cache[0], u):
            return cache[1]
        mat = np.exp(1j * np.outer(u, self.x)) * self.weights
        if mat.size <= 4 * _CHUNK:
            self._phase_cache = (u.copy(), mat)
        return mat

    def transform(self, values, u) -> np.ndarray:
        """Transform ``values`` tabulated at ``self.x``; extra leading axes are batched."""
        values = np.asarray(values)
        u = np.asarray(u, dtype=float)
        if u.size * self.x.size > 4 * _CHUNK:
            flat = values.reshape(-1, self.x.size)
            out = np.stack([FourierConvention.forward(v, self.x, self.weights, u) for v in flat])
            return out.reshape(*values.shape[:-1], u.size)
        return values @ self.phase_matrix(u).T


@dataclass(frozen=True)
class TabulatedTransform:
    """A complex function of frequency known on a grid, linearly interpolated."""

    u: np.ndarray
    values: np.ndarray

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        re = np.interp(u, self.u, self.values.real, left=0.0, right=0.0)
        im = np.interp(u, self.u, self.values.imag, left=0.0, right=0.0)
        return re + 1j * im

    fourier = __call__


def tail_mass(f, support, order=64) -> tuple[float, float]:
    """Return ``(mass inside, mass in the two flanking intervals of equal length)``."""
    a, b = map(float, support)
    L = b - a
    xi, wi = panel_rule(a, b, L / 64, order)
    xo, wo = panel_rule(b, b + L, L / 64, order)
    xl, wl = panel_rule(a - L, a, L / 64, order)
    inside = float(np.abs(f(xi)) @ wi)
    outside = float(np.abs(f(xo)) @ wo + np.abs(f(xl)) @ wl)
    return inside, outside


def numeric_fourier_transform(
    f: Callable,
    support,
    grid: QuadratureSpec = DEFAULT_QUAD,
    u_max: float = 50.0,
    n_freq: int = 2001,
    breakpoints=(),
    tail_tol: float = 1e-10,
) -> TabulatedTransform:
    """Tabulate ``f*(u) = ∫ exp(iux) f(x) dx`` on ``[-u_max, u_max]``.

    The x-integral is refined until two panel levels agree on the frequency grid.
    Emits :class:`SupportTruncationWarning` when ``f`` has non-negligible mass
    just outside ``support``.
    """
    inside, outside = tail_mass(f, support)
    if outside > tail_tol * max(inside, 1e-300):
        warnings.warn(
            f"mass outside support {support} is {outside:.3g} (inside {inside:.3g})",
            SupportTruncationWarning,
            stacklevel=2,
        )
    n_half = n_freq // 2
    half = np.linspace(0.0, u_max, n_half + 1)
    u = np.concatenate([-half[:0:-1], half])
    xq = XQuadrature(support, u_max, breakpoints, grid)
    prev = xq.transform(f(xq.x), half)
    for _ in range(grid.max_depth):
        xq = xq.refined()
        cur = xq.transform(f(xq.x), half)
        if _converged(prev, cur, grid):
            break
        prev = cur
    else:
        raise QuadratureFailure("numeric Fourier transform did not converge")
    # real input: the negative half is the conjugate mirror
    values = np.concatenate([np.conj(cur[:0:-1]), cur])
    return TabulatedTransform(u, values)
