"""Design-free auxiliary functions ``Phi_1, Phi_2, Phi_3`` of the observed ``Z``.

They satisfy, for every design density,

    E Phi_1(Z) = E[w f_theta^2 (X)],   E[Y Phi_2(Z)] = E[Y (w f_theta)(X)],   E Phi_3(Z) = E w(X),

so that the criterion ``mean[(Y^2 - s2) Phi_3 - 2 Y Phi_2 + Phi_1]`` is unbiased for the
population weighted least-squares criterion without any kernel smoothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonvanishingViolation, RatioNotIntegrable
from .models.targets import TargetTriple
from .spectral import CHARFN_FLOOR, DEFAULT_QUAD, SINC, SpectralGrid, adaptive

PHI_SOURCES = ("closedFormExponential", "closedFormCosine", "fourierRatio")


class PhiTriple:
    """Base class: ``evaluate(theta, z, order)`` returns ``[values, grads, hessians][:order+1]``.

    Shapes are ``(3, n)``, ``(3, d, n)`` and ``(3, d, d, n)`` with rows ordered
    ``Phi_1, Phi_2, Phi_3``.
    """

    source: str = ""
    d: int = 1

    def evaluate(self, theta, z, order=0):
        raise NotImplementedError

    def at(self, theta) -> "BoundPhi":
        return BoundPhi(self, np.atleast_1d(np.asarray(theta, dtype=float)))


@dataclass(frozen=True)
class BoundPhi:
    """A :class:`PhiTriple` at a fixed parameter, exposing ``phi1, phi2, phi3`` of ``z``."""

    parent: PhiTriple
    theta: np.ndarray

    def _row(self, j, z):
        z_arr = np.atleast_1d(np.asarray(z, dtype=float))
        out = self.parent.evaluate(self.theta, z_arr, 0)[0][j]
        return out if np.ndim(z) else float(out[0])

    def phi1(self, z):
        return self._row(0, z)

    def phi2(self, z):
        return self._row(1, z)

    def phi3(self, z):
        return self._row(2, z)


class ExponentialPhi(PhiTriple):
    """``Phi_2 = e^{theta z} / E e^{theta eps}``, ``Phi_1 = e^{2 theta z} / E e^{2 theta eps}``, ``Phi_3 = 1``.

    Pairs with ``f_theta(x) = exp(theta x)`` and ``w = 1``.
    """

    source = "closedFormExponential"
    d = 1

    def __init__(self, noise):
        self.noise = noise

    def _piece(self, scale, theta, z, order):
        s = scale * theta
        m, m1, m2 = (np.asarray(v, dtype=float) for v in self.noise.mgf_derivatives(s))
        h = np.exp(s * z) / m
        out = [h]
        if order >= 1:
            q = m1 / m
            out.append(scale * (z - q) * h)
        if order >= 2:
            out.append(scale**2 * ((z - q) ** 2 - (m2 / m - q**2)) * h)
        return out

    def evaluate(self, theta, z, order=0):
        (t,) = np.atleast_1d(np.asarray(theta, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        p1 = self._piece(2.0, t, z, order)
        p2 = self._piece(1.0, t, z, order)
        one = np.ones_like(z)
        out = [np.stack([p1[0], p2[0], one])]
        if order >= 1:
            out.append(np.stack([p1[1], p2[1], 0 * one])[:, None, :])
        if order >= 2:
            out.append(np.stack([p1[2], p2[2], 0 * one])[:, None, None, :])
        return out


class CosinePhi(PhiTriple):
    """Trigonometric triple for ``f_theta(x) = sum_j theta_j cos(j x)`` with ``w = 1``.

    With ``c_m(z) = Re(e^{imz} / p*(m))`` (and ``c_0 = 1``),
    ``Phi_2 = sum_j theta_j c_j`` and
    ``Phi_1 = sum_{j,k} theta_j theta_k (c_{j+k} + c_{j-k}) / 2``, using
    ``cos a cos b = (cos(a+b) + cos(a-b)) / 2``.
    """

    source = "closedFormCosine"

    def __init__(self, noise, d):
        self.noise = noise
        self.d = int(d)
        freqs = np.arange(-self.d + 1, 2 * self.d + 1, dtype=float)
        pe = np.asarray(noise.charfn(freqs), dtype=complex)
        if np.any(np.abs(pe) < CHARFN_FLOOR):
            bad = freqs[np.abs(pe) < CHARFN_FLOOR]
            raise NonvanishingViolation(f"p_eps* vanishes at integer frequencies {bad}")
        self._inv = {int(m): 1.0 / v for m, v in zip(freqs, pe)}

    def _c(self, m, z):
        if m == 0:
            return np.ones_like(z)
        return np.real(np.exp(1j * m * z) * self._inv[m])

    def evaluate(self, theta, z, order=0):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        d = self.d
        C = np.stack([self._c(j + 1, z) for j in range(d)])  # (d, n)
        M = np.empty((d, d) + z.shape)
        for j in range(d):
            for k in range(d):
                M[j, k] = 0.5 * (self._c(j + k + 2, z) + self._c(j - k, z))
        one = np.ones_like(z)
        out = [np.stack([np.einsum("j,jkn,k->n", theta, M, theta), theta @ C, one])]
        if order >= 1:
            out.append(np.stack([2 * np.einsum("jkn,k->jn", M, theta), C, 0 * C]))
        if order >= 2:
            out.append(np.stack([2 * M, 0 * M, 0 * M]))
        return out


def ratio_cutoff(triple: TargetTriple, noise, theta=None, rtol=1e-13, u_start=1.0, u_limit=1024.0,
                 n_probe=48) -> float:
    """Frequency beyond which every ``|psi_p* / p*|`` (and its gradient) is negligible.

    Raises :class:`RatioNotIntegrable` when the ratio keeps growing or the noise
    characteristic function underflows before the ratio has decayed.
    """
    theta = triple[0].theta_ref if theta is None else theta
    peak = 0.0
    U = u_start
    lo = 0.0
    while U <= u_limit:
        u = np.linspace(lo, 2 * U, n_probe)
        pe = np.abs(noise.charfn(u))
        mag = np.zeros_like(u)
        for tgt in triple.targets:
            vals = tgt.fourier_derivatives(theta, u, 1)
            mag = np.maximum(mag, np.abs(vals[0]))
            mag = np.maximum(mag, np.max(np.abs(vals[1]), axis=0))
        if np.any(pe < CHARFN_FLOOR):
            raise RatioNotIntegrable(
                f"noise characteristic function underflows near |u| = {u[pe < CHARFN_FLOOR][0]:.3g} "
                "before the target transforms have decayed"
            )
        ratio = mag / pe
        tail = float(ratio[u >= U].max())
        peak = max(peak, float(ratio.max()))
        if tail <= rtol * peak:
            return float(U)
        lo, U = 2 * U, 2 * U
    raise RatioNotIntegrable(f"target / noise ratio still of size {tail:.3g} beyond |u| = {u_limit:g}")


class RatioPhi(PhiTriple):
    """``Phi_j`` as inverse transforms of ``psi_p* / p*`` over the whole line.

    Rows map ``Phi_1 <- w f^2``, ``Phi_2 <- w f``, ``Phi_3 <- w``.  The integral is
    truncated at the cutoff returned by :func:`ratio_cutoff`.
    """

    source = "fourierRatio"

    def __init__(self, triple: TargetTriple, noise, cutoff=None, quad=DEFAULT_QUAD):
        self.triple = triple
        self.noise = noise
        self.d = triple.d
        self.cutoff = ratio_cutoff(triple, noise) if cutoff is None else float(cutoff)
        self.quad = quad
        self._grid_cache: dict = {}

    def grid(self, zmax, theta=None) -> SpectralGrid:
        key = math.ceil(max(zmax, 1.0))
        if key not in self._grid_cache:
            probe = np.linspace(-key, key, 33)
            th = self.triple[0].theta_ref if theta is None else theta
            _, g = adaptive(
                lambda gr: self._apply(gr, th, probe, 1)[1].ravel(),
                self.noise, self.cutoff, SINC, key, self.quad,
            )
            self._grid_cache[key] = g
        return self._grid_cache[key]

    def _apply(self, grid, theta, z, order):
        per_p = self.triple.fourier_derivatives(theta, grid.u, order)
        out = []
        for o in range(order + 1):
            # rows Phi_1, Phi_2, Phi_3 correspond to p = 2, 1, 0
            stack = np.stack([per_p[2][o], per_p[1][o], per_p[0][o]])
            out.append(grid.apply(stack, z))
        return out

    def evaluate(self, theta, z, order=0):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        grid = self.grid(float(np.max(np.abs(z))) if z.size else 1.0)
        return self._apply(grid, theta, z, order)


def phi_exponential(noise) -> ExponentialPhi:
    return ExponentialPhi(noise)


def phi_cosine(noise, d: int) -> CosinePhi:
    return CosinePhi(noise, d)


def phi_from_fourier_ratio(weight, regression, noise, theta=None, quad=DEFAULT_QUAD) -> RatioPhi:
    """Build the ratio triple for ``(w, f_theta)``; ``theta`` sets the tail-search point."""
    triple = TargetTriple(weight, regression, theta_ref=theta, quad=quad)
    return RatioPhi(triple, noise, ratio_cutoff(triple, noise, theta), quad)
