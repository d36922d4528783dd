"""Empirical criteria, their theta-gradients and Hessians.

Kernel criteria (``tilde1``, ``hat1``) average the expansion

    (Y^2 - s2) (w ⋆ K)(Z) - 2 Y (w f ⋆ K)(Z) + (w f^2 ⋆ K)(Z)

where ``K = K_{n,Cn}`` is the deconvolution kernel and ``s2`` is the response-noise
variance (zero for ``tilde1``).  In the frequency domain this is

    Re sum_k m_k [ (phi_2 - s2 phi_0) psi_0*(u_k) - 2 phi_1 psi_1*(u_k) + phi_0 psi_2*(u_k) ],

with ``phi_j(u) = mean_i Y_i^j exp(-i u Z_i)`` the empirical characteristic
function of the sample and ``m_k`` the quadrature weight times ``K*(u/Cn)/(2π p*(u))``.
The sample enters only through ``phi_j``, computed once, so each criterion
evaluation costs ``O(#nodes)``.

Auxiliary-function criteria (``tilde2``, ``hat2``) average
``(Y^2 - s2) Phi_3(Z) - 2 Y Phi_2(Z) + Phi_1(Z)``.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import DimensionMismatch, QuadratureFailure, UnsupportedConfiguration
from .models.targets import TargetTriple
from .phi import PhiTriple, RatioPhi
from .spectral import _CHUNK, DEFAULT_QUAD, SINC, SpectralGrid, _converged


class CriterionKind(str, Enum):
    tilde1 = "tilde1"
    tilde2 = "tilde2"
    hat1 = "hat1"
    hat2 = "hat2"

    @property
    def uses_kernel(self) -> bool:
        return self in (CriterionKind.tilde1, CriterionKind.hat1)

    @property
    def needs_variance(self) -> bool:
        return self in (CriterionKind.hat1, CriterionKind.hat2)


class Criterion:
    """Common interface: ``evaluate(theta, order)`` returns ``(value, grad, hess)``.

    Entries beyond ``order`` are ``None``.
    """

    kind: CriterionKind
    d: int

    def evaluate(self, theta, order=0):
        raise NotImplementedError

    def _theta(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.d,):
            raise DimensionMismatch(f"criterion expects theta in R^{self.d}, got shape {theta.shape}")
        return theta

    def value(self, theta) -> float:
        return self.evaluate(theta, 0)[0]

    def gradient(self, theta) -> np.ndarray:
        return self.evaluate(theta, 1)[1]

    def hessian(self, theta) -> np.ndarray:
        return self.evaluate(theta, 2)[2]

    def scores(self, theta) -> np.ndarray:
        """Per-observation theta-gradients of the criterion summand, shape ``(n, d)``."""
        raise NotImplementedError

    __call__ = value


def empirical_spectrum(Y, Z, u, chunk=_CHUNK) -> np.ndarray:
    """``phi_j(u_k) = mean_i Y_i^j exp(-i u_k Z_i)`` for ``j = 0, 1, 2``; shape ``(3, K)``."""
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n = Y.size
    out = np.zeros((3, u.size), dtype=complex)
    if n == 0:
        return out
    powers = np.stack([np.ones_like(Y), Y, Y * Y])
    step = max(1, chunk // max(1, u.size))
    for s in range(0, n, step):
        ph = np.exp(-1j * np.outer(Z[s : s + step], u))
        out += powers[:, s : s + step] @ ph
    return out / n


class SpectralCriterion(Criterion):
    """Kernel criterion evaluated through the empirical characteristic function.

    With ``kernel = SINC`` and ``cutoff`` set to the ratio-integrability cutoff this
    is also the auxiliary-function criterion built from :class:`~eivreg.phi.RatioPhi`.
    """

    def __init__(self, kind, sample, triple: TargetTriple, noise, cutoff, kernel=SINC, sigma2=0.0,
                 quad=DEFAULT_QUAD, theta_ref=None):
        self.kind = CriterionKind(kind)
        self.triple = triple
        self.d = triple.d
        self.noise = noise
        self.cutoff = float(cutoff)
        self.kernel = kernel
        self.sigma2 = float(sigma2)
        self.Y = np.asarray(sample.Y, dtype=float)
        self.Z = np.asarray(sample.Z, dtype=float)
        self.n = self.Y.size
        zmax = float(np.max(np.abs(self.Z))) if self.n else 1.0
        theta_ref = triple[0].theta_ref if theta_ref is None else self._theta(theta_ref)
        self.grid, self.spectrum = self._adapt(zmax, theta_ref, quad)
        self._coef = np.stack(
            [self.spectrum[2] - self.sigma2 * self.spectrum[0], -2.0 * self.spectrum[1], self.spectrum[0]]
        ) * self.grid.mult
        self._ymult = np.stack([self.Y**2 - self.sigma2, -2.0 * self.Y, np.ones_like(self.Y)])

    def _combine(self, grid, spec, theta, order):
        coef = np.stack([spec[2] - self.sigma2 * spec[0], -2.0 * spec[1], spec[0]]) * grid.mult
        return self._contract(coef, grid.u, theta, order)

    def _contract(self, coef, u, theta, order):
        per_p = self.triple.fourier_derivatives(theta, u, order)
        out = []
        for o in range(order + 1):
            acc = sum(np.tensordot(per_p[p][o], coef[p], axes=([-1], [0])) for p in range(3))
            out.append(np.real(acc))
        return out

    def _adapt(self, zmax, theta, quad):
        grid = SpectralGrid(self.noise, self.cutoff, self.kernel, max(zmax, 1.0), quad)
        spec = empirical_spectrum(self.Y, self.Z, grid.u)
        prev = np.concatenate([np.ravel(v) for v in self._combine(grid, spec, theta, 1)])
        for _ in range(quad.max_depth):
            fine = grid.refined()
            fspec = empirical_spectrum(self.Y, self.Z, fine.u)
            cur = np.concatenate([np.ravel(v) for v in self._combine(fine, fspec, theta, 1)])
            if _converged(prev, cur, quad):
                return fine, fspec
            grid, spec, prev = fine, fspec, cur
        raise QuadratureFailure("criterion frequency grid did not converge")

    def evaluate(self, theta, order=0):
        theta = self._theta(theta)
        res = self._contract(self._coef, self.grid.u, theta, order)
        out = [float(res[0])] + res[1:]
        return tuple(out + [None] * (3 - len(out)))

    def scores(self, theta) -> np.ndarray:
        theta = self._theta(theta)
        per_p = self.triple.fourier_derivatives(theta, self.grid.u, 1)
        smoothed = self.grid.apply(np.stack([per_p[p][1] for p in range(3)]), self.Z)  # (3, d, n)
        return np.einsum("pn,pan->na", self._ymult, smoothed)


class PhiCriterion(Criterion):
    """``mean[(Y^2 - s2) Phi_3(Z) - 2 Y Phi_2(Z) + Phi_1(Z)]`` for any :class:`PhiTriple`."""

    def __init__(self, kind, sample, phi: PhiTriple, sigma2=0.0):
        self.kind = CriterionKind(kind)
        self.phi = phi
        self.d = phi.d
        self.sigma2 = float(sigma2)
        self.Y = np.asarray(sample.Y, dtype=float)
        self.Z = np.asarray(sample.Z, dtype=float)
        self.n = self.Y.size
        self._w = np.stack([np.ones_like(self.Y), -2.0 * self.Y, self.Y**2 - self.sigma2])

    def evaluate(self, theta, order=0):
        theta = self._theta(theta)
        if self.n == 0:
            z = [0.0, np.zeros(self.d), np.zeros((self.d, self.d))]
            return tuple(z[: order + 1] + [None] * (2 - order))
        vals = self.phi.evaluate(theta, self.Z, order)
        out = [float(np.einsum("jn,jn->", self._w, vals[0]) / self.n)]
        if order >= 1:
            out.append(np.einsum("jn,jan->a", self._w, vals[1]) / self.n)
        if order >= 2:
            out.append(np.einsum("jn,jabn->ab", self._w, vals[2]) / self.n)
        return tuple(out + [None] * (3 - len(out)))

    def scores(self, theta) -> np.ndarray:
        theta = self._theta(theta)
        grads = self.phi.evaluate(theta, self.Z, 1)[1]
        return np.einsum("jn,jan->na", self._w, grads)


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------


def _refuse_theta_weight(weight, kind):
    if weight.theta_dependent:
        raise UnsupportedConfiguration(
            f"{kind} needs a theta-free weight; use the hat criteria with a known Var(xi)"
        )


def kernel_criterion(kind, sample, weight, regression, noise, kernel, Cn, sigma2=0.0,
                     theta_ref=None, quad=DEFAULT_QUAD) -> SpectralCriterion:
    kind = CriterionKind(kind)
    if not kind.uses_kernel:
        raise UnsupportedConfiguration(f"{kind.value} is not a kernel criterion")
    if kind is CriterionKind.tilde1:
        _refuse_theta_weight(weight, kind.value)
        sigma2 = 0.0
    triple = TargetTriple(weight, regression, theta_ref=theta_ref, quad=quad)
    return SpectralCriterion(kind, sample, triple, noise, float(Cn), kernel, sigma2, quad, theta_ref)


def phi_criterion(kind, sample, phi: PhiTriple, sigma2=0.0, quad=DEFAULT_QUAD) -> Criterion:
    """Auxiliary-function criterion; ratio triples use the faster spectral route."""
    kind = CriterionKind(kind)
    if kind.uses_kernel:
        raise UnsupportedConfiguration(f"{kind.value} is a kernel criterion")
    if kind is CriterionKind.tilde2:
        if isinstance(phi, RatioPhi):
            _refuse_theta_weight(phi.triple.weight, kind.value)
        sigma2 = 0.0
    if isinstance(phi, RatioPhi):
        return SpectralCriterion(kind, sample, phi.triple, phi.noise, phi.cutoff, SINC, sigma2, quad)
    return PhiCriterion(kind, sample, phi, sigma2)


def criterion_tilde1(sample, theta, weight, regression, noise, kernel, Cn) -> float:
    """Kernel criterion with ``Y^2`` on the weight term (theta-free weight only)."""
    theta = regression.check_theta(theta)
    return kernel_criterion("tilde1", sample, weight, regression, noise, kernel, Cn, 0.0, theta).value(theta)


def criterion_hat1(sample, theta, weight, regression, noise, kernel, Cn, sigma2) -> float:
    """Kernel criterion with ``Y^2 - Var(xi)`` on the weight term; allows ``w_theta``."""
    theta = regression.check_theta(theta)
    return kernel_criterion("hat1", sample, weight, regression, noise, kernel, Cn, sigma2, theta).value(theta)


def criterion_tilde2(sample, theta, phi: PhiTriple) -> float:
    return PhiCriterion("tilde2", sample, phi, 0.0).value(theta)


def criterion_hat2(sample, theta, phi: PhiTriple, sigma2) -> float:
    return PhiCriterion("hat2", sample, phi, sigma2).value(theta)


def _build(kind, sample, theta, **kw):
    kind = CriterionKind(kind)
    if kind.uses_kernel:
        return kernel_criterion(
            kind, sample, kw["weight"], kw["regression"], kw["noise"], kw.get("kernel", SINC),
            kw["Cn"], kw.get("sigma2", 0.0), theta,
        )
    return PhiCriterion(kind, sample, kw["phi"], kw.get("sigma2", 0.0))


def criterion_gradient(kind, sample, theta, **kw) -> np.ndarray:
    """Analytic theta-gradient; keyword arguments as for the matching criterion."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return _build(kind, sample, theta, **kw).gradient(theta)


def criterion_hessian(kind, sample, theta, **kw) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return _build(kind, sample, theta, **kw).hessian(theta)
