"""Weighted targets ``psi = w * f_theta^p`` and their Fourier transforms.

Two transform sources are available:

* **Gaussian class** (analytic).  When ``w f^p`` expands into a finite sum of
  ``c(theta) x^k exp(lambda(theta) x - gamma x^2)`` with ``gamma > 0`` free of
  ``theta``, each term has the closed-form transform

      2 sqrt(pi beta) exp(beta s^2) E[N^k],   s = lambda + iu,  beta = 1/(4 gamma),

  where ``N ~ Normal(2 beta s, 2 beta)`` (complex mean).  Theta-derivatives follow
  from the chain rule through ``c`` and ``lambda``, which raise the moment order.
* **Numeric**.  Otherwise ``psi`` is tabulated on Gauss-Legendre nodes over an
  effective support and transformed by direct quadrature.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from ..errors import InvariantViolation, NotIntegrable, QuadratureFailure
from ..spectral import DEFAULT_QUAD, QuadratureSpec, XQuadrature, panel_rule
from .families import X, RegressionFamily
from .weights import WeightSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SmoothnessR1:
    """Decay envelope ``lower <= |psi*(u)| |u|^a exp(b |u|^r) <= upper`` for ``|u| >= u0``."""

    a: float
    b: float
    r: float
    u0: float = 1.0
    lower: float = 0.0
    upper: float = math.inf
    source: str = "analytic"

    def envelope(self, u):
        u = np.abs(np.asarray(u, dtype=float))
        return u ** (-self.a) * np.exp(-self.b * u**self.r)


# ---------------------------------------------------------------------------
# Gaussian-class decomposition
# ---------------------------------------------------------------------------


class _NotGaussianClass(Exception):
    pass


def _split_term(term):
    """Return ``(coef, k, exponent)`` with ``term = coef * x^k * exp(exponent)``."""
    coef, k, expo = sp.Integer(1), 0, sp.Integer(0)
    for fac in sp.Mul.make_args(term):
        if isinstance(fac, sp.exp):
            expo += fac.args[0]
        elif fac.is_Pow and isinstance(fac.base, sp.exp):
            expo += fac.base.args[0] * fac.exp
        elif fac == X:
            k += 1
        elif fac.is_Pow and fac.base == X and fac.exp.is_Integer and fac.exp >= 0:
            k += int(fac.exp)
        elif fac.has(X):
            raise _NotGaussianClass(str(fac))
        else:
            coef *= fac
    return coef, k, expo


def _gaussian_terms(expr, symbols):
    expr = sp.expand(sp.cancel(sp.sympify(expr).rewrite(sp.exp)))
    if expr == 0:
        return []
    terms = []
    for term in sp.Add.make_args(expr):
        coef, k, expo = _split_term(term)
        poly = sp.Poly(sp.expand(expo), X)
        if poly.degree() != 2:
            raise _NotGaussianClass("exponent is not quadratic in x")
        c2, c1, c0 = (poly.coeff_monomial(X**j) for j in (2, 1, 0))
        if c2.free_symbols or not (sp.re(c2) < 0) or sp.im(c2) != 0:
            raise _NotGaussianClass("x^2 coefficient must be a negative constant")
        terms.append((coef * sp.exp(c0), k, c1, float(-c2)))
    return terms


class GaussianClassTransform:
    """Analytic evaluator for sums of ``c x^k exp(lambda x - gamma x^2)``."""

    def __init__(self, terms, symbols):
        self.symbols = tuple(symbols)
        d = len(self.symbols)
        self.k = np.array([t[1] for t in terms], dtype=int)
        self.gamma = np.array([t[3] for t in terms], dtype=float)
        self.beta = 1.0 / (4.0 * self.gamma)
        cs = [t[0] for t in terms]
        ls = [t[2] for t in terms]
        args = self.symbols
        dc = [[sp.diff(c, s) for s in args] for c in cs]
        dl = [[sp.diff(lam, s) for s in args] for lam in ls]
        d2c = [[[sp.diff(e, s) for s in args] for e in row] for row in dc]
        d2l = [[[sp.diff(e, s) for s in args] for e in row] for row in dl]
        self._fns = [sp.lambdify(args, obj, "numpy") for obj in (cs, ls, dc, dl, d2c, d2l)]
        self.d = d
        self.kmax = int(self.k.max()) if len(self.k) else 0

    def __len__(self):
        return len(self.k)

    def params(self, theta, order):
        theta = tuple(np.atleast_1d(np.asarray(theta, dtype=float)))
        T = len(self.k)
        out = []
        shapes = [(T,), (T,), (T, self.d), (T, self.d), (T, self.d, self.d), (T, self.d, self.d)]
        for fn, shape in zip(self._fns[: 2 * (order + 1)], shapes):
            out.append(np.asarray(fn(*theta), dtype=complex).reshape(shape))
        return out

    def _basis(self, lam, points, order, fourier):
        """Basis ``B_{k+j}`` for ``j = 0..order`` at ``points``; shape ``(order+1, T, P)``."""
        T = len(self.k)
        beta = self.beta[:, None]
        pts = np.asarray(points, dtype=float)[None, :]
        if fourier:
            s = lam[:, None] + 1j * pts
            base = 2.0 * np.sqrt(np.pi * beta) * np.exp(beta * s * s)
            mean = 2.0 * beta * s
            var = 2.0 * beta
            mom = [np.ones_like(s), mean]
            for j in range(2, self.kmax + order + 1):
                mom.append(mean * mom[-1] + (j - 1) * var * mom[-2])
            mom = np.stack(mom[: self.kmax + order + 1])
        else:
            base = np.exp(lam[:, None] * pts - self.gamma[:, None] * pts * pts)
            mom = np.stack([np.broadcast_to(pts**j, (T, pts.shape[1])) for j in range(self.kmax + order + 1)])
        idx = np.arange(T)
        return np.stack([mom[self.k + j, idx, :] * base for j in range(order + 1)])

    def evaluate(self, theta, points, order=0, fourier=True):
        """Return ``[value, grad, hess][:order+1]`` with shapes ``(P,), (d,P), (d,d,P)``."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        if len(self.k) == 0:
            z = np.zeros(points.shape, dtype=complex)
            return [z, np.zeros((self.d,) + z.shape, complex), np.zeros((self.d, self.d) + z.shape, complex)][: order + 1]
        prm = self.params(theta, order)
        c, lam = prm[0], prm[1]
        B = self._basis(lam, points, order, fourier)
        out = [np.einsum("t,tp->p", c, B[0])]
        if order >= 1:
            dc, dl = prm[2], prm[3]
            out.append(np.einsum("tj,tp->jp", dc, B[0]) + np.einsum("t,tj,tp->jp", c, dl, B[1]))
        if order >= 2:
            d2c, d2l = prm[4], prm[5]
            cross = np.einsum("tj,tl->tjl", dc, dl)
            out.append(
                np.einsum("tjl,tp->jlp", d2c, B[0])
                + np.einsum("tjl,tp->jlp", cross + cross.transpose(0, 2, 1), B[1])
                + np.einsum("t,tjl,tp->jlp", c, d2l, B[1])
                + np.einsum("t,tj,tl,tp->jlp", c, dl, dl, B[2])
            )
        return out


def gaussian_class(expr, symbols):
    """Try to build a :class:`GaussianClassTransform`; ``None`` if ``expr`` is not of that form."""
    try:
        return GaussianClassTransform(_gaussian_terms(expr, symbols), symbols)
    except (_NotGaussianClass, sp.PolynomialError, sp.GeneratorsNeeded, TypeError, ValueError) as exc:
        logger.debug("no Gaussian-class form for %s: %s", expr, exc)
        return None


# ---------------------------------------------------------------------------
# Target families
# ---------------------------------------------------------------------------


def _fit_r1(u, mag, u0, r_values=None):
    """Least-squares fit of ``log|psi*| ~ c - a log u - b u^r`` over a grid of ``r``.

    ``r_values`` restricts the search (for weights whose exponent is known).
    """
    env = np.maximum.accumulate(mag[::-1])[::-1]
    keep = (u >= u0) & (env > 1e-13 * env.max())
    u, env = u[keep], env[keep]
    if u.size < 5:
        raise QuadratureFailure("too few resolvable tail points to fit smoothness")
    y = np.log(env)
    best = None
    grid = np.round(np.arange(0.0, 2.01, 0.1), 10) if r_values is None else np.asarray(r_values, dtype=float)
    for r in grid:
        if r == 0:
            A = np.column_stack([np.ones_like(u), -np.log(u)])
        else:
            A = np.column_stack([np.ones_like(u), -np.log(u), -(u**r)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        if r > 0 and coef[2] < 0:
            continue
        res = float(np.sum((A @ coef - y) ** 2))
        if best is None or res < best[0] - 1e-12:
            best = (res, r, coef[1], coef[2] if r > 0 else 0.0)
    _, r, a, b = best
    return float(a), float(b), float(r)


def generic_theta(family: RegressionFamily) -> np.ndarray:
    """An off-centre point of the box, unlikely to make a target vanish identically."""
    lo, hi = family.bounds[:, 0], family.bounds[:, 1]
    frac = (0.618 + 0.137 * np.arange(family.d)) % 1.0
    return lo + frac * (hi - lo)


class TargetFamily:
    """``psi(theta, x) = w_theta(x) f_theta(x)^p`` as a function of ``theta``.

    Parameters
    ----------
    weight : WeightSpec
    family : RegressionFamily
    p : {0, 1, 2}
    theta_ref : array_like, optional
        Parameter value used for integrability and support checks (box centre by default).
    quad : QuadratureSpec
        Refinement rule for numeric transforms.
    force_numeric : bool
        Skip the analytic route (used by oracles).
    """

    def __init__(self, weight: WeightSpec, family: RegressionFamily, p: int, theta_ref=None,
                 quad: QuadratureSpec = DEFAULT_QUAD, force_numeric: bool = False):
        if p not in (0, 1, 2):
            raise InvariantViolation("power p must be 0, 1 or 2")
        if weight.theta_dependent and weight.d != family.d:
            raise InvariantViolation("theta-dependent weight and family disagree on dimension")
        self.weight = weight
        self.family = family
        self.p = p
        self.d = family.d
        self.quad = quad
        self.theta_ref = generic_theta(family) if theta_ref is None else family.check_theta(theta_ref)
        self.breakpoints = tuple(sorted(set(weight.breakpoints) | set(family.breakpoints)))
        self.analytic = None
        if weight.expr is not None and not force_numeric:
            self.analytic = gaussian_class(weight.expr * family.expr**p, family.symbols)
        self._xq_cache: dict[float, XQuadrature] = {}
        self.support = None
        if self.analytic is None:
            self.support = self._effective_support()
        self._smoothness = None

    @property
    def source(self) -> str:
        return "analytic" if self.analytic is not None else "numeric"

    def __repr__(self):
        return f"TargetFamily(w={self.weight.kind}, f={self.family.name}, p={self.p}, {self.source})"

    # -- x-space -----------------------------------------------------------

    def values(self, theta, x):
        theta = self.family.check_theta(theta)
        w = self.weight.evaluate(x, theta)
        return w * self.family.evaluate(theta, x) ** self.p

    __call__ = values

    def _powers(self, theta, x, order):
        f = self.family.evaluate(theta, x)
        p = self.p
        F = f**p
        if order == 0:
            return F, None, None
        g = self.family.grad(theta, x)
        dF = p * f ** max(p - 1, 0) * g if p else np.zeros_like(g)
        if order == 1:
            return F, dF, None
        h = self.family.hess(theta, x)
        if p == 0:
            d2F = np.zeros_like(h)
        elif p == 1:
            d2F = h
        else:
            d2F = 2 * f * h + 2 * np.einsum("i...,j...->ij...", g, g)
        return F, dF, d2F

    def grad(self, theta, x):
        theta = self.family.check_theta(theta)
        x = np.asarray(x, dtype=float)
        F, dF, _ = self._powers(theta, x, 1)
        w = self.weight.evaluate(x, theta)
        dw = self.weight.grad(x, theta, self.d)
        return dw * F + w * dF

    def hess(self, theta, x):
        theta = self.family.check_theta(theta)
        x = np.asarray(x, dtype=float)
        F, dF, d2F = self._powers(theta, x, 2)
        w = self.weight.evaluate(x, theta)
        dw = self.weight.grad(x, theta, self.d)
        d2w = self.weight.hess(x, theta, self.d)
        cross = np.einsum("i...,j...->ij...", dw, dF)
        return d2w * F + cross + np.swapaxes(cross, 0, 1) + w * d2F

    def x_derivatives(self, theta, x, order):
        out = [self.values(theta, x)]
        if order >= 1:
            out.append(self.grad(theta, x))
        if order >= 2:
            out.append(self.hess(theta, x))
        return out

    # -- support and integrability ------------------------------------------

    def _effective_support(self, tol=1e-14, start=4.0, max_halfwidth=4096.0):
        if self.weight.support is not None:
            return self.weight.support
        f = lambda x: np.abs(self.values(self.theta_ref, x))  # noqa: E731
        L = start
        while L <= max_halfwidth:
            xi, wi = panel_rule(-L, L, min(1.0, L / 32), 16, self.breakpoints)
            xo, wo = panel_rule(L, 2 * L, min(1.0, L / 32), 16)
            inner = float(f(xi) @ wi)
            outer = float(f(xo) @ wo + f(-xo) @ wo)
            if not np.isfinite(inner + outer):
                break
            if outer <= tol * max(inner, 1e-300) or (inner == 0.0 and outer == 0.0):
                return (-L, L)
            L *= 2
        raise NotIntegrable(
            f"{self.weight.kind} * {self.family.name}^{self.p} is not integrable "
            f"(tail mass persists beyond |x| = {max_halfwidth:g})"
        )

    def xquad(self, u_max: float) -> XQuadrature:
        """Certified x-quadrature able to resolve frequencies up to ``u_max``."""
        key = float(2.0 ** math.ceil(math.log2(max(u_max, 1.0))))
        if key in self._xq_cache:
            return self._xq_cache[key]
        probe = np.linspace(0.0, key, 65)
        xq = XQuadrature(self.support, key, self.breakpoints, self.quad)
        prev = xq.transform(self.values(self.theta_ref, xq.x), probe)
        for _ in range(self.quad.max_depth):
            nxt = xq.refined()
            cur = nxt.transform(self.values(self.theta_ref, nxt.x), probe)
            scale = float(np.max(np.abs(cur)))
            if np.max(np.abs(cur - prev)) <= 1e-10 * scale + 1e-14:
                break
            xq, prev = nxt, cur
        else:
            raise QuadratureFailure(f"numeric transform of {self!r} did not converge")
        # keep the coarser of the two agreeing levels
        self._xq_cache[key] = xq
        return xq

    # -- Fourier side -----------------------------------------------------

    def fourier_derivatives(self, theta, u, order=0):
        """``[psi*, grad psi*, hess psi*][:order+1]`` at frequencies ``u``."""
        theta = self.family.check_theta(theta)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.analytic is not None:
            return self.analytic.evaluate(theta, u, order, fourier=True)
        xq = self.xquad(float(np.max(np.abs(u))) if u.size else 1.0)
        vals = self.x_derivatives(theta, xq.x, order)
        return [xq.transform(v, u) for v in vals]

    def fourier(self, theta, u):
        return self.fourier_derivatives(theta, u, 0)[0]

    def fourier_grad(self, theta, u):
        return self.fourier_derivatives(theta, u, 1)[1]

    def fourier_hess(self, theta, u):
        return self.fourier_derivatives(theta, u, 2)[2]

    # -- smoothness -------------------------------------------------------

    @property
    def registered_r(self):
        """Known tail exponent carried by the weight, if any."""
        reg = self.weight.smoothness
        return None if not reg or "r" not in reg else (float(reg["r"]),)

    def smoothness(self, theta=None, u0: float = 1.0) -> SmoothnessR1:
        if self._smoothness is not None and theta is None:
            return self._smoothness
        theta = self.theta_ref if theta is None else self.family.check_theta(theta)
        if self.analytic is not None and len(self.analytic):
            b = float(self.analytic.beta.min())
            # slowest-decaying term: smallest Gaussian width in u, then highest power
            a = -float(self.analytic.k[np.isclose(self.analytic.beta, b)].max())
            r = 2.0
            src = "analytic"
        elif self.analytic is not None:
            return SmoothnessR1(0.0, 0.0, 0.0, u0, 0.0, 0.0, "analytic")
        else:
            u = np.linspace(u0, 100.0, 800)
            a, b, r = _fit_r1(u, np.abs(self.fourier(theta, u)), u0, self.registered_r)
            src = "fitted"
        grid = np.linspace(u0, 10 * u0, 200)
        scaled = np.abs(self.fourier(theta, grid)) * grid**a * np.exp(b * grid**r)
        res = SmoothnessR1(a, b, r, u0, float(scaled.min()), float(scaled.max()), src)
        if theta is self.theta_ref:
            self._smoothness = res
        return res

    def bind(self, theta) -> "WeightedTarget":
        return WeightedTarget(self, self.family.check_theta(theta).copy())


@dataclass(frozen=True)
class WeightedTarget:
    """A :class:`TargetFamily` frozen at one parameter value."""

    parent: TargetFamily
    theta: np.ndarray = field(repr=False)

    @property
    def p(self):
        return self.parent.p

    @property
    def weight(self):
        return self.parent.weight

    @property
    def regression(self):
        return self.parent.family

    @property
    def source(self):
        return self.parent.source

    def __call__(self, x):
        return self.parent.values(self.theta, x)

    def grad(self, x):
        return self.parent.grad(self.theta, x)

    def hess(self, x):
        return self.parent.hess(self.theta, x)

    def fourier(self, u):
        return self.parent.fourier(self.theta, u)

    def fourier_grad(self, u):
        return self.parent.fourier_grad(self.theta, u)

    def fourier_hess(self, u):
        return self.parent.fourier_hess(self.theta, u)

    @property
    def smoothness(self) -> SmoothnessR1:
        return self.parent.smoothness(self.theta)


def build_weighted_target(weight: WeightSpec, regression: RegressionFamily, p: int, theta,
                          quad: QuadratureSpec = DEFAULT_QUAD) -> WeightedTarget:
    """Bind ``w * f_theta^p`` at ``theta``; raises :class:`NotIntegrable` for non-L1 products."""
    theta = regression.check_theta(theta)
    return TargetFamily(weight, regression, p, theta_ref=theta, quad=quad).bind(theta)


class TargetTriple:
    """The three targets ``w``, ``w f``, ``w f^2`` used by every criterion."""

    def __init__(self, weight, family, theta_ref=None, quad=DEFAULT_QUAD, force_numeric=False):
        self.weight = weight
        self.family = family
        self.d = family.d
        self.targets = tuple(
            TargetFamily(weight, family, p, theta_ref, quad, force_numeric) for p in (0, 1, 2)
        )

    def __getitem__(self, p):
        return self.targets[p]

    def fourier_derivatives(self, theta, u, order=0):
        """List over ``p`` of ``[psi*, grad, hess][:order+1]``."""
        return [t.fourier_derivatives(theta, u, order) for t in self.targets]
