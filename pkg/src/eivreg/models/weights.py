"""Weight functions ``w`` (or ``w_theta``) multiplying the squared residual."""

from __future__ import annotations

from typing import Callable

import numpy as np
import sympy as sp

from ..errors import InvariantViolation
from .families import X, theta_symbols

WEIGHT_KINDS = (
    "constantOne",
    "gaussianDamp",
    "rationalGaussian",
    "bumpPsi",
    "powerSmoother",
    "sumOfBumps",
    "thetaDependent",
)


class WeightSpec:
    """A nonnegative weight, given symbolically (``expr``) or as a numpy callable (``fn``).

    Symbolic weights may depend on ``theta1 .. theta_d``; their theta-derivatives
    are compiled from the expression.  Callable weights are theta-free.

    Attributes
    ----------
    kind : str
        One of :data:`WEIGHT_KINDS`.
    params : dict
        Construction parameters (for provenance and config echo).
    support : tuple or None
        Compact support ``(lo, hi)`` when the weight vanishes outside it.
    breakpoints : tuple
        Points where the weight is not analytic (quadrature cuts).
    """

    def __init__(self, kind, params=None, expr=None, fn: Callable | None = None, d: int = 0,
                 support=None, breakpoints=(), smoothness=None):
        if kind not in WEIGHT_KINDS:
            raise InvariantViolation(f"unknown weight kind {kind!r}")
        if (expr is None) == (fn is None):
            raise InvariantViolation("give exactly one of expr or fn")
        self.kind = kind
        self.params = dict(params or {})
        self.support = None if support is None else (float(support[0]), float(support[1]))
        self.breakpoints = tuple(float(b) for b in breakpoints)
        self.smoothness = smoothness
        self.expr = None if expr is None else sp.sympify(expr)
        self._fn = fn
        self.symbols = theta_symbols(d)
        if self.expr is not None:
            used = self.expr.free_symbols - {X}
            if not used <= set(self.symbols):
                raise InvariantViolation(f"weight uses unknown symbols {used - set(self.symbols)}")
            self.theta_dependent = bool(used)
            args = (*self.symbols, X)
            self._w = sp.lambdify(args, self.expr, "numpy")
            if self.theta_dependent:
                g = [sp.diff(self.expr, s) for s in self.symbols]
                self._g = [sp.lambdify(args, e, "numpy") for e in g]
                self._h = [[sp.lambdify(args, sp.diff(e, s), "numpy") for s in self.symbols] for e in g]
        else:
            self.theta_dependent = False

    def __repr__(self):
        return f"WeightSpec({self.kind!r}, {self.params})"

    @property
    def d(self) -> int:
        return len(self.symbols)

    def _theta(self, theta):
        if self.d == 0:
            return ()
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.d,):
            raise InvariantViolation(f"weight expects theta in R^{self.d}")
        return tuple(theta)

    def evaluate(self, x, theta=None):
        x = np.asarray(x, dtype=float)
        if self._fn is not None:
            return np.asarray(self._fn(x), dtype=float)
        return np.broadcast_to(np.asarray(self._w(*self._theta(theta), x), dtype=float), x.shape).copy()

    __call__ = evaluate

    def grad(self, x, theta, d):
        """Theta-gradient with shape ``(d,) + x.shape`` (zeros when theta-free)."""
        x = np.asarray(x, dtype=float)
        if not self.theta_dependent:
            return np.zeros((d,) + x.shape)
        t = self._theta(theta)
        return np.stack([np.broadcast_to(np.asarray(g(*t, x), dtype=float), x.shape) for g in self._g])

    def hess(self, x, theta, d):
        x = np.asarray(x, dtype=float)
        if not self.theta_dependent:
            return np.zeros((d, d) + x.shape)
        t = self._theta(theta)
        return np.stack(
            [np.stack([np.broadcast_to(np.asarray(h(*t, x), dtype=float), x.shape) for h in row])
             for row in self._h]
        )


def constant_one() -> WeightSpec:
    return WeightSpec("constantOne", {}, expr=sp.Integer(1))


def _gauss(beta):
    if not beta > 0:
        raise InvariantViolation("beta must be positive")
    return sp.exp(-X**2 / (4 * sp.Float(beta)))


def gaussian_damp(beta: float) -> WeightSpec:
    """``exp(-x^2 / (4 beta))``."""
    return WeightSpec("gaussianDamp", {"beta": beta}, expr=_gauss(beta))


def rational_gaussian(m: int, beta: float) -> WeightSpec:
    """``(1 + x^2)^m exp(-x^2 / (4 beta))``."""
    return WeightSpec("rationalGaussian", {"m": m, "beta": beta}, expr=(1 + X**2) ** int(m) * _gauss(beta))


def _bump(x, a, b, R):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    inside = (x > a) & (x < b)
    t = ((x[inside] - a) * (b - x[inside])) ** R
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = np.exp(-1.0 / t)
    return out


def bump_psi(a: float, b: float, R: float = 1.0) -> WeightSpec:
    """``exp(-1 / ((x-a)^R (b-x)^R))`` on ``(a, b)`` and zero elsewhere."""
    if not b > a or not R > 0:
        raise InvariantViolation("bumpPsi needs a < b and R > 0")
    return WeightSpec(
        "bumpPsi", {"a": a, "b": b, "R": R}, fn=lambda x: _bump(x, a, b, R),
        support=(a, b), breakpoints=(a, b), smoothness={"r": R / (R + 1)},
    )


def sum_of_bumps(intervals, R: float = 1.0) -> WeightSpec:
    """Sum of :func:`bump_psi` over ``intervals = [(a1, b1), (a2, b2), ...]``."""
    intervals = [(float(a), float(b)) for a, b in intervals]
    if not intervals or any(b <= a for a, b in intervals):
        raise InvariantViolation("sumOfBumps needs nonempty intervals with a < b")

    def fn(x):
        return sum(_bump(x, a, b, R) for a, b in intervals)

    edges = sorted({e for ab in intervals for e in ab})
    return WeightSpec(
        "sumOfBumps", {"intervals": intervals, "R": R}, fn=fn,
        support=(edges[0], edges[-1]), breakpoints=tuple(edges), smoothness={"r": R / (R + 1)},
    )


def power_smoother(R: float = 1.0) -> WeightSpec:
    """``exp(-1 / |x|^{2R})``: flat at the origin, tends to one at infinity.

    Not integrable on its own, so only usable in products with an integrable ``f``.
    """
    if not R > 0:
        raise InvariantViolation("R must be positive")

    def fn(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        out = np.zeros(x.shape)
        nz = ax > 0
        with np.errstate(divide="ignore", over="ignore"):
            out[nz] = np.exp(-(ax[nz] ** (-2.0 * R)))
        return out

    return WeightSpec("powerSmoother", {"R": R}, fn=fn, breakpoints=(0.0,), smoothness={"r": R / (R + 1)})


def theta_dependent(builder: Callable, d: int, name: str = "custom", beta: float | None = None,
                    **params) -> WeightSpec:
    """Weight ``w_theta`` from ``builder(symbols, gauss)`` returning a sympy expression.

    ``gauss`` is ``exp(-x^2/(4 beta))`` when ``beta`` is given, else 1.
    """
    gauss = _gauss(beta) if beta is not None else sp.Integer(1)
    expr = builder(theta_symbols(d), gauss)
    return WeightSpec("thetaDependent", {"name": name, "beta": beta, **params}, expr=expr, d=d)


def logistic_growth_weight(beta: float) -> WeightSpec:
    """``(1 + theta2 exp(theta3 x))^4 exp(-x^2/(4 beta))`` for the three-parameter logistic."""
    return theta_dependent(lambda t, g: (1 + t[1] * sp.exp(t[2] * X)) ** 4 * g, 3, "logistic3", beta)


def logistic4_weight(beta: float) -> WeightSpec:
    """``(1 + exp(theta3 + theta4 x))^4 exp(-x^2/(4 beta))`` for the four-parameter logistic."""
    return theta_dependent(lambda t, g: (1 + sp.exp(t[2] + t[3] * X)) ** 4 * g, 4, "logistic4", beta)


def cauchy_theta_weight(beta: float) -> WeightSpec:
    """``(1 + theta x^2)^2 exp(-x^2/(4 beta))``."""
    return theta_dependent(lambda t, g: (1 + t[0] * X**2) ** 2 * g, 1, "cauchyTheta", beta)
