"""Parametric regression families ``f(theta, x)`` defined symbolically.

Each family is a sympy expression in ``x`` and ``theta_1 .. theta_d``; derivatives
in ``theta`` are differentiated symbolically and compiled with ``lambdify``.
"""

from __future__ import annotations

import itertools

import numpy as np
import sympy as sp

from ..errors import DimensionMismatch, InvariantViolation

X = sp.Symbol("x", real=True)


def theta_symbols(d: int) -> tuple[sp.Symbol, ...]:
    return tuple(sp.Symbol(f"theta{k + 1}", real=True) for k in range(d))


def _compile(args, expr):
    return sp.lambdify(args, expr, modules="numpy")


def _broadcast(value, shape):
    return np.broadcast_to(np.asarray(value, dtype=float), shape)


class RegressionFamily:
    """``f(theta, x)`` with exact theta-derivatives up to order three.

    Parameters
    ----------
    name : str
        Catalog key.
    expr : sympy.Expr
        Expression in :data:`X` and ``symbols``.
    symbols : tuple of sympy.Symbol
        The parameter symbols, in order.
    bounds : array_like, shape (d, 2)
        Parameter box.
    breakpoints : tuple of float
        Points where ``f`` is not smooth in ``x`` (for quadrature panel cuts).
    """

    def __init__(self, name, expr, symbols, bounds, breakpoints=(), meta=None):
        self.name = name
        self.expr = sp.sympify(expr)
        self.symbols = tuple(symbols)
        self.d = len(self.symbols)
        bounds = np.asarray(bounds, dtype=float).reshape(self.d, 2)
        if np.any(bounds[:, 1] <= bounds[:, 0]):
            raise InvariantViolation(f"empty parameter box for {name}")
        self.bounds = bounds
        self.breakpoints = tuple(float(b) for b in breakpoints)
        self.meta = dict(meta or {})
        args = (*self.symbols, X)
        self._f = _compile(args, self.expr)
        self._grad_expr = [sp.diff(self.expr, s) for s in self.symbols]
        self._hess_expr = [[sp.diff(g, s) for s in self.symbols] for g in self._grad_expr]
        self._grad = [_compile(args, e) for e in self._grad_expr]
        self._hess = [[_compile(args, e) for e in row] for row in self._hess_expr]
        self._third = None

    def __repr__(self):
        return f"RegressionFamily({self.name!r}, d={self.d})"

    def check_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.d,):
            raise DimensionMismatch(f"{self.name} expects theta in R^{self.d}, got {theta.shape}")
        return theta

    def in_box(self, theta, tol=0.0) -> bool:
        theta = self.check_theta(theta)
        return bool(
            np.all(theta >= self.bounds[:, 0] - tol) and np.all(theta <= self.bounds[:, 1] + tol)
        )

    def evaluate(self, theta, x):
        theta = self.check_theta(theta)
        x = np.asarray(x, dtype=float)
        return _broadcast(self._f(*theta, x), x.shape).copy()

    __call__ = evaluate

    def grad(self, theta, x):
        """Array of shape ``(d,) + x.shape``."""
        theta = self.check_theta(theta)
        x = np.asarray(x, dtype=float)
        return np.stack([_broadcast(g(*theta, x), x.shape) for g in self._grad])

    def hess(self, theta, x):
        """Array of shape ``(d, d) + x.shape``."""
        theta = self.check_theta(theta)
        x = np.asarray(x, dtype=float)
        return np.stack(
            [np.stack([_broadcast(h(*theta, x), x.shape) for h in row]) for row in self._hess]
        )

    def third(self, theta, x):
        """Array of shape ``(d, d, d) + x.shape``, compiled on first use."""
        if self._third is None:
            args = (*self.symbols, X)
            self._third = {}
            for i, j, k in itertools.combinations_with_replacement(range(self.d), 3):
                e = sp.diff(self._hess_expr[i][j], self.symbols[k])
                self._third[(i, j, k)] = _compile(args, e)
        theta = self.check_theta(theta)
        x = np.asarray(x, dtype=float)
        out = np.empty((self.d,) * 3 + x.shape)
        for key, fn in self._third.items():
            val = _broadcast(fn(*theta, x), x.shape)
            for perm in set(itertools.permutations(key)):
                out[perm] = val
        return out


# ---------------------------------------------------------------------------
# Built-in families
# ---------------------------------------------------------------------------


def _positive_part(e):
    return sp.Piecewise((e, e > 0), (0, True))


def polynomial(degree: int = 1, bound: float = 5.0) -> RegressionFamily:
    """``sum_{k=1}^{degree} theta_k x^k``."""
    th = theta_symbols(degree)
    expr = sum(t * X ** (k + 1) for k, t in enumerate(th))
    return RegressionFamily("polynomial", expr, th, [[-bound, bound]] * degree)


def exponential(bounds=(-1.0, 1.5)) -> RegressionFamily:
    """``exp(theta x)``."""
    (t,) = theta_symbols(1)
    return RegressionFamily("exponential", sp.exp(t * X), (t,), [bounds])


def cosine_sum(d: int = 2, bound: float = 3.0) -> RegressionFamily:
    """``sum_{j=1}^{d} theta_j cos(j x)``."""
    th = theta_symbols(d)
    expr = sum(t * sp.cos((j + 1) * X) for j, t in enumerate(th))
    return RegressionFamily("cosineSum", expr, th, [[-bound, bound]] * d)


def cauchy(bounds=(-5.0, 5.0)) -> RegressionFamily:
    """``theta / (1 + x^2)``."""
    (t,) = theta_symbols(1)
    return RegressionFamily("cauchy", t / (1 + X**2), (t,), [bounds])


def laplace_tent(bounds=(-5.0, 5.0)) -> RegressionFamily:
    """``theta exp(-|x|/2)``, not differentiable in ``x`` at the origin."""
    (t,) = theta_symbols(1)
    return RegressionFamily(
        "laplaceTent", t * sp.exp(-sp.Abs(X) / 2), (t,), [bounds], breakpoints=(0.0,)
    )


def indicator(bounds=(-5.0, 5.0)) -> RegressionFamily:
    """``theta 1{|x| <= 1}``."""
    (t,) = theta_symbols(1)
    expr = t * sp.Piecewise((1, sp.Abs(X) <= 1), (0, True))
    return RegressionFamily("indicator", expr, (t,), [bounds], breakpoints=(-1.0, 1.0))


def polygonal(a: float = -0.5, b: float = 0.5, bound: float = 5.0) -> RegressionFamily:
    """``theta1 + theta2 x + theta3 (x - a)_+ + theta4 |x - b|^3`` with fixed kinks ``a, b``."""
    th = theta_symbols(4)
    a_, b_ = sp.nsimplify(a), sp.nsimplify(b)
    expr = th[0] + th[1] * X + th[2] * _positive_part(X - a_) + th[3] * sp.Abs(X - b_) ** 3
    return RegressionFamily(
        "polygonal", expr, th, [[-bound, bound]] * 4, breakpoints=(a, b), meta={"a": a, "b": b}
    )


def logistic3(bounds=((0.2, 5.0), (0.1, 5.0), (-3.0, 3.0))) -> RegressionFamily:
    """``theta1 / (1 + theta2 exp(theta3 x))``."""
    th = theta_symbols(3)
    expr = th[0] / (1 + th[1] * sp.exp(th[2] * X))
    return RegressionFamily("logistic3", expr, th, bounds)


def logistic4(bounds=((-5.0, 5.0), (-5.0, 5.0), (-3.0, 3.0), (-3.0, 3.0))) -> RegressionFamily:
    """``theta2 + (theta1 - theta2) / (1 + exp(theta3 + theta4 x))``."""
    th = theta_symbols(4)
    expr = th[1] + (th[0] - th[1]) / (1 + sp.exp(th[2] + th[3] * X))
    return RegressionFamily("logistic4", expr, th, bounds)


def cauchy_theta(bounds=(0.05, 5.0)) -> RegressionFamily:
    """``1 / (1 + theta x^2)``."""
    (t,) = theta_symbols(1)
    return RegressionFamily("cauchyTheta", 1 / (1 + t * X**2), (t,), [bounds])


FAMILY_BUILDERS = {
    "polynomial": polynomial,
    "exponential": exponential,
    "cosineSum": cosine_sum,
    "cauchy": cauchy,
    "laplaceTent": laplace_tent,
    "indicator": indicator,
    "polygonal": polygonal,
    "logistic3": logistic3,
    "logistic4": logistic4,
    "cauchyTheta": cauchy_theta,
}
