"""Convergence-rate table, rate-optimal bandwidths and Fourier tail-bound checks."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import InvalidRegime, TailNotIntegrable, UnsupportedRegimeWarning
from .spectral import Bandwidth, panel_rule


def neg_part(x: float) -> float:
    """``min(x, 0)``: the part of ``x`` below zero, kept with its sign."""
    return min(x, 0.0)


@dataclass(frozen=True)
class RateSpec:
    """Target smoothness ``(a, b, r)`` and noise smoothness ``(alpha, beta, rho)``.

    ``a`` may be negative (polynomial growth of the transform, as for polynomial
    times Gaussian targets).  ``r = 0`` forces ``b = 0`` and ``rho = 0`` forces
    ``beta = 0``.
    """

    a: float
    b: float
    r: float
    alpha: float
    beta: float
    rho: float

    def __post_init__(self):
        if min(self.b, self.r, self.beta, self.rho, self.alpha) < 0:
            raise InvalidRegime("b, r, alpha, beta, rho must be nonnegative")
        if self.rho == 0 and self.beta != 0:
            raise InvalidRegime("rho = 0 requires beta = 0")
        if self.rho > 0 and self.beta == 0:
            raise InvalidRegime("rho > 0 requires beta > 0")
        if self.r == 0 and self.b != 0:
            raise InvalidRegime("r = 0 requires b = 0")
        if self.r > 0 and self.b == 0:
            raise InvalidRegime("r > 0 requires b > 0")

    @classmethod
    def from_smoothness(cls, target_tuples, noise_smoothness) -> "RateSpec":
        """Worst case over target tuples: smallest ``r``, then smallest ``b``, then smallest ``a``."""
        worst = min(target_tuples, key=lambda t: (t.r, t.b, t.a))
        s = noise_smoothness
        return cls(worst.a, worst.b, worst.r, s.alpha, s.beta, s.rho)

    @property
    def A(self) -> float:
        """Log-exponent ``(-2a + 1 - r + (1-r)_-) / rho``."""
        return (-2 * self.a + 1 - self.r + neg_part(1 - self.r)) / self.rho


@dataclass(frozen=True)
class RateResult:
    """One cell of the rate table with the squared rate as a function of ``n``."""

    label: str
    phi2: Callable[[float], float] = field(repr=False)
    parametric: bool
    logarithmic: bool
    value: float = math.nan

    def __call__(self, n):
        return self.phi2(n)

    def log_slope(self, n: float, h: float = 1e-3) -> float:
        """``d log phi2 / d log n`` at ``n``."""
        return (math.log(self.phi2(n * math.exp(h))) - math.log(self.phi2(n * math.exp(-h)))) / (2 * h)


def _cell(spec: RateSpec):
    a, b, r, al, be, rho = spec.a, spec.b, spec.r, spec.alpha, spec.beta, spec.rho
    if r == 0 and a <= 0.5:
        raise InvalidRegime("r = 0 requires a > 1/2")
    if rho == 0:
        if r == 0:
            if a < al + 0.5:
                ex = (2 * a - 1) / (2 * al)
                return "ordinary/ordinary, a < alpha + 1/2", (lambda n: n ** (-ex)), False, False
            return "ordinary/ordinary, a >= alpha + 1/2", (lambda n: 1.0 / n), True, False
        return "super-smooth target / ordinary noise", (lambda n: 1.0 / n), True, False
    if r == 0:
        ex = (2 * a - 1) / rho
        return "ordinary target / super-smooth noise", (lambda n: math.log(n) ** (-ex)), False, True
    A = spec.A
    if r < rho:
        return (
            "0 < r < rho",
            lambda n: math.log(n) ** A * math.exp(-2 * b * (math.log(n) / (2 * be)) ** (r / rho)),
            False,
            True,
        )
    if r == rho:
        if b < be:
            ex = A + 2 * al * b / (be * r)
            return "r = rho, b < beta", (lambda n: math.log(n) ** ex * n ** (-b / be)), False, False
        if b == be:
            if a < al + 0.5:
                ex = (2 * al - 2 * a + 1) / r
                return "r = rho, b = beta, a < alpha + 1/2", (lambda n: math.log(n) ** ex / n), False, False
            return "r = rho, b = beta, a >= alpha + 1/2", (lambda n: 1.0 / n), True, False
        return "r = rho, b > beta", (lambda n: 1.0 / n), True, False
    return "r > rho > 0", (lambda n: 1.0 / n), True, False


def theoretical_rate(spec: RateSpec, n: float | None = None) -> RateResult:
    """Squared rate of the kernel estimator for the given smoothness pair."""
    label, fn, parametric, logarithmic = _cell(spec)
    value = fn(float(n)) if n is not None else math.nan
    return RateResult(label, fn, parametric, logarithmic, value)


# ---------------------------------------------------------------------------
# Bandwidth rules
# ---------------------------------------------------------------------------


def _raw_cutoff(spec: RateSpec, n: float):
    """``(Cn, rule, ok)``; ``ok`` is False when the log-corrected bracket is nonpositive
    or its leading term ``log(n) / (2 b)`` is below one (outside the asymptotic range).
    """
    a, b, r, al, be, rho = spec.a, spec.b, spec.r, spec.alpha, spec.beta, spec.rho
    L = math.log(n)
    if r == 0 and rho == 0:
        if a < al + 0.5:
            return n ** (1.0 / (2 * al)), "ordinarySmoothRate", True
        return n ** (1.0 / (2 * a - 1)), "ordinarySmoothRate", True
    target_form = rho == 0 or r > rho or (r == rho and (b > be or (b == be and a >= al + 0.5)))
    if r > 0 and target_form:
        base = L / (2 * b)
        corr = (-2 * a + (1 - r) + neg_part(1 - r)) / (2 * b * r)
        bracket = base + corr * math.log(base) if base > 1 else -1.0
        rule = "rootNLogRule"
    elif r == 0:
        base = L / (2 * be)
        corr = (2 * al + neg_part(1 - rho)) / (2 * rho * be)
        bracket = base - corr * math.log(base) if base > 1 else -1.0
        r, rule = rho, "superSmoothRate"
    else:
        base = L / (2 * be)
        corr = (2 * al + neg_part(1 - rho) - neg_part(1 - r)) / (2 * rho * be)
        bracket = base - corr * math.log(base) if base > 1 else -1.0
        r, rule = rho, "superSmoothRate"
    if bracket <= 0:
        return 1.0, rule, False
    return bracket ** (1.0 / r), rule, True


def select_bandwidth(spec: RateSpec, n: int, floor: float = 1.0, envelope_points: int = 64) -> Bandwidth:
    """Rate-optimal cutoff with unit constants, made nondecreasing in ``n``.

    The displayed formulas carry log corrections that can dip for small ``n``; the
    returned value is the running maximum of the formula over a geometric grid of
    sample sizes up to ``n``, clamped below at ``floor``.
    """
    if n < 2:
        raise InvalidRegime("need n >= 2")
    grid = np.unique(np.concatenate([np.geomspace(2.0, float(n), envelope_points), [float(n)]]))
    best, rule, clamped, ok_any = floor, "manual", False, True
    for m in grid:
        c, rule, ok = _raw_cutoff(spec, float(m))
        if m == grid[-1] and not ok:
            ok_any = False
        if c > best:
            best = c
    raw_n, rule, _ = _raw_cutoff(spec, float(n))
    if raw_n < floor:
        clamped = True
    if not ok_any:
        clamped = True
        warnings.warn(
            f"bandwidth bracket is nonpositive at n={n}; using the clamped value {best:g}",
            UnsupportedRegimeWarning,
            stacklevel=2,
        )
    return Bandwidth(float(best), rule, clamped, note="unit constants")


# ---------------------------------------------------------------------------
# Fourier tail bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailBoundReport:
    lhs: float
    rhs: float
    passed: bool
    skipped: bool = False
    L: float = math.nan
    R: float = math.nan
    u_max: float = math.nan
    note: str = ""

    @property
    def pass_(self):
        return self.passed


def _abs_transform(target):
    if hasattr(target, "fourier"):
        return lambda u: np.abs(target.fourier(u))
    return lambda u: np.abs(target(u))


def _tail_integral(absf, start, rtol=1e-12, max_doublings=14, u_cap=None, smoothness=None):
    """``∫_start^U |f|`` with ``U`` doubled until the last piece is negligible.

    With ``u_cap`` the integration stops there and the remainder is extrapolated
    from the smoothness envelope, scaled to match ``|f|`` at the cap.  The same
    extrapolation closes slowly decaying (polynomial) tails once the doubling
    budget is spent, provided ``smoothness`` is given.
    """
    total = 0.0
    lo = start
    width = max(1.0, start)
    nodes = []
    for _ in range(max_doublings):
        if u_cap is not None and lo >= u_cap:
            return total + _envelope_tail(absf, lo, smoothness), lo, np.concatenate(nodes)
        hi = lo + width
        x, w = panel_rule(lo, hi, 0.5, 16)
        piece = float(absf(x) @ w)
        nodes.append(x)
        total += piece
        if piece <= rtol * total or total == 0.0:
            return total, hi, np.concatenate(nodes)
        lo, width = hi, 2 * width
    if smoothness is not None and piece <= 1e-8 * total:
        return total + _envelope_tail(absf, lo, smoothness), lo, np.concatenate(nodes)
    raise TailNotIntegrable(f"transform tail still contributes {piece:.3g} beyond |u| = {lo:g}")


def _envelope_tail(absf, U, s) -> float:
    """``|f(U)| ∫_U^∞ env(u) / env(U) du`` for the envelope ``u^{-a} exp(-b u^r)``."""
    if s.r == 0 and s.a <= 1:
        raise TailNotIntegrable("smoothness envelope is not integrable")
    f_U = float(absf(np.array([U]))[0])
    ratio = integrate.quad(lambda u: (u / U) ** (-s.a) * math.exp(-s.b * (u**s.r - U**s.r)), U, math.inf)[0]
    return f_U * ratio


def _envelope_sup(mag, u, s) -> float:
    """``sup |psi*(u)| u^a exp(b u^r)`` over nodes where the transform is representable."""
    ok = mag > 0
    if not np.any(ok):
        return 0.0
    return float(np.exp(np.max(np.log(mag[ok]) + s.a * np.log(u[ok]) + s.b * u[ok] ** s.r)))


def tail_constant(a, b, r, Cn) -> float:
    """``R`` in ``2 ∫_Cn^∞ u^{-a} e^{-b u^r} du <= Cn^{1-a-r} e^{-b Cn^r} / R``.

    Integration by parts gives ``R = (b r - max(1-a-r, 0) Cn^{-r}) / 2`` for
    ``r > 0`` and ``R = (a - 1) / 2`` for ``r = 0``; ``nan`` when not positive.
    """
    if r == 0:
        return (a - 1) / 2 if a > 1 else math.nan
    val = (b * r - max(1 - a - r, 0.0) * Cn ** (-r)) / 2
    return val if val > 0 else math.nan


def tail_bound_check(target, Cn: float, smoothness=None, slack: float = 1.05) -> TailBoundReport:
    """Compare ``∫_{|u|>=Cn} |psi*|`` with the closed-form envelope bound.

    ``L`` is the supremum of ``|psi*(u)| u^a e^{b u^r}`` over the integrated tail.
    When the integration-by-parts constant is not positive (short tails), the
    envelope integral is computed exactly instead.
    """
    s = smoothness if smoothness is not None else target.smoothness
    if Cn < s.u0:
        return TailBoundReport(math.nan, math.nan, True, skipped=True, note="Cn below u0")
    absf = _abs_transform(target)
    half, u_max, nodes = _tail_integral(absf, Cn, smoothness=s)
    lhs = 2.0 * half
    L = _envelope_sup(absf(nodes), nodes, s)
    head = Cn ** (1 - s.a - s.r) * math.exp(-s.b * Cn**s.r)
    R = tail_constant(s.a, s.b, s.r, Cn)
    note = "integration-by-parts constant"
    if not math.isfinite(R):
        tail_env = integrate.quad(lambda u: u ** (-s.a) * math.exp(-s.b * u**s.r), Cn, math.inf)[0]
        R = head / (2 * tail_env)
        note = "exact envelope integral"
    rhs = L / R * head
    return TailBoundReport(lhs, rhs, bool(lhs <= slack * rhs), False, L, R, u_max, note)


@dataclass(frozen=True)
class RatioBoundReport:
    lhs: float
    rhs: float
    passed: bool
    order_term: float
    order_ratio: float


def ratio_bound_check(target, noise, Cn: float, smoothness=None, slack: float = 1.05) -> RatioBoundReport:
    """Check ``∫_{|u|<=Cn} |psi*|/|p*|`` against its envelope bound.

    The bound combines the exact near-origin part ``|u| < u0`` with
    ``(L / lower(p)) * 2 ∫_{u0}^{Cn} u^{alpha-a} exp(-b u^r + beta u^rho) du``.  The
    order term ``max(1, Cn^{alpha-a+1-rho} exp(-b Cn^r + beta Cn^rho))`` and the
    ratio of the bound to it are reported.
    """
    s = smoothness if smoothness is not None else target.smoothness
    ns = noise.smoothness
    absf = _abs_transform(target)
    u0 = max(s.u0, ns.u0)
    x, w = panel_rule(0.0, Cn, 0.25, 16, breakpoints=(u0,))
    ratio = absf(x) / np.abs(noise.charfn(x))
    lhs = 2.0 * float(ratio @ w)
    near = 2.0 * float(ratio[x < u0] @ w[x < u0])
    far = x >= u0
    if np.any(far):
        xf = x[far]
        L = _envelope_sup(absf(xf), xf, s)
        env = xf ** (ns.alpha - s.a) * np.exp(-s.b * xf**s.r + ns.beta * xf**ns.rho)
        rhs = near + L / ns.lower * 2.0 * float(env @ w[far])
    else:
        rhs = near
    order = max(1.0, Cn ** (ns.alpha - s.a + 1 - ns.rho) * math.exp(-s.b * Cn**s.r + ns.beta * Cn**ns.rho))
    return RatioBoundReport(lhs, rhs, bool(lhs <= slack * rhs), order, rhs / order)


# ---------------------------------------------------------------------------
# Bias/variance proxy along a bandwidth sequence
# ---------------------------------------------------------------------------


NUMERIC_TAIL_CAP = 64.0


def bias_variance_proxy(target, noise, Cn: float, n: int) -> float:
    """``min_q ||psi* (K*_Cn - 1)||_q^2 + min_q ||psi* K*_Cn / p*||_q^2 / n`` over ``q in {1, 2}``.

    Uses the indicator kernel, so the first term is the tail of ``psi*`` beyond ``Cn``.
    For numeric transforms the tail beyond ``NUMERIC_TAIL_CAP`` is extrapolated
    from the fitted smoothness envelope.
    """
    absf = _abs_transform(target)
    s = getattr(target, "smoothness", None)
    cap = NUMERIC_TAIL_CAP if getattr(target, "source", "analytic") != "analytic" else None
    tail1, _, _ = _tail_integral(absf, Cn, u_cap=cap, smoothness=s)
    s2 = None if s is None else type(s)(2 * s.a, 2 * s.b, s.r, s.u0, s.lower, s.upper, s.source)
    tail2, _, _ = _tail_integral(lambda u: absf(u) ** 2, Cn, u_cap=cap, smoothness=s2)
    bias = min((2 * tail1) ** 2, 2 * tail2)
    x, w = panel_rule(0.0, Cn, 0.25, 16)
    r = absf(x) / np.abs(noise.charfn(x))
    var = min((2 * float(r @ w)) ** 2, 2 * float(r**2 @ w))
    return bias + var / n


def check_rate_condition(targets, noise, bandwidth: Callable[[int], float], ns=(100, 1000, 10000)):
    """Whether :func:`bias_variance_proxy` decreases along ``ns`` for every target.

    Returns ``(passed, table)`` with ``table[i][j]`` the proxy of target ``i`` at ``ns[j]``.
    """
    table = [[bias_variance_proxy(t, noise, float(bandwidth(n)), n) for n in ns] for t in targets]
    passed = all(all(b < a for a, b in zip(row, row[1:])) for row in table)
    return passed, table
