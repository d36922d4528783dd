"""Criterion minimization over the parameter box and sandwich covariances."""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .criteria import Criterion, CriterionKind, SpectralCriterion
from .errors import InvariantViolation, OptimizerStalledWarning, SingularHessian
from .phi import ratio_cutoff
from .rates import RateSpec, check_rate_condition, select_bandwidth
from .spectral import SINC, Bandwidth, panel_rule

__all__ = [
    "OptimizerSpec",
    "EstimatorConfig",
    "OptimizerTrace",
    "EstimateResult",
    "SandwichResult",
    "RateSpec",
    "select_bandwidth",
    "minimize",
    "minimize_criterion",
    "population_hessian",
    "score_draws",
    "sandwich_covariance",
    "sandwich_plugin",
    "check_bandwidth_condition",
]


@dataclass(frozen=True)
class OptimizerSpec:
    """``gridThenLocal`` (coarse grid, then local search) or ``localOnly`` from ``start``."""

    method: str = "gridThenLocal"
    grid_points: int = 15
    local_iters: int = 200
    gtol: float = 1e-7
    start: tuple | None = None
    newton_steps: int = 8
    threads: int = 1

    def __post_init__(self):
        if self.method not in ("gridThenLocal", "localOnly"):
            raise InvariantViolation(f"unknown optimizer method {self.method!r}")
        if self.method == "gridThenLocal" and self.grid_points < 3:
            raise InvariantViolation("need at least 3 grid points per dimension")
        if self.method == "localOnly" and self.start is None:
            raise InvariantViolation("localOnly needs a start point")


@dataclass(frozen=True)
class EstimatorConfig:
    """Criterion kind, optimizer, parameter box and bandwidth choice.

    ``bounds`` defaults to the family box; ``Cn`` overrides the scenario's rule.
    """

    kind: CriterionKind | str | None = None
    optimizer: OptimizerSpec = OptimizerSpec()
    bounds: tuple | None = None
    Cn: float | None = None
    boundary_tol: float = 1e-6


@dataclass(frozen=True)
class OptimizerTrace:
    iterations: int
    grad_norm: float
    evaluations: int
    stalled: bool
    message: str = ""


@dataclass(frozen=True)
class EstimateResult:
    theta: np.ndarray
    value: float
    Cn: float | None
    trace: OptimizerTrace
    covariance: np.ndarray | None = None
    boundary: bool = False
    bandwidth: Bandwidth | None = field(default=None, repr=False)


def _check_bounds(bounds):
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(b)) or np.any(b[:, 1] <= b[:, 0]):
        raise InvariantViolation(f"parameter box must be bounded and nonempty, got {bounds}")
    return b


def _projected_grad(theta, g, box, tol=1e-12):
    g = g.copy()
    at_lo = (theta - box[:, 0] <= tol * (box[:, 1] - box[:, 0])) & (g > 0)
    at_hi = (box[:, 1] - theta <= tol * (box[:, 1] - box[:, 0])) & (g < 0)
    g[at_lo | at_hi] = 0.0
    return g


def _grid_start(crit: Criterion, box, points, threads):
    axes = [np.linspace(lo, hi, points) for lo, hi in box]
    cands = [np.array(p) for p in itertools.product(*axes)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            vals = list(ex.map(crit.value, cands))
    else:
        vals = [crit.value(c) for c in cands]
    vals = np.asarray(vals)
    vals[~np.isfinite(vals)] = np.inf
    return cands[int(np.argmin(vals))], len(cands)


def _newton_polish(crit, theta, box, steps):
    f, g, H = crit.evaluate(theta, 2)
    for _ in range(steps):
        try:
            step = -linalg.cho_solve(linalg.cho_factor(H), g)
        except linalg.LinAlgError:
            break
        cand = np.clip(theta + step, box[:, 0], box[:, 1])
        fc, gc, Hc = crit.evaluate(cand, 2)
        if not fc <= f + 1e-13 * max(1.0, abs(f)):
            break
        moved = np.max(np.abs(cand - theta))
        theta, f, g, H = cand, fc, gc, Hc
        if moved <= 1e-14 * (1.0 + np.max(np.abs(theta))):
            break
    return theta, f, g


def minimize(crit: Criterion, bounds, optimizer: OptimizerSpec = OptimizerSpec(), boundary_tol=1e-6):
    """Minimize ``crit`` over the box ``bounds``.

    Coarse grid (or the given start), then L-BFGS-B with the analytic gradient, then
    Newton steps with the analytic Hessian while they decrease the criterion.
    Emits :class:`OptimizerStalledWarning` and flags the trace when the projected
    gradient is still above ``gtol * max(1, |value|)`` at the end.
    """
    box = _check_bounds(bounds)
    if optimizer.method == "gridThenLocal":
        start, n_eval = _grid_start(crit, box, optimizer.grid_points, optimizer.threads)
    else:
        start, n_eval = np.clip(np.asarray(optimizer.start, dtype=float), box[:, 0], box[:, 1]), 0

    def fun(t):
        f, g, _ = crit.evaluate(t, 1)
        return f, g

    res = optimize.minimize(
        fun, start, jac=True, method="L-BFGS-B", bounds=box,
        options={"maxiter": optimizer.local_iters, "gtol": optimizer.gtol * 1e-3, "ftol": 1e-15},
    )
    theta, f, g = _newton_polish(crit, np.asarray(res.x, dtype=float), box, optimizer.newton_steps)
    gnorm = float(np.linalg.norm(_projected_grad(theta, g, box)))
    stalled = gnorm > optimizer.gtol * max(1.0, abs(f))
    if stalled:
        warnings.warn(f"optimizer stopped with gradient norm {gnorm:.3g}", OptimizerStalledWarning, stacklevel=2)
    width = box[:, 1] - box[:, 0]
    boundary = bool(np.any(np.minimum(theta - box[:, 0], box[:, 1] - theta) <= boundary_tol * width))
    trace = OptimizerTrace(int(res.nit), gnorm, n_eval + int(res.nfev), bool(stalled), str(res.message))
    return EstimateResult(theta, float(f), None, trace, boundary=boundary)


def minimize_criterion(config: EstimatorConfig, sample, scenario) -> EstimateResult:
    """Estimate ``theta`` from ``sample`` with the scenario's model and ``config``."""
    kind = CriterionKind(config.kind or scenario.kind)
    bw = None
    if kind.uses_kernel:
        bw = Bandwidth(float(config.Cn), "manual") if config.Cn is not None else scenario.bandwidth(sample.n)
    crit = scenario.criterion(sample, kind, None if bw is None else bw.Cn)
    bounds = config.bounds if config.bounds is not None else scenario.family.bounds
    res = minimize(crit, bounds, config.optimizer, config.boundary_tol)
    return EstimateResult(res.theta, res.value, None if bw is None else bw.Cn, res.trace,
                          boundary=res.boundary, bandwidth=bw)


# ---------------------------------------------------------------------------
# Sandwich covariance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SandwichResult:
    covariance: np.ndarray
    H: np.ndarray
    Sigma0: np.ndarray
    draws: int

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.covariance, dtype=dtype)


def population_hessian(scenario, theta=None, panel_width=0.05) -> np.ndarray:
    """``2 E[w(X) grad f grad f^T]`` by Gauss-Legendre quadrature against the design."""
    theta = scenario.theta0 if theta is None else scenario.family.check_theta(theta)
    lo, hi = scenario.design.support()
    cuts = [b for b in (*scenario.design.breakpoints, *scenario.weight.breakpoints, *scenario.family.breakpoints)
            if lo < b < hi]
    x, w = panel_rule(lo, hi, panel_width, 16, breakpoints=tuple(cuts))
    gx = scenario.design.density(x)
    wx = scenario.weight.evaluate(x, theta if scenario.weight.theta_dependent else None)
    df = scenario.family.grad(theta, x)
    return 2.0 * np.einsum("an,bn,n->ab", df, df, w * gx * wx)


def _checked_inverse(H):
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularHessian(f"Hessian condition number {cond:.3g} exceeds 1e12")
    return np.linalg.inv(H)


def _sandwich(H, S):
    Hinv = _checked_inverse(H)
    cov = Hinv @ S @ Hinv
    return 0.5 * (cov + cov.T)


def score_draws(kind, scenario, theta=None, M=100_000, seed=0) -> np.ndarray:
    """Per-observation limit scores at ``theta`` on ``M`` fresh draws, shape ``(M, d)``.

    Kernel kinds use the untruncated Fourier score: the theta-derivatives of
    ``w``, ``w f`` and ``w f^2`` divided by ``p*`` and inverted up to the cutoff
    past which the ratio is negligible, combined as
    ``(Y^2 - s2) dw - 2 Y d(wf) + d(wf^2)``.  Auxiliary kinds differentiate the
    scenario's ``Phi`` triple.
    """
    kind = CriterionKind(kind)
    theta = scenario.theta0 if theta is None else scenario.family.check_theta(theta)
    sample = scenario.simulate(M, seed)
    sigma2 = scenario.sigma2 if kind.needs_variance else 0.0
    if kind.uses_kernel:
        cut = ratio_cutoff(scenario.triple, scenario.noise, theta)
        crit = SpectralCriterion(kind, sample, scenario.triple, scenario.noise, cut, SINC, sigma2,
                                 scenario.quad, theta)
        return crit.scores(theta)
    return scenario.criterion(sample, kind).scores(theta)


def sandwich_covariance(kind, scenario, theta=None, M=100_000, seed=0) -> SandwichResult:
    """Asymptotic covariance ``H^{-1} Sigma0 H^{-1}`` of ``sqrt(n) (theta_hat - theta0)``.

    ``H`` comes from quadrature against the design density, ``Sigma0`` from the
    Monte Carlo covariance of :func:`score_draws`.
    """
    H = population_hessian(scenario, theta)
    s = score_draws(kind, scenario, theta, M, seed)
    S = np.atleast_2d(np.cov(s, rowvar=False))
    return SandwichResult(_sandwich(H, S), H, S, M)


def sandwich_plugin(crit: Criterion, theta) -> SandwichResult:
    """Data-based sandwich: criterion Hessian and empirical score covariance at ``theta``."""
    H = np.atleast_2d(crit.hessian(theta))
    H = 0.5 * (H + H.T)
    s = crit.scores(theta)
    S = np.atleast_2d(np.cov(s, rowvar=False))
    return SandwichResult(_sandwich(H, S), H, S, s.shape[0])


def check_bandwidth_condition(scenario, ns=(100, 1000, 10000)):
    """Whether the bias-plus-variance proxy decreases along ``ns`` for all three targets."""
    targets = [t.bind(t.theta_ref) for t in scenario.triple.targets]
    return check_rate_condition(targets, scenario.noise, lambda n: scenario.bandwidth(n).Cn, ns)
