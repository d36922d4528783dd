import math

import numpy as np
import pytest

from eivreg.criteria import Criterion
from eivreg.errors import InvariantViolation, OptimizerStalledWarning, SingularHessian
from eivreg.estimators import (
    EstimatorConfig,
    OptimizerSpec,
    _checked_inverse,
    check_bandwidth_condition,
    minimize,
    minimize_criterion,
    population_hessian,
    sandwich_covariance,
    sandwich_plugin,
)
from eivreg.scenarios import EXAMPLES, degenerate


class Quadratic(Criterion):
    """``(theta - c)^T A (theta - c)`` with an optional wrong gradient."""

    kind = "tilde1"

    def __init__(self, c, A, broken=False):
        self.c, self.A, self.d, self.broken = np.asarray(c, float), np.asarray(A, float), len(c), broken

    def evaluate(self, theta, order=0):
        theta = self._theta(theta)
        r = theta - self.c
        g = 2 * self.A @ r
        if self.broken:
            g = np.zeros_like(g) + 1e-3
        return float(r @ self.A @ r), g, 2 * self.A

    def scores(self, theta):
        rng = np.random.default_rng(0)
        return rng.normal(size=(500, self.d)) + self.gradient(theta)


A2 = np.array([[2.0, 0.3], [0.3, 1.0]])


def test_interior_minimum_found_exactly():
    res = minimize(Quadratic([0.4, -1.2], A2), [(-3, 3), (-3, 3)])
    np.testing.assert_allclose(res.theta, [0.4, -1.2], atol=1e-10)
    assert not res.boundary and not res.trace.stalled
    assert res.value == pytest.approx(0.0, abs=1e-18)


def test_boundary_minimum_is_flagged():
    res = minimize(Quadratic([5.0, 0.0], A2), [(-3, 3), (-3, 3)])
    assert res.boundary
    assert res.theta[0] == pytest.approx(3.0)
    # projected gradient vanishes at the bound, so the run is not a stall
    assert not res.trace.stalled


def test_local_only_start():
    opt = OptimizerSpec(method="localOnly", start=(1.0, 1.0))
    res = minimize(Quadratic([0.1, 0.2], A2), [(-3, 3), (-3, 3)], opt)
    np.testing.assert_allclose(res.theta, [0.1, 0.2], atol=1e-10)
    assert res.trace.evaluations > 0


def test_stall_is_reported():
    with pytest.warns(OptimizerStalledWarning):
        res = minimize(Quadratic([0.5], [[1.0]], broken=True), [(-2, 2)], OptimizerSpec(newton_steps=0))
    assert res.trace.stalled


@pytest.mark.parametrize("kw", [dict(method="nope"), dict(grid_points=2), dict(method="localOnly")])
def test_optimizer_spec_validation(kw):
    with pytest.raises(InvariantViolation):
        OptimizerSpec(**kw)


def test_unbounded_box_rejected():
    with pytest.raises(InvariantViolation):
        minimize(Quadratic([0.0], [[1.0]]), [(-np.inf, 1.0)])


def test_singular_hessian_guard():
    with pytest.raises(SingularHessian):
        _checked_inverse(np.diag([1.0, 1e-14]))
    with pytest.raises(SingularHessian):
        sandwich_plugin(Quadratic([0.0, 0.0], np.diag([1.0, 0.0])), [0.1, 0.1])


def test_plugin_sandwich_of_quadratic():
    q = Quadratic([0.0], [[2.0]])
    res = sandwich_plugin(q, [0.0])
    # H = 4, score variance ~ 1
    assert res.H[0, 0] == pytest.approx(4.0)
    assert res.covariance[0, 0] == pytest.approx(res.Sigma0[0, 0] / 16)


# -- scenario-level ------------------------------------------------------------


def test_degenerate_scenario_is_exact():
    sc = degenerate()
    res = minimize_criterion(EstimatorConfig(), sc.simulate(300, 1), sc)
    np.testing.assert_allclose(res.theta, sc.theta0, atol=1e-8)
    assert res.Cn == pytest.approx(20.0)


def test_example01_estimate_is_close():
    sc = EXAMPLES["example01"]()
    res = minimize_criterion(EstimatorConfig(), sc.simulate(2000, 3), sc)
    assert abs(res.theta[0] - sc.theta0[0]) < 0.15
    assert res.bandwidth is not None and res.Cn == res.bandwidth.Cn
    assert not res.trace.stalled


def test_manual_cutoff_overrides_rule():
    sc = EXAMPLES["example01"]()
    res = minimize_criterion(EstimatorConfig(Cn=2.5), sc.simulate(500, 3), sc)
    assert res.Cn == 2.5 and res.bandwidth.rule == "manual"


def test_population_hessian_closed_form():
    # 2 E[x^2 exp(-x^2/4)] for X ~ N(0, 1) equals 2 / 1.5^{3/2}
    H = population_hessian(EXAMPLES["example01"]())
    assert H[0, 0] == pytest.approx(2 / 1.5**1.5, rel=1e-12)


def test_population_and_plugin_sandwich_agree():
    sc = EXAMPLES["example02"]()
    pop = sandwich_covariance("tilde2", sc, M=40_000, seed=2)
    sample = sc.simulate(40_000, 3)
    crit = sc.criterion(sample, "tilde2")
    plug = sandwich_plugin(crit, sc.theta0)
    assert plug.covariance[0, 0] == pytest.approx(pop.covariance[0, 0], rel=0.15)
    assert plug.H[0, 0] == pytest.approx(pop.H[0, 0], rel=0.05)


def test_bandwidth_condition_example01():
    ok, table = check_bandwidth_condition(EXAMPLES["example01"]())
    assert ok
    assert all(math.isfinite(v) for row in table for v in row)
