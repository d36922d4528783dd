import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import integrate
from scipy.special import erfc

from eivreg.errors import InvalidRegime, TailNotIntegrable, UnsupportedRegimeWarning
from eivreg.models import GaussianNoise, LaplaceNoise, SmoothnessR1
from eivreg.rates import (
    RateSpec,
    bias_variance_proxy,
    check_rate_condition,
    tail_constant,
    neg_part,
    ratio_bound_check,
    select_bandwidth,
    tail_bound_check,
    theoretical_rate,
)


def _target(fn, a, b, r, u0=1.0):
    return SimpleNamespace(fourier=fn, smoothness=SmoothnessR1(a, b, r, u0), source="analytic")


GAUSS = _target(lambda u: np.exp(-np.asarray(u) ** 2 / 2), 0.0, 0.5, 2.0)
RATIONAL = _target(lambda u: 1.0 / (1.0 + np.asarray(u) ** 2) ** 2, 4.0, 0.0, 0.0)


def test_neg_part():
    assert neg_part(-2.5) == -2.5
    assert neg_part(3.0) == 0.0


@pytest.mark.parametrize("args", [(0, -1, 1, 1, 0, 0), (0, 1, 0, 1, 0, 0), (0, 0, 1, 1, 0, 0),
                                  (0, 0, 0, 1, 1, 0), (0, 0, 0, 1, 0, 2), (0, 0, 0, -1, 0, 0)])
def test_rate_spec_validation(args):
    with pytest.raises(InvalidRegime):
        RateSpec(*args)


def test_log_exponent():
    assert RateSpec(1, 1, 0.5, 0, 1, 1).A == pytest.approx(-2 + 1 - 0.5)
    assert RateSpec(0, 1, 2, 0, 1, 2).A == pytest.approx(-1.0)


def test_worst_target_tuple():
    ts = [SmoothnessR1(0, 1, 2), SmoothnessR1(-2, 0.25, 2), SmoothnessR1(-1, 0.25, 2)]
    spec = RateSpec.from_smoothness(ts, LaplaceNoise(0.5).smoothness)
    assert (spec.a, spec.b, spec.r, spec.alpha, spec.rho) == (-2, 0.25, 2, 2.0, 0.0)


@pytest.mark.parametrize("a,b,r,Cn", [(0, 0.5, 2, 1.5), (-2, 0.25, 2, 3.0), (1, 1, 1, 2.0), (0.5, 2, 0.5, 4.0),
                                      (-3, 0.1, 1.5, 10.0), (3, 0, 0, 2.0)])
def test_tail_constant_bounds_tail(a, b, r, Cn):
    R = tail_constant(a, b, r, Cn)
    assert R > 0
    tail = 2 * integrate.quad(lambda u: u ** (-a) * math.exp(-b * u**r), Cn, math.inf)[0]
    assert tail <= Cn ** (1 - a - r) * math.exp(-b * Cn**r) / R * (1 + 1e-10)


def test_tail_constant_nonpositive_is_nan():
    assert math.isnan(tail_constant(0.5, 0.0, 0.0, 2.0))
    assert math.isnan(tail_constant(-5, 0.01, 1, 1.0))


@pytest.mark.parametrize("Cn", [1.0, 2.0, 4.0])
def test_tail_bound_gaussian(Cn):
    rep = tail_bound_check(GAUSS, Cn)
    assert rep.lhs == pytest.approx(math.sqrt(2 * math.pi) * erfc(Cn / math.sqrt(2)), rel=1e-10)
    assert rep.passed and not rep.skipped
    assert rep.L == pytest.approx(1.0)


def test_tail_bound_ordinary_smooth_and_skip():
    rep = tail_bound_check(RATIONAL, 3.0)
    # 2 ∫_3^∞ (1+u^2)^-2 du in closed form
    exact = 2 * (math.pi / 4 - 0.5 * (math.atan(3.0) + 3.0 / 10.0))
    assert rep.lhs == pytest.approx(exact, rel=1e-10)
    assert rep.passed
    assert tail_bound_check(RATIONAL, 0.5).skipped


def test_tail_not_integrable():
    slow = _target(lambda u: 1.0 / (1.0 + np.abs(u)), 1.0, 0.0, 0.0)
    with pytest.raises(TailNotIntegrable):
        tail_bound_check(slow, 2.0)


def test_ratio_bound():
    rep = ratio_bound_check(GAUSS, LaplaceNoise(0.5), 4.0)
    x = np.linspace(0, 4, 40001)
    exact = 2 * integrate.simpson(np.exp(-x**2 / 2) * (1 + 0.25 * x**2), x=x)
    assert rep.lhs == pytest.approx(exact, rel=1e-9)
    assert rep.passed
    assert rep.order_ratio > 0


# -- bandwidths and the rate table -------------------------------------------


def test_ordinary_bandwidths():
    bw = select_bandwidth(RateSpec(1, 0, 0, 2, 0, 0), 10**4)
    assert bw.Cn == pytest.approx(10.0) and bw.rule == "ordinarySmoothRate" and not bw.clamped
    assert select_bandwidth(RateSpec(3, 0, 0, 2, 0, 0), 32).Cn == pytest.approx(2.0)


def test_super_smooth_noise_bandwidth():
    # r = 0, rho = 2: [L/(2 beta) - (2 alpha + (1-rho)_-)/(2 rho beta) log(L/(2 beta))]^{1/rho}
    spec = RateSpec(2, 0, 0, 0, 0.5, 2)
    n = 10**6
    base = math.log(n)
    expect = math.sqrt(base - (-1) / 2 * math.log(base))
    bw = select_bandwidth(spec, n)
    assert bw.rule == "superSmoothRate"
    assert bw.Cn == pytest.approx(expect, rel=1e-12)


def test_bandwidth_is_nondecreasing():
    specs = [RateSpec(0, 1, 2, 2, 0, 0), RateSpec(-2, 0.25, 2, 0, 0.045, 2), RateSpec(1, 0, 0, 2, 0, 0)]
    for spec in specs:
        cs = [select_bandwidth(spec, n).Cn for n in (50, 200, 1000, 10**4, 10**5)]
        assert all(b >= a for a, b in zip(cs, cs[1:]))
        assert min(cs) >= 1.0


def test_nonpositive_bracket_warns_and_clamps():
    with pytest.warns(UnsupportedRegimeWarning):
        bw = select_bandwidth(RateSpec(10, 1, 2, 2, 0, 0), 100)
    assert bw.clamped and bw.Cn == 1.0
    with pytest.raises(InvalidRegime):
        select_bandwidth(RateSpec(1, 0, 0, 2, 0, 0), 1)


def test_rate_slopes():
    ordinary = theoretical_rate(RateSpec(1, 0, 0, 2, 0, 0))
    assert ordinary.log_slope(1e4) == pytest.approx(-0.25, rel=1e-8)
    par = theoretical_rate(RateSpec(0, 1, 2, 2, 0, 0))
    assert par.parametric and par.log_slope(1e4) == pytest.approx(-1.0)
    logr = theoretical_rate(RateSpec(2, 0, 0, 0, 0.5, 2))
    assert logr.logarithmic and not logr.parametric
    assert logr(1e6) == pytest.approx(math.log(1e6) ** (-1.5))
    assert math.isnan(ordinary.value)


def test_invalid_low_order_target():
    with pytest.raises(InvalidRegime):
        theoretical_rate(RateSpec(0.5, 0, 0, 2, 0, 0))


# -- bias/variance proxy --------------------------------------------------------


def test_proxy_matches_closed_form():
    noise, Cn, n = LaplaceNoise(1.0), 2.0, 1000
    tail1 = math.sqrt(2 * math.pi) * erfc(Cn / math.sqrt(2)) / 2
    tail2 = math.sqrt(math.pi) * erfc(Cn) / 2
    bias = min((2 * tail1) ** 2, 2 * tail2)
    x = np.linspace(0, Cn, 20001)
    r = np.exp(-x**2 / 2) * (1 + x**2)
    var = min((2 * integrate.simpson(r, x=x)) ** 2, 2 * integrate.simpson(r**2, x=x))
    assert bias_variance_proxy(GAUSS, noise, Cn, n) == pytest.approx(bias + var / n, rel=1e-8)


def test_rate_condition_along_optimal_bandwidth():
    noise = GaussianNoise(0.3)
    spec = RateSpec(0, 0.5, 2, 0, noise.smoothness.beta, 2)
    ok, table = check_rate_condition([GAUSS, RATIONAL], noise, lambda n: select_bandwidth(spec, n).Cn)
    assert ok
    assert len(table) == 2 and len(table[0]) == 3
