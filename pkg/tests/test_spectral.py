import math

import numpy as np
import pytest
from scipy import integrate

from eivreg.errors import InvariantViolation, NonvanishingViolation
from eivreg.models import GaussianNoise, LaplaceNoise
from eivreg.models.noise import DegenerateNoise
from eivreg.spectral import (
    SINC,
    Bandwidth,
    FourierConvention,
    KernelSpec,
    QuadratureSpec,
    SpectralGrid,
    deconv_kernel_mass,
    deconv_kernel_value,
    kernel_multiplier,
    numeric_fourier_transform,
    panel_rule,
    smoothed_functional,
)


def laplace_kernel_closed_form(x, sigma, C):
    """``(1/pi) ∫_0^C cos(ux) (1 + sigma^2 u^2) du`` in closed form, ``x != 0``."""
    s, c = math.sin(C * x), math.cos(C * x)
    u2 = C**2 * s / x + 2 * C * c / x**2 - 2 * s / x**3
    return (s / x + sigma**2 * u2) / math.pi


@pytest.mark.parametrize("x", [-2.3, -0.4, 0.7, 3.1])
@pytest.mark.parametrize("sigma,C", [(0.5, 3.0), (1.0, 1.5)])
def test_laplace_kernel_matches_closed_form(x, sigma, C):
    got = deconv_kernel_value(SINC, LaplaceNoise(sigma), C, x)
    assert got == pytest.approx(laplace_kernel_closed_form(x, sigma, C), rel=1e-9, abs=1e-12)


def test_gaussian_kernel_matches_scipy_quad():
    noise, C = GaussianNoise(0.4), 4.0
    for x in (0.0, 0.9, -2.5):
        ref = integrate.quad(lambda u: math.cos(u * x) * math.exp(0.08 * u * u), 0, C, epsabs=1e-13)[0] / math.pi
        assert deconv_kernel_value(SINC, noise, C, x) == pytest.approx(ref, rel=1e-9)


def test_vector_input_returns_vector():
    xs = np.array([0.0, 1.0, 2.0])
    vals = deconv_kernel_value(SINC, LaplaceNoise(0.5), 2.0, xs)
    assert vals.shape == (3,)
    assert vals[1] == pytest.approx(deconv_kernel_value(SINC, LaplaceNoise(0.5), 2.0, 1.0))


@pytest.mark.parametrize("noise", [DegenerateNoise(), LaplaceNoise(0.7), GaussianNoise(0.3)])
def test_kernel_mass_is_one(noise):
    assert deconv_kernel_mass(SINC, noise, 4.0) == pytest.approx(1.0, abs=1e-12)


def test_smoothing_recovers_shifted_gaussian():
    # psi(x) = exp(-(x-1)^2/2) has psi*(u) = sqrt(2 pi) exp(iu - u^2/2) under the +i convention
    def psi_star(u):
        return math.sqrt(2 * math.pi) * np.exp(1j * u - u**2 / 2)

    z = np.array([-1.0, 0.0, 1.0, 2.5])
    got = smoothed_functional(psi_star, DegenerateNoise(), SINC, 12.0, z)
    np.testing.assert_allclose(got, np.exp(-((z - 1) ** 2) / 2), atol=1e-9)


def test_deconvolution_undoes_noise_in_expectation():
    # E[(psi ⋆ K)(X + eps)] = E[(psi ⋆ K_Cn^0)(X)] exactly; with X fixed at x0 and Laplace
    # noise, integrate the noise density directly.
    noise = LaplaceNoise(0.5)

    def psi_star(u):
        return math.sqrt(2 * math.pi) * np.exp(-u**2 / 2)

    x0 = 0.3
    zs, w = panel_rule(x0 - 25, x0 + 25, 0.25, 16, breakpoints=(x0,))
    vals = smoothed_functional(psi_star, noise, SINC, 10.0, zs)
    mean = (vals * noise.density(zs - x0)) @ w
    assert mean == pytest.approx(math.exp(-x0**2 / 2), abs=1e-9)


def test_forward_and_inverse_conventions_are_adjoint():
    x, w = panel_rule(-12, 12, 0.5, 16)
    f = np.exp(-x**2 / 2)
    u = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(FourierConvention.forward(f, x, w, u), math.sqrt(2 * math.pi) * np.exp(-u**2 / 2),
                               atol=1e-12)
    uu, wu = panel_rule(-12, 12, 0.5, 16)
    back = FourierConvention.inverse(math.sqrt(2 * math.pi) * np.exp(-uu**2 / 2), uu, wu, np.array([0.0, 1.0]))
    np.testing.assert_allclose(back.real, np.exp(-np.array([0.0, 1.0]) ** 2 / 2), atol=1e-12)


def test_panel_rule_respects_breakpoints_and_integrates_polynomials():
    x, w = panel_rule(0.0, 3.0, 0.7, 8, breakpoints=(1.234,))
    assert np.all(np.diff(x) > 0)
    assert w.sum() == pytest.approx(3.0)
    assert (x**5) @ w == pytest.approx(3.0**6 / 6)
    # the breakpoint is a panel edge: the step function integrates exactly
    assert (x < 1.234).astype(float) @ w == pytest.approx(1.234, abs=1e-14)


def test_panel_rule_empty_interval():
    x, w = panel_rule(1.0, 1.0, 0.5)
    assert x.size == 0 and w.size == 0


def test_grid_is_symmetric():
    g = SpectralGrid(LaplaceNoise(0.5), 3.0, zmax=4.0)
    np.testing.assert_allclose(np.sort(g.u), -np.sort(g.u)[::-1], atol=1e-14)
    assert len(g.refined()) == 2 * len(g)


def test_numeric_transform_of_gaussian():
    tab = numeric_fourier_transform(lambda x: np.exp(-x**2 / 2), (-12, 12), u_max=6.0, n_freq=241)
    u = np.array([0.0, 0.5, 2.0, 4.0])
    np.testing.assert_allclose(tab(u).real, math.sqrt(2 * math.pi) * np.exp(-u**2 / 2), atol=1e-6)
    assert np.max(np.abs(tab(u).imag)) < 1e-10


def test_multiplier_refuses_underflow():
    with pytest.raises(NonvanishingViolation):
        kernel_multiplier(SINC, GaussianNoise(1.0), 60.0, np.linspace(-60, 60, 11))


def test_multiplier_vanishes_outside_window():
    m = kernel_multiplier(SINC, LaplaceNoise(1.0), 2.0, np.array([-3.0, 0.0, 1.0, 2.5]))
    np.testing.assert_allclose(m, [0.0, 1.0, 2.0, 0.0])


def test_kernel_spec_invariants():
    with pytest.raises(InvariantViolation):
        KernelSpec(ft=lambda t: 0.5 * np.ones_like(t))
    with pytest.raises(InvariantViolation):
        KernelSpec(ft=lambda t: np.exp(-t**2))
    assert SINC.is_flat_top
    tri = KernelSpec(ft=lambda t: np.clip(1 - np.abs(t), 0, None), name="triangle")
    assert not tri.is_flat_top
    assert deconv_kernel_mass(tri, LaplaceNoise(0.5), 3.0) == pytest.approx(1.0)


def test_bandwidth_and_quadrature_invariants():
    with pytest.raises(InvariantViolation):
        Bandwidth(0.0)
    with pytest.raises(InvariantViolation):
        Bandwidth(1.0, rule="nope")
    with pytest.raises(InvariantViolation):
        QuadratureSpec(rtol=0.0)
    assert float(Bandwidth(2.5)) == 2.5
    assert deconv_kernel_value(SINC, DegenerateNoise(), Bandwidth(2.0), 0.0) == pytest.approx(2.0 / math.pi)
