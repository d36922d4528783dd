"""Model bundles: regression family, noise laws, design, weight and estimator choice.

A :class:`Scenario` is everything needed to simulate data and build any of the
four criteria.  :data:`EXAMPLES` holds the ten bundled worked examples; the
design densities and true parameters there are simulation choices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import sympy as sp

from .criteria import CriterionKind, kernel_criterion, phi_criterion
from .errors import ConfigError, UnsupportedConfiguration
from .models import noise as nz
from .models import register_builtins
from .models.sampling import Sample, generate_sample
from .models.targets import SmoothnessR1, TargetTriple, _fit_r1, gaussian_class
from .models.weights import WeightSpec
from .phi import PhiTriple, RatioPhi, phi_cosine, phi_exponential, ratio_cutoff
from .rates import RateSpec, select_bandwidth
from .spectral import DEFAULT_QUAD, SINC, Bandwidth, KernelSpec

CATALOG = register_builtins()


@dataclass(frozen=True)
class Scenario:
    """A complete errors-in-variables model together with the estimator to use.

    Parameters
    ----------
    name : str
    family : RegressionFamily
    theta0 : array_like
        True parameter (simulation only).
    noise, xi, design
        Laws of the covariate error, the response error and the covariate.
    weight : WeightSpec
    kind : CriterionKind
        Default criterion.
    phi_source : str
        ``fourierRatio``, ``closedFormExponential`` or ``closedFormCosine``; used by
        the ``tilde2``/``hat2`` criteria.
    kernel : KernelSpec
    Cn : float, optional
        Fixed cutoff; when ``None`` the rate-optimal rule is used.
    """

    name: str
    family: object
    theta0: np.ndarray
    noise: nz.NoiseModel
    xi: nz.XiModel
    design: nz.DesignDensity
    weight: WeightSpec
    kind: CriterionKind = CriterionKind.tilde1
    phi_source: str = "fourierRatio"
    kernel: KernelSpec = SINC
    Cn: float | None = None
    quad: object = field(default=DEFAULT_QUAD, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "theta0", self.family.check_theta(self.theta0))
        object.__setattr__(self, "kind", CriterionKind(self.kind))

    @property
    def d(self) -> int:
        return self.family.d

    @property
    def sigma2(self) -> float:
        return float(self.xi.var)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    # -- targets and rates ------------------------------------------------

    @cached_property
    def triple(self) -> TargetTriple:
        return TargetTriple(self.weight, self.family, quad=self.quad)

    def target_smoothness(self, orders=(0, 1, 2)) -> list[SmoothnessR1]:
        """Smoothness of ``w f^p`` and of its theta-derivatives, ``p = 0, 1, 2``."""
        out = []
        for t in self.triple.targets:
            base = t.smoothness()
            out.append(base)
            for o in orders:
                if o > 0:
                    ds = _derivative_smoothness(t, o, base)
                    if ds is not None:
                        out.append(ds)
        return out

    @cached_property
    def rate_spec(self) -> RateSpec:
        return RateSpec.from_smoothness(self.target_smoothness(), self.noise.smoothness)

    def bandwidth(self, n: int) -> Bandwidth:
        if self.Cn is not None:
            return Bandwidth(float(self.Cn), "manual")
        return select_bandwidth(self.rate_spec, n)

    # -- criteria ---------------------------------------------------------

    @cached_property
    def phi(self) -> PhiTriple:
        if self.phi_source == "closedFormExponential":
            return phi_exponential(self.noise)
        if self.phi_source == "closedFormCosine":
            return phi_cosine(self.noise, self.d)
        if self.phi_source == "fourierRatio":
            return RatioPhi(self.triple, self.noise, ratio_cutoff(self.triple, self.noise), self.quad)
        raise ConfigError(f"unknown Phi source {self.phi_source!r}", key="estimator.phi")

    def criterion(self, sample: Sample, kind=None, Cn=None):
        """Criterion of the requested kind on ``sample``."""
        kind = CriterionKind(kind or self.kind)
        if kind.uses_kernel:
            cut = float(Cn) if Cn is not None else self.bandwidth(sample.n).Cn
            return kernel_criterion(kind, sample, self.weight, self.family, self.noise, self.kernel, cut,
                                    self.sigma2, quad=self.quad)
        if self.phi_source != "fourierRatio" and self.weight.kind != "constantOne":
            raise UnsupportedConfiguration(f"{self.phi_source} requires weight.kind = constantOne")
        return phi_criterion(kind, sample, self.phi, self.sigma2, self.quad)

    def simulate(self, n: int, seed) -> Sample:
        return generate_sample(self.design, self.family, self.theta0, self.xi, self.noise, n, seed)


def _derivative_smoothness(target, order, base: SmoothnessR1) -> SmoothnessR1 | None:
    """Smoothness of the ``order``-th theta-derivatives of a target's transform.

    Analytic targets are differentiated symbolically and each derivative is
    decomposed again; numeric targets are refitted from the transform tail.
    Returns ``None`` when every derivative of that order vanishes.
    """
    theta = target.theta_ref
    u0 = base.u0
    if target.analytic is not None:
        expr = target.weight.expr * target.family.expr**target.p
        syms = target.family.symbols
        worst = None
        for idx in itertools.combinations_with_replacement(range(len(syms)), order):
            dexpr = sp.diff(expr, *[syms[i] for i in idx])
            if dexpr == 0:
                continue
            gc = gaussian_class(dexpr, syms)
            if gc is None or not len(gc):
                continue
            b = float(gc.beta.min())
            a = -float(gc.k[np.isclose(gc.beta, b)].max())
            cand = (2.0, b, a)
            worst = cand if worst is None or cand < worst else worst
        if worst is None:
            return None
        r, b, a = worst
        return SmoothnessR1(a, b, r, u0, np.nan, np.nan, "analytic")
    u = np.linspace(u0, 100.0, 800)
    vals = np.abs(target.fourier_derivatives(theta, u, order)[order])
    mag = vals.reshape(-1, u.size).max(axis=0)
    if not np.any(mag > 0):
        return None
    a, b, r = _fit_r1(u, mag, u0, target.registered_r)
    return SmoothnessR1(a, b, r, u0, np.nan, np.nan, "fitted")


# ---------------------------------------------------------------------------
# Bundled examples
# ---------------------------------------------------------------------------


def _pair(key, noise, **family_params):
    pairing = CATALOG.pairing(key)
    fam = CATALOG.family(pairing.family, **{**pairing.family_params, **family_params})
    return fam, pairing.weight(noise, fam)


def example01():
    noise = nz.LaplaceNoise(0.5)
    fam, w = _pair("example01", noise)
    return Scenario("example01", fam, [1.0], noise, nz.GaussianXi(0.5), nz.GaussianDesign(0.0, 1.0), w,
                    CriterionKind.tilde1)


def example02():
    noise = nz.GaussianNoise(0.3)
    fam = CATALOG.family("exponential")
    return Scenario("example02", fam, [0.5], noise, nz.GaussianXi(0.3), nz.GaussianDesign(0.0, 0.5),
                    CATALOG.weight("constantOne"), CriterionKind.tilde2, "closedFormExponential")


def example03():
    noise = nz.GaussianNoise(0.3)
    fam, w = _pair("example03", noise)
    return Scenario("example03", fam, [1.0, 0.5], noise, nz.GaussianXi(0.3), nz.GaussianDesign(0.0, 1.0), w,
                    CriterionKind.tilde1)


def example04():
    noise = nz.GaussianNoise(0.3)
    fam, w = _pair("example04", noise)
    return Scenario("example04", fam, [1.0], noise, nz.GaussianXi(0.3), nz.GaussianDesign(0.0, 1.0), w,
                    CriterionKind.tilde1)


def example05():
    noise = nz.LaplaceNoise(0.3)
    fam, w = _pair("example05", noise)
    return Scenario("example05", fam, [1.0], noise, nz.GaussianXi(0.3), nz.GaussianDesign(0.0, 1.5), w,
                    CriterionKind.tilde1)


def example06():
    noise = nz.LaplaceNoise(0.3)
    fam, w = _pair("example06", noise)
    return Scenario("example06", fam, [1.0], noise, nz.GaussianXi(0.3), nz.UniformDesign(-2.0, 2.0), w,
                    CriterionKind.tilde1)


def example07():
    noise = nz.LaplaceNoise(0.3)
    fam, w = _pair("example07", noise)
    return Scenario("example07", fam, [0.5, 1.0, -0.5, 0.3], noise, nz.GaussianXi(0.3),
                    nz.UniformDesign(-2.0, 2.0), w, CriterionKind.tilde1)


def example08():
    noise = nz.GaussianNoise(0.3)
    fam, w = _pair("example08", noise)
    return Scenario("example08", fam, [2.0, 1.0, -1.0], noise, nz.GaussianXi(0.2), nz.GaussianDesign(0.0, 1.0),
                    w, CriterionKind.hat1)


def example09():
    noise = nz.GaussianNoise(0.3)
    fam, w = _pair("example09", noise)
    return Scenario("example09", fam, [2.0, 0.5, 0.5, -1.0], noise, nz.GaussianXi(0.2),
                    nz.GaussianDesign(0.0, 1.0), w, CriterionKind.hat1)


def example10():
    noise = nz.GaussianNoise(0.3)
    fam, w = _pair("example10", noise)
    return Scenario("example10", fam, [1.0], noise, nz.GaussianXi(0.2), nz.GaussianDesign(0.0, 1.0), w,
                    CriterionKind.hat1)


EXAMPLES = {
    f.__name__: f
    for f in (example01, example02, example03, example04, example05, example06, example07, example08,
              example09, example10)
}


def get_example(name: str) -> Scenario:
    try:
        return EXAMPLES[name]()
    except KeyError:
        raise ConfigError(f"unknown example {name!r}; known: {sorted(EXAMPLES)}", key="scenario.id") from None


def degenerate(family="polynomial", theta0=(1.0,), **family_params) -> Scenario:
    """Noiseless scenario: ``eps = 0``, ``xi = 0``, ``w = exp(-x^2/4)``."""
    fam = CATALOG.family(family, **family_params)
    return Scenario("degenerate", fam, theta0, nz.DegenerateNoise(), nz.ZeroXi(), nz.GaussianDesign(0.0, 1.0),
                    CATALOG.weight("gaussianDamp", beta=1.0), CriterionKind.tilde1, Cn=20.0)
