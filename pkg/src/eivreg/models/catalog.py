"""Registry of the built-in families, noise laws, designs and weights."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..errors import ConfigError
from . import families as fam
from . import noise as nz
from . import weights as wt


def default_beta(noise) -> float:
    """Gaussian-damping scale paired with ``noise``.

    For noise with ``rho = 2`` the weight is twice as wide in frequency as the
    error law (``beta_w = 2 beta``), so that ``w*/p*`` still decays; for other
    noise the scale is one.
    """
    s = noise.smoothness
    if s.rho == 2 and s.beta > 0:
        return 2.0 * s.beta
    return 1.0


@dataclass(frozen=True)
class Pairing:
    """A regression family together with its recommended weight."""

    family: str
    weight: Callable  # (noise, family) -> WeightSpec
    family_params: dict = field(default_factory=dict)
    note: str = ""


def _bump_triplet(family, R=1.0, reach=6.0):
    a, b = family.meta["a"], family.meta["b"]
    return wt.sum_of_bumps([(a - reach, a), (a, b), (b, b + reach)], R)


PAIRINGS = {
    "example01": Pairing("polynomial", lambda nz_, f: wt.gaussian_damp(default_beta(nz_)), note="polynomial"),
    "example02": Pairing("exponential", lambda nz_, f: wt.gaussian_damp(default_beta(nz_)), note="exponential"),
    "example03": Pairing("cosineSum", lambda nz_, f: wt.gaussian_damp(default_beta(nz_)), {"d": 2}, "cosines"),
    "example04": Pairing("cauchy", lambda nz_, f: wt.rational_gaussian(4, default_beta(nz_)), note="Cauchy"),
    "example05": Pairing("laplaceTent", lambda nz_, f: wt.sum_of_bumps([(-6.0, 0.0), (0.0, 6.0)], 1.0), note="tent"),
    "example06": Pairing("indicator", lambda nz_, f: wt.bump_psi(-1.0, 1.0, 1.0), note="indicator"),
    "example07": Pairing("polygonal", lambda nz_, f: _bump_triplet(f), note="polygonal"),
    "example08": Pairing("logistic3", lambda nz_, f: wt.logistic_growth_weight(default_beta(nz_)), note="growth 1"),
    "example09": Pairing("logistic4", lambda nz_, f: wt.logistic4_weight(default_beta(nz_)), note="growth 2"),
    "example10": Pairing("cauchyTheta", lambda nz_, f: wt.cauchy_theta_weight(default_beta(nz_)), note="Cauchy 2"),
}


@dataclass
class Catalog:
    """Name-to-constructor maps referenced by configuration keys."""

    families: dict
    noises: dict
    xis: dict
    designs: dict
    weights: dict
    pairings: dict

    def _get(self, registry, kind, key, params):
        try:
            builder = registry[key]
        except KeyError:
            raise ConfigError(f"unknown {kind} {key!r}; known: {sorted(registry)}", key=kind) from None
        try:
            return builder(**params)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for {kind} {key!r}: {exc}", key=kind) from None

    def family(self, key, **params) -> fam.RegressionFamily:
        return self._get(self.families, "regression.family", key, params)

    def noise(self, key, **params) -> nz.NoiseModel:
        return self._get(self.noises, "noise.kind", key, params)

    def xi(self, key, **params) -> nz.XiModel:
        return self._get(self.xis, "xi.kind", key, params)

    def design(self, key, **params) -> nz.DesignDensity:
        return self._get(self.designs, "design.kind", key, params)

    def weight(self, key, **params) -> wt.WeightSpec:
        return self._get(self.weights, "weight.kind", key, params)

    def pairing(self, key) -> Pairing:
        if key not in self.pairings:
            raise ConfigError(f"unknown pairing {key!r}", key="weight.pairing")
        return self.pairings[key]


def register_builtins() -> Catalog:
    """Catalog of everything shipped with the package."""
    return Catalog(
        families=dict(fam.FAMILY_BUILDERS),
        noises={
            "gaussian": nz.GaussianNoise,
            "laplaceSymmetric": nz.LaplaceNoise,
            "laplace": nz.LaplaceNoise,
            "zero": nz.DegenerateNoise,
        },
        xis={"gaussian": nz.GaussianXi, "uniform": nz.UniformXi, "zero": nz.ZeroXi},
        designs={
            "gaussian": nz.GaussianDesign,
            "uniform": nz.UniformDesign,
            "uniformMixture": nz.UniformMixture,
        },
        weights={
            "constantOne": wt.constant_one,
            "gaussianDamp": wt.gaussian_damp,
            "rationalGaussian": wt.rational_gaussian,
            "bumpPsi": wt.bump_psi,
            "powerSmoother": wt.power_smoother,
            "sumOfBumps": wt.sum_of_bumps,
            "logisticGrowth": wt.logistic_growth_weight,
            "logistic4Growth": wt.logistic4_weight,
            "cauchyThetaWeight": wt.cauchy_theta_weight,
        },
        pairings=dict(PAIRINGS),
    )
