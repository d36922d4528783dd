"""Regression families, noise laws, designs, weights and weighted targets."""

from .catalog import Catalog, Pairing, default_beta, register_builtins
from .families import RegressionFamily, X, theta_symbols
from .noise import (
    DegenerateNoise,
    DesignDensity,
    GaussianDesign,
    GaussianNoise,
    GaussianXi,
    LaplaceNoise,
    NoiseModel,
    SmoothnessN2,
    UniformDesign,
    UniformMixture,
    UniformXi,
    XiModel,
    ZeroXi,
)
from .sampling import Sample, generate_sample
from .targets import (
    SmoothnessR1,
    TargetFamily,
    TargetTriple,
    WeightedTarget,
    build_weighted_target,
)
from .weights import WeightSpec

__all__ = [
    "Catalog",
    "Pairing",
    "default_beta",
    "register_builtins",
    "RegressionFamily",
    "X",
    "theta_symbols",
    "NoiseModel",
    "DegenerateNoise",
    "GaussianNoise",
    "LaplaceNoise",
    "SmoothnessN2",
    "XiModel",
    "GaussianXi",
    "UniformXi",
    "ZeroXi",
    "DesignDensity",
    "GaussianDesign",
    "UniformDesign",
    "UniformMixture",
    "Sample",
    "generate_sample",
    "SmoothnessR1",
    "TargetFamily",
    "TargetTriple",
    "WeightedTarget",
    "build_weighted_target",
    "WeightSpec",
]
