"""Estimation of a parametric regression when the covariate is observed with known noise."""

__version__ = "0.1.0"
