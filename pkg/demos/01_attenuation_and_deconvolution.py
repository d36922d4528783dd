"""
Measurement error and the deconvolution fix
===========================================

A linear regression whose covariate is observed with Laplace noise. Least
squares on the noisy covariate is biased towards zero; the deconvolution
criterion removes the bias at the price of some extra variance.
"""

import numpy as np

from eivreg.estimators import EstimatorConfig, minimize_criterion
from eivreg.scenarios import get_example
from eivreg.simulation import compare_with_naive, naive_least_squares

sc = get_example("example01")
print("true theta:", sc.theta0)

# One data set of size 2000
sample = sc.simulate(2000, seed=1)
fit = minimize_criterion(EstimatorConfig(), sample, sc)
naive = naive_least_squares(sample, sc.family)
print(f"cutoff Cn = {fit.Cn:.3f}")
print(f"deconvolution estimate: {fit.theta[0]:.4f}")
print(f"naive least squares:    {naive[0]:.4f}")

# Averaged over replicates the naive slope settles near Var X / (Var X + Var eps)
cmp = compare_with_naive(sc, 2000, 20, seed_base=7)
print(f"mean bias, naive:         {cmp.naive_bias[0]:+.4f} (se {cmp.naive_se[0]:.4f})")
print(f"mean bias, deconvolution: {cmp.deconvolution_bias[0]:+.4f} (se {cmp.deconvolution_se[0]:.4f})")
print(f"attenuation predicted:    {1 / (1 + 2 * 0.5**2) - 1:+.4f}")
