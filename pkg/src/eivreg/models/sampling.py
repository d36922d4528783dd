"""Observed samples and their simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, InvariantViolation


@dataclass(frozen=True)
class Sample:
    """Observed pairs ``(Y, Z)`` with optional hidden ``X, xi, eps`` from simulation."""

    Y: np.ndarray
    Z: np.ndarray
    X: np.ndarray | None = None
    xi: np.ndarray | None = None
    eps: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.Y)
        for name in ("Z", "X", "xi", "eps"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise DimensionMismatch(f"{name} has length {len(arr)}, expected {n}")

    @property
    def n(self) -> int:
        return len(self.Y)

    @property
    def has_hidden(self) -> bool:
        return self.X is not None

    def observed(self) -> "Sample":
        return Sample(self.Y, self.Z)


def generate_sample(design, regression, theta0, xi, noise, n: int, seed) -> Sample:
    """Draw ``n`` i.i.d. triples with ``X``, ``xi`` and ``eps`` independent.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`; three
    child streams are spawned so each component is reproducible on its own.
    """
    theta0 = regression.check_theta(theta0)
    if not regression.in_box(theta0):
        raise InvariantViolation(f"theta0 = {theta0} lies outside the parameter box")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rx, rxi, reps = (np.random.default_rng(s) for s in ss.spawn(3))
    X = design.sample(rx, n)
    e_xi = xi.sample(rxi, n)
    e_eps = noise.sample(reps, n)
    Y = regression.evaluate(theta0, X) + e_xi
    Z = X + e_eps
    return Sample(Y=Y, Z=Z, X=X, xi=e_xi, eps=e_eps)
