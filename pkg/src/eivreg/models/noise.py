"""Measurement-error, response-noise and design distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import InvariantViolation, MomentDiverges


@dataclass(frozen=True)
class SmoothnessN2:
    """Decay envelope of a characteristic function.

    For ``|u| >= u0``::

        lower <= |p*(u)| |u|^alpha exp(beta |u|^rho) <= upper
    """

    alpha: float
    beta: float
    rho: float
    u0: float = 1.0
    lower: float = 1.0
    upper: float = 1.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.rho) < 0:
            raise InvariantViolation("alpha, beta, rho must be nonnegative")
        if self.rho == 0 and self.beta != 0:
            raise InvariantViolation("rho = 0 requires beta = 0")

    def envelope(self, u):
        u = np.abs(np.asarray(u, dtype=float))
        return u**self.alpha * np.exp(self.beta * u**self.rho)

    def check(self, charfn, u_max_factor: float = 10.0, n_grid: int = 400, rtol: float = 1e-9):
        """Grid check of the two-sided envelope on ``u0 <= |u| <= factor*u0``."""
        u = np.linspace(self.u0, u_max_factor * self.u0, n_grid)
        u = np.concatenate([u, -u])
        scaled = np.abs(charfn(u)) * self.envelope(u)
        return bool(
            np.all(scaled >= self.lower * (1 - rtol)) and np.all(scaled <= self.upper * (1 + rtol))
        )


class NoiseModel:
    """Base class for the measurement error ``eps``.

    Subclasses provide the exact characteristic function ``charfn``, the density,
    a sampler taking an explicit generator, and the exponential moment ``mgf``.
    """

    name = "noise"
    symmetric = True

    def charfn(self, u):
        raise NotImplementedError

    def density(self, x):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def mgf(self, s):
        """``E exp(s eps)`` for real ``s``."""
        raise NotImplementedError

    def mgf_derivatives(self, s):
        """``(m(s), m'(s), m''(s))`` for real ``s``."""
        raise NotImplementedError

    @property
    def variance(self) -> float:
        raise NotImplementedError

    @property
    def smoothness(self) -> SmoothnessN2:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class DegenerateNoise(NoiseModel):
    """No measurement error: ``eps = 0`` and ``p* = 1``."""

    name = "zero"

    def charfn(self, u):
        return np.ones_like(np.asarray(u, dtype=float))

    def density(self, x):
        raise InvariantViolation("the degenerate error has no density")

    def sample(self, rng, n):
        return np.zeros(n)

    def mgf(self, s):
        return np.ones_like(np.asarray(s, dtype=float))

    def mgf_derivatives(self, s):
        one = self.mgf(s)
        return one, 0 * one, 0 * one

    @property
    def variance(self):
        return 0.0

    @property
    def smoothness(self):
        return SmoothnessN2(alpha=0.0, beta=0.0, rho=0.0, u0=1.0, lower=1.0, upper=1.0)


class GaussianNoise(NoiseModel):
    """Centred normal error with standard deviation ``sigma``."""

    name = "gaussian"

    def __init__(self, sigma: float = 1.0):
        if not sigma > 0:
            raise InvariantViolation("sigma must be positive")
        self.sigma = float(sigma)

    def params(self):
        return {"sigma": self.sigma}

    def charfn(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(-0.5 * self.sigma**2 * u**2)

    def density(self, x):
        return stats.norm.pdf(x, scale=self.sigma)

    def sample(self, rng, n):
        return rng.normal(0.0, self.sigma, size=n)

    def mgf(self, s):
        return np.exp(0.5 * self.sigma**2 * np.asarray(s, dtype=float) ** 2)

    def mgf_derivatives(self, s):
        s = np.asarray(s, dtype=float)
        v = self.sigma**2
        m = self.mgf(s)
        return m, v * s * m, (v + v**2 * s**2) * m

    @property
    def variance(self):
        return self.sigma**2

    @property
    def smoothness(self):
        return SmoothnessN2(alpha=0.0, beta=0.5 * self.sigma**2, rho=2.0, u0=1.0)


class LaplaceNoise(NoiseModel):
    """Symmetric Laplace error with ``p*(t) = 1 / (1 + sigma^2 t^2)``.

    The density is ``exp(-|x|/sigma) / (2 sigma)`` and the variance ``2 sigma^2``.
    """

    name = "laplace"

    def __init__(self, sigma: float = 1.0, u0: float = 1.0):
        if not sigma > 0:
            raise InvariantViolation("sigma must be positive")
        self.sigma = float(sigma)
        self.u0 = float(u0)

    def params(self):
        return {"sigma": self.sigma}

    def charfn(self, u):
        u = np.asarray(u, dtype=float)
        return 1.0 / (1.0 + self.sigma**2 * u**2)

    def density(self, x):
        return stats.laplace.pdf(x, scale=self.sigma)

    def sample(self, rng, n):
        return rng.laplace(0.0, self.sigma, size=n)

    def _check_domain(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(np.abs(s) * self.sigma >= 1.0):
            raise MomentDiverges(
                f"E exp(s eps) is infinite for |s| >= {1 / self.sigma:g} under Laplace noise"
            )
        return s

    def mgf(self, s):
        s = self._check_domain(s)
        return 1.0 / (1.0 - self.sigma**2 * s**2)

    def mgf_derivatives(self, s):
        s = self._check_domain(s)
        v = self.sigma**2
        q = 1.0 - v * s**2
        return 1.0 / q, 2 * v * s / q**2, 2 * v / q**2 + 8 * v**2 * s**2 / q**3

    @property
    def variance(self):
        return 2.0 * self.sigma**2

    @property
    def smoothness(self):
        u0 = self.u0
        v = self.sigma**2
        return SmoothnessN2(
            alpha=2.0, beta=0.0, rho=0.0, u0=u0, lower=u0**2 / (1 + v * u0**2), upper=1.0 / v
        )


# ---------------------------------------------------------------------------
# Response noise xi
# ---------------------------------------------------------------------------


class XiModel:
    """Centred response noise with known second to fourth moments."""

    name = "xi"

    def sample(self, rng, n):
        raise NotImplementedError

    @property
    def var(self) -> float:
        raise NotImplementedError

    @property
    def m3(self) -> float:
        return 0.0

    @property
    def m4(self) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class GaussianXi(XiModel):
    name = "gaussian"

    def __init__(self, sd: float = 1.0):
        if not sd > 0:
            raise InvariantViolation("sd must be positive")
        self.sd = float(sd)

    def params(self):
        return {"sd": self.sd}

    def sample(self, rng, n):
        return rng.normal(0.0, self.sd, size=n)

    @property
    def var(self):
        return self.sd**2

    @property
    def m4(self):
        return 3.0 * self.sd**4


class UniformXi(XiModel):
    """Uniform on ``[-half_width, half_width]``."""

    name = "uniform"

    def __init__(self, half_width: float = 1.0):
        if not half_width > 0:
            raise InvariantViolation("half_width must be positive")
        self.half_width = float(half_width)

    def params(self):
        return {"half_width": self.half_width}

    def sample(self, rng, n):
        return rng.uniform(-self.half_width, self.half_width, size=n)

    @property
    def var(self):
        return self.half_width**2 / 3.0

    @property
    def m4(self):
        return self.half_width**4 / 5.0


class ZeroXi(XiModel):
    """No response noise (only meaningful for tilde criteria and smoke tests)."""

    name = "zero"

    def sample(self, rng, n):
        return np.zeros(n)

    @property
    def var(self):
        return 0.0

    @property
    def m4(self):
        return 0.0


# ---------------------------------------------------------------------------
# Design densities for X
# ---------------------------------------------------------------------------


class DesignDensity:
    """Density ``g`` of the unobserved covariate, used only for simulation and oracles."""

    name = "design"
    breakpoints: tuple = ()

    def density(self, x):
        raise NotImplementedError

    def sample(self, rng, n):
        raise NotImplementedError

    def support(self, tail: float = 1e-14) -> tuple[float, float]:
        """An interval carrying all but ``tail`` of the mass."""
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class GaussianDesign(DesignDensity):
    name = "gaussian"

    def __init__(self, mean: float = 0.0, sd: float = 1.0):
        if not sd > 0:
            raise InvariantViolation("sd must be positive")
        self.mean = float(mean)
        self.sd = float(sd)

    def params(self):
        return {"mean": self.mean, "sd": self.sd}

    def density(self, x):
        return stats.norm.pdf(x, loc=self.mean, scale=self.sd)

    def sample(self, rng, n):
        return rng.normal(self.mean, self.sd, size=n)

    def support(self, tail=1e-14):
        half = self.sd * stats.norm.isf(tail / 2)
        return self.mean - half, self.mean + half


class UniformDesign(DesignDensity):
    name = "uniform"

    def __init__(self, low: float = -1.0, high: float = 1.0):
        if not high > low:
            raise InvariantViolation("need high > low")
        self.low = float(low)
        self.high = float(high)
        self.breakpoints = (self.low, self.high)

    def params(self):
        return {"low": self.low, "high": self.high}

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.low) & (x <= self.high), 1.0 / (self.high - self.low), 0.0)

    def sample(self, rng, n):
        return rng.uniform(self.low, self.high, size=n)

    def support(self, tail=1e-14):
        return self.low, self.high


class UniformMixture(DesignDensity):
    """Mixture of uniform components ``(low, high, weight)``."""

    name = "uniformMixture"

    def __init__(self, components=((-2.0, -0.5, 0.5), (0.5, 2.0, 0.5))):
        comps = [(float(a), float(b), float(w)) for a, b, w in components]
        if any(b <= a or w <= 0 for a, b, w in comps):
            raise InvariantViolation("components need low < high and positive weight")
        total = sum(w for _, _, w in comps)
        self.components = tuple((a, b, w / total) for a, b, w in comps)
        self.breakpoints = tuple(sorted({e for a, b, _ in self.components for e in (a, b)}))

    def params(self):
        return {"components": self.components}

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a, b, w in self.components:
            out = out + np.where((x >= a) & (x <= b), w / (b - a), 0.0)
        return out

    def sample(self, rng, n):
        probs = np.array([w for _, _, w in self.components])
        idx = rng.choice(len(probs), size=n, p=probs)
        lows = np.array([a for a, _, _ in self.components])[idx]
        highs = np.array([b for _, b, _ in self.components])[idx]
        return lows + (highs - lows) * rng.random(n)

    def support(self, tail=1e-14):
        return self.breakpoints[0], self.breakpoints[-1]


def gauss_moment(k: int, mean: float, var: float) -> float:
    """Raw moment ``E X^k`` of ``N(mean, var)``."""
    m_prev, m = 1.0, mean
    if k == 0:
        return 1.0
    for j in range(2, k + 1):
        m_prev, m = m, mean * m + (j - 1) * var * m_prev
    return m


__all__ = [
    "SmoothnessN2",
    "NoiseModel",
    "DegenerateNoise",
    "GaussianNoise",
    "LaplaceNoise",
    "XiModel",
    "GaussianXi",
    "UniformXi",
    "ZeroXi",
    "DesignDensity",
    "GaussianDesign",
    "UniformDesign",
    "UniformMixture",
    "gauss_moment",
]
