"""Named analytic distribution families on the real line.

Three families cover every continuous law the package needs: uniform,
gaussian and point-mass.  Each exposes a CDF, a quantile function, exact
sampling, and quadrature-backed expectations.  Everything else in the
package works with finite-support atomic measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from .errors import FiniPostError
from .rng import RngState

__all__ = ["AnalyticLaw", "UniformLaw", "GaussianLaw", "PointMassLaw", "family_from_spec"]


@dataclass(frozen=True)
class UniformLaw:
    """Uniform law on the interval [a, b]."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.b > self.a):
            raise FiniPostError("config-error", f"uniform law needs b > a, got [{self.a}, {self.b}]")

    @property
    def name(self) -> str:
        return f"uniform({self.a},{self.b})"

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def quantile(self, u):
        return self.a + (self.b - self.a) * np.asarray(u, dtype=float)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)

    def sample(self, rng: RngState, size=None):
        return rng.uniform(self.a, self.b, size=size)

    def mean(self) -> float:
        return 0.5 * (self.a + self.b)

    def second_moment(self) -> float:
        return (self.a * self.a + self.a * self.b + self.b * self.b) / 3.0

    def expect(self, f: Callable[[float], float]) -> float:
        val, _ = integrate.quad(lambda x: f(x) * 1.0 / (self.b - self.a), self.a, self.b, limit=200)
        return val

    def pair_expect(self, g: Callable[[float, float], float]) -> float:
        inv = 1.0 / (self.b - self.a)
        val, _ = integrate.dblquad(lambda y, x: g(x, y) * inv * inv, self.a, self.b, self.a, self.b)
        return val

    def mean_abs_diff(self) -> float:
        # E|X - Y| for two independent copies.
        return (self.b - self.a) / 3.0

    def abs_deviation(self, c: float) -> float:
        # E|X - c| in closed form.
        a, b = self.a, self.b
        if c <= a:
            return self.mean() - c
        if c >= b:
            return c - self.mean()
        return ((c - a) ** 2 + (b - c) ** 2) / (2.0 * (b - a))


@dataclass(frozen=True)
class GaussianLaw:
    """Gaussian law with mean mu and standard deviation sigma."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0):
            raise FiniPostError("config-error", f"gaussian law needs sigma > 0, got {self.sigma}")

    @property
    def name(self) -> str:
        return f"gaussian({self.mu},{self.sigma})"

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def quantile(self, u):
        return self.mu + self.sigma * ndtri(np.asarray(u, dtype=float))

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    def sample(self, rng: RngState, size=None):
        return rng.normal(self.mu, self.sigma, size=size)

    def mean(self) -> float:
        return self.mu

    def second_moment(self) -> float:
        return self.mu * self.mu + self.sigma * self.sigma

    def expect(self, f: Callable[[float], float]) -> float:
        val, _ = integrate.quad(lambda x: f(x) * self.pdf(x), -np.inf, np.inf, limit=200)
        return val

    def pair_expect(self, g: Callable[[float, float], float]) -> float:
        val, _ = integrate.dblquad(
            lambda y, x: g(x, y) * self.pdf(x) * self.pdf(y),
            -np.inf, np.inf, -np.inf, np.inf,
        )
        return val

    def mean_abs_diff(self) -> float:
        return 2.0 * self.sigma / math.sqrt(math.pi)

    def abs_deviation(self, c: float) -> float:
        z = (c - self.mu) / self.sigma
        return self.sigma * (2.0 * float(self.pdf(c)) * self.sigma + z * (2.0 * float(ndtr(z)) - 1.0))


@dataclass(frozen=True)
class PointMassLaw:
    """Degenerate law concentrated at a single point c."""

    c: float

    @property
    def name(self) -> str:
        return f"point-mass({self.c})"

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.c, 1.0, 0.0)

    def quantile(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.c)

    def sample(self, rng: RngState, size=None):
        if size is None:
            return self.c
        return np.full(size, self.c, dtype=float)

    def mean(self) -> float:
        return self.c

    def second_moment(self) -> float:
        return self.c * self.c

    def expect(self, f: Callable[[float], float]) -> float:
        return float(f(self.c))

    def pair_expect(self, g: Callable[[float, float], float]) -> float:
        return float(g(self.c, self.c))

    def mean_abs_diff(self) -> float:
        return 0.0

    def abs_deviation(self, c: float) -> float:
        return abs(self.c - c)


AnalyticLaw = UniformLaw | GaussianLaw | PointMassLaw


def family_from_spec(spec: dict) -> AnalyticLaw:
    """Build an analytic law from its JSON object form.

    Accepted shapes: ``{"family":"uniform","a":0,"b":1}``,
    ``{"family":"gaussian","mu":0,"sigma":1}``, ``{"family":"point_mass","c":0}``.
    """
    if not isinstance(spec, dict) or "family" not in spec:
        raise FiniPostError("config-error", f"not a family spec: {spec!r}")
    kind = spec["family"]
    try:
        if kind == "uniform":
            return UniformLaw(float(spec["a"]), float(spec["b"]))
        if kind == "gaussian":
            return GaussianLaw(float(spec["mu"]), float(spec["sigma"]))
        if kind in ("point_mass", "point-mass"):
            return PointMassLaw(float(spec["c"]))
    except KeyError as exc:
        raise FiniPostError("config-error", f"family spec missing field {exc}") from exc
    raise FiniPostError("config-error", f"unknown family {kind!r}")
