"""Parametric loss distributions with ground-truth VaR and CVaR.

Every family here has a continuous, strictly increasing CDF on its support,
so VaR is the plain inverse CDF and CVaR is the conditional tail mean
``E[X | X >= VaR]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, ClassVar

import numpy as np
from scipy import integrate, optimize, special

from .errors import InfiniteCVaR, NoFiniteMoment

__all__ = [
    "Distribution",
    "Gaussian",
    "Exponential",
    "Pareto",
    "Lognormal",
    "StudentT",
    "LightTailed",
    "BoundedMoment",
    "check_alpha",
    "sample",
    "true_var",
    "true_cvar",
    "numeric_var",
    "numeric_cvar",
    "abs_moment",
    "moment_bound",
    "tail_class",
    "from_dict",
    "to_dict",
]

# Relative tolerance of the tail-expectation quadrature.
QUAD_EPSREL = 1e-10
# Inflation applied to E|X|^p so the strict moment inequality holds.
MOMENT_INFLATION = 1.05


def check_alpha(alpha: float) -> float:
    """Validate a risk level and return it as a float."""
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"risk level alpha must lie in (0, 1), got {alpha!r}")
    return alpha


def _positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


class Distribution:
    """Common interface for the parametric families.

    Subclasses are frozen dataclasses; ``family`` is the JSON tag.
    """

    family: ClassVar[str]
    support_lower: ClassVar[float] = -math.inf

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def lower(self) -> float:
        return self.support_lower

    # Largest moment order that is finite (exclusive); inf for all moments.
    def moment_limit(self) -> float:
        return math.inf


@dataclass(frozen=True)
class Gaussian(Distribution):
    mean: float = 0.0
    stddev: float = 1.0

    family: ClassVar[str] = "gaussian"

    def __post_init__(self):
        _positive("stddev", self.stddev)

    def cdf(self, x):
        return special.ndtr((np.asarray(x) - self.mean) / self.stddev)

    def sf(self, x):
        return special.ndtr((self.mean - np.asarray(x)) / self.stddev)

    def pdf(self, x):
        z = (np.asarray(x) - self.mean) / self.stddev
        return np.exp(-0.5 * z * z) / (self.stddev * math.sqrt(2 * math.pi))

    def draw(self, rng, n):
        return rng.normal(self.mean, self.stddev, n)


@dataclass(frozen=True)
class Exponential(Distribution):
    mean: float = 1.0

    family: ClassVar[str] = "exponential"
    support_lower: ClassVar[float] = 0.0

    def __post_init__(self):
        _positive("mean", self.mean)

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return -np.expm1(-x / self.mean)

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return np.exp(-x / self.mean)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, np.exp(-np.maximum(x, 0.0) / self.mean) / self.mean, 0.0)

    def draw(self, rng, n):
        return rng.exponential(self.mean, n)


@dataclass(frozen=True)
class Pareto(Distribution):
    """Pareto type I with ``P(X > x) = (scale / x) ** shape`` for ``x >= scale``.

    Shapes at or below 1 are accepted so that callers can ask for the CVaR
    and get :class:`InfiniteCVaR` rather than a construction error.
    """

    scale: float = 1.0
    shape: float = 3.0

    family: ClassVar[str] = "pareto"

    def __post_init__(self):
        _positive("scale", self.scale)
        _positive("shape", self.shape)

    def lower(self):
        return self.scale

    def moment_limit(self):
        return self.shape

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), self.scale)
        return -np.expm1(self.shape * np.log(self.scale / x))

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), self.scale)
        return (self.scale / x) ** self.shape

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        safe = np.maximum(x, self.scale)
        dens = self.shape * self.scale**self.shape / safe ** (self.shape + 1)
        return np.where(x >= self.scale, dens, 0.0)

    def draw(self, rng, n):
        # numpy's pareto is the Lomax (shifted) form.
        return self.scale * (1.0 + rng.pareto(self.shape, n))


@dataclass(frozen=True)
class Lognormal(Distribution):
    mu: float = 0.0
    sigma: float = 1.0

    family: ClassVar[str] = "lognormal"
    support_lower: ClassVar[float] = 0.0

    def __post_init__(self):
        _positive("sigma", self.sigma)

    def _z(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (np.log(np.maximum(x, 0.0)) - self.mu) / self.sigma

    def cdf(self, x):
        return special.ndtr(self._z(x))

    def sf(self, x):
        return special.ndtr(-self._z(x))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = self._z(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = np.exp(-0.5 * z * z) / (x * self.sigma * math.sqrt(2 * math.pi))
        return np.where(x > 0, dens, 0.0)

    def draw(self, rng, n):
        return rng.lognormal(self.mu, self.sigma, n)


@dataclass(frozen=True)
class StudentT(Distribution):
    """Centered Student-t scaled by ``scale``; two-sided heavy tail."""

    dof: float = 3.0
    scale: float = 1.0

    family: ClassVar[str] = "student_t"

    def __post_init__(self):
        _positive("dof", self.dof)
        _positive("scale", self.scale)

    def moment_limit(self):
        return self.dof

    def cdf(self, x):
        return special.stdtr(self.dof, np.asarray(x, dtype=float) / self.scale)

    def sf(self, x):
        return special.stdtr(self.dof, -np.asarray(x, dtype=float) / self.scale)

    def pdf(self, x):
        t = np.asarray(x, dtype=float) / self.scale
        nu = self.dof
        log_norm = (
            special.gammaln((nu + 1) / 2)
            - special.gammaln(nu / 2)
            - 0.5 * math.log(nu * math.pi)
        )
        return np.exp(log_norm - (nu + 1) / 2 * np.log1p(t * t / nu)) / self.scale

    def draw(self, rng, n):
        return self.scale * rng.standard_t(self.dof, n)


FAMILIES: dict[str, type[Distribution]] = {
    cls.family: cls for cls in (Gaussian, Exponential, Pareto, Lognormal, StudentT)
}


def to_dict(dist: Distribution) -> dict:
    return {"family": dist.family, "params": asdict(dist)}


def from_dict(obj: dict) -> Distribution:
    """Build a distribution from ``{"family": ..., "params": {...}}``."""
    try:
        cls = FAMILIES[obj["family"]]
    except KeyError as exc:
        raise ValueError(f"unknown or missing distribution family in {obj!r}") from exc
    return cls(**{k: float(v) for k, v in obj.get("params", {}).items()})


@dataclass(frozen=True)
class LightTailed:
    """MGF parameters of the centered variable: ``E exp(l(X - EX)) <= exp(l^2 sigma^2 / 2)`` for ``|l| < 1/b``."""

    sigma: float
    b: float


@dataclass(frozen=True)
class BoundedMoment:
    """``E|X|^p < u`` with ``p`` in (1, 2]."""

    p: float
    u: float

    def __post_init__(self):
        if not (1.0 < self.p <= 2.0):
            raise ValueError(f"moment order p must lie in (1, 2], got {self.p!r}")
        _positive("u", self.u)


def sample(dist: Distribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. samples from ``dist``."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    return dist.draw(rng, int(n))


def _bracket(dist: Distribution, alpha: float) -> tuple[float, float]:
    lo = dist.lower()
    if not math.isfinite(lo):
        lo = -1.0
        while dist.cdf(lo) >= alpha:
            lo *= 2.0
    else:
        lo = float(lo)
    hi = max(lo + 1.0, 1.0)
    while dist.cdf(hi) < alpha:
        hi = lo + 2.0 * (hi - lo)
    return lo, hi


def numeric_var(dist: Distribution, alpha: float) -> float:
    """Invert the CDF by bracketed root finding."""
    alpha = check_alpha(alpha)
    lo, hi = _bracket(dist, alpha)
    return optimize.brentq(
        lambda x: float(dist.cdf(x)) - alpha, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500
    )


def true_var(dist: Distribution, alpha: float) -> float:
    """VaR at level ``alpha``, i.e. ``F^{-1}(alpha)``."""
    alpha = check_alpha(alpha)
    if isinstance(dist, Gaussian):
        return dist.mean + dist.stddev * float(special.ndtri(alpha))
    if isinstance(dist, Exponential):
        return -dist.mean * math.log1p(-alpha)
    if isinstance(dist, Pareto):
        return dist.scale * (1.0 - alpha) ** (-1.0 / dist.shape)
    return numeric_var(dist, alpha)


def _require_finite_mean(dist: Distribution) -> None:
    if dist.moment_limit() <= 1.0:
        raise InfiniteCVaR(f"{dist!r} has no finite mean, so its CVaR diverges")


def numeric_cvar(dist: Distribution, alpha: float, var: float | None = None) -> float:
    """CVaR via ``v + E[(X - v)^+] / (1 - alpha)`` with ``E[(X - v)^+] = int_v^inf P(X > x) dx``."""
    alpha = check_alpha(alpha)
    _require_finite_mean(dist)
    v = true_var(dist, alpha) if var is None else var
    excess, _ = integrate.quad(
        lambda x: float(dist.sf(x)), v, math.inf, epsabs=0.0, epsrel=QUAD_EPSREL, limit=500
    )
    return v + excess / (1.0 - alpha)


def true_cvar(dist: Distribution, alpha: float) -> float:
    """CVaR at level ``alpha``: the mean of the loss beyond its VaR.

    Closed forms for Gaussian, Exponential and Pareto; quadrature otherwise.
    """
    alpha = check_alpha(alpha)
    _require_finite_mean(dist)
    if isinstance(dist, Gaussian):
        z = float(special.ndtri(alpha))
        return dist.mean + dist.stddev * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) / (1.0 - alpha)
    if isinstance(dist, Exponential):
        return true_var(dist, alpha) + dist.mean
    if isinstance(dist, Pareto):
        return dist.shape / (dist.shape - 1.0) * true_var(dist, alpha)
    return numeric_cvar(dist, alpha)


def _integrate(fn: Callable[[float], float], lo: float, hi: float) -> float:
    val, _ = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=1e-10, limit=500)
    return val


def abs_moment(dist: Distribution, p: float) -> float:
    """``E|X|^p`` by quadrature against the density."""
    if p >= dist.moment_limit():
        raise NoFiniteMoment(f"E|X|^{p} diverges for {dist!r}")

    def fn(x):
        return abs(x) ** p * float(dist.pdf(x))

    lo = dist.lower()
    if isinstance(dist, Lognormal):
        # Integrate in log space where the integrand is a smooth Gaussian bump.
        return _integrate(
            lambda y: math.exp(p * y - 0.5 * ((y - dist.mu) / dist.sigma) ** 2)
            / (dist.sigma * math.sqrt(2 * math.pi)),
            -math.inf,
            math.inf,
        )
    if math.isfinite(lo):
        return _integrate(fn, lo, math.inf)
    return _integrate(fn, -math.inf, 0.0) + _integrate(fn, 0.0, math.inf)


def moment_bound(dist: Distribution, p: float) -> BoundedMoment:
    """Bounded-moment parameters ``(p, 1.05 * E|X|^p)`` for the given order."""
    return BoundedMoment(p=p, u=MOMENT_INFLATION * abs_moment(dist, p))


def default_moment_order(dist: Distribution) -> float:
    """Largest convenient order: 2 when the variance exists, else midway to the limit."""
    limit = dist.moment_limit()
    if limit <= 1.0:
        raise NoFiniteMoment(f"no moment of order p in (1, 2] is finite for {dist!r}")
    return 2.0 if limit > 2.0 else 0.5 * (1.0 + limit)


def tail_class(dist: Distribution, p: float | None = None) -> LightTailed | BoundedMoment:
    """Tail parameters for the bound evaluators.

    Gaussian and Exponential are light-tailed with the MGF parameters of
    the centered variable. Pareto, Lognormal and Student-t get a bounded
    moment pair; ``p`` overrides the default order.
    """
    if isinstance(dist, Gaussian):
        return LightTailed(sigma=dist.stddev, b=dist.stddev)
    if isinstance(dist, Exponential):
        return LightTailed(sigma=2.0 * dist.mean, b=2.0 * dist.mean)
    if p is None:
        p = default_moment_order(dist)
    return moment_bound(dist, p)
