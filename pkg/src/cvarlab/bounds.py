"""Evaluators and sample-size inverters for the VaR/CVaR concentration bounds.

Every bound has the form ``sum_j M_j exp(-r_j n)`` for fixed epsilon, so it
is strictly decreasing in ``n``. Reported values are clipped to [0, 1]; the
unclipped value is kept in :attr:`BoundValue.raw`.

The constants ``c`` and ``c'`` are distribution dependent and never derived
here. They are caller inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .distributions import check_alpha
from .errors import Unachievable

__all__ = [
    "Regime",
    "BoundValue",
    "LightBoundParams",
    "HeavyBoundParams",
    "VarBound",
    "LightBound",
    "HeavyBound",
    "SimplifiedBound",
    "var_bound",
    "cvar_bound_light",
    "cvar_bound_heavy",
    "simplified_light_bound",
    "constant_G",
    "heavy_exponent_power",
    "invert_for_n",
]


class Regime(str, Enum):
    SMALL_EPSILON = "SmallEpsilon"
    LARGE_EPSILON = "LargeEpsilon"
    NOT_APPLICABLE = "NotApplicable"


@dataclass(frozen=True)
class BoundValue:
    probability_bound: float
    regime: Regime
    raw: float

    def to_dict(self) -> dict:
        return {"bound": self.probability_bound, "regime": self.regime.value}


@dataclass(frozen=True)
class LightBoundParams:
    sigma: float
    b: float
    v_alpha: float
    c: float
    alpha: float

    def __post_init__(self):
        check_alpha(self.alpha)
        if self.sigma < 0 or self.b <= 0 or self.c <= 0:
            raise ValueError("need sigma >= 0, b > 0 and c > 0")
        if self.sigma == 0 and self.v_alpha == 0:
            raise ValueError("sigma^2 + v_alpha^2 must be positive")

    @property
    def spread(self) -> float:
        """``sigma^2 + v_alpha^2``."""
        return self.sigma**2 + self.v_alpha**2

    @property
    def eps_star(self) -> float:
        """Regime threshold between the sub-Gaussian and sub-exponential branches."""
        return self.spread / (self.b * (1.0 - self.alpha))


@dataclass(frozen=True)
class HeavyBoundParams:
    p: float
    c: float
    alpha: float

    def __post_init__(self):
        check_alpha(self.alpha)
        if not (1.0 < self.p <= 2.0):
            raise ValueError(f"p must lie in (1, 2], got {self.p!r}")
        if self.c <= 0:
            raise ValueError("c must be positive")


def _terms_value(terms, n: float) -> float:
    return sum(m * math.exp(-r * n) for m, r in terms)


def _check_args(n, eps) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")


class _ExpSumBound:
    """A bound of the form ``sum_j M_j exp(-r_j n)`` for fixed eps."""

    def terms(self, eps: float) -> list[tuple[float, float]]:
        raise NotImplementedError

    def regime(self, eps: float) -> Regime:
        return Regime.NOT_APPLICABLE

    def __call__(self, n: int, eps: float) -> BoundValue:
        _check_args(n, eps)
        raw = _terms_value(self.terms(eps), n)
        return BoundValue(min(1.0, raw), self.regime(eps), raw)


@dataclass(frozen=True)
class VarBound(_ExpSumBound):
    """``2 exp(-2 n c eps^2)``; ``c`` reflects the density near the VaR."""

    c: float = 1.0

    def terms(self, eps):
        return [(2.0, 2.0 * self.c * eps * eps)]


@dataclass(frozen=True)
class LightBound(_ExpSumBound):
    params: LightBoundParams

    def regime(self, eps):
        # The threshold itself belongs to the small-eps branch.
        return Regime.SMALL_EPSILON if eps <= self.params.eps_star else Regime.LARGE_EPSILON

    def terms(self, eps):
        q = self.params
        one_minus = 1.0 - q.alpha
        if self.regime(eps) is Regime.SMALL_EPSILON:
            return [(6.0, q.c * eps * eps * one_minus**2 / (2.0 * q.spread))]
        return [
            (2.0, eps * one_minus / (4.0 * q.b)),
            (6.0, q.c * eps * eps * one_minus**2),
        ]


def heavy_exponent_power(p: float) -> float:
    """Power ``p / (p - 1)`` applied to ``(1 - alpha) eps`` in the bounded-moment bound."""
    return p / (p - 1.0)


@dataclass(frozen=True)
class HeavyBound(_ExpSumBound):
    params: HeavyBoundParams

    def terms(self, eps):
        q = self.params
        power = 2.0 if q.p == 2.0 else heavy_exponent_power(q.p)
        return [(8.0, q.c * ((1.0 - q.alpha) * eps) ** power)]


@dataclass(frozen=True)
class SimplifiedBound(_ExpSumBound):
    """Single-exponential light-tail bound ``8 exp(-n (1 - alpha) min(eps, eps^2) G)``."""

    alpha: float
    G: float

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.G > 0:
            raise ValueError("G must be positive")

    def terms(self, eps):
        return [(8.0, (1.0 - self.alpha) * min(eps, eps * eps) * self.G)]


def var_bound(n: int, eps: float, c: float) -> BoundValue:
    return VarBound(c)(n, eps)


def cvar_bound_light(n: int, eps: float, params: LightBoundParams) -> BoundValue:
    return LightBound(params)(n, eps)


def cvar_bound_heavy(n: int, eps: float, params: HeavyBoundParams) -> BoundValue:
    return HeavyBound(params)(n, eps)


def simplified_light_bound(n: int, eps: float, alpha: float, G: float) -> BoundValue:
    return SimplifiedBound(alpha, G)(n, eps)


def constant_G(params: LightBoundParams) -> float:
    """Rate constant folding both light-tail regimes into one exponent."""
    one_minus = 1.0 - params.alpha
    return min(
        params.c * one_minus / (2.0 * params.spread),
        1.0 / (4.0 * params.b),
        params.c * one_minus,
    )


def invert_for_n(eps: float, target_delta: float, bound: _ExpSumBound) -> int:
    """Smallest ``n >= 1`` with ``bound(n, eps) <= target_delta``.

    Single-term bounds are inverted in closed form. Sums of exponentials
    start from the closed-form solution for the slowest term and are
    corrected by integer bisection. Either way the answer is re-checked
    against the evaluator so the round trip holds exactly.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not target_delta > 0:
        raise Unachievable("target probability must be positive")
    if target_delta >= 1.0:
        return 1

    terms = bound.terms(eps)
    if any(r <= 0 for _, r in terms):
        raise Unachievable(f"bound does not decay in n at eps={eps}")

    def ok(n: int) -> bool:
        return bound(n, eps).probability_bound <= target_delta

    # Each term must be below its share of target_delta; this n is sufficient.
    k = len(terms)
    guess = max(math.log(k * m / target_delta) / r for m, r in terms)
    hi = max(1, math.ceil(guess))
    while not ok(hi):
        hi *= 2
    if ok(1):
        return 1
    # For a single term the closed form is exact up to rounding.
    lo = max(1, hi - 2) if k == 1 else 1
    if ok(lo):
        hi, lo = lo, 1
    # Invariant: ok(hi) and not ok(lo).
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
