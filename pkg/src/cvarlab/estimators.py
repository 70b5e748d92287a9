"""Sample-based VaR and CVaR estimators.

Order statistics are taken in descending order, so the VaR estimate at
level ``alpha`` is the ``floor(n (1 - alpha))``-th largest sample.
Batches are 1-D arrays in arrival order; the truncated estimator depends on
that order and callers must not sort beforehand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special

from .distributions import BoundedMoment, check_alpha
from .errors import InsufficientSamples, InvalidDelta

__all__ = [
    "RiskEstimate",
    "EstimatorSpec",
    "as_batch",
    "tail_count",
    "descending",
    "empirical_cdf",
    "empirical_var",
    "empirical_cvar",
    "truncation_level",
    "truncated_cvar",
    "gaussian_plugin_cvar",
    "standard_normal_cvar",
    "estimate",
]

# Slack on floor(n (1 - alpha)) so that e.g. n=10, alpha=0.9 counts one tail sample.
_COUNT_SLACK = 1e-9

EMPIRICAL = "empirical"
TRUNCATED = "truncated"
GAUSSIAN_PLUGIN = "gaussian-plugin"


@dataclass(frozen=True)
class RiskEstimate:
    var_hat: float
    cvar_hat: float
    n: int
    estimator: str = EMPIRICAL
    params: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "var_hat": self.var_hat,
            "cvar_hat": self.cvar_hat,
            "n": self.n,
            "estimator": self.estimator,
            "params": dict(self.params),
        }


@dataclass(frozen=True)
class EstimatorSpec:
    """Which CVaR estimator to run, plus its parameters.

    ``p``, ``u`` and ``delta`` are only read by the truncated estimator.
    """

    kind: str = EMPIRICAL
    p: float | None = None
    u: float | None = None
    delta: float = 0.01

    def __post_init__(self):
        if self.kind not in (EMPIRICAL, TRUNCATED, GAUSSIAN_PLUGIN):
            raise ValueError(f"unknown estimator {self.kind!r}")
        if self.kind == TRUNCATED:
            if self.p is None or self.u is None:
                raise ValueError("truncated estimator needs p and u")
            BoundedMoment(self.p, self.u)
            _check_delta(self.delta)

    @classmethod
    def from_dict(cls, obj: dict) -> "EstimatorSpec":
        return cls(**obj)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == TRUNCATED:
            out.update(p=self.p, u=self.u, delta=self.delta)
        return out


def as_batch(values) -> np.ndarray:
    batch = np.asarray(values, dtype=float)
    if batch.ndim != 1 or batch.size < 1:
        raise ValueError("a sample batch must be a non-empty 1-D sequence")
    return batch


def tail_count(n: int, alpha: float) -> int:
    """``floor(n (1 - alpha))``, the rank of the VaR order statistic."""
    return int(math.floor(n * (1.0 - alpha) + _COUNT_SLACK))


def descending(values) -> np.ndarray:
    """Descending order statistics (stable, so ties keep arrival order)."""
    batch = as_batch(values)
    return batch[np.argsort(-batch, kind="stable")]


def empirical_cdf(values, x: float) -> float:
    batch = as_batch(values)
    return float(np.count_nonzero(batch <= x)) / batch.size


def empirical_var(values, alpha: float) -> float:
    """The ``floor(n (1 - alpha))``-th largest sample.

    Raises :class:`InsufficientSamples` when that rank is zero.
    """
    alpha = check_alpha(alpha)
    batch = as_batch(values)
    k = tail_count(batch.size, alpha)
    if k < 1:
        raise InsufficientSamples(
            f"n={batch.size} is too small for alpha={alpha}: floor(n(1-alpha)) = 0"
        )
    # The k-th largest equals the (n-k)-th smallest; partition avoids a full sort.
    return float(np.partition(batch, batch.size - k)[batch.size - k])


def empirical_cvar(values, alpha: float) -> RiskEstimate:
    """Classical CVaR estimate: the tail sum over samples ``>= var_hat``, divided by ``n (1 - alpha)``.

    Tied samples at the threshold are all included.
    """
    batch = as_batch(values)
    var_hat = empirical_var(batch, alpha)
    n = batch.size
    cvar_hat = float(batch[batch >= var_hat].sum()) / (n * (1.0 - alpha))
    return RiskEstimate(var_hat, cvar_hat, n, EMPIRICAL)


def _check_delta(delta: float) -> None:
    if not (0.0 < delta < 1.0):
        raise InvalidDelta(f"delta must lie in (0, 1), got {delta!r}")


def truncation_level(i, p: float, u: float, delta: float):
    """Truncation level ``(u i / log(1/delta)) ** (1/p)`` for the i-th sample (1-based).

    Accepts a scalar or an array of indices.
    """
    _check_delta(delta)
    i_arr = np.asarray(i, dtype=float)
    if np.any(i_arr < 1):
        raise ValueError("sample index must be >= 1")
    levels = (u * i_arr / math.log(1.0 / delta)) ** (1.0 / p)
    return float(levels) if levels.ndim == 0 else levels


def truncated_cvar(values, alpha: float, tail: BoundedMoment, delta: float) -> RiskEstimate:
    """CVaR estimate for bounded-moment losses.

    The i-th sample (arrival order) counts only when it lies in
    ``[var_hat, B_i]``, where ``B_i`` is :func:`truncation_level`.
    """
    _check_delta(delta)
    batch = as_batch(values)
    var_hat = empirical_var(batch, alpha)
    n = batch.size
    levels = truncation_level(np.arange(1, n + 1), tail.p, tail.u, delta)
    keep = (batch >= var_hat) & (batch <= levels)
    cvar_hat = float(batch[keep].sum()) / (n * (1.0 - alpha))
    return RiskEstimate(
        var_hat, cvar_hat, n, TRUNCATED, {"p": tail.p, "u": tail.u, "delta": delta}
    )


def standard_normal_cvar(alpha: float) -> float:
    """CVaR of N(0, 1): ``phi(z_alpha) / (1 - alpha)``."""
    z = float(special.ndtri(alpha))
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi) / (1.0 - alpha)


def gaussian_plugin_cvar(values, alpha: float) -> RiskEstimate:
    """Plug the sample mean and unbiased standard deviation into the Gaussian CVaR."""
    alpha = check_alpha(alpha)
    batch = as_batch(values)
    if batch.size < 2:
        raise InsufficientSamples("the Gaussian plug-in needs at least 2 samples")
    mu = float(batch.mean())
    sd = float(batch.std(ddof=1))
    var_hat = mu + sd * float(special.ndtri(alpha))
    return RiskEstimate(var_hat, mu + sd * standard_normal_cvar(alpha), batch.size, GAUSSIAN_PLUGIN)


def estimate(values, alpha: float, spec: EstimatorSpec) -> RiskEstimate:
    if spec.kind == EMPIRICAL:
        return empirical_cvar(values, alpha)
    if spec.kind == TRUNCATED:
        return truncated_cvar(values, alpha, BoundedMoment(spec.p, spec.u), spec.delta)
    return gaussian_plugin_cvar(values, alpha)
