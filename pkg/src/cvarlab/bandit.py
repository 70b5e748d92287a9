"""Fixed-budget identification of the arm with the lowest CVaR.

Implements successive rejects driven by CVaR estimates (CVaR-SR), a uniform
allocation baseline, and the hardness / error-bound quantities used to
reason about misidentification.

Arms are 0-indexed. Each arm draws from its own random stream keyed by
``(seed, stream key)``; pull ``j`` of an arm is the ``j``-th draw of that
stream, so results do not depend on the order in which arms are played.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .bounds import LightBoundParams, constant_G
from .distributions import Distribution, check_alpha, from_dict, to_dict, true_cvar
from .errors import BudgetTooSmall, DegenerateGaps, InsufficientSamples
from .estimators import EstimatorSpec, estimate, tail_count

__all__ = [
    "BanditEnv",
    "SRSchedule",
    "BanditRun",
    "GapProfile",
    "log_bar",
    "sr_schedule",
    "arm_stream",
    "run_cvar_sr",
    "run_uniform",
    "hardness_H",
    "misid_upper_bound",
    "g_max",
    "GAP_CONVENTION",
    "ALGORITHM_NAMES",
]

# How the zero gap of the best arm enters the hardness measure.
GAP_CONVENTION = "gap[1] := gap[2]"
ALGORITHM_NAMES = ("cvar-sr", "uniform")


@dataclass(frozen=True)
class BanditEnv:
    arms: tuple[Distribution, ...]
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        check_alpha(self.alpha)
        if len(self.arms) < 2:
            raise ValueError("a bandit needs at least two arms")

    @property
    def K(self) -> int:
        return len(self.arms)

    def cvars(self) -> list[float]:
        return [true_cvar(arm, self.alpha) for arm in self.arms]

    def best_arm(self) -> int:
        cvars = self.cvars()
        return int(np.argmin(cvars))

    def gaps(self) -> "GapProfile":
        return GapProfile.from_cvars(self.cvars())

    @classmethod
    def from_dict(cls, obj: dict) -> "BanditEnv":
        return cls(tuple(from_dict(a) for a in obj["arms"]), float(obj["alpha"]))

    def to_dict(self) -> dict:
        return {"arms": [to_dict(a) for a in self.arms], "alpha": self.alpha}


def log_bar(K: int) -> Fraction:
    """``1/2 + sum_{i=2}^K 1/i`` as an exact fraction."""
    return Fraction(1, 2) + sum((Fraction(1, i) for i in range(2, K + 1)), Fraction(0))


@dataclass(frozen=True)
class SRSchedule:
    """Cumulative per-arm sample counts ``n_1 <= ... <= n_{K-1}`` (``n_0 = 0``)."""

    K: int
    budget: int
    log_bar_K: float
    n_k: tuple[int, ...]

    def increments(self) -> list[int]:
        prev = (0,) + self.n_k[:-1]
        return [b - a for a, b in zip(prev, self.n_k)]

    def total_pulls(self) -> int:
        return sum((self.K + 1 - k) * inc for k, inc in enumerate(self.increments(), start=1))


def sr_schedule(K: int, n: int, alpha: float | None = None) -> SRSchedule:
    """Phase lengths ``n_k = ceil((n - K) / (log_bar(K) (K + 1 - k)))``.

    Computed in exact rational arithmetic. When ``alpha`` is given, also
    require that phase one leaves at least one tail sample per arm.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    if n <= K:
        raise BudgetTooSmall(f"budget n={n} must exceed the number of arms K={K}")
    lb = log_bar(K)
    n_k = tuple(
        math.ceil(Fraction(n - K) / (lb * (K + 1 - k))) for k in range(1, K)
    )
    if alpha is not None and tail_count(n_k[0], check_alpha(alpha)) < 1:
        raise BudgetTooSmall(
            f"first phase gives {n_k[0]} samples per arm, too few for alpha={alpha}"
        )
    return SRSchedule(K, n, float(lb), n_k)


def arm_stream(seed: int | Sequence[int], key: int) -> np.random.Generator:
    """Independent stream for one arm; ``seed`` may be an int or a tuple of entropy words."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))


@dataclass
class BanditRun:
    recommendation: int
    pulls_per_arm: list[int]
    phase_eliminations: list[tuple[int, int, float]] = field(default_factory=list)
    total_pulls: int = 0
    algorithm: str = "cvar-sr"

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "recommendation": self.recommendation,
            "pulls_per_arm": list(self.pulls_per_arm),
            "phase_eliminations": [
                {"phase": ph, "arm": arm, "cvar_hat": est} for ph, arm, est in self.phase_eliminations
            ],
            "total_pulls": self.total_pulls,
        }


def _streams(env: BanditEnv, seed, stream_keys: Sequence[int] | None):
    keys = range(env.K) if stream_keys is None else stream_keys
    if len(keys) != env.K:
        raise ValueError("need one stream key per arm")
    return [arm_stream(seed, int(k)) for k in keys]


def run_cvar_sr(
    env: BanditEnv,
    n: int,
    estimator: EstimatorSpec | None = None,
    seed: int | Sequence[int] = 0,
    stream_keys: Sequence[int] | None = None,
) -> BanditRun:
    """Successive rejects on CVaR estimates.

    In phase ``k`` every surviving arm is topped up to ``n_k`` samples and
    re-estimated on all of them; the arm with the highest estimate is
    dropped, the lowest index winning ties.
    """
    estimator = estimator or EstimatorSpec()
    schedule = sr_schedule(env.K, n, env.alpha)
    rngs = _streams(env, seed, stream_keys)
    samples: list[list[np.ndarray]] = [[] for _ in range(env.K)]
    pulls = [0] * env.K
    active = list(range(env.K))
    eliminations = []

    for phase, target in enumerate(schedule.n_k, start=1):
        estimates = {}
        for arm in active:
            extra = target - pulls[arm]
            if extra > 0:
                samples[arm].append(env.arms[arm].draw(rngs[arm], extra))
                pulls[arm] = target
            estimates[arm] = estimate(np.concatenate(samples[arm]), env.alpha, estimator).cvar_hat
        # max() returns the first maximal element; active is kept in index order.
        worst = max(active, key=lambda a: estimates[a])
        eliminations.append((phase, worst, estimates[worst]))
        active.remove(worst)

    return BanditRun(active[0], pulls, eliminations, sum(pulls), "cvar-sr")


def run_uniform(
    env: BanditEnv,
    n: int,
    estimator: EstimatorSpec | None = None,
    seed: int | Sequence[int] = 0,
    stream_keys: Sequence[int] | None = None,
) -> BanditRun:
    """Pull every arm ``n // K`` times and recommend the lowest CVaR estimate.

    The remaining arms are recorded as eliminated in a single phase, worst
    first.
    """
    estimator = estimator or EstimatorSpec()
    if n < env.K:
        raise BudgetTooSmall(f"budget n={n} is below the number of arms K={env.K}")
    per_arm = n // env.K
    if tail_count(per_arm, env.alpha) < 1:
        raise InsufficientSamples(f"{per_arm} samples per arm are too few for alpha={env.alpha}")
    rngs = _streams(env, seed, stream_keys)
    estimates = [
        estimate(env.arms[i].draw(rngs[i], per_arm), env.alpha, estimator).cvar_hat
        for i in range(env.K)
    ]
    best = int(np.argmin(estimates))
    losers = sorted((i for i in range(env.K) if i != best), key=lambda i: (-estimates[i], i))
    return BanditRun(
        best,
        [per_arm] * env.K,
        [(1, i, estimates[i]) for i in losers],
        per_arm * env.K,
        "uniform",
    )


@dataclass(frozen=True)
class GapProfile:
    """CVaR gaps to the best arm, sorted ascending (the first is 0)."""

    gaps: tuple[float, ...]

    def __post_init__(self):
        gaps = tuple(sorted(float(g) for g in self.gaps))
        if len(gaps) < 2 or gaps[0] != 0.0:
            raise ValueError("gaps must be non-negative with a zero entry for the best arm")
        object.__setattr__(self, "gaps", gaps)

    @classmethod
    def from_cvars(cls, cvars: Sequence[float]) -> "GapProfile":
        best = min(cvars)
        return cls(tuple(c - best for c in cvars))


def hardness_H(profile: GapProfile) -> float:
    """``max_i i / min(gap_[i] / 2, gap_[i]^2 / 4)`` with ``gap_[1] := gap_[2]``.

    Returns ``inf`` when the best arm is tied (``gap_[2] == 0``).
    """
    gaps = list(profile.gaps)
    if all(g == 0.0 for g in gaps):
        raise DegenerateGaps("all CVaR gaps are zero")
    gaps[0] = gaps[1]
    worst = 0.0
    for i, gap in enumerate(gaps, start=1):
        rate = min(gap / 2.0, gap * gap / 4.0)
        if rate == 0.0:
            return math.inf
        worst = max(worst, i / rate)
    return worst


def misid_upper_bound(K: int, n: int, alpha: float, H: float, G_max: float) -> float:
    """``4 K (K - 1) exp(-(n - K)(1 - alpha) G_max / (H log_bar(K)))``, clipped to 1."""
    alpha = check_alpha(alpha)
    if n <= K:
        raise BudgetTooSmall(f"budget n={n} must exceed K={K}")
    if not (H > 0 and G_max > 0):
        raise ValueError("H and G_max must be positive")
    exponent = (n - K) * (1.0 - alpha) * G_max / (H * float(log_bar(K)))
    return min(1.0, 4.0 * K * (K - 1) * math.exp(-exponent))


def g_max(per_arm: Sequence[LightBoundParams]) -> float:
    """Largest per-arm rate constant, as used in the misidentification bound."""
    return max(constant_G(p) for p in per_arm)
