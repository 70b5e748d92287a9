"""Monte Carlo harness for deviation and misidentification probabilities.

Randomness is derived per replication from
``(master seed, experiment name, grid index, replication index)``, so a
curve is the same whether replications run sequentially or on a thread
pool. Aggregation is plain counting.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import bounds
from .bandit import (
    GAP_CONVENTION,
    BanditEnv,
    hardness_H,
    g_max,
    misid_upper_bound,
    run_cvar_sr,
    run_uniform,
)
from .distributions import (
    Distribution,
    LightTailed,
    check_alpha,
    default_moment_order,
    from_dict,
    tail_class,
    to_dict,
    true_cvar,
    true_var,
)
from .errors import IOFailure, TooFewPoints
from .estimators import TRUNCATED, EstimatorSpec, estimate, tail_count

log = logging.getLogger(__name__)

THREADS_ENV = "CVARLAB_THREADS"
BOUND_LABEL = "parametric bound, constants user-chosen"
# Replications handed to a worker at a time.
CHUNK = 64


def resolve_threads(threads: int | None = None) -> int:
    """Explicit argument, else ``$CVARLAB_THREADS``, else 1."""
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    return max(1, int(threads))


def name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def replication_rng(seed: int, name: str, grid_index: int, rep: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(name_key(name), grid_index, rep))
    return np.random.Generator(np.random.PCG64(ss))


def replication_seed(seed: int, name: str, grid_index: int, rep: int) -> tuple[int, ...]:
    """Entropy words for a bandit run (each arm then spawns its own stream)."""
    return (int(seed), name_key(name), grid_index, rep)


def _parallel_map(fn, items: Sequence, threads: int) -> list:
    chunks = [items[i : i + CHUNK] for i in range(0, len(items), CHUNK)]

    def work(chunk):
        return [fn(x) for x in chunk]

    if threads <= 1 or len(chunks) <= 1:
        results = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    return [r for chunk in results for r in chunk]


# ---------------------------------------------------------------------------
# Deviation curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeviationConfig:
    dist: Distribution
    alpha: float
    estimator: EstimatorSpec
    epsilon: float
    n_grid: tuple[int, ...]
    reps: int
    seed: int = 0
    name: str = "deviation"
    bound: dict[str, Any] | None = None

    def __post_init__(self):
        check_alpha(self.alpha)
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.n_grid and tail_count(self.n_grid[0], self.alpha) < 1:
            raise ValueError(f"n={self.n_grid[0]} is too small for alpha={self.alpha}")

    @classmethod
    def from_dict(cls, obj: dict) -> "DeviationConfig":
        return cls(
            dist=from_dict(obj["dist"]),
            alpha=float(obj["alpha"]),
            estimator=EstimatorSpec.from_dict(obj.get("estimator", {})),
            epsilon=float(obj["epsilon"]),
            n_grid=tuple(obj["n_grid"]),
            reps=int(obj["reps"]),
            seed=int(obj.get("seed", 0)),
            name=obj.get("name", "deviation"),
            bound=obj.get("bound"),
        )

    def to_dict(self) -> dict:
        return {
            "type": "deviation",
            "name": self.name,
            "dist": to_dict(self.dist),
            "alpha": self.alpha,
            "estimator": self.estimator.to_dict(),
            "epsilon": self.epsilon,
            "n_grid": list(self.n_grid),
            "reps": self.reps,
            "seed": self.seed,
            "bound": self.bound,
        }


@dataclass(frozen=True)
class TailPoint:
    n: int
    empirical_prob: float
    theory_bound: float
    reps: int
    deviations: int


@dataclass
class TailCurve:
    points: list[TailPoint] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)


def bound_for(cfg: DeviationConfig) -> tuple[bounds._ExpSumBound, dict]:
    """Pick the concentration bound matching the estimator and tail class.

    ``cfg.bound`` may set ``kind`` (var, light, heavy, simplified) and the
    constants; anything unspecified falls back to the distribution's tail
    parameters with ``c = 1``.
    """
    spec = dict(cfg.bound or {})
    c = float(spec.get("c", 1.0))
    kind = spec.get("kind")
    tail = None
    if kind is None:
        if cfg.estimator.kind == TRUNCATED:
            kind = "heavy"
        else:
            tail = tail_class(cfg.dist)
            kind = "light" if isinstance(tail, LightTailed) else "heavy"
    if kind == "var":
        bound = bounds.VarBound(c)
    elif kind == "light":
        if tail is None and not {"sigma", "b"} <= spec.keys():
            tail = tail_class(cfg.dist)
        sigma = float(spec.get("sigma", getattr(tail, "sigma", 0.0)))
        b = float(spec.get("b", getattr(tail, "b", 0.0)))
        v_alpha = float(spec.get("v_alpha", true_var(cfg.dist, cfg.alpha)))
        bound = bounds.LightBound(bounds.LightBoundParams(sigma, b, v_alpha, c, cfg.alpha))
        spec.update(sigma=sigma, b=b, v_alpha=v_alpha)
    elif kind == "heavy":
        p = spec.get("p")
        if p is None:
            p = cfg.estimator.p if cfg.estimator.kind == TRUNCATED else default_moment_order(cfg.dist)
        bound = bounds.HeavyBound(bounds.HeavyBoundParams(float(p), c, cfg.alpha))
        spec["p"] = float(p)
    elif kind == "simplified":
        bound = bounds.SimplifiedBound(cfg.alpha, float(spec.get("G", 1.0)))
        spec["G"] = float(spec.get("G", 1.0))
    else:
        raise ValueError(f"unknown bound kind {kind!r}")
    spec.update(kind=kind, c=c)
    return bound, spec


def replicate_estimates(
    dist: Distribution,
    alpha: float,
    estimator: EstimatorSpec,
    n: int,
    reps: int,
    seed: int,
    name: str,
    grid_index: int = 0,
    threads: int | None = None,
) -> np.ndarray:
    """CVaR estimates from ``reps`` independent batches of size ``n``, in replication order."""

    def one(rep: int) -> float:
        rng = replication_rng(seed, name, grid_index, rep)
        return estimate(dist.draw(rng, n), alpha, estimator).cvar_hat

    return np.array(_parallel_map(one, range(reps), resolve_threads(threads)))


def deviation_curve(cfg: DeviationConfig, threads: int | None = None) -> TailCurve:
    """Fraction of replications with ``|cvar_hat - true CVaR| > epsilon`` at each grid size."""
    target = true_cvar(cfg.dist, cfg.alpha)
    bound, bound_meta = bound_for(cfg)
    points = []
    for g, n in enumerate(cfg.n_grid):
        est = replicate_estimates(
            cfg.dist, cfg.alpha, cfg.estimator, n, cfg.reps, cfg.seed, cfg.name, g, threads
        )
        deviations = int(np.count_nonzero(np.abs(est - target) > cfg.epsilon))
        points.append(
            TailPoint(
                n=n,
                empirical_prob=deviations / cfg.reps,
                theory_bound=bound(n, cfg.epsilon).probability_bound,
                reps=cfg.reps,
                deviations=deviations,
            )
        )
        log.debug("n=%d deviations=%d/%d", n, deviations, cfg.reps)
    metadata = {
        "config": cfg.to_dict(),
        "true_cvar": target,
        "theory_bound": BOUND_LABEL,
        "bound": bound_meta,
    }
    return TailCurve(points, metadata)


def pilot_epsilon(
    dist: Distribution,
    alpha: float,
    estimator: EstimatorSpec,
    n: int,
    reps: int,
    seed: int,
    fraction: float = 0.5,
    name: str = "pilot",
) -> float:
    """``fraction`` times the interquartile range of the CVaR estimate at size ``n``."""
    est = replicate_estimates(dist, alpha, estimator, n, reps, seed, name)
    q1, q3 = np.percentile(est, [25, 75])
    return fraction * float(q3 - q1)


# ---------------------------------------------------------------------------
# Misidentification curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorPoint:
    budget: int
    misid_rate: float
    theory_bound: float
    reps: int
    errors: int


@dataclass
class ErrorCurve:
    points: list[ErrorPoint] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)


ALGORITHMS = {"cvar-sr": run_cvar_sr, "uniform": run_uniform}


def misid_curve(
    env: BanditEnv,
    budgets: Sequence[int],
    estimator: EstimatorSpec | None,
    reps: int,
    seed: int,
    theory: dict[str, float] | None = None,
    algorithm: str = "cvar-sr",
    name: str = "misid",
    threads: int | None = None,
) -> ErrorCurve:
    """Empirical ``P(recommendation != best arm)`` per budget.

    ``theory`` may hold ``H`` and ``G_max``; ``H`` defaults to the hardness
    of the environment's true gaps and ``G_max`` to 1. Alternatively
    ``theory["arms"]`` lists per-arm ``{sigma, b, v_alpha, c}`` and ``G_max``
    becomes the largest per-arm ``constant_G``.
    """
    estimator = estimator or EstimatorSpec()
    runner = ALGORITHMS[algorithm]
    best = env.best_arm()
    theory = dict(theory or {})
    H = float(theory.get("H") or hardness_H(env.gaps()))
    if "arms" in theory and "G_max" not in theory:
        per_arm = [
            bounds.LightBoundParams(a["sigma"], a["b"], a["v_alpha"], a.get("c", 1.0), env.alpha)
            for a in theory["arms"]
        ]
        G = g_max(per_arm)
    else:
        G = float(theory.get("G_max", 1.0))
    n_threads = resolve_threads(threads)
    points = []
    for g, budget in enumerate(budgets):
        budget = int(budget)

        def one(rep: int) -> int:
            run = runner(env, budget, estimator, replication_seed(seed, name, g, rep))
            return run.recommendation

        recs = _parallel_map(one, range(reps), n_threads)
        errors = sum(1 for r in recs if r != best)
        points.append(
            ErrorPoint(
                budget=budget,
                misid_rate=errors / reps,
                theory_bound=misid_upper_bound(env.K, budget, env.alpha, H, G),
                reps=reps,
                errors=errors,
            )
        )
    metadata = {
        "env": env.to_dict(),
        "algorithm": algorithm,
        "estimator": estimator.to_dict(),
        "seed": seed,
        "name": name,
        "best_arm": best,
        "H": H,
        "G_max": G,
        "gap_convention": GAP_CONVENTION,
        "theory_bound": BOUND_LABEL,
    }
    return ErrorCurve(points, metadata)


# ---------------------------------------------------------------------------
# Fitting and persistence
# ---------------------------------------------------------------------------


def fit_decay_rate(curve: TailCurve) -> tuple[float, float]:
    """Least-squares slope of ``log(empirical_prob)`` against ``n``, and its R^2.

    Zero-count points are Laplace smoothed to ``1 / (reps + 2)``.
    """
    pts = [p for p in curve.points if p.reps >= 1]
    if len(pts) < 3:
        raise TooFewPoints(f"need at least 3 curve points, got {len(pts)}")
    n = np.array([p.n for p in pts], dtype=float)
    prob = np.array(
        [p.empirical_prob if p.empirical_prob > 0 else 1.0 / (p.reps + 2) for p in pts]
    )
    y = np.log(prob)
    slope, intercept = np.polyfit(n, y, 1)
    resid = y - (slope * n + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    if abs(slope) < 1e-15 * max(1.0, abs(intercept)):
        slope = 0.0
    return float(slope), r_squared


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


CSV_FIELDS = {
    "tail": ["n", "empirical_prob", "theory_bound", "reps"],
    "error": ["budget", "misid_rate", "theory_bound", "reps"],
}


def _kind(curve) -> str:
    return "error" if isinstance(curve, ErrorCurve) else "tail"


def write_results(curve: TailCurve | ErrorCurve, path, fmt: str = "json") -> Path:
    """Write a curve as CSV (fixed header) or JSON (points plus metadata)."""
    path = Path(path)
    kind = _kind(curve)
    try:
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(CSV_FIELDS[kind])
                for p in curve.points:
                    row = asdict(p)
                    writer.writerow([_fmt(row[k]) for k in CSV_FIELDS[kind]])
        elif fmt == "json":
            doc = {
                "kind": kind,
                "metadata": curve.metadata,
                "points": [asdict(p) for p in curve.points],
            }
            path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_results(path, fmt: str | None = None) -> TailCurve | ErrorCurve:
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    try:
        text = path.read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    if fmt == "json":
        doc = json.loads(text)
        if doc["kind"] == "error":
            return ErrorCurve([ErrorPoint(**p) for p in doc["points"]], doc["metadata"])
        return TailCurve([TailPoint(**p) for p in doc["points"]], doc["metadata"])
    rows = list(csv.reader(text.splitlines()))
    header, body = rows[0], rows[1:]
    if header == CSV_FIELDS["error"]:
        return ErrorCurve(
            [
                ErrorPoint(int(b), float(m), float(t), int(r), round(float(m) * int(r)))
                for b, m, t, r in body
            ]
        )
    return TailCurve(
        [
            TailPoint(int(n), float(e), float(t), int(r), round(float(e) * int(r)))
            for n, e, t, r in body
        ]
    )


# ---------------------------------------------------------------------------
# Config-driven entry point
# ---------------------------------------------------------------------------


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc


def run_config(obj: dict, threads: int | None = None) -> TailCurve | ErrorCurve:
    """Run a deviation or misid experiment described by a JSON object."""
    kind = obj.get("type", "deviation")
    if kind == "deviation":
        return deviation_curve(DeviationConfig.from_dict(obj), threads)
    if kind == "misid":
        return misid_curve(
            env=BanditEnv.from_dict(obj["env"]),
            budgets=[int(b) for b in obj["budgets"]],
            estimator=EstimatorSpec.from_dict(obj.get("estimator", {})),
            reps=int(obj["reps"]),
            seed=int(obj.get("seed", 0)),
            theory=obj.get("theory"),
            algorithm=obj.get("algorithm", "cvar-sr"),
            name=obj.get("name", "misid"),
            threads=threads,
        )
    raise ValueError(f"unknown experiment type {kind!r}")

