"""Run a calibrated plan against a level sampler.

Per-level draws are produced in fixed-size chunks, each from its own
counter-based stream, and reduced in ascending chunk order. The estimate is
therefore bit-identical for a given seed whatever the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .calibration import MultilevelPlan


class SamplerError(RuntimeError):
    pass


class NonFiniteSampleError(ArithmeticError):
    pass


@dataclass
class LevelSample:
    """A batch of coupled draws at one level.

    ``coarse`` is ``None`` at level 1. ``cost_units`` is the cost of one draw
    in inverse-h units.
    """
    fine: np.ndarray
    coarse: np.ndarray | None
    cost_units: float

    def __post_init__(self):
        if not self.cost_units > 0:
            raise ValueError("cost_units must be positive")

    @property
    def increment(self) -> np.ndarray:
        return self.fine if self.coarse is None else self.fine - self.coarse


class LevelSampler:
    """Base class for coupled biased families ``(Y_h)``.

    Subclasses implement :meth:`sample`, drawing ``size`` coupled pairs
    ``(Y_{h_fine}, Y_{h_coarse})`` from ``rng``; ``h_coarse=None`` asks for
    the single value ``Y_{h_fine}``.
    """
    h_bold: float = 1.0

    def sample(self, rng, size: int, h_fine: float, h_coarse: float | None = None) -> LevelSample:
        raise NotImplementedError

    @staticmethod
    def cost_units(h_fine: float, h_coarse: float | None) -> float:
        return 1.0 / h_fine + (0.0 if h_coarse is None else 1.0 / h_coarse)


@dataclass(frozen=True)
class LevelStats:
    level: int
    n: int
    mean: float
    var: float
    cost: float

    def to_dict(self) -> dict:
        return {"level": self.level, "n": self.n, "mean": self.mean,
                "var": self.var, "cost": self.cost}


@dataclass
class EstimatorResult:
    estimate: float
    per_level: list[LevelStats]
    total_cost: float
    seed: int
    replication: int
    plan: dict = field(repr=False)

    def reconstruct(self) -> float:
        return _weighted_sum(self.plan["W"], self.per_level)

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "total_cost": self.total_cost,
                "seed": self.seed, "replication": self.replication,
                "per_level": [s.to_dict() for s in self.per_level]}


@dataclass
class ReplicationStudy:
    runs: list[EstimatorResult]
    epsilon: float
    oracle: float | None
    master_seed: int
    plan: dict

    @property
    def K(self) -> int:
        return len(self.runs)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([r.estimate for r in self.runs])

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.total_cost for r in self.runs])

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "oracle": self.oracle,
                "master_seed": self.master_seed, "K": self.K, "plan": self.plan,
                "runs": [r.to_dict() for r in self.runs]}


def _chunk_stats(sampler, seed, replication, level, chunk, size, h_fine, h_coarse):
    rng = streams.stream(seed, replication, level, chunk)
    try:
        s = sampler.sample(rng, size, h_fine, h_coarse)
    except (NonFiniteSampleError, SamplerError):
        raise
    except Exception as exc:
        raise SamplerError(f"sampler failed at level {level}, chunk {chunk}: {exc}") from exc
    x = np.asarray(s.increment, dtype=float)
    if x.shape != (size,):
        raise SamplerError(f"level {level}: sampler returned shape {x.shape}, expected {(size,)}")
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        raise NonFiniteSampleError(
            f"non-finite sample at level {level}, draw {chunk * streams.CHUNK + bad}")
    m = float(np.mean(x))
    m2 = float(np.sum((x - m) ** 2))
    return size, m, m2, s.cost_units * size


def _weighted_sum(W, per_level) -> float:
    # level 1 enters with coefficient 1 by definition, whatever rounding left in W[0]
    return math.fsum((1.0 if s.level == 1 else float(W[s.level - 1])) * s.mean for s in per_level)


def _combine(parts):
    # Chan et al. pairwise update, applied left to right
    n, mean, m2, cost = 0, 0.0, 0.0, 0.0
    for nb, mb, m2b, cb in parts:
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
        cost += cb
    return n, mean, m2, cost


def run(plan: MultilevelPlan, sampler: LevelSampler, seed: int, replication: int = 0,
        workers: int = 1) -> EstimatorResult:
    """One estimator value ``Y-bar_1 + sum_{j>=2} W_j * mean(fine - coarse)``."""
    tasks = []
    for j in range(1, plan.R + 1):
        h_fine = plan.h / plan.M ** (j - 1)
        h_coarse = None if j == 1 else plan.h / plan.M ** (j - 2)
        for c, size in enumerate(streams.chunk_sizes(int(plan.N_j[j - 1]))):
            tasks.append((j, c, size, h_fine, h_coarse))

    def work(t):
        j, c, size, hf, hc = t
        return _chunk_stats(sampler, seed, replication, j, c, size, hf, hc)

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, tasks))
    else:
        parts = [work(t) for t in tasks]

    per_level = []
    for j in range(1, plan.R + 1):
        n, mean, m2, cost = _combine(p for t, p in zip(tasks, parts) if t[0] == j)
        var = m2 / (n - 1) if n > 1 else 0.0
        per_level.append(LevelStats(j, n, mean, var, cost))
    estimate = _weighted_sum(plan.weights.W, per_level)
    total_cost = math.fsum(s.cost for s in per_level)
    return EstimatorResult(estimate, per_level, total_cost, int(seed), int(replication),
                           plan.to_dict())


def run_replicated(plan: MultilevelPlan, sampler: LevelSampler, master_seed: int, K: int,
                   workers: int = 1, oracle: float | None = None) -> ReplicationStudy:
    """``K`` independent runs; run ``r`` uses replication counter ``r`` under ``master_seed``."""
    if K < 1:
        raise ValueError("K must be >= 1")

    def one(r):
        try:
            return run(plan, sampler, master_seed, replication=r)
        except Exception as exc:
            exc.replication = r
            raise

    if workers > 1 and K > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, range(K)))
    else:
        runs = [one(r) for r in range(K)]
    return ReplicationStudy(runs, plan.epsilon, oracle, int(master_seed), plan.to_dict())


def measured_cost(result: EstimatorResult) -> float:
    return result.total_cost
