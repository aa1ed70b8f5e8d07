"""Pilot estimation of structural constants and statistical checks of studies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import ndtr

from . import streams
from .calibration import (
    Kind, StructuralParams, MultilevelPlan, CltVariance, bias_band, calibrate,
    theoretical_cost,
)
from .engine import LevelSampler, ReplicationStudy, run

# sup-distance critical value factor at the 5% level, K large
KS_COEF = 1.36
KS_SLACK = 1.5


class InsufficientPilotError(RuntimeError):
    pass


class BudgetExceededError(RuntimeError):
    pass


def _pilot_draws(sampler: LevelSampler, n: int, h_fine: float, h_coarse: float | None,
                 seed: int, tag: int):
    """``n`` coupled draws, chunked like the engine, under the pilot key."""
    fine, coarse = [], []
    for c, size in enumerate(streams.chunk_sizes(n)):
        rng = streams.stream(seed, tag, 0, c, purpose=streams.PURPOSE_PILOT)
        s = sampler.sample(rng, size, h_fine, h_coarse)
        fine.append(np.asarray(s.fine, dtype=float))
        if h_coarse is not None:
            coarse.append(np.asarray(s.coarse, dtype=float))
    return np.concatenate(fine), (np.concatenate(coarse) if coarse else None)


def _h_tag(h: float) -> int:
    # stable stream tag per pilot resolution
    return int(round(1e6 / h)) & ((1 << 63) - 1)


@dataclass(frozen=True)
class SlopeEstimate:
    value: float
    se: float
    h: float
    M: int
    n: int


def estimate_c1(sampler: LevelSampler, h: float, M: int = 2, n_pilot: int = 10_000,
                seed: int = 0) -> SlopeEstimate:
    """``(mean Y_{h/M} - mean Y_h) / (h/M - h)`` from coupled draws."""
    if n_pilot < 2:
        raise InsufficientPilotError("n_pilot must be >= 2")
    fine, coarse = _pilot_draws(sampler, n_pilot, h / M, h, seed, _h_tag(h))
    d = fine - coarse
    gap = h / M - h
    est = float(np.mean(d)) / gap
    se = float(np.std(d, ddof=1)) / math.sqrt(n_pilot) / abs(gap)
    if se > abs(est):
        raise InsufficientPilotError(
            f"c1 estimate {est:.4g} has standard error {se:.4g}; increase n_pilot")
    return SlopeEstimate(est, se, h, M, n_pilot)


@dataclass
class PilotReport:
    var_y0_hat: float
    V1_hat: float
    c1_hat: float
    c1_se: float
    theta_hat: float
    h_bold: float
    M: int
    beta: float
    n_pilot: int
    diagnostics: dict = field(default_factory=dict)

    def to_params(self, alpha: float, c_hat: float | None = None) -> StructuralParams:
        """Structural parameters; ``c_hat`` defaults to ``|c1_hat|``."""
        return StructuralParams(alpha=alpha, beta=self.beta, h_bold=self.h_bold,
                                var_y0=self.var_y0_hat, V1=self.V1_hat,
                                c_hat=abs(self.c1_hat) if c_hat is None else c_hat)

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_structural(sampler: LevelSampler, h_bold: float, M: int, beta_assumed: float,
                        n_pilot: int = 20_000, seed: int = 0) -> PilotReport:
    """Pilot estimates of ``Var(Y_0)``, ``V1`` and ``c1`` from coupled draws at
    ``(h_bold, h_bold / M)``.

    ``V1_hat = mean((Y_h - Y_{h/M})^2) / (h^beta (1 + M^{-beta/2})^2)``.
    """
    if n_pilot < 100:
        raise InsufficientPilotError("n_pilot must be >= 100")
    fine, coarse = _pilot_draws(sampler, n_pilot, h_bold / M, h_bold, seed, _h_tag(h_bold))
    d = fine - coarse
    var_y0 = float(np.var(fine, ddof=1))
    V1 = float(np.mean(d * d)) / (h_bold ** beta_assumed * (1 + M ** (-beta_assumed / 2)) ** 2)
    gap = h_bold / M - h_bold
    c1 = float(np.mean(d)) / gap
    c1_se = float(np.std(d, ddof=1)) / math.sqrt(n_pilot) / abs(gap)
    if c1_se > abs(c1):
        raise InsufficientPilotError(
            f"c1 estimate {c1:.4g} has standard error {c1_se:.4g}; increase n_pilot")
    theta = math.sqrt(V1 / var_y0) if var_y0 > 0 else 0.0
    diag = {
        "mean_coarse": float(np.mean(coarse)), "mean_fine": float(np.mean(fine)),
        "var_coarse": float(np.var(coarse, ddof=1)), "var_fine": var_y0,
        "mean_sq_increment": float(np.mean(d * d)), "var_increment": float(np.var(d, ddof=1)),
    }
    return PilotReport(var_y0, V1, c1, c1_se, theta, h_bold, M, beta_assumed, n_pilot, diag)


@dataclass(frozen=True)
class VInfEstimate:
    v_inf: float
    h: tuple
    second_moments: tuple
    ses: tuple
    method: str = "richardson"


def estimate_v_inf(sampler: LevelSampler, M: int, beta: float, h_small: tuple,
                   n: int = 50_000, seed: int = 0) -> VInfEstimate:
    """Limit of ``||Z(h)||_2^2`` with ``Z(h) = (h/M)^{-beta/2} (Y_{h/M} - Y_h)``.

    Second moments are estimated at the two given bias parameters and combined
    by one Richardson step assuming an ``O(h)`` remainder.
    """
    h1, h2 = sorted(h_small, reverse=True)
    moments, ses = [], []
    for h in (h1, h2):
        fine, coarse = _pilot_draws(sampler, n, h / M, h, seed, _h_tag(h) + 1)
        z2 = ((h / M) ** (-beta / 2) * (fine - coarse)) ** 2
        moments.append(float(np.mean(z2)))
        ses.append(float(np.std(z2, ddof=1) / math.sqrt(n)))
    m1, m2 = moments
    v = m2 + (m2 - m1) * h2 / (h1 - h2)
    return VInfEstimate(v, (h1, h2), tuple(moments), tuple(ses))


@dataclass(frozen=True)
class RateEstimate:
    slope: float
    intercept: float
    h: tuple
    values: tuple


def level_moment_slope(sampler: LevelSampler, hs, M: int, n: int = 20_000, seed: int = 0,
                       moment: str = "var") -> RateEstimate:
    """Log-log regression slope of the level increment ``Y_{h/M} - Y_h`` against h.

    ``moment='var'`` uses the variance, ``'second'`` the raw second moment.
    """
    vals = []
    for h in hs:
        fine, coarse = _pilot_draws(sampler, n, h / M, h, seed, _h_tag(h) + 2)
        d = fine - coarse
        vals.append(float(np.var(d, ddof=1) if moment == "var" else np.mean(d * d)))
    fit = np.polyfit(np.log(hs), np.log(vals), 1)
    return RateEstimate(float(fit[0]), float(fit[1]), tuple(hs), tuple(vals))


def weak_error_table(sampler: LevelSampler, hs, n: int, seed: int = 0) -> list[dict]:
    """Empirical ``E[Y_h]`` with standard errors at each h."""
    rows = []
    for h in hs:
        fine, _ = _pilot_draws(sampler, n, h, None, seed, _h_tag(h) + 3)
        rows.append({"h": h, "mean": float(np.mean(fine)),
                     "se": float(np.std(fine, ddof=1) / math.sqrt(n))})
    return rows


@dataclass
class StudyReport:
    epsilon: float
    K: int
    kind: str
    empirical_rmse: float | None
    empirical_bias: float | None
    m_hat: float | None
    m_se: float
    empirical_sd: float
    variance: float
    skewness: float
    excess_kurtosis: float
    sup_distance: float
    mean_cost: float
    median_cost: float
    cost_theoretical: float

    @property
    def sigma_hat(self) -> float:
        return self.empirical_sd / self.epsilon

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sigma_hat"] = self.sigma_hat
        return d


def sup_distance_normal(x: np.ndarray, sd: float | None = None) -> float:
    """Kolmogorov distance between the ECDF of ``x`` and ``N(0, sd^2)``."""
    x = np.sort(np.asarray(x, dtype=float))
    K = len(x)
    if sd is None:
        sd = 1.0
    if sd == 0:
        return 0.0 if np.all(x == 0) else 1.0
    F = ndtr(x / sd)
    i = np.arange(1, K + 1)
    return float(max(np.max(i / K - F), np.max(F - (i - 1) / K)))


def study_statistics(study: ReplicationStudy, I0: float | None = None) -> StudyReport:
    """RMSE, bias, normalized bias and normality diagnostics over the K runs."""
    if study.K < 2:
        raise ValueError("a study needs K >= 2")
    I0 = study.oracle if I0 is None else I0
    eps = study.epsilon
    est = study.estimates
    K = len(est)
    mean = math.fsum(est) / K
    dev = est - mean
    var = math.fsum(dev * dev) / (K - 1)
    sd = math.sqrt(var)
    if I0 is not None:
        err = est - I0
        bias = mean - I0
        # identity: rmse^2 = bias^2 + (K-1)/K var
        rmse = math.sqrt(bias * bias + (K - 1) / K * var)
        m_hat = bias / eps
    else:
        rmse = bias = m_hat = None
    centered = (est - mean) / eps
    sigma = sd / eps
    # plug-in (biased) moment ratios
    m2 = float(np.mean(dev ** 2))
    skew = float(np.mean(dev ** 3)) / m2 ** 1.5 if m2 > 0 else 0.0
    kurt = float(np.mean(dev ** 4)) / m2 ** 2 - 3 if m2 > 0 else 0.0
    sup = sup_distance_normal(centered, sigma) if sd > 0 else 0.0
    costs = study.costs
    plan = MultilevelPlan.from_dict(study.plan)
    return StudyReport(eps, K, study.plan["kind"], rmse, bias, m_hat, sd / (eps * math.sqrt(K)),
                       sd, var, skew, kurt, sup, float(np.mean(costs)), float(np.median(costs)),
                       theoretical_cost(plan))


def rmse_decomposition_gap(report: StudyReport) -> float:
    """``|rmse^2 - bias^2 - (K-1)/K var|``; zero up to rounding."""
    if report.empirical_rmse is None:
        return 0.0
    K = report.K
    return abs(report.empirical_rmse ** 2 - report.empirical_bias ** 2
               - (K - 1) / K * report.variance)


@dataclass(frozen=True)
class BandCheck:
    m_hat: float
    lo: float
    hi: float
    se: float
    n_se: float
    inside: bool


def bias_band_check(report: StudyReport, alpha: float, M: int, n_se: float = 3.0) -> BandCheck:
    lo, hi = bias_band(alpha, M)
    m = abs(report.m_hat)
    inside = lo - n_se * report.m_se <= m <= hi + n_se * report.m_se
    return BandCheck(report.m_hat, lo, hi, report.m_se, n_se, inside)


@dataclass
class CltReport:
    K: int
    center: float
    variance: float
    predicted: float
    variance_ratio: float
    sup_distance: float
    sup_threshold: float
    variance_window: tuple
    variance_ok: bool
    shape_ok: bool

    @property
    def passed(self) -> bool:
        return self.variance_ok and self.shape_ok


def clt_check(study: ReplicationStudy, predicted, m_pred: float | None = None,
              I0: float | None = None, variance_window=(0.8, 1.25), ks_slack: float = KS_SLACK,
              ks_coef: float = KS_COEF) -> CltReport:
    """Compare ``(I - I0)/eps - m`` with the predicted normal limit.

    ``m_pred=None`` centers at 0 for ML2R and at the empirical ``m_hat`` for
    MLMC. The shape test uses errors standardized by their empirical
    deviation; the variance test compares that deviation with ``predicted``.
    """
    I0 = study.oracle if I0 is None else I0
    if I0 is None:
        raise ValueError("clt_check needs the true value I0")
    z = (study.estimates - I0) / study.epsilon
    if m_pred is None:
        m_pred = 0.0 if study.plan["kind"] == Kind.ML2R.value else float(np.mean(z))
    z = z - m_pred
    pred = predicted.total if isinstance(predicted, CltVariance) else float(predicted)
    var = float(np.var(z, ddof=1))
    K = len(z)
    sup = sup_distance_normal((z - np.mean(z)) / math.sqrt(var)) if var > 0 else 1.0
    # centering error is tested separately via the mean of z
    thr = ks_slack * ks_coef / math.sqrt(K)
    ratio = var / pred
    lo, hi = variance_window
    shape_ok = sup < thr and abs(float(np.mean(z))) <= 3 * math.sqrt(var / K)
    return CltReport(K, m_pred, var, pred, ratio, sup, thr, tuple(variance_window),
                     lo <= ratio <= hi, shape_ok)


@dataclass
class SllnReport:
    epsilons: list
    errors: list
    ratios: list
    C_fit: float
    bound: float
    dominated: bool


def slln_decay_check(sampler: LevelSampler, plan_for, epsilons, seed: int, I0: float,
                     bound: float = 3.0) -> SllnReport:
    """One estimator per ``eps_k``; records ``|I(eps_k) - I0|`` and its ratio to ``eps_k``.

    ``plan_for(eps)`` returns the calibrated plan. Run k uses replication k.
    """
    errors, ratios = [], []
    for k, eps in enumerate(epsilons):
        res = run(plan_for(eps), sampler, seed, replication=k)
        e = abs(res.estimate - I0)
        errors.append(e)
        ratios.append(e / eps)
    C = max(ratios)
    return SllnReport(list(epsilons), errors, ratios, C, bound, C <= bound)


def complexity_rate(epsilon: float, kind, alpha: float, beta: float, M: int) -> float:
    """Reference growth ``v(eps)`` of the optimal cost."""
    kind = Kind(kind) if not isinstance(kind, Kind) else kind
    L = math.log(1 / epsilon)
    if beta > 1:
        return epsilon ** -2
    if beta == 1:
        return epsilon ** -2 * (L * L if kind is Kind.MLMC else L)
    if kind is Kind.MLMC:
        return epsilon ** (-2 - (1 - beta) / alpha)
    return epsilon ** -2 * math.exp((1 - beta) / math.sqrt(alpha) * math.sqrt(2 * L * math.log(M)))


def cost_scaling_study(kinds, epsilons, params: StructuralParams, M: int,
                       sampler: LevelSampler | None = None, seed: int = 0,
                       budget: float | None = None) -> list[dict]:
    """Theoretical (and, with a sampler, measured) cost across an eps grid."""
    if len(epsilons) < 4:
        raise ValueError("cost scaling needs at least 4 epsilon values")
    plans = {(e, Kind(k)): calibrate(e, params, M, k) for e in epsilons for k in kinds}
    projected = sum(theoretical_cost(p) for p in plans.values())
    if budget is not None and sampler is not None and projected > budget:
        raise BudgetExceededError(f"projected cost {projected:.3e} exceeds budget {budget:.3e}")
    rows = []
    for i, e in enumerate(epsilons):
        by_kind = {}
        for k in kinds:
            k = Kind(k)
            plan = plans[(e, k)]
            ct = theoretical_cost(plan)
            row = {"epsilon": e, "kind": k.value, "R": plan.R, "h": plan.h, "N": plan.N,
                   "cost_theoretical": ct,
                   "cost_over_rate": ct / complexity_rate(e, k, params.alpha, params.beta, M),
                   "cost_eps2": ct * e * e}
            if sampler is not None:
                row["cost_measured"] = run(plan, sampler, seed, replication=i).total_cost
            by_kind[k] = ct
            rows.append(row)
        if Kind.ML2R in by_kind and Kind.MLMC in by_kind:
            ratio = by_kind[Kind.ML2R] / by_kind[Kind.MLMC]
            for row in rows[-len(kinds):]:
                row["ml2r_over_mlmc"] = ratio
    return rows
