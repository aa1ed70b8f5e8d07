"""Optimal MLMC / ML2R parameters for a target RMSE.

Given the structural constants of a biased family ``(Y_h)`` (weak rate
``alpha``, strong rate ``beta``, coarsest bias parameter ``h_bold``,
``Var(Y_0)``, strong constant ``V1`` and a bias-constant estimate ``c_hat``)
this module returns the depth ``R``, bias parameter ``h``, allocation ``q``
and size ``N`` minimizing the simulation cost under ``||I - I_0||_2 <= eps``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict
from enum import Enum

import numpy as np

from .weights import (
    WeightTable,
    InvalidParameterError,
    ml2r_weights,
    mlmc_weights,
    weight_bound,
    weight_limits,
    truncation_tail_bound,
)

DEFAULT_N_CAP = 2 ** 53
_SNAP = 1e-9
_SERIES_TERMS = 50


class Kind(str, Enum):
    MLMC = "MLMC"
    ML2R = "ML2R"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str) and value.upper() in cls.__members__:
            return cls[value.upper()]
        return None


class CalibrationWarning(UserWarning):
    pass


class DegenerateAllocationError(ValueError):
    """An allocation weight vanished (zero strong constant or zero ML2R weight)."""


class SizeOverflowError(OverflowError):
    pass


class RegimeError(ValueError):
    """Requested CLT variance outside the regime where it is defined."""


def ceil_snap(x: float) -> int:
    """Ceiling on R_+ (result >= 1), snapping values within 1e-9 of an integer."""
    if not math.isfinite(x):
        raise OverflowError(f"non-finite value {x} in ceiling")
    n = round(x)
    if abs(x - n) <= _SNAP:
        x = float(n)
    return max(1, math.ceil(x))


def _kind(kind) -> Kind:
    return kind if isinstance(kind, Kind) else Kind(str(kind).upper())


@dataclass(frozen=True)
class StructuralParams:
    alpha: float
    beta: float
    h_bold: float = 1.0
    var_y0: float = 1.0
    V1: float = 1.0
    c_hat: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0 or not self.beta > 0:
            raise InvalidParameterError("alpha and beta must be positive")
        if not self.h_bold > 0:
            raise InvalidParameterError("h_bold must be positive")
        if self.var_y0 < 0 or self.V1 < 0:
            raise InvalidParameterError("var_y0 and V1 must be nonnegative")
        if not self.c_hat > 0:
            raise InvalidParameterError("c_hat must be positive")
        if 2 * self.alpha < self.beta:
            raise InvalidParameterError(
                f"inconsistent rates: 2*alpha={2 * self.alpha} < beta={self.beta}")

    @property
    def theta(self) -> float:
        if self.var_y0 == 0.0:
            return 0.0
        return math.sqrt(self.V1 / self.var_y0)

    def replace(self, **changes) -> "StructuralParams":
        return StructuralParams(**{**asdict(self), **changes})


def c_lower(M: int, beta: float) -> float:
    return (1 + M ** (beta / 2)) / math.sqrt(1 + 1 / M)


def c_upper(M: int, beta: float) -> float:
    return (1 + M ** (beta / 2)) * math.sqrt(1 + 1 / M)


def _check_eps(epsilon: float) -> None:
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be > 0, got {epsilon}")


def _clamp_depth(R_raw: int) -> int:
    if R_raw < 2:
        warnings.warn(f"depth formula gave R={R_raw}; clamped to 2", CalibrationWarning,
                      stacklevel=3)
        return 2
    return R_raw


def depth_ml2r(epsilon: float, p: StructuralParams, M: int) -> int:
    _check_eps(epsilon)
    logM = math.log(M)
    c1 = 0.5 + math.log(p.c_hat ** (1 / p.alpha) * p.h_bold) / logM
    A = math.sqrt(1 + 4 * p.alpha)
    c2 = c1 ** 2 + 2 * math.log(A) / (p.alpha * logM)
    x = c1 + math.sqrt(c2 + 2 / (p.alpha * logM) * math.log(1 / epsilon))
    return _clamp_depth(ceil_snap(x))


def depth_mlmc(epsilon: float, p: StructuralParams, M: int) -> int:
    _check_eps(epsilon)
    logM = math.log(M)
    A = math.sqrt(1 + 2 * p.alpha)
    c1 = (1 + math.log(p.c_hat ** (1 / p.alpha) * p.h_bold) / logM
          + math.log(A) / (p.alpha * logM))
    x = c1 + math.log(1 / epsilon) / (p.alpha * logM)
    return _clamp_depth(ceil_snap(x))


def depth(epsilon: float, p: StructuralParams, M: int, kind) -> int:
    if _kind(kind) is Kind.ML2R:
        return depth_ml2r(epsilon, p, M)
    return depth_mlmc(epsilon, p, M)


def bias_parameter(epsilon: float, R: int, p: StructuralParams, kind, M: int) -> float:
    """Bias parameter ``h_bold / n`` projected onto the grid ``{h_bold / n}``."""
    _check_eps(epsilon)
    if R < 2:
        raise InvalidParameterError("bias_parameter needs R >= 2")
    a = p.alpha
    if _kind(kind) is Kind.ML2R:
        log_arg = (math.log(p.h_bold) + math.log(1 + 2 * a * R) / (2 * a * R)
                   + math.log(p.c_hat) / a - math.log(epsilon) / (a * R)
                   - (R - 1) / 2 * math.log(M))
    else:
        log_arg = (math.log(p.h_bold) + math.log(1 + 2 * a) / (2 * a)
                   + math.log(p.c_hat) / a - math.log(epsilon) / a
                   - (R - 1) * math.log(M))
    return p.h_bold / ceil_snap(math.exp(log_arg))


def allocation(p: StructuralParams, R: int, h: float, M: int,
               weights: WeightTable | None) -> tuple[np.ndarray, float]:
    """Allocation ``q`` (sums to one) and its normalizer ``mu_star``.

    ``weights=None`` means unit weights (MLMC).
    """
    th = p.theta * h ** (p.beta / 2)
    raw = np.empty(R)
    raw[0] = 1 + th
    if R > 1:
        W = np.ones(R) if weights is None else np.asarray(weights.W, dtype=float)
        j = np.arange(2, R + 1)
        raw[1:] = (th * c_lower(M, p.beta) * np.abs(W[1:])
                   * np.exp(-(1 + p.beta) / 2 * (j - 1) * math.log(M)))
    if np.any(raw <= 0):
        raise DegenerateAllocationError(
            f"zero allocation at levels {np.flatnonzero(raw <= 0) + 1}")
    total = float(np.sum(raw))
    return raw / total, 1.0 / total


def sample_size(epsilon: float, p: StructuralParams, R: int, h: float, M: int,
                q: np.ndarray, mu_star: float, weights: WeightTable | None, kind,
                cap: float = DEFAULT_N_CAP) -> int:
    _check_eps(epsilon)
    kind = _kind(kind)
    th = p.theta * h ** (p.beta / 2)
    if R > 1:
        W = np.ones(R) if weights is None or kind is Kind.MLMC else np.asarray(weights.W)
        j = np.arange(2, R + 1)
        series = float(np.sum(np.abs(W[1:])
                              * np.exp((1 - p.beta) / 2 * (j - 1) * math.log(M))))
    else:
        series = 0.0
    factor = 1 + 1 / (2 * p.alpha * R) if kind is Kind.ML2R else 1 + 1 / (2 * p.alpha)
    value = factor * p.var_y0 * (1 + th + th * c_upper(M, p.beta) * series) / (epsilon ** 2 * mu_star)
    if not value <= cap:
        raise SizeOverflowError(f"N(eps)={value:.3e} exceeds cap {cap:.3e}")
    return ceil_snap(value)


@dataclass(frozen=True)
class MultilevelPlan:
    kind: Kind
    epsilon: float
    M: int
    R: int
    h: float
    q: np.ndarray
    mu_star: float
    N: int
    N_j: np.ndarray
    weights: WeightTable
    params: StructuralParams
    degenerate: bool = False

    @property
    def refiners(self) -> np.ndarray:
        return float(self.M) ** np.arange(self.R)

    @property
    def W(self) -> np.ndarray:
        return self.weights.W

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "epsilon": self.epsilon,
            "M": self.M,
            "R": self.R,
            "h": self.h,
            "q": [float(x) for x in self.q],
            "mu_star": self.mu_star,
            "N": self.N,
            "N_j": [int(x) for x in self.N_j],
            "W": [float(x) for x in self.weights.W],
            "params": asdict(self.params),
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MultilevelPlan":
        kind = Kind(d["kind"])
        params = StructuralParams(**d["params"])
        R, M = int(d["R"]), int(d["M"])
        table = (ml2r_weights if kind is Kind.ML2R else mlmc_weights)(params.alpha, M, R)
        return cls(kind=kind, epsilon=float(d["epsilon"]), M=M, R=R, h=float(d["h"]),
                   q=np.asarray(d["q"], dtype=float), mu_star=float(d["mu_star"]),
                   N=int(d["N"]), N_j=np.asarray(d["N_j"], dtype=np.int64),
                   weights=table, params=params, degenerate=bool(d.get("degenerate", False)))

    def validate(self) -> None:
        if abs(float(np.sum(self.q)) - 1.0) > 1e-12 or np.any(self.q <= 0):
            raise ValueError("allocation must be positive and sum to 1")
        if np.any(self.N_j < 1):
            raise ValueError("every level needs at least one draw")
        if self.weights.R != self.R:
            raise ValueError("weights depth differs from plan depth")
        n = self.params.h_bold / self.h
        if abs(n - round(n)) > 1e-9:
            raise ValueError("h is not on the grid h_bold / n")


def _per_level_sizes(N: int, q: np.ndarray) -> np.ndarray:
    return np.array([ceil_snap(N * qj) for qj in q], dtype=np.int64)


def calibrate(epsilon: float, p: StructuralParams, M: int, kind,
              cap: float = DEFAULT_N_CAP) -> MultilevelPlan:
    """Compose depth, bias parameter, weights, allocation and size into a plan."""
    _check_eps(epsilon)
    kind = _kind(kind)
    if p.theta == 0.0:
        warnings.warn("theta = 0 (V1 = 0 or Var(Y0) = 0): single-level plan",
                      CalibrationWarning, stacklevel=2)
        table = ml2r_weights(p.alpha, M, 1)
        q, mu = allocation(p, 1, p.h_bold, M, None)
        N = sample_size(epsilon, p, 1, p.h_bold, M, q, mu, table, kind, cap)
        return MultilevelPlan(kind, float(epsilon), int(M), 1, p.h_bold, q, mu, N,
                              _per_level_sizes(N, q), table, p, degenerate=True)
    R = depth(epsilon, p, M, kind)
    h = bias_parameter(epsilon, R, p, kind, M)
    if kind is Kind.ML2R:
        table = ml2r_weights(p.alpha, M, R)
        q, mu = allocation(p, R, h, M, table)
    else:
        table = mlmc_weights(p.alpha, M, R)
        q, mu = allocation(p, R, h, M, None)
    N = sample_size(epsilon, p, R, h, M, q, mu, table, kind, cap)
    plan = MultilevelPlan(kind, float(epsilon), int(M), R, h, q, mu, N,
                          _per_level_sizes(N, q), table, p)
    plan.validate()
    return plan


def limit_mu_star(p: StructuralParams, M: int) -> float:
    th = p.theta * p.h_bold ** (p.beta / 2)
    return 1.0 / (1 + th * (1 + c_lower(M, p.beta) / (M ** ((1 + p.beta) / 2) - 1)))


def mu_star_bounds(p: StructuralParams, M: int, kind=Kind.ML2R) -> tuple[float, float]:
    """``(lower, upper)`` bounds on ``mu_star(eps)`` valid whenever ``h = h_bold``."""
    th = p.theta * p.h_bold ** (p.beta / 2)
    ab = weight_bound(p.alpha, M) if _kind(kind) is Kind.ML2R else 1.0
    upper = 1 / (1 + th)
    lower = 1 / (1 + th * (1 + c_lower(M, p.beta) * ab / (1 - M ** (-(p.beta + 1) / 2))))
    return lower, upper


def _ml2r_beta_lt1_series(alpha: float, M: int, beta: float) -> float:
    # a_inf * sum_{j>=1} |sum_{l<j} b_l| M^{(beta-1) j / 2}
    a_inf, _, _ = weight_limits(alpha, M, _SERIES_TERMS)
    from .weights import closed_form_coeffs
    _, b = closed_form_coeffs(alpha, M, _SERIES_TERMS)
    partial = np.abs(np.cumsum(b))
    j = np.arange(1, _SERIES_TERMS + 1)
    terms = partial * np.exp((beta - 1) / 2 * j * math.log(M))
    # tail: |partial sums| -> |B_inf| times a geometric remainder
    ratio = M ** ((beta - 1) / 2)
    tail = partial[-1] * ratio ** (_SERIES_TERMS + 1) / (1 - ratio)
    return a_inf * (float(np.sum(terms)) + tail)


def asymptotic_size_constant(p: StructuralParams, M: int, kind) -> float:
    """Constant ``C_beta`` in the asymptotics of ``N(eps)``.

    ``N(eps) ~ C_beta eps^-2`` times 1 (beta > 1), ``R(eps)`` (beta = 1) or
    ``M^{(1-beta) R(eps) / 2}`` (beta < 1).
    """
    kind = _kind(kind)
    b = p.beta
    mu = limit_mu_star(p, M)
    th = p.theta * p.h_bold ** (b / 2)
    mlmc_factor = 1 + 1 / (2 * p.alpha)
    if b > 1:
        x = M ** ((1 - b) / 2)
        core = 1 + th * (1 + c_upper(M, b) * x / (1 - x))
        return p.var_y0 / mu * core * (mlmc_factor if kind is Kind.MLMC else 1.0)
    core = p.var_y0 / mu * th * c_upper(M, b)
    if b == 1:
        return core * (mlmc_factor if kind is Kind.MLMC else 1.0)
    if kind is Kind.MLMC:
        return core * mlmc_factor / (M ** ((1 - b) / 2) - 1)
    return core * _ml2r_beta_lt1_series(p.alpha, M, b)


def size_normalizer(epsilon: float, R: int, beta: float, M: int) -> float:
    """``eps^-2`` times the beta-dependent growth factor of ``N(eps)``."""
    if beta > 1:
        g = 1.0
    elif beta == 1:
        g = float(R)
    else:
        g = M ** ((1 - beta) / 2 * R)
    return g / epsilon ** 2


def bias_band(alpha: float, M: int) -> tuple[float, float]:
    """Asymptotic band for the MLMC normalized bias ``|m(eps)|``."""
    s = math.sqrt(1 + 2 * alpha)
    return M ** (-alpha) / s, 1 / s


@dataclass(frozen=True)
class CltVariance:
    kind: Kind
    regime: str
    sigma1_sq: float
    sigma2_sq: float
    notes: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.sigma1_sq + self.sigma2_sq


def clt_variance(p: StructuralParams, M: int, kind=Kind.ML2R, *, var_z=None,
                 var_yh: float | None = None, v_inf: float | None = None,
                 c1: float | None = None) -> CltVariance:
    """Asymptotic variance of ``(I(eps) - I_0) / eps - m(eps)``.

    beta > 1 needs ``var_z`` (``Var(Z_j)`` for j = 2, 3, ...) and optionally
    ``var_yh`` (defaults to the strong-error cap). beta <= 1 needs ``v_inf``
    and, when ``2 alpha == beta``, the first bias coefficient ``c1``.
    """
    kind = _kind(kind)
    a, b = p.alpha, p.beta
    if 2 * a < b:
        raise RegimeError("2*alpha < beta: rates inconsistent")
    scale = 2 * a / (2 * a + 1) if kind is Kind.MLMC else 1.0
    if b > 1:
        if var_z is None:
            raise RegimeError("beta > 1 requires the Var(Z_j) sequence")
        th = p.theta * p.h_bold ** (b / 2)
        x = M ** ((1 - b) / 2)
        Sigma = 1 + th * (1 + c_upper(M, b) * x / (1 - x))
        if var_yh is None:
            var_yh = p.var_y0 * (1 + th) ** 2
        vz = np.asarray(var_z, dtype=float)
        j = np.arange(2, len(vz) + 2)
        series = float(np.sum(np.exp((1 - b) / 2 * (j - 1) * math.log(M)) * vz))
        s1 = var_yh / (Sigma * p.var_y0 * (1 + th))
        s2 = (p.h_bold ** (b / 2) * series
              / (Sigma * math.sqrt(p.var_y0 * p.V1) * c_lower(M, b)))
        return CltVariance(kind, "beta>1", scale * s1, scale * s2)
    if kind is Kind.MLMC and b < 1 and not 2 * a > b:
        raise RegimeError("MLMC with beta < 1 requires 2*alpha > beta")
    if v_inf is None:
        raise RegimeError("beta <= 1 requires v_inf")
    v = v_inf
    notes = []
    if 2 * a == b:
        if c1 is None:
            raise RegimeError("2*alpha == beta requires c1")
        v = v_inf - c1 ** 2 * (1 - M ** (b / 2)) ** 2
        notes.append("bias-squared correction applied (2 alpha = beta)")
    sigma_sq = v / ((1 + M ** (b / 2)) ** 2 * p.V1)
    return CltVariance(kind, "beta<=1", 0.0, scale * sigma_sq, notes)


def theoretical_cost(plan: MultilevelPlan) -> float:
    """``(N / h) * sum_j q_j (n_{j-1} + n_j)`` with ``n_0 = 0``."""
    n = plan.refiners
    n_prev = np.concatenate(([0.0], n[:-1]))
    return plan.N / plan.h * float(np.sum(plan.q * (n_prev + n)))


__all__ = [
    "Kind", "StructuralParams", "MultilevelPlan", "CltVariance", "CalibrationWarning",
    "DegenerateAllocationError", "SizeOverflowError", "RegimeError", "InvalidParameterError",
    "ceil_snap", "c_lower", "c_upper", "depth", "depth_ml2r", "depth_mlmc", "bias_parameter",
    "allocation", "sample_size", "calibrate", "limit_mu_star", "mu_star_bounds",
    "asymptotic_size_constant", "size_normalizer", "bias_band", "clt_variance",
    "theoretical_cost", "truncation_tail_bound",
]
