"""ML2R weights: closed-form solution of the refiner Vandermonde system.

The raw weights ``w`` solve ``V w = e_1`` with ``V[k, r] = n_r ** (-alpha * k)``
and ``n_r = M ** (r - 1)``. The estimator uses the cumulative weights
``W_j = sum_{r >= j} w_r``. Everything is computed from product formulas,
never by a dense solve: the matrix is exponentially ill-conditioned in R.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# truncation index for the a_inf / B~_inf limits
_LIMIT_TERMS = 50


class InvalidParameterError(ValueError):
    """Raised when (alpha, M, R) is outside the admissible domain."""


def _check(alpha: float, M: int, R: int) -> None:
    if not alpha > 0:
        raise InvalidParameterError(f"alpha must be > 0, got {alpha}")
    if int(M) != M or M < 2:
        raise InvalidParameterError(f"M must be an integer >= 2, got {M}")
    if int(R) != R or R < 1:
        raise InvalidParameterError(f"R must be an integer >= 1, got {R}")


def _one_minus_powers(alpha: float, M: int, count: int) -> np.ndarray:
    # 1 - M^{-k alpha}, k = 1..count
    k = np.arange(1, count + 1, dtype=float)
    return -np.expm1(-k * alpha * np.log(M))


def closed_form_coeffs(alpha: float, M: int, R: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the coefficient vectors ``(a, b)``.

    ``a[l-1] = a_l`` for l = 1..R and ``b[l] = b_l`` for l = 0..R-1, with

        a_l = 1 / prod_{k=1}^{l-1} (1 - M^{-k alpha})
        b_l = (-1)^l M^{-alpha l (l+1) / 2} / prod_{k=1}^{l} (1 - M^{-k alpha})
    """
    _check(alpha, M, R)
    return _coeffs(float(alpha), int(M), int(R))


@lru_cache(maxsize=256)
def _coeffs(alpha: float, M: int, R: int) -> tuple[np.ndarray, np.ndarray]:
    factors = _one_minus_powers(alpha, M, R)
    # prods[l] = prod_{k=1}^{l} (1 - M^{-k alpha}), prods[0] = 1
    prods = np.concatenate(([1.0], np.cumprod(factors)))
    a = 1.0 / prods[:R]
    ell = np.arange(R, dtype=float)
    signs = np.where(np.arange(R) % 2 == 0, 1.0, -1.0)
    b = signs * np.exp(-0.5 * alpha * ell * (ell + 1) * np.log(M)) / prods[:R]
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b


@dataclass(frozen=True)
class WeightTable:
    alpha: float
    M: int
    R: int
    w: np.ndarray
    W: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def refiners(self) -> np.ndarray:
        return float(self.M) ** np.arange(self.R)

    def as_rows(self) -> list[dict]:
        return [
            {"j": j + 1, "w": float(self.w[j]), "W": float(self.W[j]),
             "a": float(self.a[j]), "b": float(self.b[j])}
            for j in range(self.R)
        ]


def ml2r_weights(alpha: float, M: int, R: int) -> WeightTable:
    """Weights of the depth-``R`` ML2R estimator.

    ``w_l = a_l * b_{R-l}`` and ``W`` are suffix sums of ``w``. ``W[0]`` is
    exactly 1 in exact arithmetic; it is stored as computed.
    """
    a, b = closed_form_coeffs(alpha, M, R)
    w = a * b[::-1]
    # suffix sums, accumulated from the small end
    W = np.cumsum(w[::-1])[::-1].copy()
    w.setflags(write=False)
    W.setflags(write=False)
    return WeightTable(alpha=float(alpha), M=int(M), R=int(R), w=w, W=W, a=a, b=b)


def mlmc_weights(alpha: float, M: int, R: int) -> WeightTable:
    """Unit weights: MLMC seen as an ML2R estimator with every ``W_j = 1``."""
    _check(alpha, M, R)
    w = np.zeros(R)
    w[-1] = 1.0
    W = np.ones(R)
    w.setflags(write=False)
    W.setflags(write=False)
    a, b = closed_form_coeffs(alpha, M, R)
    return WeightTable(alpha=float(alpha), M=int(M), R=int(R), w=w, W=W, a=a, b=b)


def vandermonde_residual(table: WeightTable) -> float:
    """Max-norm residual of ``V w - e_1``.

    Rows are accumulated with ``math.fsum`` so the residual measures the
    weights, not cancellation in the check itself.
    """
    import math

    R = table.R
    log_n = np.arange(R) * np.log(table.M)
    worst = 0.0
    for k in range(R):
        terms = table.w * np.exp(-table.alpha * k * log_n)
        row = math.fsum(terms.tolist()) - (1.0 if k == 0 else 0.0)
        worst = max(worst, abs(row))
    return worst


def weighted_geometric_sum(table: WeightTable, gamma: float, v=None) -> float:
    """``sum_{j=2}^{R} |W_j| M^{gamma (j-1)} v_j`` with ``v_j = 1`` by default.

    ``v``, when given, is indexed like ``W`` (``v[0]`` is ``v_1`` and unused).
    """
    if table.R < 2:
        return 0.0
    j = np.arange(2, table.R + 1)
    terms = np.abs(table.W[1:]) * np.exp(gamma * (j - 1) * np.log(table.M))
    if v is not None:
        terms = terms * np.asarray(v, dtype=float)[1:table.R]
    return float(np.sum(terms))


def weight_limits(alpha: float, M: int, terms: int = _LIMIT_TERMS) -> tuple[float, float, float]:
    """Truncated limits ``(a_inf, B~_inf, B_inf)``.

    ``a_l`` increases to ``a_inf``; ``B~_inf = sum |b_l|`` and
    ``B_inf = sum b_l``. The neglected tail is dominated by
    ``M^{-alpha/2 * terms * (terms + 1)}``.
    """
    a, b = closed_form_coeffs(alpha, M, terms + 1)
    return float(a[-1]), float(np.sum(np.abs(b))), float(np.sum(b))


def truncation_tail_bound(alpha: float, M: int, terms: int = _LIMIT_TERMS) -> float:
    """Upper bound on the first neglected |b_l| term (up to the a_inf factor)."""
    return float(np.exp(-0.5 * alpha * terms * (terms + 1) * np.log(M)))


def weight_bound(alpha: float, M: int) -> float:
    """``a_inf * B~_inf``: uniform bound on ``|W_j^R|`` over all R and j."""
    a_inf, b_tilde, _ = weight_limits(alpha, M)
    return a_inf * b_tilde


def dense_vandermonde_weights(alpha: float, M: int, R: int) -> np.ndarray:
    """Raw weights by a dense solve. Test cross-check only; unstable for large R."""
    _check(alpha, M, R)
    nodes = float(M) ** (-alpha * np.arange(R))
    V = np.vander(nodes, R, increasing=True).T
    e1 = np.zeros(R)
    e1[0] = 1.0
    return np.linalg.solve(V, e1)
