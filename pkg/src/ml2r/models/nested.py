"""Nested Monte Carlo levels for ``E[f(E[X | Y])]`` with ``X = F(xi, Y)``.

With ``h = 1 / K`` the biased value is ``Y_h = f(mean_{k <= K} F(xi_k, Y))``.
A refined level draws one outer ``Y`` and ``n_fine * K0`` inner ``xi``; the
coarse value reuses the first ``n_coarse * K0`` of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..engine import LevelSample, LevelSampler
from ..streams import normals


@dataclass(frozen=True)
class NestedSpec:
    """``outer(rng, size)`` draws Y, ``inner(rng, shape)`` draws xi,
    ``kernel(xi, y)`` broadcasts ``(B, K)`` against ``(B, 1)``."""
    outer: Callable
    inner: Callable
    kernel: Callable
    f: Callable
    K0: int = 1
    df: Callable | None = None

    @property
    def h_bold(self) -> float:
        return 1.0 / self.K0


def _inner_values(spec: NestedSpec, rng, size: int, count: int) -> np.ndarray:
    y = np.asarray(spec.outer(rng, size), dtype=float).reshape(size, 1)
    xi = spec.inner(rng, (size, count))
    return spec.kernel(xi, y)


def nested_coupled_level(spec: NestedSpec, rng, size: int, n_coarse: int | None,
                         n_fine: int) -> LevelSample:
    """Prefix-coupled pair ``(f(mean of n_fine*K0), f(mean of first n_coarse*K0))``."""
    k_fine = n_fine * spec.K0
    vals = _inner_values(spec, rng, size, k_fine)
    fine = spec.f(vals.mean(axis=1))
    if n_coarse is None:
        return LevelSample(fine, None, float(n_fine))
    if n_fine % n_coarse:
        raise ValueError("n_fine must be a multiple of n_coarse")
    coarse = spec.f(vals[:, :n_coarse * spec.K0].mean(axis=1))
    return LevelSample(fine, coarse, float(n_fine + n_coarse))


def nested_smooth_level(spec: NestedSpec, rng, size: int, n_coarse: int | None,
                        n_fine: int) -> LevelSample:
    """Antithetic difference: ``f(grand mean) - mean_m f(block mean_m)``.

    ``fine`` holds ``f`` of the mean over all ``n_fine * K0`` inner draws and
    ``coarse`` the average of ``f`` over the ``M`` consecutive blocks of
    ``n_coarse * K0`` draws, so ``fine - coarse`` is the smooth increment.
    """
    if n_coarse is None:
        return nested_coupled_level(spec, rng, size, None, n_fine)
    if n_fine % n_coarse:
        raise ValueError("n_fine must be a multiple of n_coarse")
    M = n_fine // n_coarse
    k = n_coarse * spec.K0
    vals = _inner_values(spec, rng, size, M * k)
    fine = spec.f(vals.mean(axis=1))
    blocks = vals.reshape(size, M, k).mean(axis=2)
    coarse = spec.f(blocks).mean(axis=1)
    return LevelSample(fine, coarse, float(n_fine + n_coarse))


class NestedSampler(LevelSampler):
    level = staticmethod(nested_coupled_level)

    def __init__(self, spec: NestedSpec):
        self.spec = spec
        self.h_bold = spec.h_bold

    def _refiner(self, h: float) -> int:
        n = self.h_bold / h
        k = round(n)
        if k < 1 or abs(n - k) > 1e-9 * max(1.0, n):
            raise ValueError(f"h={h} is not on the grid h_bold / n")
        return k

    def sample(self, rng, size, h_fine, h_coarse=None):
        n_fine = self._refiner(h_fine)
        n_coarse = None if h_coarse is None else self._refiner(h_coarse)
        s = self.level(self.spec, rng, size, n_coarse, n_fine)
        s.cost_units = self.cost_units(h_fine, h_coarse)
        return s


class SmoothNestedSampler(NestedSampler):
    level = staticmethod(nested_smooth_level)


def gaussian_cos_spec(K0: int = 1) -> NestedSpec:
    """``Y ~ N(0,1)``, ``F(xi, y) = y + xi`` with ``xi ~ N(0,1)``, ``f = cos``."""
    return NestedSpec(
        outer=lambda rng, size: normals(rng, size),
        inner=lambda rng, shape: normals(rng, shape),
        kernel=lambda xi, y: y + xi,
        f=np.cos, K0=K0, df=lambda x: -np.sin(x),
    )


@dataclass(frozen=True)
class GaussianNestedOracle:
    I0: float
    var_y0: float
    alpha: float = 1.0
    beta: float = 1.0

    def c(self, k: int) -> float:
        """Coefficient of ``h^k`` in ``E[Y_h] - I0 = e^{-1/2}(e^{-h/2} - 1)``."""
        return math.exp(-0.5) * (-0.5) ** k / math.factorial(k)

    @staticmethod
    def mean(h: float) -> float:
        return math.exp(-(1 + h) / 2)

    @staticmethod
    def sigma_F(y):
        return np.ones_like(np.asarray(y, dtype=float))

    def v_inf(self, M: int) -> float:
        """``lim ||Z(h)||^2 = (M - 1) E[sin^2 Y]`` for the cos model."""
        return (M - 1) * (1 - math.exp(-2)) / 2


def gaussian_nested_oracle() -> GaussianNestedOracle:
    return GaussianNestedOracle(I0=math.exp(-0.5),
                                var_y0=(1 + math.exp(-2)) / 2 - math.exp(-1))
