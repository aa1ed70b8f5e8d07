"""Coupled Euler and Milstein schemes for Brownian diffusions.

A level draw simulates the fine path with ``n_fine`` steps and the coarse
path with ``n_fine / M`` steps; each coarse Brownian increment is the sum of
``M`` consecutive fine increments, so both paths share one Brownian path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from ..engine import LevelSample, LevelSampler, NonFiniteSampleError
from ..streams import normals


@dataclass(frozen=True)
class SdeSpec:
    """``dX = b(t, X) dt + sigma(t, X) dW`` on ``[0, T]``.

    ``drift(t, x)`` maps ``(B, d)`` to ``(B, d)``; ``diffusion(t, x)`` maps
    ``(B, d)`` to ``(B, d, q)``. ``payoff(path, dt)`` receives the skeleton
    ``(B, n + 1, d)`` and returns ``(B,)``. ``dsigma`` is the state
    derivative of a scalar diffusion coefficient, needed by Milstein only.
    ``K0`` base steps make the coarsest bias parameter ``T / K0``.
    """
    drift: Callable
    diffusion: Callable
    x0: object
    T: float
    payoff: Callable
    dim: int = 1
    noise_dim: int = 1
    dsigma: Callable | None = None
    K0: int = 1

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.K0 < 1:
            raise ValueError("K0 must be >= 1")

    @property
    def h_bold(self) -> float:
        return self.T / self.K0

    def initial(self, rng, size: int) -> np.ndarray:
        if callable(self.x0):
            x = np.asarray(self.x0(rng, size), dtype=float)
        else:
            x = np.broadcast_to(np.asarray(self.x0, dtype=float), (self.dim,))
            x = np.tile(x, (size, 1))
        return x.reshape(size, self.dim)


def _steps(T: float, h: float) -> int:
    n = T / h
    k = round(n)
    if k < 1 or abs(n - k) > 1e-9 * max(1.0, n):
        raise ValueError(f"h={h} does not divide T={T}")
    return k


def _euler_path(spec: SdeSpec, x: np.ndarray, dW: np.ndarray, dt: float, milstein: bool):
    n = dW.shape[0]
    path = np.empty((x.shape[0], n + 1, spec.dim))
    path[:, 0] = x
    for k in range(n):
        t = k * dt
        sig = spec.diffusion(t, x)
        dx = spec.drift(t, x) * dt + np.einsum("bdq,bq->bd", sig, dW[k])
        if milstein:
            # scalar: 1/2 sigma sigma' (dW^2 - dt)
            s = sig[:, 0, 0]
            dx[:, 0] += 0.5 * s * spec.dsigma(t, x)[:, 0] * (dW[k, :, 0] ** 2 - dt)
        x = x + dx
        if not np.all(np.isfinite(x)):
            raise NonFiniteSampleError(f"non-finite state at step {k + 1} of {n}")
        path[:, k + 1] = x
    return path


def _coupled(spec, rng, size, n_coarse, n_fine, milstein):
    if n_coarse is not None and n_fine % n_coarse:
        raise ValueError("n_fine must be a multiple of n_coarse")
    x0 = spec.initial(rng, size)
    dt = spec.T / n_fine
    dW = normals(rng, (n_fine, size, spec.noise_dim)) * math.sqrt(dt)
    fine = spec.payoff(_euler_path(spec, x0, dW, dt, milstein), dt)
    if n_coarse is None:
        return np.asarray(fine, dtype=float), None
    M = n_fine // n_coarse
    dWc = dW.reshape(n_coarse, M, size, spec.noise_dim).sum(axis=1)
    coarse = spec.payoff(_euler_path(spec, x0, dWc, spec.T / n_coarse, milstein),
                         spec.T / n_coarse)
    return np.asarray(fine, dtype=float), np.asarray(coarse, dtype=float)


def euler_coupled_level(spec: SdeSpec, rng, size: int, n_coarse: int | None,
                        n_fine: int) -> LevelSample:
    """Coupled Euler payoffs with ``n_fine`` / ``n_coarse`` steps (``n_coarse=None`` at level 1)."""
    fine, coarse = _coupled(spec, rng, size, n_coarse, n_fine, milstein=False)
    cost = n_fine / spec.K0 + (0 if n_coarse is None else n_coarse / spec.K0)
    return LevelSample(fine, coarse, cost / spec.h_bold)


def milstein_coupled_level(spec: SdeSpec, rng, size: int, n_coarse: int | None,
                           n_fine: int) -> LevelSample:
    if spec.dim != 1 or spec.noise_dim != 1:
        raise ValueError("Milstein is implemented for scalar SDEs only")
    if spec.dsigma is None:
        raise ValueError("Milstein needs dsigma")
    fine, coarse = _coupled(spec, rng, size, n_coarse, n_fine, milstein=True)
    cost = n_fine / spec.K0 + (0 if n_coarse is None else n_coarse / spec.K0)
    return LevelSample(fine, coarse, cost / spec.h_bold)


class EulerSampler(LevelSampler):
    scheme = staticmethod(euler_coupled_level)

    def __init__(self, spec: SdeSpec):
        self.spec = spec
        self.h_bold = spec.h_bold

    def sample(self, rng, size, h_fine, h_coarse=None):
        n_fine = _steps(self.spec.T, h_fine)
        n_coarse = None if h_coarse is None else _steps(self.spec.T, h_coarse)
        s = self.scheme(self.spec, rng, size, n_coarse, n_fine)
        # cost in inverse-h units regardless of T
        s.cost_units = self.cost_units(h_fine, h_coarse)
        return s


class MilsteinSampler(EulerSampler):
    scheme = staticmethod(milstein_coupled_level)


def terminal_call(strike: float, discount: float = 1.0):
    def payoff(path, dt):
        return discount * np.maximum(path[:, -1, 0] - strike, 0.0)
    return payoff


def terminal_value(path, dt):
    return path[:, -1, 0]


def black_scholes_spec(s0: float = 100.0, strike: float = 80.0, r: float = 0.1,
                       vol: float = 0.4, T: float = 1.0, K0: int = 1) -> SdeSpec:
    """Geometric Brownian motion with a discounted call payoff."""
    return SdeSpec(
        drift=lambda t, x: r * x,
        diffusion=lambda t, x: (vol * x)[:, :, None],
        x0=s0, T=T, payoff=terminal_call(strike, math.exp(-r * T)),
        dsigma=lambda t, x: np.full_like(x, vol), K0=K0,
    )


def bs_call_oracle(s0: float, strike: float, r: float, vol: float, T: float) -> float:
    """Black-Scholes call price."""
    if strike <= 0:
        return float(s0)
    sd = vol * math.sqrt(T)
    d1 = (math.log(s0 / strike) + (r + 0.5 * vol * vol) * T) / sd
    d2 = d1 - sd
    return float(s0 * ndtr(d1) - strike * math.exp(-r * T) * ndtr(d2))
