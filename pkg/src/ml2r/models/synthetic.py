"""Cheap families with exactly known level statistics, for checking the engine."""
from __future__ import annotations

import numpy as np

from ..engine import LevelSample, LevelSampler
from ..streams import normals


class ConstantSampler(LevelSampler):
    """``Y_h = value`` for every h."""

    def __init__(self, value: float, h_bold: float = 1.0):
        self.value = float(value)
        self.h_bold = h_bold

    def sample(self, rng, size, h_fine, h_coarse=None):
        fine = np.full(size, self.value)
        coarse = None if h_coarse is None else np.full(size, self.value)
        return LevelSample(fine, coarse, self.cost_units(h_fine, h_coarse))


class LinearBiasSampler(LevelSampler):
    """Deterministic ``Y_h = I0 + c * h``."""

    def __init__(self, I0: float, c: float, h_bold: float = 1.0):
        self.I0, self.c, self.h_bold = float(I0), float(c), h_bold

    def sample(self, rng, size, h_fine, h_coarse=None):
        fine = np.full(size, self.I0 + self.c * h_fine)
        coarse = None if h_coarse is None else np.full(size, self.I0 + self.c * h_coarse)
        return LevelSample(fine, coarse, self.cost_units(h_fine, h_coarse))


class GaussianBiasSampler(LevelSampler):
    """``Y_h = I0 + c h + noise``; level increments are independent Gaussians.

    Level 1 has standard deviation ``sd0``; the increment between ``h_coarse``
    and ``h_fine`` has standard deviation ``sd1 * h_coarse ** (beta / 2)``.
    """

    def __init__(self, I0: float, c: float, sd0: float, sd1: float, beta: float = 1.0,
                 h_bold: float = 1.0):
        self.I0, self.c, self.sd0, self.sd1, self.beta = I0, c, sd0, sd1, beta
        self.h_bold = h_bold

    def increment_sd(self, h_coarse: float | None) -> float:
        return self.sd0 if h_coarse is None else self.sd1 * h_coarse ** (self.beta / 2)

    def sample(self, rng, size, h_fine, h_coarse=None):
        z = normals(rng, size)
        if h_coarse is None:
            return LevelSample(self.I0 + self.c * h_fine + self.sd0 * z, None,
                               self.cost_units(h_fine, None))
        coarse = np.full(size, self.I0 + self.c * h_coarse)
        fine = coarse + self.c * (h_fine - h_coarse) + self.increment_sd(h_coarse) * z
        return LevelSample(fine, coarse, self.cost_units(h_fine, h_coarse))
