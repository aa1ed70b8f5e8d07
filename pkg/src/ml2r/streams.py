"""Counter-based random streams.

Every block of draws is keyed by ``(seed, purpose)`` and placed at a fixed
Philox counter ``(0, chunk, level, replication)``. Distinct
``(replication, level, chunk)`` triples never share a counter, so draws are
independent of scheduling and of how many workers run them.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

MASK64 = (1 << 64) - 1
CHUNK = 1024

# second key word; keeps pilot draws disjoint from estimator draws
PURPOSE_RUN = 0
PURPOSE_PILOT = 1
PURPOSE_STUDY = 2


def stream_counter(replication: int, level: int, chunk: int) -> tuple[int, int, int, int]:
    return (0, chunk & MASK64, level & MASK64, replication & MASK64)


def stream(seed: int, replication: int = 0, level: int = 0, chunk: int = 0,
           purpose: int = PURPOSE_RUN) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be a nonnegative 64-bit integer")
    bitgen = np.random.Philox(key=np.array([seed & MASK64, purpose & MASK64], dtype=np.uint64),
                              counter=np.array(stream_counter(replication, level, chunk),
                                               dtype=np.uint64))
    return np.random.Generator(bitgen)


def draw_location(draw: int, chunk_size: int = CHUNK) -> tuple[int, int]:
    """``(chunk, offset)`` of a draw index inside its level."""
    return divmod(draw, chunk_size)


def uniforms(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    return rng.random(shape) + 2.0 ** -54


def normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals by inverse CDF, one uniform per variate."""
    return ndtri(uniforms(rng, shape))


def chunk_sizes(n: int, chunk_size: int = CHUNK) -> list[int]:
    full, rest = divmod(int(n), chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])
