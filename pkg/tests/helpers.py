import numpy as np

from ml2r.calibration import Kind, MultilevelPlan, StructuralParams


def fixed_plan(R, N_j, W, h=1.0, M=2):
    """A hand-built plan with given per-level sizes and ML2R weights."""
    N = int(sum(N_j))
    q = np.asarray(N_j, dtype=float) / N
    return MultilevelPlan(Kind.ML2R, 0.1, M, R, h, q, 1.0, N, np.asarray(N_j), W,
                          StructuralParams(1.0, 1.0))
