"""Multilevel Monte Carlo and multilevel Richardson-Romberg estimators."""
from .weights import (
    WeightTable, InvalidParameterError, ml2r_weights, mlmc_weights, vandermonde_residual,
    weighted_geometric_sum, weight_limits,
)
from .calibration import (
    Kind, StructuralParams, MultilevelPlan, CalibrationWarning, calibrate, depth, depth_ml2r,
    depth_mlmc, bias_parameter, allocation, sample_size, asymptotic_size_constant,
    clt_variance, theoretical_cost, bias_band,
)
from .engine import LevelSample, LevelSampler, EstimatorResult, ReplicationStudy, run, run_replicated
from .analysis import (
    PilotReport, StudyReport, estimate_c1, estimate_structural, estimate_v_inf,
    study_statistics, clt_check, slln_decay_check, cost_scaling_study,
)

__version__ = "0.1.0"
