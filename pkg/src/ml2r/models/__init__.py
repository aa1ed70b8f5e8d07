from .sde import (
    SdeSpec, EulerSampler, MilsteinSampler, euler_coupled_level, milstein_coupled_level,
    black_scholes_spec, bs_call_oracle, terminal_call, terminal_value,
)
from .nested import (
    NestedSpec, NestedSampler, SmoothNestedSampler, nested_coupled_level, nested_smooth_level,
    gaussian_cos_spec, gaussian_nested_oracle, GaussianNestedOracle,
)
from .synthetic import ConstantSampler, LinearBiasSampler, GaussianBiasSampler

__all__ = [
    "SdeSpec", "EulerSampler", "MilsteinSampler", "euler_coupled_level",
    "milstein_coupled_level", "black_scholes_spec", "bs_call_oracle", "terminal_call",
    "terminal_value", "NestedSpec", "NestedSampler", "SmoothNestedSampler",
    "nested_coupled_level", "nested_smooth_level", "gaussian_cos_spec",
    "gaussian_nested_oracle", "GaussianNestedOracle", "ConstantSampler",
    "LinearBiasSampler", "GaussianBiasSampler",
]
