"""Weights and calibrated plans.

Prints the ML2R weight table for a few depths, then shows how depth, bias
parameter and sample size move as the target RMSE shrinks.
"""
import numpy as np

from ml2r import StructuralParams, calibrate, ml2r_weights, theoretical_cost, vandermonde_residual

np.set_printoptions(precision=4, suppress=True)

for R in (2, 3, 5, 8):
    t = ml2r_weights(1.0, 2, R)
    print(f"R={R}  W={t.W}  residual={vandermonde_residual(t):.1e}")

# alpha = beta = 1, unit constants: the plain test configuration
p = StructuralParams(alpha=1.0, beta=1.0)
print("\n eps       kind  R  h       N          cost")
for eps in (2.0 ** -3, 2.0 ** -5, 2.0 ** -8, 1e-4):
    for kind in ("MLMC", "ML2R"):
        plan = calibrate(eps, p, 2, kind)
        print(f"{eps:9.3g} {kind:5s} {plan.R:2d} {plan.h:<7g} {plan.N:<10d} {theoretical_cost(plan):.3e}")
