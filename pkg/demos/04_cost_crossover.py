"""Theoretical cost of MLMC and ML2R across a target grid.

At beta = 1 the ML2R/MLMC ratio falls as eps shrinks (eps^-2 log vs
eps^-2 log^2); at beta = 2 both behave like an unbiased eps^-2 method.
"""
from ml2r import StructuralParams
from ml2r.analysis import cost_scaling_study

grid = [2.0 ** -k for k in range(3, 11)]
for beta, var_y0, V1, c1 in ((1.0, 0.2, 0.07, 0.30), (2.0, 1296.0, 2.2, 1.2)):
    base = StructuralParams(1.0, beta, var_y0=var_y0, V1=V1)
    mlmc = cost_scaling_study(["MLMC"], grid, base.replace(c_hat=c1), 2)
    ml2r = cost_scaling_study(["ML2R"], grid, base, 2)
    print(f"\nbeta={beta:g}\n  eps        MLMC cost*eps^2   ML2R cost*eps^2   ratio")
    for a, b in zip(mlmc, ml2r):
        print(f"  {a['epsilon']:<9.3g}  {a['cost_eps2']:<16.4g}  {b['cost_eps2']:<16.4g}  "
              f"{b['cost_theoretical'] / a['cost_theoretical']:.3f}")
