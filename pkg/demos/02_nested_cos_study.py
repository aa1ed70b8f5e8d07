"""A replicated study on the Gaussian nested model.

Y ~ N(0, 1), inner noise xi ~ N(0, 1), f = cos, so the target is
E cos(Y) = exp(-1/2). Structural constants come from a pilot, then both
estimators are run K times and compared with the oracle.
"""
import math

from ml2r import calibrate, run_replicated
from ml2r.analysis import bias_band_check, estimate_structural, study_statistics
from ml2r.models import NestedSampler, gaussian_cos_spec, gaussian_nested_oracle

sampler = NestedSampler(gaussian_cos_spec())
oracle = gaussian_nested_oracle()
pilot = estimate_structural(sampler, 1.0, 2, 1.0, n_pilot=20_000, seed=7)
print(f"pilot: Var(Y0)~{pilot.var_y0_hat:.4f}  V1~{pilot.V1_hat:.4f}  c1~{pilot.c1_hat:.4f}")

K = 200
for eps in (0.05, 0.02):
    for kind, c_hat in (("MLMC", abs(oracle.c(1))), ("ML2R", 1.0)):
        plan = calibrate(eps, pilot.to_params(1.0, c_hat=c_hat), 2, kind)
        rep = study_statistics(run_replicated(plan, sampler, 1, K, oracle=oracle.I0))
        band = bias_band_check(rep, 1.0, 2)
        print(f"eps={eps:<5g} {kind}: R={plan.R} N={plan.N:<7d} rmse/eps={rep.empirical_rmse / eps:.3f} "
              f"m={rep.m_hat:+.3f} (band {band.lo:.3f}..{band.hi:.3f}) mean cost={rep.mean_cost:.3e}")

print(f"oracle I0 = {oracle.I0:.6f}, exact c1 = {oracle.c(1):.6f}, e^-1/2 = {math.exp(-0.5):.6f}")
