"""Strong rates of coupled Euler and Milstein on a Black-Scholes call.

Level-increment variances are regressed on h in log-log scale: slope ~1
for Euler, ~2 for Milstein. Then |c1| is estimated at h = T/20 for a range
of interest rates.
"""
from ml2r.analysis import InsufficientPilotError, estimate_c1, level_moment_slope
from ml2r.models import EulerSampler, MilsteinSampler, black_scholes_spec, bs_call_oracle

spec = black_scholes_spec()
print(f"call price (s0=100, K=80, r=0.1, vol=0.4, T=1): {bs_call_oracle(100, 80, 0.1, 0.4, 1):.6f}")
hs = [1 / 2 ** k for k in range(1, 7)]
for name, cls in (("Euler", EulerSampler), ("Milstein", MilsteinSampler)):
    rate = level_moment_slope(cls(spec), hs, 2, n=20_000, seed=3)
    print(f"{name:8s} slope {rate.slope:.3f}  variances {[f'{v:.2e}' for v in rate.values]}")

for r in (0.0, 0.05, 0.1, 0.2, 0.3, 0.5):
    try:
        c = estimate_c1(EulerSampler(black_scholes_spec(r=r)), 1 / 20, 2, 100_000, seed=1)
        print(f"r={r:<4g} |c1| ~ {abs(c.value):.3f} +- {c.se:.3f}")
    except InsufficientPilotError as exc:
        print(f"r={r:<4g} {exc}")
