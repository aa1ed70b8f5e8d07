import math
import warnings

import numpy as np
import pytest
from hypothesis import given, reject, settings, strategies as st

from ml2r.calibration import (
    CalibrationWarning, CltVariance, DegenerateAllocationError, Kind, MultilevelPlan,
    RegimeError, SizeOverflowError, StructuralParams, allocation, asymptotic_size_constant,
    bias_band, bias_parameter, c_lower, c_upper, calibrate, ceil_snap, clt_variance,
    depth, depth_ml2r, depth_mlmc, limit_mu_star, mu_star_bounds, sample_size,
    size_normalizer, theoretical_cost,
)
from ml2r.weights import ml2r_weights

STD = StructuralParams(alpha=1.0, beta=1.0)


def test_ceil_snap():
    assert ceil_snap(5.0000000001) == 5
    assert ceil_snap(4.9999999999) == 5
    assert ceil_snap(5.1) == 6
    assert ceil_snap(0.2) == 1
    assert ceil_snap(-3.0) == 1
    with pytest.raises(OverflowError):
        ceil_snap(float("inf"))


def test_params_invariants():
    p = StructuralParams(1.0, 1.0, var_y0=4.0, V1=1.0)
    assert abs(p.theta - 0.5) <= 1e-12
    with pytest.raises(ValueError):
        StructuralParams(alpha=0.4, beta=1.0)
    assert StructuralParams(1.0, 1.0, var_y0=0.0).theta == 0.0


def test_depth_hand_values():
    # ML2R: C1 = 1/2, C2 = 1/4 + log 5 / log 2, sqrt(C2 + 10) = 3.5457
    assert depth_ml2r(2 ** -5, STD, 2) == 5
    # MLMC: 1 + log(sqrt 3)/log 2 + 5 = 6.79
    assert depth_mlmc(2 ** -5, STD, 2) == 7
    assert depth(2 ** -5, STD, 2, "ml2r") == 5


def test_depth_clamp_warns():
    p = STD.replace(c_hat=1e-6)
    for f in (depth_ml2r, depth_mlmc):
        with pytest.warns(CalibrationWarning):
            assert f(0.5, p, 2) == 2


def test_depth_monotone_and_growth():
    for f in (depth_ml2r, depth_mlmc):
        for e in (1e-2, 1e-3, 1e-4):
            assert f(e / 10, STD, 2) >= f(e, STD, 2)
    # R = const + log(1/eps)/log M: three decades add log(1e3)/log 2 = 9.97 levels
    assert abs(depth_mlmc(1e-6, STD, 2) - depth_mlmc(1e-3, STD, 2) - math.log(1e3) / math.log(2)) <= 1
    assert 1.5 <= depth_mlmc(1e-6, STD, 2) / depth_mlmc(1e-3, STD, 2) <= 2.5
    for e in (1e-2, 1e-4, 1e-6, 1e-8):
        L = math.log(1 / e)
        assert 0.8 <= depth_ml2r(e, STD, 2) / math.sqrt(2 * L / math.log(2)) <= 1.6
        assert 0.8 <= depth_mlmc(e, STD, 2) / (L / math.log(2)) <= 1.6


def test_depth_growth_ratios_tend_to_one():
    r2 = [depth_ml2r(e, STD, 2) / math.sqrt(2 * math.log(1 / e) / math.log(2)) for e in (1e-4, 1e-40, 1e-300)]
    r1 = [depth_mlmc(e, STD, 2) / (math.log(1 / e) / math.log(2)) for e in (1e-4, 1e-40, 1e-300)]
    assert abs(r2[-1] - 1) < abs(r2[0] - 1) and abs(r2[-1] - 1) < 0.1
    assert abs(r1[-1] - 1) < abs(r1[0] - 1) and abs(r1[-1] - 1) < 0.01


def test_bias_parameter_examples():
    # inner argument 11^{0.1} 32^{0.2} / 4 = 0.636 < 1
    assert bias_parameter(2 ** -5, 5, STD, "ML2R", 2) == 1.0
    assert bias_parameter(2 ** -5, 5, STD.replace(c_hat=1e6), "ML2R", 2) < 1.0


@settings(max_examples=100, deadline=None)
@given(eps=st.floats(1e-10, 0.5), c=st.floats(1e-3, 1e4), R=st.integers(2, 12),
       kind=st.sampled_from(["ML2R", "MLMC"]), hb=st.sampled_from([1.0, 0.5, 2.0]))
def test_bias_parameter_on_grid(eps, c, R, kind, hb):
    p = StructuralParams(1.0, 1.0, h_bold=hb, c_hat=c)
    h = bias_parameter(eps, R, p, kind, 2)
    n = hb / h
    assert h <= hb and abs(n - round(n)) <= 1e-9 * n and round(n) >= 1


def test_allocation_examples():
    q, mu = allocation(STD, 1, 1.0, 2, None)
    assert q.tolist() == [1.0] and mu == pytest.approx(1 / 2)
    with pytest.raises(DegenerateAllocationError):
        allocation(STD.replace(V1=0.0), 3, 1.0, 2, None)
    # theta = 1, h = 1, W = [1, 2/3, 8/3]
    q, mu = allocation(STD, 3, 1.0, 2, ml2r_weights(1.0, 2, 3))
    cl = (1 + math.sqrt(2)) / math.sqrt(1.5)
    raw = np.array([2.0, 2 / 3 * cl / 2, 8 / 3 * cl / 4])
    np.testing.assert_allclose(q, raw / raw.sum(), rtol=1e-14)
    assert mu == pytest.approx(1 / raw.sum(), rel=1e-14)
    assert q[0] / mu == pytest.approx(2.0, rel=1e-14)


def test_constants():
    assert c_lower(2, 1.0) == pytest.approx((1 + math.sqrt(2)) / math.sqrt(1.5))
    assert c_upper(2, 1.0) == pytest.approx((1 + math.sqrt(2)) * math.sqrt(1.5))


def test_sample_size_classic_when_theta_zero():
    p = StructuralParams(1.0, 1.0, var_y0=1.0, V1=0.0)
    q, mu = np.array([1.0]), 1.0
    assert sample_size(0.1, p, 1, 1.0, 2, q, mu, None, "ML2R") == 150
    with pytest.raises(SizeOverflowError):
        sample_size(1e-12, p, 1, 1.0, 2, q, mu, None, "ML2R", cap=1e6)


def test_sample_size_quadruples_for_beta_two():
    p = StructuralParams(1.0, 2.0)
    for kind in Kind:
        for eps in (1e-3, 1e-5, 1e-6):
            a, b = calibrate(eps, p, 2, kind), calibrate(eps / 2, p, 2, kind)
            # compare only where both plans sit at h_bold
            assert a.h == b.h == p.h_bold
            assert abs(b.N / a.N / 4 - 1) <= 0.10


def test_calibrate_examples():
    p = StructuralParams(1.0, 1.0)
    a = calibrate(2 ** -5, p, 2, "ML2R")
    b = calibrate(2 ** -5, p, 2, "MLMC")
    assert (a.R, a.h) == (5, 1.0) and (b.R, b.h) == (7, 1.0)
    assert a.weights.R == a.R and a.weights.alpha == p.alpha


def test_calibrate_degenerate_plan():
    p = StructuralParams(1.0, 1.0, var_y0=0.0)
    with pytest.warns(CalibrationWarning):
        plan = calibrate(0.1, p, 2, "MLMC")
    assert plan.degenerate and plan.R == 1 and plan.q.tolist() == [1.0]


def test_plan_round_trip():
    plan = calibrate(0.01, StructuralParams(1.0, 1.0, var_y0=0.3, V1=0.2, c_hat=0.5), 2, "ML2R")
    again = MultilevelPlan.from_dict(plan.to_dict())
    assert again.to_dict() == plan.to_dict()


@pytest.mark.parametrize("alpha", [0.5, 1.0])
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("kind", ["ML2R", "MLMC"])
def test_plan_invariants_grid(alpha, beta, kind):
    if 2 * alpha < beta:
        pytest.skip("inconsistent rates")
    p = StructuralParams(alpha, beta, var_y0=0.7, V1=1.3)
    for eps in (0.1, 0.03, 1e-2, 1e-3, 1e-4):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CalibrationWarning)
            plan = calibrate(eps, p, 2, kind)
        plan.validate()
        assert abs(plan.q.sum() - 1) <= 1e-12 and np.all(plan.q > 0)
        assert np.all(plan.N_j >= 1)
        assert np.array_equal(plan.N_j, [math.ceil(plan.N * x - 1e-9) for x in plan.q])


@settings(max_examples=200, deadline=None)
@given(eps=st.floats(1e-8, 0.2), v=st.floats(0.01, 10), V1=st.floats(0.01, 10),
       beta=st.sampled_from([0.5, 1.0, 2.0]), M=st.integers(2, 4),
       kind=st.sampled_from(["ML2R", "MLMC"]))
def test_allocation_normalized(eps, v, V1, beta, M, kind):
    p = StructuralParams(1.0, beta, var_y0=v, V1=V1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CalibrationWarning)
        try:
            plan = calibrate(eps, p, M, kind)
        except SizeOverflowError:
            reject()
    assert abs(plan.q.sum() - 1) <= 1e-12


def test_mu_star_bounds():
    for beta in (1.0, 2.0):
        p = StructuralParams(1.0, beta, var_y0=0.5, V1=2.0)
        lo, hi = mu_star_bounds(p, 2)
        for eps in (1e-2, 1e-3, 1e-4, 1e-6):
            plan = calibrate(eps, p, 2, "ML2R")
            if plan.h == p.h_bold:
                assert lo - 1e-12 <= plan.mu_star <= hi + 1e-12
        assert lo <= limit_mu_star(p, 2) <= hi


def _ratio_at_h_bold(eps, p, M, kind):
    # N eps^2 / normalizer over C_beta with h pinned to h_bold
    R = depth(eps, p, M, kind)
    table = ml2r_weights(p.alpha, M, R) if Kind(kind) is Kind.ML2R else None
    q, mu = allocation(p, R, p.h_bold, M, table)
    N = sample_size(eps, p, R, p.h_bold, M, q, mu, table, kind, cap=math.inf)
    return N / size_normalizer(eps, R, p.beta, M) / asymptotic_size_constant(p, M, kind)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_size_asymptotics_mlmc(beta):
    p = StructuralParams(1.0, beta)
    assert abs(_ratio_at_h_bold(1e-4, p, 2, "MLMC") - 1) <= 0.10


def test_size_asymptotics_ml2r_beta_two():
    assert abs(_ratio_at_h_bold(1e-4, StructuralParams(1.0, 2.0), 2, "ML2R") - 1) <= 0.10


@pytest.mark.parametrize("beta", [0.5, 1.0])
def test_size_asymptotics_ml2r_converges_slowly(beta):
    # the approach is O(1/R) with R ~ sqrt(log 1/eps): check it moves toward 1
    p = StructuralParams(1.0, beta)
    gaps = [abs(_ratio_at_h_bold(e, p, 2, "ML2R") - 1) for e in (1e-4, 1e-30, 1e-150)]
    assert gaps[2] < gaps[1] < gaps[0]


def test_size_constant_examples():
    for alpha in (0.5, 1.0, 2.0):
        p = StructuralParams(alpha, 1.0 if alpha == 0.5 else 2.0)
        if p.beta == 2.0:
            r = asymptotic_size_constant(p, 2, "MLMC") / asymptotic_size_constant(p, 2, "ML2R")
            assert r == pytest.approx(1 + 1 / (2 * alpha), rel=1e-14)
    p = StructuralParams(1.0, 1.0, var_y0=2.0, V1=0.5, h_bold=1.0)
    c = asymptotic_size_constant(p, 2, "ML2R")
    th = p.theta
    assert c == pytest.approx(p.var_y0 / limit_mu_star(p, 2) * th * c_upper(2, 1.0))
    assert asymptotic_size_constant(p.replace(V1=0.0), 2, "ML2R") == 0.0


def test_bias_band():
    assert bias_band(1.0, 2) == pytest.approx((0.5 / math.sqrt(3), 1 / math.sqrt(3)))
    assert bias_band(0.5, 4) == pytest.approx((0.5 / math.sqrt(2), 1 / math.sqrt(2)))
    for a in (0.5, 1, 2):
        for M in (2, 3, 7):
            lo, hi = bias_band(a, M)
            assert lo < hi


def test_clt_variance_caps():
    M = 2
    for beta in (0.5, 1.0):
        p = StructuralParams(1.0, beta, var_y0=0.4, V1=0.9)
        cap = p.V1 * (1 + M ** (beta / 2)) ** 2
        v = clt_variance(p, M, "ML2R", v_inf=cap)
        assert v.total == pytest.approx(1.0, rel=1e-14)
        m = clt_variance(p, M, "MLMC", v_inf=cap)
        assert m.total == pytest.approx(2 / 3, rel=1e-14)
    p = StructuralParams(1.0, 2.0, var_y0=0.4, V1=0.9)
    th = p.theta
    var_yh = p.var_y0 * (1 + th) ** 2
    var_z = np.full(4000, p.V1 * (1 + M) ** 2)
    v = clt_variance(p, M, "ML2R", var_z=var_z, var_yh=var_yh)
    assert abs(v.sigma1_sq + v.sigma2_sq - 1) <= 1e-9
    assert clt_variance(p, M, "MLMC", var_z=var_z, var_yh=var_yh).total == pytest.approx(2 / 3 * v.total)


def test_clt_variance_regimes():
    with pytest.raises(RegimeError):
        clt_variance(StructuralParams(1.0, 2.0), 2, "ML2R")
    with pytest.raises(RegimeError):
        clt_variance(StructuralParams(1.0, 1.0), 2, "ML2R")
    with pytest.raises(RegimeError):
        clt_variance(StructuralParams(0.5, 1.0), 2, "ML2R", v_inf=1.0)
    v = clt_variance(StructuralParams(0.5, 1.0), 2, "ML2R", v_inf=1.0, c1=0.1)
    assert v.notes


def test_theoretical_cost():
    p = StructuralParams(1.0, 1.0, var_y0=0.0)
    with pytest.warns(CalibrationWarning):
        plan = calibrate(0.1, p, 2, "ML2R")
    assert theoretical_cost(plan) == pytest.approx(plan.N / plan.h)
    a = calibrate(1e-3, STD, 2, "ML2R")
    bigger = MultilevelPlan.from_dict({**a.to_dict(), "N": a.N + 1})
    assert theoretical_cost(bigger) > theoretical_cost(a)
    cost = lambda e, k: theoretical_cost(calibrate(e, STD, 2, k, cap=math.inf))
    ratios = [cost(e, "ML2R") / cost(e, "MLMC")
              for e in (1e-3, 1e-5, 1e-7)]
    assert ratios[0] < 1 and ratios[2] < ratios[1] < ratios[0]
