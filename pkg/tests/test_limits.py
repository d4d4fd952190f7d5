import math

import numpy as np
import pytest

from ridgelimits.errors import DomainError, NearSingularityError
from ridgelimits.limits import (
    TraitModel,
    efficiency_ratios,
    limit_marginal,
    limit_meta,
    limit_ols,
    limit_ols_in,
    limit_ridge_in,
    limit_ridge_in_optimal,
    limit_ridge_in_zero,
    limit_ridge_optimal,
    limit_ridge_out,
    limit_ridgeless,
    mse_limits,
    optimal_lambda,
    pre_marginal,
    pre_ridge,
)
from ridgelimits.spectral import SpectralModel, transform_pair

IDENTITY = SpectralModel.identity()
TWO_POINT = SpectralModel.from_point_masses((0.5, 1.5), (0.5, 0.5))
BLOCK = SpectralModel.block_equicorrelated(20, 0.8)

# frozen reference values, computed independently from the closed forms
REF = TraitModel(h2_beta=0.8, omega=4.0)


def test_trait_model_validation():
    with pytest.raises(DomainError):
        TraitModel(h2_beta=1.2, omega=1.0)
    with pytest.raises(DomainError):
        TraitModel(h2_beta=0.5, omega=-1.0)
    with pytest.raises(DomainError):
        TraitModel(h2_beta=0.5, omega=1.0, phi=1.5)
    with pytest.raises(DomainError):
        # kappa * rho must reproduce phi
        TraitModel(h2_beta=0.5, omega=1.0, phi=0.9, kappa=0.5, rho=0.5)
    tm = TraitModel(h2_beta=0.5, omega=2.0, h2_eta=0.32, phi=0.5)
    assert tm.ceiling == pytest.approx(0.08)


def test_marginal_limits_reference_point():
    a2, e2 = limit_marginal(REF, IDENTITY)
    assert a2.value == pytest.approx(0.8 * 0.8 / (0.8 + 4.0), abs=1e-12)  # 0.13333
    assert e2.value == pytest.approx(0.8470588235294118, abs=1e-12)
    assert a2.tag == "marginal_out_of_sample"
    assert e2.tag == "marginal_in_sample"


def test_optimal_penalty_reference_point():
    opt = optimal_lambda(REF)
    assert opt.lam == pytest.approx(1.0, rel=1e-12)  # omega*(1-h2)/h2
    assert opt.tau == pytest.approx(0.25, rel=1e-12)
    with pytest.raises(DomainError):
        optimal_lambda(TraitModel(h2_beta=1.0, omega=2.0))


def test_ridge_optimal_reference_point():
    lv = limit_ridge_optimal(REF, IDENTITY)
    assert lv.value == pytest.approx(0.15278640450004204, abs=1e-10)
    # consistency: the generic curve at the optimal penalty gives the same
    at_star = limit_ridge_out(REF, IDENTITY, optimal_lambda(REF).lam)
    assert at_star.value == pytest.approx(lv.value, rel=1e-10)


def test_ridge_optimal_closed_radical_form():
    # identity-covariance closed form through the efficiency radical
    h2, om = 0.8, 4.0
    expected = (
        h2
        * ((om + h2) - math.sqrt((om + h2) ** 2 - 4 * om * h2**2 * h2 / h2))
        / (2 * h2**2 * om)
        * h2
    )
    # r_optimal * a2_marginal recovers the optimal-ridge value
    ratios = efficiency_ratios(REF)
    a2_m = limit_marginal(REF, IDENTITY)[0].value
    assert ratios.r_optimal * a2_m == pytest.approx(0.15278640450004204, abs=1e-10)
    assert expected == pytest.approx(0.15278640450004204, abs=1e-10)


def test_efficiency_ratios_reference_points():
    ratios = efficiency_ratios(REF)
    assert ratios.r_optimal == pytest.approx(1.1458980337503155, abs=1e-10)
    assert ratios.r_zero == pytest.approx(1.125, abs=1e-10)
    # the zero-penalty ratio can favor the marginal side at small h2
    low = efficiency_ratios(TraitModel(h2_beta=0.4, omega=2.0))
    assert low.r_zero == pytest.approx(0.75, abs=1e-10)
    assert low.r_zero < 1.0
    assert ratios.q_in == pytest.approx(1.1674025689419782, abs=1e-8)


def test_ridgeless_reference_point():
    lv = limit_ridgeless(REF, IDENTITY)
    assert lv.value == pytest.approx(0.15, abs=1e-10)
    with pytest.raises(NearSingularityError):
        limit_ridgeless(TraitModel(h2_beta=0.8, omega=1.0), IDENTITY)
    # below the interpolation threshold it continues into the OLS value
    under = limit_ridgeless(TraitModel(h2_beta=0.8, omega=0.5), IDENTITY)
    assert under.value == pytest.approx(
        limit_ols(TraitModel(h2_beta=0.8, omega=0.5)).value, rel=1e-12
    )


def test_ols_reference_points():
    assert limit_ols(TraitModel(h2_beta=0.8, omega=0.5)).value == pytest.approx(0.64, abs=1e-12)
    assert limit_ols_in(TraitModel(h2_beta=0.5, omega=0.5)).value == pytest.approx(0.75, abs=1e-12)
    with pytest.raises(DomainError):
        limit_ols(TraitModel(h2_beta=0.8, omega=2.0))


def test_in_sample_reference_points():
    e2_star = limit_ridge_in_optimal(REF, IDENTITY)
    assert e2_star.value == pytest.approx(0.9888543819998316, abs=1e-10)
    # generic in-sample curve at the optimum matches the specialization
    at_star = limit_ridge_in(REF, IDENTITY, optimal_lambda(REF).lam)
    assert at_star.value == pytest.approx(e2_star.value, abs=1e-12)
    # zero-penalty in-sample fit: full interpolation above the threshold
    assert limit_ridge_in_zero(REF).value == pytest.approx(1.0)
    low = TraitModel(h2_beta=0.5, omega=0.5)
    assert limit_ridge_in_zero(low).value == pytest.approx(0.75)


def test_in_sample_curve_zero_penalty_continuity():
    # the generic curve approaches the zero-penalty value from above in lam
    for tm in (REF, TraitModel(h2_beta=0.5, omega=0.5)):
        target = limit_ridge_in_zero(tm).value
        val = limit_ridge_in(tm, IDENTITY, 1e-7).value
        assert val == pytest.approx(target, abs=1e-4)


def test_block_pre_reference_point():
    tm = TraitModel(h2_beta=0.8, omega=8.0)
    pre = pre_marginal(tm, BLOCK)
    assert pre.delta == pytest.approx(5.534951103238442, abs=1e-9)
    ratio = limit_marginal(tm, BLOCK)[0].value / limit_marginal(tm, IDENTITY)[0].value
    assert pre.delta == pytest.approx(ratio, rel=1e-12)
    # the gain flips below the transition ratio
    assert pre.omega_transition == pytest.approx(0.196968968968969, abs=1e-6)
    small = pre_marginal(TraitModel(h2_beta=0.8, omega=0.05), BLOCK)
    assert small.delta < 1.0


def test_pre_identity_is_one():
    assert pre_marginal(REF, IDENTITY).delta == pytest.approx(1.0, rel=1e-12)
    assert pre_marginal(REF, IDENTITY).omega_transition is None


def test_pre_ridge_at_optimum():
    tm = TraitModel(h2_beta=0.8, omega=8.0)
    pre = pre_ridge(tm, BLOCK)
    direct = (
        limit_ridge_optimal(tm, BLOCK).value
        / limit_ridge_optimal(tm, IDENTITY).value
    )
    assert pre == pytest.approx(direct, rel=1e-12)


def test_meta_limits():
    tm = TraitModel(h2_beta=0.8, omega=4.0)
    a2, e2 = limit_meta(tm, IDENTITY, (400, 1600))
    # size-proportional weights recover the pooled limits exactly
    a2_pooled, e2_pooled = limit_marginal(tm, IDENTITY)
    assert a2.value == pytest.approx(a2_pooled.value, rel=1e-12)
    assert e2.value == pytest.approx(e2_pooled.value, rel=1e-12)
    # equal weights on unequal studies dilute accuracy; fit has no limit
    a2_eq, e2_eq = limit_meta(tm, IDENTITY, (400, 1600), weights=(0.5, 0.5))
    assert a2_eq.value == pytest.approx(0.09078014184397161, abs=1e-9)
    assert a2_eq.value < a2_pooled.value
    assert e2_eq is None


def test_ridge_curve_reference_point():
    lv = limit_ridge_out(REF, IDENTITY, 0.25)
    assert lv.value == pytest.approx(0.15153910707863774, abs=1e-10)
    e2 = limit_ridge_in(REF, IDENTITY, 0.25)
    assert e2.value == pytest.approx(0.9987727897971107, abs=1e-10)


def test_ridge_in_sample_zero_limit_continuity_under_one():
    # for omega < 1 the zero-penalty limit matches the OLS in-sample value
    tm = TraitModel(h2_beta=0.5, omega=0.5)
    assert limit_ridge_in_zero(tm).value == pytest.approx(
        limit_ols_in(tm).value, rel=1e-12
    )


def test_a2_bounded_by_ceiling():
    for spec in (IDENTITY, TWO_POINT, BLOCK):
        for h2 in (0.2, 0.5, 0.8):
            for om in (0.5, 2.0, 8.0):
                tm = TraitModel(h2_beta=h2, omega=om)
                assert 0.0 <= limit_marginal(tm, spec)[0].value <= tm.ceiling + 1e-12
                assert 0.0 <= limit_ridge_optimal(tm, spec).value <= tm.ceiling + 1e-12


def test_mse_limit_reference_points():
    tm = TraitModel(h2_beta=0.5, omega=2.0)
    dec = mse_limits(tm, IDENTITY, 1.0, kind="marginal")
    assert dec.total == pytest.approx(4.0, abs=1e-10)
    assert dec.bias_sq == pytest.approx(2.0, abs=1e-10)
    assert dec.variance == pytest.approx(2.0, abs=1e-10)

    tm_o = TraitModel(h2_beta=0.5, omega=0.5)
    dec_o = mse_limits(tm_o, IDENTITY, 1.0, kind="ols")
    assert dec_o.bias_sq == 0.0
    assert dec_o.variance == pytest.approx(1.0, abs=1e-10)

    dec_r = mse_limits(tm, IDENTITY, 1.0, kind="ridge_optimal")
    assert dec_r.total == pytest.approx(0.8090169943749476, abs=1e-10)

    tm4 = TraitModel(h2_beta=0.5, omega=4.0)
    dec_z = mse_limits(tm4, IDENTITY, 1.0, kind="ridgeless")
    assert dec_z.bias_sq == pytest.approx(0.75, abs=1e-10)
    assert dec_z.variance == pytest.approx(1.0 / 12.0, abs=1e-10)


def test_mse_ridge_identity_alternate_form():
    # lam^2 g' * s + sigma^2 omega (g - lam g') is an equivalent identity
    # form of the general companion expression
    tm = TraitModel(h2_beta=0.5, omega=2.0)
    s = 1.0
    sigma2 = s * (1 - tm.h2_beta) / tm.h2_beta
    for lam in (0.1, 0.5, 1.0, 3.0):
        g, _ = transform_pair(IDENTITY, tm.omega, lam)
        alt = s * lam**2 * g.derivative + sigma2 * tm.omega * (
            g.value - lam * g.derivative
        )
        dec = mse_limits(tm, IDENTITY, s, kind="ridge", lam=lam)
        assert dec.total == pytest.approx(alt, rel=1e-10)


def test_mse_limits_signal_scaling():
    # both components scale linearly in the signal variance when the noise
    # keeps the same signal-to-noise ratio
    tm = TraitModel(h2_beta=0.5, omega=2.0)
    one = mse_limits(tm, IDENTITY, 1.0, kind="marginal")
    three = mse_limits(tm, IDENTITY, 3.0, kind="marginal")
    assert three.total == pytest.approx(3.0 * one.total, rel=1e-12)


def test_ridge_curve_is_dominated_by_optimum():
    for spec in (IDENTITY, TWO_POINT):
        for h2 in (0.2, 0.8):
            for om in (0.5, 2.0):
                tm = TraitModel(h2_beta=h2, omega=om)
                best = limit_ridge_optimal(tm, spec).value
                for lam in np.logspace(-3, 2, 11):
                    assert limit_ridge_out(tm, spec, float(lam)).value <= best + 1e-8
