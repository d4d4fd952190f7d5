import math

import numpy as np
import pytest

from ridgelimits.errors import (
    DomainError,
    InfeasiblePanelError,
    NearSingularityError,
)
from ridgelimits.spectral import (
    SpectralModel,
    SpectralMoments,
    companion_from_primal,
    companion_zero_limit,
    esd_moments_from_eigenvalues,
    moment_map_forward,
    moment_map_inverse,
    mp_density,
    mp_point_mass,
    mp_stieltjes_closed,
    mp_support_edges,
    solve_mp_fixed_point,
    transform_pair,
)

IDENTITY = SpectralModel.identity()
TWO_POINT = SpectralModel.from_point_masses((0.5, 1.5), (0.5, 0.5))


def test_identity_closed_form_satisfies_quadratics():
    # g solves omega*lam*g^2 + (1 - omega + lam)*g - 1 = 0 and the
    # companion solves lam*v^2 + (lam + omega - 1)*v - 1 = 0 at z = -lam.
    for omega in (0.1, 0.5, 1.0, 1.05, 2.0, 4.0, 8.0):
        for lam in (1e-3, 0.1, 1.0, 10.0):
            g = mp_stieltjes_closed(omega, lam)
            _, v = transform_pair(IDENTITY, omega, lam)
            res_g = omega * lam * g.value**2 + (1 - omega + lam) * g.value - 1
            res_v = lam * v.value**2 + (lam + omega - 1) * v.value - 1
            # relative to the dominant term: the transforms scale like
            # 1/lam on their divergent side
            scale_g = max(omega * lam * g.value**2, abs(1 - omega + lam) * g.value, 1.0)
            scale_v = max(lam * v.value**2, abs(lam + omega - 1) * v.value, 1.0)
            assert abs(res_g) < 1e-13 * scale_g
            assert abs(res_v) < 1e-13 * scale_v
            assert g.method == "closed_form"


def test_identity_fixed_point_matches_closed_form():
    for omega in (0.25, 0.9, 1.1, 3.0):
        for lam in (0.05, 0.5, 5.0):
            g_fp = solve_mp_fixed_point(IDENTITY, omega, lam)
            g_cf = mp_stieltjes_closed(omega, lam)
            assert g_fp.method == "fixed_point"
            assert abs(g_fp.value - g_cf.value) < 1e-10
            assert abs(g_fp.derivative - g_cf.derivative) < 1e-8


def test_point_mass_transforms_satisfy_fixed_point_equations():
    for omega in (0.5, 2.0):
        for lam in (0.1, 1.0):
            g, v = transform_pair(TWO_POINT, omega, lam)
            u = 1 - omega + omega * lam * g.value
            rhs_g = sum(
                w / (t * u + lam)
                for t, w in zip(TWO_POINT.eigenvalues, TWO_POINT.weights)
            )
            assert abs(g.value - rhs_g) < 1e-10
            rhs_v = 1.0 / (
                lam
                + omega
                * sum(
                    w * t / (1 + t * v.value)
                    for t, w in zip(TWO_POINT.eigenvalues, TWO_POINT.weights)
                )
            )
            assert abs(v.value - rhs_v) < 1e-10


def test_transform_derivatives_match_finite_differences():
    for spec in (IDENTITY, TWO_POINT):
        for omega in (0.5, 2.0, 4.0):
            for lam in (0.2, 1.0, 3.0):
                h = 1e-6 * lam
                g, v = transform_pair(spec, omega, lam)
                gp, vp = transform_pair(spec, omega, lam + h)
                gm, vm = transform_pair(spec, omega, lam - h)
                # transforms are evaluated at z = -lam, so d/dz = -d/dlam
                fd_g = -(gp.value - gm.value) / (2 * h)
                fd_v = -(vp.value - vm.value) / (2 * h)
                assert g.derivative == pytest.approx(fd_g, rel=1e-5)
                assert v.derivative == pytest.approx(fd_v, rel=1e-5)


def test_primal_companion_cross_map():
    # v = omega*g + (1 - omega)/lam links the two transforms
    for spec in (IDENTITY, TWO_POINT):
        for omega in (0.5, 1.0, 2.0, 4.0):
            for lam in (0.1, 1.0):
                g, v = transform_pair(spec, omega, lam)
                assert v.value == pytest.approx(
                    omega * g.value + (1 - omega) / lam, rel=1e-9
                )


def test_companion_from_primal_helper():
    g, v_direct = transform_pair(IDENTITY, 0.5, 1.0)
    v = companion_from_primal(g, 0.5, 1.0)
    assert v.value == pytest.approx(v_direct.value, rel=1e-12)
    assert v.derivative == pytest.approx(v_direct.derivative, rel=1e-9)


def test_companion_zero_limit_identity_exact():
    z = companion_zero_limit(IDENTITY, 4.0)
    assert z.value == pytest.approx(1.0 / 3.0, abs=1e-14)
    assert z.derivative == pytest.approx(4.0 / 27.0, abs=1e-14)
    assert not z.extrapolated


def test_companion_zero_limit_general_spectrum():
    z = companion_zero_limit(TWO_POINT, 4.0)
    _, v_small = transform_pair(TWO_POINT, 4.0, 1e-8)
    assert z.extrapolated
    assert z.value == pytest.approx(v_small.value, rel=1e-5)


def test_companion_zero_limit_guards():
    with pytest.raises(DomainError):
        companion_zero_limit(IDENTITY, 0.5)
    with pytest.raises(NearSingularityError):
        companion_zero_limit(IDENTITY, 1.0)
    with pytest.raises(NearSingularityError):
        companion_zero_limit(TWO_POINT, 1.0 + 1e-9)


def test_moment_map_round_trip():
    pop = TWO_POINT.moments()
    for omega in (0.0, 0.5, 2.0, 8.0):
        samp = moment_map_forward(pop, omega)
        back = moment_map_inverse(samp, omega)
        assert back.b1 == pytest.approx(pop.b1, rel=1e-12)
        assert back.b2 == pytest.approx(pop.b2, rel=1e-12)
        assert back.b3 == pytest.approx(pop.b3, rel=1e-12)


def test_moment_map_inverse_rejects_infeasible():
    # b2 below b1^2 after inversion cannot come from any spectrum
    bad = SpectralMoments(b1=1.0, b2=1.5, b3=1.0, source="sample")
    with pytest.raises(InfeasiblePanelError):
        moment_map_inverse(bad, 1.0)


def test_moment_map_inverse_clamps_within_slack():
    samp = SpectralMoments(b1=1.0, b2=1.0 - 5e-4, b3=1.0 - 1e-3, source="sample")
    pop = moment_map_inverse(samp, 0.0, slack=1e-2)
    assert pop.b2 >= pop.b1**2
    assert pop.b1 * pop.b3 >= pop.b2**2


def test_spectral_model_validation():
    with pytest.raises(DomainError):
        SpectralModel.from_point_masses((0.5, 1.5), (0.6, 0.5))  # weights sum
    with pytest.raises(DomainError):
        SpectralModel.from_point_masses((-0.5, 1.5), (0.5, 0.5))  # negative atom
    with pytest.raises(DomainError):
        SpectralModel.from_point_masses((0.5, 1.0), (0.5, 0.5))  # trace rate != 1


def test_block_equicorrelated_spectrum():
    spec = SpectralModel.block_equicorrelated(20, 0.8)
    m = spec.moments()
    assert m.b1 == pytest.approx(1.0, abs=1e-12)
    assert m.b2 == pytest.approx(13.16, abs=1e-10)
    assert m.b3 == pytest.approx(212.584, abs=1e-9)
    assert SpectralModel.block_equicorrelated(20, 0.0).is_identity


def test_esd_moments_from_eigenvalues():
    m = esd_moments_from_eigenvalues([1.0, 2.0, 3.0])
    assert m.source == "sample"
    assert m.b1 == pytest.approx(2.0)
    assert m.b2 == pytest.approx(14.0 / 3.0)


def test_mp_density_integrates_to_bulk_mass():
    for omega in (0.5, 2.0):
        lo, hi = mp_support_edges(omega)
        xs = np.linspace(lo + 1e-9, hi - 1e-9, 200001)
        dens = mp_density(xs, omega)
        mass = float(np.trapezoid(dens, xs))
        expected_bulk = 1.0 - mp_point_mass(omega)
        assert mass == pytest.approx(expected_bulk, abs=2e-4)
        mean = float(np.trapezoid(dens * xs, xs))
        assert mean == pytest.approx(1.0, abs=2e-3)  # b1 of the sample law


def test_mp_point_mass():
    assert mp_point_mass(0.5) == 0.0
    assert mp_point_mass(2.0) == pytest.approx(0.5)
    assert mp_point_mass(4.0) == pytest.approx(0.75)


def test_mp_support_edges():
    lo, hi = mp_support_edges(1.0)
    assert lo == pytest.approx(0.0)
    assert hi == pytest.approx(4.0)
