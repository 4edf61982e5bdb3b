import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraudsim.errors import CapabilityError, DimensionError
from fraudsim.spectral import (
    MONTE_CARLO,
    QUADRATURE,
    Spectrum,
    beta_thresholds,
    beta_zero,
    lambda_avg,
    mu_expectation,
    phi_a,
    sample_mu,
    sphere_integral_z,
    sphere_rule,
    two_point_lambda_scan,
)

# Frozen oracles, computed with scipy.integrate.quad / dblquad in polar or
# spherical coordinates, independently of the package's own rules.
LAMBDA_14 = {-0.5: 2.2463199448102498, 0.0: 2.0, 1.0: 1.6, 1.5: 1.459976609876968, 5.0: 1.1192113046335845}
LAMBDA_124 = {-0.9: 2.30606406027911, 0.0: 2.064286733190082, 2.0: 1.620282490205949}


def test_beta_zero_values():
    assert beta_zero(2) == 0
    assert beta_zero(3) == 0.5
    assert beta_zero(4) == 1


@pytest.mark.parametrize("m", [1, 0, 2.5])
def test_beta_zero_rejects_bad_dimension(m):
    with pytest.raises(DimensionError):
        beta_zero(m)


def test_beta_thresholds_examples():
    th = beta_thresholds([Spectrum([1, 2])])
    assert (th.beta_zero, th.beta_vee, th.beta_wedge) == (0, 0.5, -0.25)
    th = beta_thresholds([Spectrum([1, 4]), Spectrum([2, 2])])
    assert th.beta_vee == 1.5
    assert th.beta_wedge == -0.375


def test_beta_thresholds_isotropic_collapse():
    for m in (2, 3, 7):
        th = beta_thresholds([Spectrum.isotropic(2.5, m)])
        assert th.beta_vee == th.beta_wedge == th.beta_zero == m / 2 - 1


def test_beta_thresholds_errors():
    with pytest.raises(ValueError):
        beta_thresholds([])
    with pytest.raises(DimensionError):
        beta_thresholds([Spectrum([1, 2]), Spectrum([1, 2, 3])])


@given(st.lists(st.lists(st.floats(0.05, 20), min_size=3, max_size=3), min_size=1, max_size=4))
def test_threshold_ordering(raw):
    th = beta_thresholds([Spectrum(r) for r in raw])
    assert th.beta_wedge <= th.beta_zero + 1e-12
    assert th.beta_zero <= th.beta_vee + 1e-12


def test_spectrum_validation():
    assert Spectrum([3, 1]).eigenvalues == (1.0, 3.0)
    with pytest.raises(DimensionError):
        Spectrum([1])
    with pytest.raises(ValueError):
        Spectrum([1, 0])
    with pytest.raises(ValueError):
        Spectrum([1, -2])


def test_z_isotropic_and_zero_exponent():
    for s in (-1.3, 0.5, 2.0):
        val, se = sphere_integral_z(Spectrum.isotropic(3.0, 2), s)
        assert val == pytest.approx(3.0 ** (-s), rel=1e-13)
        assert se == 0
    assert sphere_integral_z(Spectrum([1, 1, 4]), 0) == (1.0, 0.0)


def test_z_closed_forms():
    # m = 2: (1/2pi) int dt / (a cos^2 + b sin^2) = 1 / sqrt(ab)
    assert sphere_integral_z(Spectrum([1, 4]), 1)[0] == pytest.approx(0.5, abs=1e-12)
    # m = 3, A = diag(1, 1, 4), s = 1/2: (1/2) int_{-1}^{1} (1 + 3 z^2)^(-1/2) dz
    assert sphere_integral_z(Spectrum([1, 1, 4]), 0.5)[0] == pytest.approx(0.7603459963009463, rel=1e-10)


def test_z_errors():
    with pytest.raises(CapabilityError):
        sphere_integral_z(Spectrum([1, 2, 3, 4]), 1, QUADRATURE)
    with pytest.raises(ValueError):
        sphere_integral_z(Spectrum([1, 2]), 1, MONTE_CARLO, budget=0)
    with pytest.raises(CapabilityError):
        sphere_integral_z(Spectrum([1, 2]), 1, "simpson")


@pytest.mark.parametrize("beta", sorted(LAMBDA_14))
def test_lambda_quadrature_m2(beta):
    val, se = lambda_avg(Spectrum([1, 4]), beta, QUADRATURE)
    assert val == pytest.approx(LAMBDA_14[beta], abs=1e-10)
    assert se == 0


@pytest.mark.parametrize("beta", sorted(LAMBDA_124))
def test_lambda_quadrature_m3(beta):
    val, _ = lambda_avg(Spectrum([1, 2, 4]), beta, QUADRATURE)
    assert val == pytest.approx(LAMBDA_124[beta], rel=1e-9)


def test_lambda_isotropic_is_lambda():
    for m in (2, 3, 6):
        method = QUADRATURE if m <= 3 else MONTE_CARLO
        val, se = lambda_avg(Spectrum.isotropic(1.7, m), 0.8, method, budget=10_000)
        assert val == pytest.approx(1.7, rel=1e-12)


def test_lambda_strict_interior_at_large_beta():
    val, _ = lambda_avg(Spectrum([1, 4]), 5.0)
    assert 1 < val < 4


def test_quadrature_and_monte_carlo_agree():
    for lam in ([1, 4], [0.5, 1, 3]):
        spec = Spectrum(lam)
        for s in (-0.5, 1.0, 2.5):
            q, _ = sphere_integral_z(spec, s, QUADRATURE)
            v, se = sphere_integral_z(spec, s, MONTE_CARLO, budget=200_000, seed=3)
            assert abs(v - q) < 3 * se + 1e-12


@settings(max_examples=25, deadline=None)
@given(
    lam=st.lists(st.floats(0.1, 10), min_size=2, max_size=5),
    beta=st.floats(-2, 4),
)
def test_lambda_bounds_property(lam, beta):
    spec = Spectrum(lam)
    method = QUADRATURE if spec.m <= 3 else MONTE_CARLO
    val, se = lambda_avg(spec, beta, method, budget=None if method == QUADRATURE else 50_000, seed=1)
    assert spec.lambda_min - 3 * se - 1e-12 <= val <= spec.lambda_max + 3 * se + 1e-12


def test_monte_carlo_is_deterministic():
    spec = Spectrum([1, 2, 3, 5])
    assert lambda_avg(spec, 1.0, MONTE_CARLO, 50_000, seed=4) == lambda_avg(spec, 1.0, MONTE_CARLO, 50_000, seed=4)


def test_sphere_rules_are_normalized():
    for m in (2, 3):
        pts, w = sphere_rule(m)
        assert w.sum() == pytest.approx(1.0, abs=1e-13)
        assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-13)


def test_sample_mu_unit_norm_and_determinism():
    spec = Spectrum([1, 4])
    a = sample_mu(spec, 0.5, 2000, seed=9)
    b = sample_mu(spec, 0.5, 2000, seed=9)
    assert np.array_equal(a.points, b.points)
    assert np.allclose(np.linalg.norm(a.points, axis=1), 1.0, atol=1e-12)


def test_sample_mu_isotropic_is_uniform():
    from scipy import stats

    pts = sample_mu(Spectrum.isotropic(2.0, 3), 1.0, 40_000, seed=2).points
    quadrant = (pts[:, 0] > 0).astype(int) * 2 + (pts[:, 1] > 0)
    counts = np.bincount(quadrant, minlength=4)
    assert stats.chisquare(counts).pvalue > 0.01


def test_sample_mu_mean_matches_lambda():
    spec = Spectrum([1, 4])
    pts = sample_mu(spec, 0.0, 1_000_000, seed=5).points
    psi = spec.quadratic_form(pts)
    assert abs(psi.mean() - 2.0) < 3 * psi.std() / math.sqrt(psi.size)


@pytest.mark.parametrize("beta", [-3.0, -1.0, 0.0, 2.0])
def test_acceptance_rate_bound(beta):
    spec = Spectrum([1, 3])
    s = sample_mu(spec, beta, 5000, seed=1)
    assert s.acceptance_rate >= (spec.lambda_min / spec.lambda_max) ** abs(1 + beta)


def test_phi_isotropic_is_constant():
    spec = Spectrum.isotropic(3.0, 3)
    pts, _ = sphere_rule(3, 32)
    assert np.allclose(phi_a(spec, pts), 3.0)


def test_mu_expectation_of_constant_is_one():
    val, _ = mu_expectation(Spectrum([1, 4]), 2.0, lambda pts, psi: np.ones(len(psi)))
    assert val == pytest.approx(1.0, abs=1e-14)


def test_two_point_scan_values():
    rows = two_point_lambda_scan(1, 4, 0.0, [2])
    assert rows[0].value == pytest.approx(2.0, abs=1e-10)
    rows = two_point_lambda_scan(1, 2, 1.0, [2, 3, 5, 10], budget=400_000, seed=1)
    # Beta(1/2, (m-1)/2) quadrature of the quotient X_m^2 / |X|^2
    oracle = {2: 1.3333333333333333, 5: 1.14159265, 10: 1.07877599}
    for r in rows:
        if r.m in oracle:
            assert abs(r.value - oracle[r.m]) < 3 * r.stderr + 1e-8


def test_two_point_scan_rejects_bad_order():
    with pytest.raises(ValueError):
        two_point_lambda_scan(2, 2, 1.0, [2])
    with pytest.raises(ValueError):
        two_point_lambda_scan(3, 2, 1.0, [2])
