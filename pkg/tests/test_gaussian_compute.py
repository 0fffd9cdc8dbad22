import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from structcodes.errors import DomainError, LatticeRequired, PowerConditionViolated, VarianceMismatch
from structcodes.gaussian_compute import (
    GaussianMacParams,
    common_randomness_vars,
    derive_constants,
    gamma0_squared,
    gaussian_requantize,
    linear_function_pipeline,
    linear_function_bound,
    mmse_alpha,
    power_condition_lhs,
    predicted_distortions,
    rate_from_distortion,
    stage_mse,
    sum_difference_relay_pipeline,
    sum_pipeline,
    uncoded_residual,
)
from structcodes.lattice import cubic, hexagonal
from structcodes.rates import sum_difference_rates


def test_params_validation():
    with pytest.raises(DomainError):
        GaussianMacParams(M=0, P=1, N=1, sigma_s2=1)
    with pytest.raises(DomainError):
        GaussianMacParams(M=2, P=-1, N=1, sigma_s2=1)
    assert GaussianMacParams(M=2, P=3, N=2, sigma_s2=1, k=5, ell=4).n == 20


def test_single_user_residual_is_mmse():
    for P, N, s in [(1, 1, 1), (10, 2, 3), (0.3, 1, 0.5)]:
        assert uncoded_residual(1, P, N, s) == pytest.approx(s * N / (N + P))


def test_constants_two_users_unit():
    c = derive_constants(GaussianMacParams(M=2, P=1, N=1, sigma_s2=1))
    assert c.sigma_q2 == pytest.approx(2 / 3)
    assert c.alpha == pytest.approx(2 * math.sqrt(2) / 3)
    # gamma0^2 = (MP / sigma_q^2)(1 - MN/(N+MP)) = 3 * 1/3
    assert c.gamma0 == pytest.approx(1.0)
    assert c.gamma == pytest.approx(1 - 1e-6)
    assert c.beta == pytest.approx(c.sigma_q2 * c.gamma / 2)
    assert 0 <= c.slack < 1e-5


@pytest.mark.parametrize("M", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("snr", [0.1, 1.0, 10.0, 100.0])
def test_power_condition_boundary_identity(M, snr):
    P, N = snr, 1.0
    sq = uncoded_residual(M, P, N, 1.0)
    alpha = mmse_alpha(M, P, N)
    lhs = power_condition_lhs(M, P, N, alpha, gamma0_squared(M, P, N, sq), sq)
    assert abs(lhs - M * P) <= 1e-9 * max(1.0, M * P)


def test_infeasible_refinement_raises():
    # M N / (N + M P) >= 1 leaves no room for gamma
    with pytest.raises(PowerConditionViolated):
        derive_constants(GaussianMacParams(M=3, P=0.1, N=1, sigma_s2=1))


def test_stage_mse_matches_recursion_at_boundary():
    for M, P in [(1, 1.0), (2, 1.0), (3, 5.0), (5, 100.0)]:
        p = GaussianMacParams(M=M, P=P, N=1, sigma_s2=1)
        c = derive_constants(p, eps_gamma=0.0)
        ratio = M / (1 + M * P)
        assert stage_mse(c, M, P, 1.0) == pytest.approx(c.sigma_q2 * ratio, rel=1e-9)


def test_predicted_distortions_examples():
    assert predicted_distortions(2, 1, 1, 1, 1) == pytest.approx([2 / 3])
    assert predicted_distortions(2, 1, 1, 1, 2) == pytest.approx([2 / 3, 4 / 9])


def test_pipeline_uncoded_only():
    r = sum_pipeline(GaussianMacParams(M=2, P=1, N=1, sigma_s2=1, k=50_000, ell=1), rng=np.random.default_rng(0))
    assert r.predicted_mse == pytest.approx(2 / 3, rel=1e-12)
    assert r.empirical_mse == pytest.approx(2 / 3, rel=0.02)


def test_pipeline_ideal_two_stages():
    r = sum_pipeline(GaussianMacParams(M=2, P=1, N=1, sigma_s2=1, k=100_000, ell=2), rng=np.random.default_rng(1))
    assert abs(r.predicted_mse - 4 / 9) / (4 / 9) < 1e-9
    assert r.empirical_mse == pytest.approx(4 / 9, rel=0.02)
    assert r.algebra_residual < 1e-9
    assert r.encoder_power == pytest.approx(1.0, rel=0.03)
    assert len(r.stage_empirical) == 2


@settings(max_examples=15, deadline=None)
@given(M=st.integers(1, 4), snr=st.sampled_from([2.0, 5.0, 20.0]), ell=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_pipeline_ideal_tracks_prediction(M, snr, ell, seed):
    p = GaussianMacParams(M=M, P=snr, N=1, sigma_s2=1, k=40_000, ell=ell)
    r = sum_pipeline(p, rng=np.random.default_rng(seed))
    assert r.empirical_mse == pytest.approx(r.predicted_mse, rel=0.05)
    assert r.stage_predicted == pytest.approx(predicted_distortions(M, snr, 1, 1, ell), rel=1e-5)


def test_pipeline_is_seeded():
    p = GaussianMacParams(M=2, P=3, N=1, sigma_s2=1, k=1000, ell=3)
    a = sum_pipeline(p, rng=np.random.default_rng(7))
    b = sum_pipeline(p, rng=np.random.default_rng(7))
    assert np.array_equal(a.u_hat, b.u_hat)


def test_concrete_mode_needs_lattice():
    with pytest.raises(LatticeRequired):
        sum_pipeline(GaussianMacParams(M=2, P=1, N=1, sigma_s2=1, ell=2), mode="concrete", rng=np.random.default_rng(0))


def test_concrete_mode_runs_and_reports_wraps():
    p = GaussianMacParams(M=2, P=10, N=1, sigma_s2=1, k=2000, ell=2)
    r = sum_pipeline(p, mode="concrete", rng=np.random.default_rng(2), lattice=hexagonal())
    assert np.isfinite(r.empirical_mse)
    assert len(r.wrap_fraction) == 1 and 0.0 <= r.wrap_fraction[0] <= 1.0


def test_linear_function_prediction_formula():
    # J=2, q=3, variances (1, 0.5): 2 * 4 * 1 * (2N/(N+P))^ell
    for P, N, ell in [(1, 1, 1), (5, 2, 3)]:
        expected = 2 * 4 * 1.0 * (2 * N / (N + P)) ** ell
        assert linear_function_bound(2, 3, 1.0, P, N, ell) == pytest.approx(expected)


def test_common_randomness_variances():
    assert common_randomness_vars([1, 1], [1.0, 1.0], 2).tolist() == [0.0, 0.0]
    assert common_randomness_vars([1, 2], [1.0, 0.5], 3).tolist() == pytest.approx([3.0, 2.0])
    with pytest.raises(VarianceMismatch):
        common_randomness_vars([3, 1], [1.0, 1.0], 3)


def test_linear_function_binary_reduces_to_sum():
    p = GaussianMacParams(M=2, P=4, N=1, sigma_s2=1, k=50_000, ell=2)
    lf = linear_function_pipeline(p, [1, 1], [1.0, 1.0], 2, np.random.default_rng(3))
    assert np.all(lf.w_values == 0)
    assert lf.design_mse == pytest.approx(predicted_distortions(2, 4, 1, 1, 2)[-1], rel=1e-5)
    assert lf.empirical_mse == pytest.approx(lf.design_mse, rel=0.05)


def test_linear_function_general_coefficients():
    p = GaussianMacParams(M=2, P=4, N=1, sigma_s2=1, k=50_000, ell=2)
    lf = linear_function_pipeline(p, [1, 2], [1.0, 0.5], 3, np.random.default_rng(4))
    assert lf.empirical_mse == pytest.approx(lf.design_mse, rel=0.05)
    assert lf.empirical_mse <= lf.predicted_bound


def test_linear_function_zero_coefficients():
    p = GaussianMacParams(M=2, P=4, N=1, sigma_s2=1, k=20_000, ell=2)
    lf = linear_function_pipeline(p, [0, 0], [1.0, 1.0], 3, np.random.default_rng(5))
    assert np.all(lf.u == 0)
    # what remains is exactly the error in estimating the sum of the common randomness
    assert lf.empirical_mse == pytest.approx(lf.sum_result.empirical_mse, rel=1e-12)
    with pytest.raises(DomainError):
        linear_function_pipeline(p, [3, 0], [1.0, 1.0], 3, np.random.default_rng(5))


def test_rate_from_distortion():
    assert rate_from_distortion(1.0, 1.0) == 0.0
    assert rate_from_distortion(1.0, 0.25) == pytest.approx(1.0)
    assert rate_from_distortion(1.0, 0.25, ell=2) == pytest.approx(0.5)
    for bad in (0.0, -1.0, 1.5):
        with pytest.raises(DomainError):
            rate_from_distortion(1.0, bad)


def test_requantize_distortion():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(200_000) * math.sqrt(2.0)
    y = gaussian_requantize(x, 2.0, 0.1, rng)
    assert np.mean((x - y) ** 2) == pytest.approx(0.1, rel=0.03)
    assert np.all(gaussian_requantize(x, 2.0, 3.0, rng) == 0)


def test_relay_rate_matches_closed_form():
    r = sum_difference_relay_pipeline(10.0, 1.0, 50.0, 1.0, 8, 2000, rng=np.random.default_rng(7))
    expected = 0.5 * math.log2(10.5) - math.log2(4) / 16
    assert r.achievable_rate == pytest.approx(expected, rel=1e-12)
    assert r.achievable_rate == pytest.approx(sum_difference_rates(10.0, 1.0, 50.0, ell=8).r_lat_finite_ell, rel=1e-12)


def test_relay_rate_approaches_limit():
    limit = 0.5 * math.log2(10.5)
    gaps = []
    for ell in (4, 16, 64):
        r = sum_difference_relay_pipeline(10.0, 1.0, 60.0, 1.0, ell, 10, rng=np.random.default_rng(8))
        gaps.append(limit - r.achievable_rate)
    assert gaps[0] > gaps[1] > gaps[2] > 0
    assert gaps[2] < 0.02


def test_relay_empirical_distortion_within_worst_case_bound():
    r = sum_difference_relay_pipeline(10.0, 1.0, 2.0, 1.0, 3, 50_000, rng=np.random.default_rng(9))
    assert max(r.D_s1, r.D_s2) <= r.worst_case_distortion
    assert r.empirical_rate >= r.achievable_rate
    assert r.D0 == pytest.approx(2 * 2 ** (-12))


def test_relay_sum_and_difference_symmetric():
    r = sum_difference_relay_pipeline(5.0, 1.0, 30.0, 1.0, 3, 100_000, rng=np.random.default_rng(10))
    assert r.D_u_relay == pytest.approx(r.D_v_relay, rel=0.03)


def test_relay_concrete_mode_reports_excess_rate():
    r = sum_difference_relay_pipeline(
        10.0, 1.0, 1.0, 1.0, 2, 2000, mode="concrete", rng=np.random.default_rng(11), lattice=cubic(1)
    )
    assert r.requant_excess_rate == pytest.approx(0.5 * math.log2(2 * math.pi * math.e / 12))
    with pytest.raises(LatticeRequired):
        sum_difference_relay_pipeline(10.0, 1.0, 1.0, 1.0, 2, 10, mode="concrete", rng=np.random.default_rng(0))
