"""Resolvent pair: Mittag-Leffler values, the defining equations, norms.

Frozen reference values were produced by a 40-digit arbitrary-precision
oracle (power series with per-term mpf gammas up to the cancellation wall,
envelope-truncated asymptotics beyond; integrals via tanh-sinh in the
variable y = t**alpha, where the integrands are analytic).
"""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from volterra.core import GammaKernel, Grid
from volterra.resolvent import (
    ResolventPair,
    f_equation_residual,
    f_lambda_eval,
    f_lambda_norms,
    f_step_moments,
    laplace_identity_residual,
    mittag_leffler,
    resolvent_eval,
    resolvent_equation_residual,
    tail_limit_a,
)

# (alpha, x, E_alpha(-x))
ML_TABLE = [
    (0.3, 0.8, 5.1438195868824421e-01),
    (0.6, 0.5, 6.0947582195619998e-01),
    (0.6, 12.0, 3.8643078839373575e-02),
    (0.75, 3.0, 1.2585513691184153e-01),
    (0.9, 3.0, 8.3888354033773260e-02),
    (0.9, 45.0, 2.4265758049482164e-03),
    (1.1, 2.0, 1.0629782909556106e-01),
    (1.3, 7.0, -9.3064910851954272e-02),
    (1.3, 60.0, -3.9739900718721057e-03),
    (1.45, 20.0, 1.9033025468111133e-03),
    (1.8, 5.0, -5.5853121273430462e-01),
    (2.0, 9.0, -9.8999249660044542e-01),
]

# (alpha, rho, lam, t, f(t))
F_TABLE = [
    (0.6, 0.0, 1.0, 0.25, 6.0755352319576850e-01),
    (0.6, 1.0, 5.0, 2.0, 2.5923727787609731e-03),
    (0.9, 1.0, 1.0, 0.5, 3.3226499898554696e-01),
    (1.3, 0.0, 0.2, 4.0, 1.5023458464162415e-01),
    (1.3, 1.0, 5.0, 1.5, -2.9110323029687787e-02),
    (0.7, 2.0, 5.0, 0.1, 1.7231217274680599e+00),
]

# (alpha, rho, lam, t, R(t)) -- the damping-rate > 0 path has no closed form
R_TABLE = [
    (0.6, 1.0, 5.0, 0.3, 2.3644478494220869e-01),
    (0.6, 1.0, 5.0, 8.0, 1.6666723836193376e-01),
    (0.9, 1.0, 1.0, 2.0, 5.0880258770302456e-01),
    (1.3, 1.0, 0.2, 6.0, 8.3349399254967060e-01),
    (0.7, 2.0, 5.0, 2.0, 2.4534072947416946e-01),
    (1.45, 0.5, 1.0, 3.0, 2.3955002967770531e-01),
]

# (alpha, rho, lam, p, horizon, norm)
NORM_TABLE = [
    (0.7, 0.0, 1.0, 2, math.inf, 8.6406749549537676e-01),
    (0.7, 1.0, 1.0, 2, math.inf, 7.7325633948069472e-01),
    (0.9, 1.0, 1.0, 1, math.inf, 5.0000000000000000e-01),
    (0.6, 0.0, 5.0, 2, math.inf, 4.5213131005079576e+00),
    (1.2, 0.0, 0.5, 2, math.inf, 5.5129395347790400e-01),
    (0.9, 1.0, 1.0, 1, 2.0, 4.9119741229697550e-01),
]


def make_pair(alpha, rho, lam, b=1.0):
    return ResolventPair(GammaKernel(b=b, alpha=alpha, rho=rho), lam=lam)


class TestMittagLeffler:
    @pytest.mark.parametrize("alpha,x,expected", ML_TABLE)
    def test_negative_axis_frozen_values(self, alpha, x, expected):
        assert_allclose(mittag_leffler(alpha, -x), expected, rtol=5e-10)

    def test_alpha_one_is_exp(self):
        assert_allclose(mittag_leffler(1.0, -0.5), math.exp(-0.5), rtol=1e-13)
        assert_allclose(mittag_leffler(1.0, 2.0), math.exp(2.0), rtol=1e-12)

    def test_alpha_two_negative_axis_is_cos(self):
        x = np.array([0.04, 1.0, 9.0, 400.0])
        assert_allclose(mittag_leffler(2.0, -x), np.cos(np.sqrt(x)), rtol=1e-11, atol=1e-13)

    def test_value_at_zero(self):
        for alpha in (0.2, 0.7, 1.0, 1.5, 2.0):
            assert mittag_leffler(alpha, 0.0) == 1.0

    def test_deep_negative_axis_is_finite_and_tiny(self):
        # algebraic decay ~ 1/(Gamma(1-alpha) x) on the far axis
        v = mittag_leffler(0.8, -1e6)
        assert 0.0 < v < 1e-4

    def test_array_shape_and_scalar_passthrough(self):
        z = np.array([[-1.0, -2.0], [0.0, -3.0]])
        out = mittag_leffler(0.9, z)
        assert out.shape == z.shape
        assert isinstance(mittag_leffler(0.9, -1.0), float)
        assert_allclose(out[0, 0], mittag_leffler(0.9, -1.0), rtol=1e-14)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            mittag_leffler(0.0, -1.0)
        with pytest.raises(ValueError):
            mittag_leffler(-0.3, -1.0)
        with pytest.raises(ValueError):
            mittag_leffler(2.3, -1.0)
        with pytest.raises(ValueError):
            mittag_leffler(0.9, np.nan)

    def test_positive_overflow(self):
        with pytest.raises(OverflowError):
            mittag_leffler(0.5, 1e6)

    @given(
        alpha=st.floats(0.3, 2.0),
        x=st.floats(1e-8, 1e5),
    )
    @settings(max_examples=60, deadline=None)
    def test_bounded_by_one_on_negative_axis(self, alpha, x):
        v = mittag_leffler(alpha, -x)
        assert -1.0 <= v <= 1.0
        if alpha <= 1.0:
            assert v >= 0.0  # completely monotone; == 0 only by underflow


class TestResolventEval:
    def test_value_at_zero_is_one(self):
        for pair in (make_pair(0.7, 0.0, 1.0), make_pair(1.2, 2.0, 5.0)):
            assert resolvent_eval(pair, 0.0) == 1.0

    def test_exponential_case(self):
        pair = make_pair(1.0, 0.0, 0.2)
        assert_allclose(resolvent_eval(pair, 5.0), math.exp(-1.0), rtol=1e-12)

    def test_undamped_matches_mittag_leffler(self):
        pair = make_pair(0.8, 0.0, 1.5)
        t = np.array([0.1, 1.0, 10.0])
        assert_allclose(resolvent_eval(pair, t), mittag_leffler(0.8, -1.5 * t**0.8), rtol=1e-13)

    @pytest.mark.parametrize("alpha,rho,lam,t,expected", R_TABLE)
    def test_damped_frozen_values(self, alpha, rho, lam, t, expected):
        pair = make_pair(alpha, rho, lam)
        assert_allclose(resolvent_eval(pair, t), expected, rtol=2e-9)

    def test_long_time_tail_limit(self):
        pair = make_pair(0.9, 1.0, 1.0)
        assert abs(resolvent_eval(pair, 50.0) - 0.5) < 1e-3

    def test_kernel_weight_folds_into_rate(self):
        # K with weight b and rate lam behaves as weight 1 at rate lam*b
        heavy = make_pair(0.8, 1.0, 0.4, b=5.0)
        plain = make_pair(0.8, 1.0, 2.0)
        t = np.array([0.05, 0.7, 3.0, 12.0])
        assert_allclose(resolvent_eval(heavy, t), resolvent_eval(plain, t), rtol=1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            resolvent_eval(make_pair(0.9, 0.0, 1.0), -0.1)


class TestFLambdaEval:
    def test_exponential_case(self):
        pair = make_pair(1.0, 0.0, 0.2)
        assert_allclose(f_lambda_eval(pair, 3.0), 0.2 * math.exp(-0.6), rtol=1e-12)

    @pytest.mark.parametrize("alpha,rho,lam,t,expected", F_TABLE)
    def test_frozen_values(self, alpha, rho, lam, t, expected):
        pair = make_pair(alpha, rho, lam)
        assert_allclose(f_lambda_eval(pair, t), expected, rtol=5e-10)

    def test_damping_is_exact_tilt(self):
        damped = make_pair(0.7, 1.3, 2.0)
        plain = make_pair(0.7, 0.0, 2.0)
        t = np.array([0.01, 0.4, 2.0, 9.0])
        assert_allclose(
            f_lambda_eval(damped, t),
            f_lambda_eval(plain, t) * np.exp(-1.3 * t),
            rtol=1e-13,
        )

    def test_origin_rejected(self):
        pair = make_pair(0.8, 0.0, 1.0)
        with pytest.raises(ValueError):
            f_lambda_eval(pair, 0.0)
        with pytest.raises(ValueError):
            f_lambda_eval(pair, np.array([1.0, -2.0]))

    def test_total_mass_is_one_minus_tail(self):
        # undamped: proper probability density
        assert_allclose(f_lambda_norms(make_pair(0.9, 0.0, 1.0), p=1), 1.0, atol=1e-10)
        # damped: defective density with mass 1 - a
        pair = make_pair(0.9, 1.0, 1.0)
        assert_allclose(f_lambda_norms(pair, p=1), 1.0 - tail_limit_a(pair), atol=1e-10)


class TestTailLimit:
    def test_undamped_is_zero(self):
        assert tail_limit_a(make_pair(0.7, 0.0, 3.0)) == 0.0

    def test_symmetric_point(self):
        assert_allclose(tail_limit_a(make_pair(1.0, 1.0, 1.0)), 0.5, rtol=1e-15)

    def test_closed_form(self):
        got = tail_limit_a(make_pair(0.7, 2.0, 5.0))
        assert_allclose(got, 1.0 / (1.0 + 5.0 * 2.0**-0.7), rtol=1e-15)
        # and the resolvent actually settles there
        assert abs(resolvent_eval(make_pair(0.7, 2.0, 5.0), 400.0) - got) < 1e-3

    @given(
        alpha=st.floats(0.55, 1.45),
        rho=st.floats(0.05, 4.0),
        lam=st.floats(0.05, 10.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_in_unit_interval(self, alpha, rho, lam):
        a = tail_limit_a(make_pair(alpha, rho, lam))
        assert 0.0 < a < 1.0


class TestNorms:
    @pytest.mark.parametrize("alpha,rho,lam,p,horizon,expected", NORM_TABLE)
    def test_frozen_values(self, alpha, rho, lam, p, horizon, expected):
        pair = make_pair(alpha, rho, lam)
        assert_allclose(f_lambda_norms(pair, p, horizon), expected, rtol=5e-9)

    def test_exponential_l2_closed_form(self):
        for lam in (0.2, 1.0, 7.0):
            pair = make_pair(1.0, 0.0, lam)
            assert_allclose(pair.l2_norm_sq, lam / 2.0, rtol=1e-10)

    def test_zero_horizon(self):
        assert f_lambda_norms(make_pair(0.8, 0.0, 1.0), p=2, horizon=0.0) == 0.0

    def test_horizon_monotone_to_full_mass(self):
        pair = make_pair(0.8, 0.5, 1.0)
        parts = [f_lambda_norms(pair, 1, h) for h in (0.5, 2.0, 8.0, 40.0)]
        assert all(x < y for x, y in zip(parts, parts[1:]))
        assert_allclose(parts[-1], f_lambda_norms(pair, 1), rtol=1e-6)

    def test_invalid_p(self):
        with pytest.raises(ValueError):
            f_lambda_norms(make_pair(0.8, 0.0, 1.0), p=3)

    @given(
        alpha=st.floats(0.55, 1.0),  # needs f >= 0: above 1 the density oscillates
        lam=st.floats(0.1, 5.0),
        rho=st.sampled_from([0.0, 0.7]),
    )
    @settings(max_examples=25, deadline=None)
    def test_mass_identity_property(self, alpha, lam, rho):
        pair = make_pair(alpha, rho, lam)
        assert_allclose(f_lambda_norms(pair, 1), 1.0 - tail_limit_a(pair), atol=2e-9)


BOX = [
    (alpha, rho, lam)
    for alpha in (0.6, 0.9, 1.0, 1.3)
    for rho in (0.0, 1.0)
    for lam in (0.2, 5.0)
]


class TestDefiningEquations:
    @pytest.mark.parametrize("alpha,rho,lam", BOX)
    def test_resolvent_equation(self, alpha, rho, lam):
        pair = make_pair(alpha, rho, lam)
        res = resolvent_equation_residual(pair, Grid(20.0, 250))
        assert np.max(np.abs(res)) <= 1e-6

    @pytest.mark.parametrize("alpha,rho,lam", BOX)
    def test_f_equation(self, alpha, rho, lam):
        pair = make_pair(alpha, rho, lam)
        t = np.geomspace(1e-3, 20.0, 40)
        res = f_equation_residual(pair, t)
        assert np.max(np.abs(res)) <= 1e-5

    @pytest.mark.parametrize("alpha,rho,lam", BOX)
    def test_laplace_identity(self, alpha, rho, lam):
        pair = make_pair(alpha, rho, lam)
        res = laplace_identity_residual(pair, [0.5, 1.0, 2.0])
        assert np.max(res) <= 1e-5

    def test_equations_with_general_weight(self):
        pair = make_pair(0.8, 1.0, 2.0, b=2.5)
        assert np.max(np.abs(resolvent_equation_residual(pair, Grid(10.0, 100)))) <= 1e-6
        assert np.max(np.abs(f_equation_residual(pair, np.geomspace(0.01, 10.0, 20)))) <= 1e-5

    def test_derivative_consistency_second_order(self):
        # central differences of R should converge to -f at rate h**2
        for alpha, rho in ((0.6, 0.0), (0.9, 1.0), (1.3, 1.0)):
            pair = make_pair(alpha, rho, 1.0)
            t = 1.5
            errs = []
            for h in (1e-2, 5e-3):
                fd = (resolvent_eval(pair, t - h) - resolvent_eval(pair, t + h)) / (2.0 * h)
                errs.append(abs(fd - f_lambda_eval(pair, t)))
            assert errs[0] < 1e-4
            assert errs[1] < errs[0] / 3.0  # order two means a factor ~4

    def test_monotone_decay_for_small_alpha(self):
        # f > 0 for alpha <= 1, so R never increases
        for alpha, rho in ((0.6, 0.0), (0.8, 1.0), (1.0, 0.5)):
            pair = make_pair(alpha, rho, 2.0)
            probes = np.geomspace(1e-6, 100.0, 60)
            assert np.all(f_lambda_eval(pair, probes) > 0.0)
            r = resolvent_eval(pair, probes)
            # ties at rounding level once R sits on its tail plateau
            assert np.all(np.diff(r) <= 1e-14)
            assert np.all(r > tail_limit_a(pair) - 1e-12)


class TestStepMoments:
    def test_m0_telescopes(self):
        pair = make_pair(0.8, 1.0, 2.0)
        grid = Grid(3.0, 30)
        m0, _ = f_step_moments(pair, grid)
        total = resolvent_eval(pair, 0.0) - resolvent_eval(pair, 3.0)
        assert_allclose(np.sum(m0), total, rtol=1e-11)

    @pytest.mark.parametrize("rho", [0.0, 1.0])
    def test_moments_match_direct_quadrature(self, rho):
        from scipy.integrate import quad

        pair = make_pair(0.75, rho, 1.5)
        grid = Grid(2.0, 8)
        m0, m1 = f_step_moments(pair, grid)
        t = grid.nodes
        for j in (0, 4):
            r0, _ = quad(
                lambda s: f_lambda_eval(pair, s),
                t[j],
                t[j + 1],
                points=[0.0] if j == 0 else None,
            )
            r1, _ = quad(
                lambda s: f_lambda_eval(pair, s) * (s - t[j]) / grid.dt,
                t[j],
                t[j + 1],
                points=[0.0] if j == 0 else None,
            )
            assert_allclose(m0[j], r0, rtol=1e-9)
            assert_allclose(m1[j], r1, rtol=1e-8, atol=1e-12)


class TestPairValidation:
    def test_rejects_bad_rate(self):
        k = GammaKernel(1.0, 0.8)
        for lam in (0.0, -1.0, math.inf, math.nan):
            with pytest.raises(ValueError):
                ResolventPair(k, lam)

    def test_rejects_non_kernel(self):
        with pytest.raises(TypeError):
            ResolventPair("kernel", 1.0)

    def test_rejects_extreme_series_order(self):
        k = GammaKernel(1.0, 0.8)
        with pytest.raises(ValueError):
            ResolventPair(k, 1.0, series_order=4)


@given(
    alpha=st.floats(0.55, 1.45),
    rho=st.sampled_from([0.0, 0.3, 1.5]),
    lam=st.floats(0.05, 8.0),
    t=st.floats(1e-4, 30.0),
)
@settings(max_examples=40, deadline=None)
def test_resolvent_stays_in_band(alpha, rho, lam, t):
    pair = make_pair(alpha, rho, lam)
    r = resolvent_eval(pair, t)
    assert r <= 1.0 + 1e-12
    if alpha <= 1.0:
        assert r >= tail_limit_a(pair) - 1e-12
    else:
        assert r >= -1.0  # oscillatory undershoot stays well inside [-1, 1]


@given(
    alpha=st.floats(0.55, 1.45),
    rho=st.sampled_from([0.0, 0.8]),
    lam=st.floats(0.1, 5.0),
    t=st.floats(0.05, 10.0),
)
@settings(max_examples=30, deadline=None)
def test_derivative_matches_density_property(alpha, rho, lam, t):
    pair = make_pair(alpha, rho, lam)
    h = 1e-4 * max(t, 1.0)
    assume(t - h > 0.0)
    fd = (resolvent_eval(pair, t - h) - resolvent_eval(pair, t + h)) / (2.0 * h)
    fv = f_lambda_eval(pair, t)
    assert abs(fd - fv) <= 1e-5 * max(1.0, abs(fv)) + 1e-7
