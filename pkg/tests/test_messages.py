"""Message algebra: products, the incomplete gamma function, sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from hlcbayes.messages import (
    DeltaMessage,
    GammaMessage,
    GaussianMessage,
    InvalidMessageError,
    InverseGammaMessage,
    gamma_product,
    gaussian_product,
    inverse_gamma_product,
    log_regularized_lower_gamma,
    product,
    regularized_lower_gamma,
    sample,
)


class TestGaussianProduct:
    def test_equal_precision_symmetric(self):
        out = gaussian_product(GaussianMessage(0.0, 1.0), GaussianMessage(0.0, 1.0))
        assert out.mean == pytest.approx(0.0, abs=1e-15)
        assert out.variance == pytest.approx(0.5, rel=1e-15)

    def test_midpoint_by_symmetry(self):
        out = gaussian_product(GaussianMessage(1.0, 2.0), GaussianMessage(3.0, 2.0))
        assert out.mean == pytest.approx(2.0, rel=1e-15)
        assert out.variance == pytest.approx(1.0, rel=1e-15)

    def test_vague_factor_is_neutral(self):
        out = gaussian_product(GaussianMessage(0.0, 1.0), GaussianMessage(5.0, 1e12))
        assert abs(out.mean - 0.0) < 1e-6
        assert abs(out.variance - 1.0) < 1e-6

    def test_flagged_vague_is_identity(self):
        a = GaussianMessage(1.25, 0.75)
        assert gaussian_product(a, GaussianMessage.vague()) == a
        assert gaussian_product(GaussianMessage.vague(), a) == a

    @given(
        st.floats(-1e6, 1e6),
        st.floats(1e-6, 1e6),
        st.floats(-1e6, 1e6),
        st.floats(1e-6, 1e6),
    )
    @settings(max_examples=200, deadline=None)
    def test_precision_adds_exactly(self, m1, v1, m2, v2):
        a, b = GaussianMessage(m1, v1), GaussianMessage(m2, v2)
        out = gaussian_product(a, b)
        assert 1.0 / out.variance == pytest.approx(1.0 / v1 + 1.0 / v2, rel=1e-12)

    @given(
        st.floats(-1e3, 1e3),
        st.floats(1e-3, 1e3),
        st.floats(-1e3, 1e3),
        st.floats(1e-3, 1e3),
        st.floats(-1e3, 1e3),
        st.floats(1e-3, 1e3),
    )
    @settings(max_examples=200, deadline=None)
    def test_commutative_associative(self, m1, v1, m2, v2, m3, v3):
        a, b, c = GaussianMessage(m1, v1), GaussianMessage(m2, v2), GaussianMessage(m3, v3)
        ab = gaussian_product(a, b)
        ba = gaussian_product(b, a)
        assert ab.mean == pytest.approx(ba.mean, rel=1e-12, abs=1e-12)
        assert ab.variance == pytest.approx(ba.variance, rel=1e-12)
        left = gaussian_product(ab, c)
        right = gaussian_product(a, gaussian_product(b, c))
        assert left.mean == pytest.approx(right.mean, rel=1e-12, abs=1e-9)
        assert left.variance == pytest.approx(right.variance, rel=1e-12)


class TestGammaProducts:
    def test_exponential_times_exponential(self):
        out = gamma_product(GammaMessage(1.0, 1.0), GammaMessage(1.0, 1.0))
        assert (out.shape, out.rate) == (1.0, 2.0)

    def test_flat_factor_is_neutral(self):
        out = gamma_product(GammaMessage(10.0, 1.0), GammaMessage.vague())
        assert (out.shape, out.rate) == (10.0, 1.0)

    def test_rule_arithmetic(self):
        out = gamma_product(GammaMessage(2.0, 3.0), GammaMessage(4.0, 5.0))
        assert (out.shape, out.rate) == (5.0, 8.0)

    def test_invalid_product_rejected(self):
        with pytest.raises(InvalidMessageError):
            gamma_product(
                GammaMessage.likelihood_fragment(0.2, 1.0),
                GammaMessage.likelihood_fragment(0.2, 1.0),
            )

    def test_inverse_gamma_rule(self):
        out = inverse_gamma_product(
            InverseGammaMessage(12.0, 110.0),
            InverseGammaMessage.likelihood_fragment(-0.5, 4.5),
        )
        assert (out.shape, out.scale) == (12.5, 114.5)


class TestConstructors:
    @pytest.mark.parametrize("variance", [0.0, -1.0, math.nan, math.inf])
    def test_gaussian_rejects_bad_variance(self, variance):
        with pytest.raises(InvalidMessageError):
            GaussianMessage(0.0, variance)

    @pytest.mark.parametrize("mean", [math.nan, math.inf, -math.inf])
    def test_gaussian_rejects_bad_mean(self, mean):
        with pytest.raises(InvalidMessageError):
            GaussianMessage(mean, 1.0)

    @pytest.mark.parametrize("shape,rate", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (math.nan, 1.0)])
    def test_gamma_rejects(self, shape, rate):
        with pytest.raises(InvalidMessageError):
            GammaMessage(shape, rate)

    @pytest.mark.parametrize("shape,scale", [(0.0, 1.0), (1.0, -2.0), (1.0, math.inf)])
    def test_inverse_gamma_rejects(self, shape, scale):
        with pytest.raises(InvalidMessageError):
            InverseGammaMessage(shape, scale)

    def test_delta_rejects_nonfinite(self):
        with pytest.raises(InvalidMessageError):
            DeltaMessage(math.inf)


class TestDispatchProduct:
    def test_delta_absorbs(self):
        d = DeltaMessage(3.0)
        assert product(d, GaussianMessage(0.0, 1.0)) == d
        assert product(GaussianMessage(0.0, 1.0), d) == d

    def test_colliding_deltas_must_agree(self):
        assert product(DeltaMessage(2.0), DeltaMessage(2.0)) == DeltaMessage(2.0)
        with pytest.raises(InvalidMessageError):
            product(DeltaMessage(2.0), DeltaMessage(3.0))

    def test_cross_family_rejected(self):
        with pytest.raises(InvalidMessageError):
            product(GaussianMessage(0.0, 1.0), GammaMessage(1.0, 1.0))


class TestRegularizedLowerGamma:
    def test_shape_one_is_exponential_cdf(self):
        for x in (0.1, 0.5, 1.0, 3.0, 20.0):
            assert regularized_lower_gamma(1.0, x) == pytest.approx(
                1.0 - math.exp(-x), rel=1e-13
            )

    def test_zero_is_empty_interval(self):
        for a in (0.5, 1.0, 2.0, 10.0, 110.0):
            assert regularized_lower_gamma(a, 0.0) == 0.0

    def test_reference_point(self):
        # Frozen from adaptive quadrature of the Gamma(10, 1) density over
        # [0, 10]: 0.5420702855281477.
        assert regularized_lower_gamma(10.0, 10.0) == pytest.approx(
            0.5420702855, abs=1e-8
        )

    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 10.0, 110.0])
    def test_matches_quadrature(self, a):
        xs = np.linspace(0.25, 50.0, 25)
        for x in xs:
            oracle, err = integrate.quad(
                lambda t: math.exp((a - 1.0) * math.log(t) - t - math.lgamma(a)),
                0.0,
                float(x),
                epsabs=1e-12,
                epsrel=1e-12,
                limit=200,
            )
            assert err < 1e-10
            assert regularized_lower_gamma(a, float(x)) == pytest.approx(oracle, abs=1e-8)

    def test_monotone_and_saturating(self):
        xs = np.linspace(0.0, 80.0, 400)
        vals = [regularized_lower_gamma(7.5, float(x)) for x in xs]
        assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
        assert vals[-1] > 1.0 - 1e-12

    def test_log_agrees_with_linear(self):
        for a in (0.5, 2.0, 10.0, 110.0):
            for x in (0.5, 3.0, 12.0, 45.0):
                lin = regularized_lower_gamma(a, x)
                assert math.exp(log_regularized_lower_gamma(a, x)) == pytest.approx(
                    lin, rel=1e-10
                )

    def test_log_reaches_deep_underflow(self):
        # Mass this small has no linear representation at all.
        logp = log_regularized_lower_gamma(1010.0, 0.25)
        assert logp < -700
        assert math.isfinite(logp)

    def test_matches_scipy_across_grid(self):
        for a in (0.5, 1.0, 2.0, 10.0, 110.0):
            for x in np.linspace(0.01, 50.0, 60):
                assert regularized_lower_gamma(a, float(x)) == pytest.approx(
                    float(special.gammainc(a, x)), abs=1e-12
                )

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            regularized_lower_gamma(0.0, 1.0)
        with pytest.raises(ValueError):
            regularized_lower_gamma(-2.0, 1.0)
        with pytest.raises(ValueError):
            regularized_lower_gamma(1.0, -0.5)


class TestSampling:
    def test_point_mass_gaussian(self):
        assert sample(GaussianMessage(5.0, 1e-13), 0) == 5.0

    def test_deterministic_under_seed(self):
        d = GammaMessage(3.0, 2.0)
        assert sample(d, 1234) == sample(d, 1234)
        assert sample(d, 1234) != sample(d, 1235)

    def test_standard_normal_moments(self):
        # Law of large numbers at n = 1e5: the mean estimator's sd is
        # 1/sqrt(n) ~ 0.0032, so 0.02 is a generous six-sigma band.
        rng = np.random.default_rng(42)
        draws = np.array([sample(GaussianMessage(0.0, 1.0), rng) for _ in range(100_000)])
        assert abs(draws.mean()) < 0.02
        assert abs(draws.var() - 1.0) < 0.05

    def test_gamma_moments(self):
        rng = np.random.default_rng(7)
        draws = np.array([sample(GammaMessage(10.0, 1.0), rng) for _ in range(100_000)])
        assert abs(draws.mean() - 10.0) < 0.1

    def test_inverse_gamma_positive_support(self):
        rng = np.random.default_rng(3)
        draws = [sample(InverseGammaMessage(12.0, 110.0), rng) for _ in range(1000)]
        assert all(v > 0.0 for v in draws)
        # mean of Ig(12, 110) is 10
        assert abs(np.mean(draws) - 10.0) < 0.5

    def test_delta_sampling(self):
        assert sample(DeltaMessage(-3.25), 0) == -3.25

    def test_improper_rejected(self):
        with pytest.raises(InvalidMessageError):
            sample(GaussianMessage.vague(), 0)


class TestMoments:
    def test_gamma_moments(self):
        g = GammaMessage(10.0, 1.0)
        assert g.mean() == 10.0
        assert g.variance() == 10.0

    def test_inverse_gamma_moments(self):
        ig = InverseGammaMessage(12.0, 110.0)
        assert ig.mean() == pytest.approx(10.0)
        assert ig.mean_inverse() == pytest.approx(12.0 / 110.0)
        assert ig.variance() == pytest.approx(110.0**2 / (11.0**2 * 10.0))

    def test_undefined_moments_raise(self):
        with pytest.raises(InvalidMessageError):
            InverseGammaMessage(0.5, 1.0).mean()
