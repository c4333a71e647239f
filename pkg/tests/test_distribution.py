import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from kappafit.distribution import (
    DEFAULT_POLICY,
    BranchPolicy,
    K4Params,
    SpecialCase,
    Support,
    cdf,
    classify_special_case,
    log_pdf,
    pdf,
    quantile,
    sample,
    support,
)

UNIFORM = K4Params(0, 1, 1, 1)
GUMBEL = K4Params(0, 1, 0, 0)

# modest grid covering all sign combinations of the shapes
PARAM_GRID = [
    K4Params(0, 1, k, h)
    for k in (-0.4, -0.2, 0.0, 0.2, 0.4)
    for h in (-1.0, -0.5, 0.0, 0.5, 1.0)
]


class TestPdf:
    def test_uniform_interior(self):
        # x(F) = F for (0,1,1,1), so the density is 1 on (0,1)
        assert pdf(UNIFORM, 0.5) == pytest.approx(1.0, abs=1e-12)

    def test_outside_support_is_zero(self):
        p = K4Params(0, 1, -0.2, -0.2)
        lo = support(p).lower
        assert pdf(p, lo - 1.0) == 0.0
        assert log_pdf(p, lo - 1.0) == -np.inf

    def test_matches_finite_difference_of_cdf(self):
        # central difference of the cdf is the independent route to the density
        p = K4Params(0, 1, -0.2, -0.2)
        x, step = 1.0, 1e-6
        fd = (cdf(p, x + step) - cdf(p, x - step)) / (2 * step)
        assert pdf(p, x) == pytest.approx(fd, rel=1e-6)

    def test_nonfinite_x_rejected(self):
        with pytest.raises(ValueError):
            pdf(UNIFORM, np.nan)
        with pytest.raises(ValueError):
            pdf(UNIFORM, np.inf)


class TestCdf:
    def test_uniform(self):
        assert cdf(UNIFORM, 0.25) == pytest.approx(0.25, abs=1e-15)

    def test_gumbel_at_location(self):
        assert cdf(GUMBEL, 0.0) == pytest.approx(math.exp(-1), abs=1e-15)

    def test_oracle_value(self):
        # frozen from a 50-digit evaluation of the nested power form
        assert cdf(K4Params(0, 1, -0.2, 0.2), 2.0) == pytest.approx(
            0.82738945933113569, abs=1e-14
        )

    def test_clamping_off_support(self):
        p = K4Params(0, 1, 0.5, 0.5)
        sup = support(p)
        assert cdf(p, sup.upper + 1.0) == 1.0
        assert cdf(p, sup.lower - 1.0) == 0.0

    def test_monotone_on_grid(self):
        for p in PARAM_GRID:
            x = np.linspace(quantile(p, 0.001), quantile(p, 0.999), 200)
            F = cdf(p, x)
            assert np.all(np.diff(F) >= 0)


class TestQuantile:
    def test_gumbel(self):
        assert quantile(GUMBEL, math.exp(-1)) == pytest.approx(0.0, abs=1e-15)

    def test_uniform(self):
        assert quantile(UNIFORM, 0.75) == pytest.approx(0.75, abs=1e-15)

    def test_oracle_value(self):
        # frozen from bisection inversion of the high-precision cdf
        assert quantile(K4Params(0, 1, -0.2, -0.2), 0.999) == pytest.approx(
            14.902968992372628, rel=1e-13
        )

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.5, 1.5, np.nan])
    def test_rejects_out_of_range(self, bad):
        with pytest.raises(ValueError):
            quantile(UNIFORM, bad)

    def test_monotone_on_grid(self):
        F = np.linspace(0.001, 0.999, 300)
        for p in PARAM_GRID:
            assert np.all(np.diff(quantile(p, F)) >= 0)

    @given(
        k=st.floats(-0.45, 0.45),
        h=st.floats(-1.1, 1.1),
        F=st.floats(0.001, 0.999),
    )
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_property(self, k, h, F):
        p = K4Params(0.0, 1.0, k, h)
        assert cdf(p, quantile(p, F)) == pytest.approx(F, abs=1e-9)


class TestSupport:
    def test_uniform(self):
        s = support(UNIFORM)
        assert s.lower == pytest.approx(0.0) and s.upper == pytest.approx(1.0)

    def test_gumbel_unbounded(self):
        s = support(GUMBEL)
        assert s.lower == -np.inf and s.upper == np.inf

    def test_lower_bound_negative_shapes(self):
        p = K4Params(0, 1, -0.2, -0.2)
        s = support(p)
        assert s.lower == pytest.approx(-5.0) and s.upper == np.inf
        eps = 1e-6
        assert cdf(p, s.lower + eps) > 0.0
        assert cdf(p, s.lower - eps) == 0.0

    def test_exponential_lower(self):
        assert support(K4Params(0, 1, 0, 1)).lower == pytest.approx(0.0)

    def test_interior_cdf_strictly_inside_unit_interval(self):
        for p in PARAM_GRID:
            s = support(p)
            x = np.linspace(quantile(p, 0.01), quantile(p, 0.99), 50)
            F = cdf(p, x)
            assert np.all((F > 0) & (F < 1))

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            Support(1.0, 1.0)


class TestSample:
    def test_deterministic(self):
        a = sample(K4Params(1, 2, -0.1, 0.3), 5, seed=123)
        b = sample(K4Params(1, 2, -0.1, 0.3), 5, seed=123)
        np.testing.assert_array_equal(a, b)

    def test_uniform_mean(self):
        x = sample(UNIFORM, 100_000, seed=1)
        assert abs(x.mean() - 0.5) < 0.01

    def test_empirical_quantile_matches(self):
        p = K4Params(0, 1, -0.2, -0.2)
        x = sample(p, 100_000, seed=2)
        emp = np.quantile(x, 0.99)
        assert emp == pytest.approx(quantile(p, 0.99), rel=0.02)

    def test_inside_support(self):
        for p in (K4Params(0, 1, 0.3, 0.7), K4Params(0, 1, -0.3, -0.7)):
            x = sample(p, 10_000, seed=3)
            s = support(p)
            assert np.all((x >= s.lower) & (x <= s.upper))

    def test_zero_n_rejected(self):
        with pytest.raises(ValueError):
            sample(UNIFORM, 0, seed=0)


class TestSpecialCases:
    def test_gev_tag(self):
        assert classify_special_case(K4Params(0, 1, 0.1, 0))[0] is SpecialCase.GEV

    def test_gumbel_tag(self):
        tags = classify_special_case(K4Params(0, 1, 0, 0.5))
        assert tags[0] is SpecialCase.GENERALIZED_GUMBEL

    def test_glo_tag(self):
        assert classify_special_case(K4Params(0, 1, 0.3, -1))[0] is SpecialCase.GLO

    def test_all_matches_reported_h_first(self):
        tags = classify_special_case(K4Params(0, 1, 0, 0))
        assert tags == (SpecialCase.GEV, SpecialCase.GENERALIZED_GUMBEL)

    def test_general(self):
        assert classify_special_case(K4Params(0, 1, 0.2, 0.4)) == (SpecialCase.GENERAL,)


class TestSubfamilyAgreement:
    """With one shape pinned, the cdf must collapse to the named sub-family."""

    @pytest.mark.parametrize("k", [-0.3, -0.1, 0.2])
    def test_gev_when_h_zero(self, k):
        p = K4Params(0.5, 2.0, k, 0.0)
        x = np.linspace(quantile(p, 0.01), quantile(p, 0.99), 41)
        ref = stats.genextreme(c=k, loc=0.5, scale=2.0).cdf(x)
        np.testing.assert_allclose(cdf(p, x), ref, atol=1e-12)

    @pytest.mark.parametrize("k", [-0.3, 0.0, 0.25])
    def test_gpd_when_h_one(self, k):
        p = K4Params(0.0, 1.5, k, 1.0)
        x = np.linspace(quantile(p, 0.01), quantile(p, 0.99), 41)
        ref = stats.genpareto(c=-k, loc=0.0, scale=1.5).cdf(x)
        np.testing.assert_allclose(cdf(p, x), ref, atol=1e-12)

    @pytest.mark.parametrize("k", [-0.3, 0.25])
    def test_glo_when_h_minus_one(self, k):
        p = K4Params(0.0, 1.0, k, -1.0)
        x = np.linspace(quantile(p, 0.01), quantile(p, 0.99), 41)
        t = (1.0 - k * x) ** (1.0 / k)
        np.testing.assert_allclose(cdf(p, x), 1.0 / (1.0 + t), atol=1e-12)

    def test_gumbel_when_both_zero(self):
        x = np.linspace(-3, 6, 41)
        ref = stats.gumbel_r(loc=0.0, scale=1.0).cdf(x)
        np.testing.assert_allclose(cdf(GUMBEL, x), ref, atol=1e-12)


class TestBranchContinuity:
    def test_k_threshold(self):
        thr = DEFAULT_POLICY.shape_zero_threshold
        for h in (-0.5, 0.0, 0.5):
            base = K4Params(0, 1, 0.0, h)
            x = np.linspace(quantile(base, 0.01), quantile(base, 0.99), 50)
            for sk in (thr, -thr):
                np.testing.assert_allclose(
                    pdf(K4Params(0, 1, sk, h), x), pdf(base, x), atol=1e-6
                )

    def test_h_threshold(self):
        thr = DEFAULT_POLICY.shape_zero_threshold
        for k in (-0.2, 0.0, 0.2):
            base = K4Params(0, 1, k, 0.0)
            x = np.linspace(quantile(base, 0.01), quantile(base, 0.99), 50)
            for sh in (thr, -thr):
                np.testing.assert_allclose(
                    pdf(K4Params(0, 1, k, sh), x), pdf(base, x), atol=1e-6
                )


class TestValidation:
    def test_sigma_positive(self):
        with pytest.raises(ValueError):
            K4Params(0, 0, 0, 0)
        with pytest.raises(ValueError):
            K4Params(0, -1, 0, 0)

    def test_finite_fields(self):
        with pytest.raises(ValueError):
            K4Params(np.nan, 1, 0, 0)
        with pytest.raises(ValueError):
            K4Params(0, 1, np.inf, 0)

    @pytest.mark.parametrize("bad", [0.0, -1e-9, 1e-4, 1.0])
    def test_policy_threshold_range(self, bad):
        with pytest.raises(ValueError):
            BranchPolicy(shape_zero_threshold=bad)
