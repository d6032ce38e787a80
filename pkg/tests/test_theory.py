import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfrde.theory import RecommendedParams, TheoryInputs, gammas, recommend


class TestGammas:
    def test_alpha_one_d_two(self):
        alpha_prime, gamma1, _ = gammas(1.0, 0.0, 2)
        assert alpha_prime == pytest.approx(0.7213475, abs=1e-6)
        assert gamma1 == pytest.approx(0.209529, abs=1e-6)

    def test_beta_zero_gives_unit_gamma2(self):
        for alpha in (0.2, 0.5, 1.0):
            for d in (1, 2, 5):
                assert gammas(alpha, 0.0, d)[2] == pytest.approx(1.0, abs=1e-12)

    def test_beta_one_value(self):
        _, _, gamma2 = gammas(1.0, 1.0, 2)
        assert gamma2 == pytest.approx(1.193147, abs=1e-6)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            gammas(0.0, 0.5, 2)
        with pytest.raises(ValueError):
            gammas(0.5, 1.5, 2)
        with pytest.raises(ValueError):
            gammas(0.5, 0.5, 0)

    @given(
        alpha=st.floats(min_value=0.01, max_value=1.0),
        beta=st.floats(min_value=0.0, max_value=1.0),
        d=st.integers(min_value=1, max_value=12),
    )
    def test_gamma1_range(self, alpha, beta, d):
        _, gamma1, _ = gammas(alpha, beta, d)
        assert 0.0 < gamma1 < 0.5

    @given(
        alpha=st.floats(min_value=0.01, max_value=1.0),
        beta=st.floats(min_value=0.0, max_value=1.0),
        d=st.integers(min_value=2, max_value=12),
    )
    def test_gamma2_at_least_one_for_d_ge_2(self, alpha, beta, d):
        assert gammas(alpha, beta, d)[2] >= 1.0 - 1e-12

    def test_gamma2_nondecreasing_in_beta(self):
        # monotone in the concentration exponent for d > 1
        for d in (2, 3, 6):
            for alpha in (0.3, 1.0):
                values = [gammas(alpha, b, d)[2] for b in np.linspace(0, 1, 21)]
                assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))

    def test_pure_function(self):
        assert gammas(0.7, 0.3, 3) == gammas(0.7, 0.3, 3)


class TestRecommend:
    def test_clean_data_uses_full_sample(self):
        rec = recommend(TheoryInputs(alpha=1.0, beta=0.5, d=2, n=777, n_outliers=0))
        assert rec.m == 777

    def test_derived_example(self):
        rec = recommend(TheoryInputs(alpha=1.0, beta=1.0, d=2, n=500, n_outliers=50))
        assert rec.gamma2 == pytest.approx(1.193147, abs=1e-6)
        assert (rec.m, rec.p, rec.trees) == (16, 2, 3)

    def test_beta_zero_threshold(self):
        rec = recommend(TheoryInputs(alpha=1.0, beta=0.0, d=2, n=500, n_outliers=50))
        assert rec.m == 10

    def test_monotone_in_outliers(self):
        last = None
        for n_out in (0, 1, 5, 20, 100, 250):
            rec = recommend(TheoryInputs(alpha=0.8, beta=0.7, d=2, n=500, n_outliers=n_out))
            if last is not None:
                assert rec.m <= last
            last = rec.m

    def test_floors(self):
        rec = recommend(TheoryInputs(alpha=1.0, beta=0.0, d=2, n=4, n_outliers=2))
        assert rec.m >= 1 and rec.p >= 0 and rec.trees >= 1
        assert isinstance(rec, RecommendedParams)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            TheoryInputs(alpha=1.0, beta=0.0, d=2, n=1, n_outliers=0)
        with pytest.raises(ValueError):
            TheoryInputs(alpha=1.0, beta=0.0, d=2, n=10, n_outliers=11)
