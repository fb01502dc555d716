import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from pcarisk.asymptotics import (
    LimitLawSpec,
    hs_limit_law_sample,
    ks_statistic,
    limit_law_sample,
    limit_law_samples,
    read_samples,
    write_samples,
)
from pcarisk.models import custom_model
from pcarisk.sampling import RngStream

LAM5 = [5.0, 4.0, 3.0, 2.0, 1.0]


class TestLawSpec:
    def test_pairs_and_weights(self):
        law = LimitLawSpec.build(LAM5, 2)
        assert law.pairs == ((1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5))
        oracle = sum(LAM5[j] * LAM5[k] / (LAM5[j] - LAM5[k]) for j in range(2) for k in range(2, 5))
        assert law.mean == pytest.approx(oracle, rel=1e-15)

    def test_tie_pair_dropped(self):
        law = LimitLawSpec.build([3.0, 2.0, 2.0, 1.0], 2)
        assert (2, 3) not in law.pairs and len(law.pairs) == 3

    def test_isotropic_empty(self):
        law = LimitLawSpec.build(custom_model([1.0, 1.0, 1.0]), 1)
        assert law.weights.size == 0
        assert limit_law_sample(law, RngStream(0)) == 0.0
        assert not limit_law_samples(law, 4, RngStream(0)).any()

    def test_hs_weights(self):
        law = LimitLawSpec.build([3.0, 1.0], 1, "hs_distance")
        assert law.weights[0] == pytest.approx(2 * 3 / 4)

    def test_hs_needs_gap(self):
        with pytest.raises(ValueError):
            LimitLawSpec.build([3.0, 2.0, 2.0, 1.0], 2, "hs_distance")

    @pytest.mark.parametrize("d,law", [(0, "excess_risk"), (5, "excess_risk"), (2, "other")])
    def test_bad_args(self, d, law):
        with pytest.raises(ValueError):
            LimitLawSpec.build(LAM5, d, law)


class TestSampling:
    def test_mean(self):
        law = LimitLawSpec.build(LAM5, 2)
        x = limit_law_samples(law, 100_000, RngStream(3, 1))
        assert abs(x.mean() / law.mean - 1) < 0.03

    def test_single_matches_block(self):
        law = LimitLawSpec.build(LAM5, 2)
        a = limit_law_samples(law, 1, RngStream(9))[0]
        b = limit_law_sample(law, RngStream(9))
        assert a == pytest.approx(b, rel=1e-14)

    def test_hs_sample_nonneg(self):
        assert hs_limit_law_sample(LAM5, 2, RngStream(1)) >= 0

    def test_chi2_single_pair(self):
        # one pair with weight w: samples / w follow chi-square(1)
        law = LimitLawSpec.build([2.0, 1.0], 1)
        x = limit_law_samples(law, 20_000, RngStream(5)) / law.weights[0]
        assert stats.kstest(x, "chi2", args=(1,)).pvalue > 1e-3

    def test_roundtrip(self, tmp_path):
        x = limit_law_samples(LimitLawSpec.build(LAM5, 2), 50, RngStream(0))
        write_samples(x, tmp_path / "s.txt")
        np.testing.assert_array_equal(read_samples(tmp_path / "s.txt"), x)


class TestKS:
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60),
           st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60))
    @settings(max_examples=200)
    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_against_scipy(self, a, b):
        assert ks_statistic(a, b) == pytest.approx(stats.ks_2samp(a, b, method="asymp").statistic, abs=1e-12)

    def test_identical(self):
        assert ks_statistic([1.0, 2.0, 3.0], [3.0, 1.0, 2.0]) == 0.0

    def test_disjoint(self):
        assert ks_statistic([0.0, 1.0], [5.0, 6.0, 7.0]) == 1.0

    def test_empty(self):
        with pytest.raises(ValueError):
            ks_statistic([], [1.0])
