import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcarisk.models import (
    CovModel,
    Spectrum,
    custom_model,
    effective_rank,
    head_trace,
    make_model,
    partial_trace,
    random_orthonormal_frame,
    read_spectrum,
    write_spectrum,
)


class TestSpectrum:
    def test_basic(self):
        s = Spectrum([3.0, 2.0, 2.0, 1.0])
        assert s.p == 4
        assert s.lam(1) == 3.0
        assert s.trace == 8.0

    @pytest.mark.parametrize("vals", [[], [1.0, 2.0], [1.0, 0.0], [1.0, -1.0], [np.inf, 1.0]])
    def test_invalid(self, vals):
        with pytest.raises(ValueError):
            Spectrum(vals)

    def test_read_only(self):
        s = Spectrum([2.0, 1.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0


class TestFamilies:
    def test_exponential(self):
        m = make_model("exponential", 5, alpha=1.0)
        np.testing.assert_allclose(m.values, np.exp(-np.arange(1, 6)))

    def test_polynomial(self):
        m = make_model("polynomial", 4, alpha=2.0)
        np.testing.assert_allclose(m.values, [1, 1 / 4, 1 / 9, 1 / 16])

    def test_spiked_default_profile(self):
        m = make_model("spiked", 6, x=0.5, d=2)
        np.testing.assert_array_equal(m.values, [1.5, 1.5, 1, 1, 1, 1])

    def test_spiked_top_profile(self):
        m = make_model("spiked", 5, x=1.0, kappa=2.0, d=2, top=[2.5, 3.0])
        np.testing.assert_array_equal(m.values[:2], [3.0, 2.5])

    def test_spiked_zero_gap(self):
        m = make_model("spiked", 4, x=0.0, d=1)
        np.testing.assert_array_equal(m.values, np.ones(4))

    def test_isotropic(self):
        m = make_model("isotropic", 3, sigma2=2.0)
        np.testing.assert_array_equal(m.sigma(), 2 * np.eye(3))

    @pytest.mark.parametrize("kind,params", [
        ("exponential", {"alpha": 0.0}),
        ("polynomial", {"alpha": 1.0}),
        ("spiked", {"x": -1.0, "d": 1}),
        ("spiked", {"x": 1.0, "kappa": 0.5, "d": 1}),
        ("spiked", {"x": 1.0, "d": 4}),
        ("spiked", {"x": 1.0, "kappa": 1.0, "d": 1, "top": [3.0]}),
        ("isotropic", {"sigma2": 0.0}),
        ("nope", {}),
    ])
    def test_invalid_params(self, kind, params):
        with pytest.raises(ValueError):
            make_model(kind, 4, **params)

    def test_sigma_from_basis(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        m = custom_model([4.0, 3.0, 2.0, 1.0], q)
        np.testing.assert_allclose(m.sigma(), q @ np.diag([4.0, 3, 2, 1]) @ q.T, atol=1e-14)
        l = m.sqrt_factor()
        np.testing.assert_allclose(l @ l.T, m.sigma(), atol=1e-14)

    def test_non_orthonormal_basis(self):
        with pytest.raises(ValueError):
            CovModel(Spectrum([2.0, 1.0]), np.array([[1.0, 0.1], [0.0, 1.0]]))


class TestFunctionals:
    def test_partial_trace(self):
        s = [4.0, 3.0, 2.0, 1.0]
        assert partial_trace(s, 0) == 10.0
        assert partial_trace(s, 2) == 3.0
        assert partial_trace(s, 2, strict=False) == 6.0
        assert partial_trace(s, 4) == 0.0
        assert head_trace(s, 2) == 7.0

    def test_partial_trace_range(self):
        with pytest.raises(ValueError):
            partial_trace([1.0], 2)

    def test_effective_rank(self):
        assert effective_rank([2.0, 1.0, 1.0]) == 2.0

    @given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=12), st.data())
    def test_partial_trace_split(self, vals, data):
        vals = sorted(vals, reverse=True)
        r = data.draw(st.integers(0, len(vals)))
        assert head_trace(vals, r) + partial_trace(vals, r) == pytest.approx(math.fsum(vals), rel=1e-12)

    def test_spectrum_roundtrip(self, tmp_path):
        vals = [math.pi, 1 / 3, 1e-7]
        write_spectrum(vals, tmp_path / "s.txt")
        assert read_spectrum(tmp_path / "s.txt").values.tolist() == vals

    def test_random_frame(self, rng):
        q = random_orthonormal_frame(7, rng)
        np.testing.assert_allclose(q.T @ q, np.eye(7), atol=1e-13)
