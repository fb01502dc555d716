import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcarisk.models import custom_model, make_model
from pcarisk.risk import (
    Realization,
    cross_overlap,
    erm_gap,
    excess_risk,
    hs_distance_sq,
    reconstruction_error,
    risk_parts,
    risk_report,
)
from pcarisk.spectral import build_projector

from conftest import random_frame


def _draw(vals, n=60, d=2, seed=0, stream=0, basis=None):
    return Realization.draw(custom_model(vals, basis), n, d, seed, stream)


class TestReconstructionError:
    def test_identity(self):
        assert reconstruction_error(np.eye(4), build_projector(np.eye(4), [1, 2])) == 2.0

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            reconstruction_error(np.eye(3), np.eye(2))

    def test_matches_sample_average(self):
        # mean squared residual over many draws approaches <Sigma, I - P>
        m = custom_model([3.0, 2.0, 1.0])
        r = Realization.draw(m, 20_000, 1, seed=4)
        x = r.model.sqrt_factor() @ np.random.default_rng(0).standard_normal((3, 20_000))
        p = r.P_leq.matrix
        resid = np.mean(np.sum(((np.eye(3) - p) @ x) ** 2, axis=0))
        assert resid == pytest.approx(reconstruction_error(r.sigma, r.P_leq), rel=0.03)


class TestExcessRisk:
    def test_population_covariance_gives_zero(self):
        m = custom_model([3.0, 2.0, 1.0])
        r = Realization(m, m.sigma(), 1)
        assert excess_risk(r) == pytest.approx(0.0, abs=1e-15)
        rep = risk_report(r)
        assert rep.hs_sq == pytest.approx(0.0, abs=1e-15)

    def test_forced_swap(self):
        # estimated top direction is e2: excess = lambda_1 - lambda_2
        m = custom_model([3.0, 1.0])
        r = Realization.forced(m, [2.0, 1.0], np.array([[0.0, 1.0], [1.0, 0.0]]), 1)
        assert excess_risk(r) == pytest.approx(2.0)
        assert hs_distance_sq(r.P_leq, r.Phat_leq) == pytest.approx(2.0)
        assert cross_overlap(r) == pytest.approx(1.0)

    def test_isotropic_is_zero(self):
        r = Realization.draw(make_model("isotropic", 6, sigma2=2.0), 30, 3, 1)
        assert abs(excess_risk(r)) <= 1e-12

    @pytest.mark.parametrize("mu_kind", ["lower", "upper", "mid", "outside"])
    def test_parts_sum_to_excess(self, rng, mu_kind):
        r = _draw([5.0, 4.0, 3.0, 2.0, 1.0], basis=random_frame(rng, 5))
        mu = {"lower": 3.0, "upper": 4.0, "mid": 3.5, "outside": -2.0}[mu_kind]
        leq, gt = risk_parts(r, mu)
        assert leq + gt == pytest.approx(excess_risk(r), rel=1e-10)

    def test_parts_nonnegative_inside_gap(self):
        r = _draw([5.0, 4.0, 3.0, 2.0, 1.0], n=25, seed=3)
        for mu in (3.0, 3.5, 4.0):
            leq, gt = risk_parts(r, mu)
            assert leq >= 0 and gt >= 0

    def test_hs_is_twice_cross_overlap(self):
        r = _draw([4.0, 3.0, 2.0, 1.0], n=15, seed=7)
        assert hs_distance_sq(r.P_leq, r.Phat_leq) == pytest.approx(2 * cross_overlap(r), rel=1e-10)

    def test_rank_mismatch(self):
        a = build_projector(np.eye(3), [1])
        b = build_projector(np.eye(3), [1, 2])
        with pytest.raises(ValueError):
            hs_distance_sq(a, b)

    @pytest.mark.parametrize("d", [0, 4, 1.5])
    def test_bad_d(self, d):
        with pytest.raises(ValueError):
            _draw([4.0, 3.0, 2.0, 1.0], d=d)

    def test_report_json(self):
        r = _draw([4.0, 3.0, 2.0, 1.0])
        rec = json.loads(risk_report(r).to_json())
        assert set(rec) == {"excess", "part_leq", "part_gt", "mu", "hs_sq", "erm_gap"}
        assert rec["mu"] == 2.0

    @given(st.integers(0, 10_000), st.integers(3, 7), st.integers(5, 40))
    def test_basic_inequality(self, seed, p, n):
        vals = np.linspace(2.0, 0.5, p)
        r = Realization.draw(custom_model(vals), n, p // 2, seed)
        e = excess_risk(r)
        assert -1e-12 <= e <= erm_gap(r) + 1e-12
