import json

import numpy as np
import pytest

from pcarisk.identities import (
    TOLERANCES,
    IdentityCheck,
    checks_to_json,
    interaction_identity,
    overlap_expansion,
    second_order_expansion,
    second_order_rhs,
    spectral_split_identity,
    verify_realization,
)
from pcarisk.models import custom_model
from pcarisk.risk import Realization

from conftest import random_frame


@pytest.fixture
def real(rng):
    m = custom_model([6.0, 4.0, 3.0, 1.5, 1.0, 0.5], random_frame(rng, 6))
    return Realization.draw(m, 40, 2, seed=11)


def _overlap_oracle(r, j, block):
    # direct eigenvector form: sum over the block of (u_j . uhat_k)^2
    return sum((r.u[:, j - 1] @ r.u_hat[:, k - 1]) ** 2 for k in block)


class TestFamilies:
    def test_split_all_mus(self, real):
        for mu in (-1.0, 0.0, real.lam[2], real.lam[1], 1.0):
            c = spectral_split_identity(real, mu)
            assert c.passed() and c.rel_err <= 1e-10

    def test_interaction(self, real):
        for j in range(1, 7):
            for k in range(1, 7):
                c = interaction_identity(real, j, k)
                assert c.passed(), c

    def test_overlap_expansion_against_direct_overlaps(self, real):
        for j in (1, 2):
            c = overlap_expansion(real, "leq", j)
            assert c.lhs == pytest.approx(_overlap_oracle(real, j, range(3, 7)), rel=1e-12)
            assert c.passed()
        for k in (3, 6):
            c = overlap_expansion(real, "gt", k)
            assert c.lhs == pytest.approx(_overlap_oracle(real, k, range(1, 3)), rel=1e-12)
            assert c.passed()

    @pytest.mark.parametrize("side,index", [("leq", 1), ("leq", 2), ("gt", 3), ("gt", 6)])
    def test_second_order(self, real, side, index):
        c = second_order_expansion(real, side, index)
        assert not c.degenerate and c.rel_err <= 1e-9

    def test_second_order_small_perturbation(self):
        # with a tiny perturbation the first term alone is nearly exact
        m = custom_model([3.0, 2.0, 1.0])
        eps = 1e-4
        pert = np.array([[0, 1, 0.5], [1, 0, 0.3], [0.5, 0.3, 0]]) * eps
        sig_hat = m.sigma() + pert
        r = Realization(m, sig_hat, 1)
        mat, _ = second_order_rhs(r, "leq", 1)
        first_only = np.outer([1, 0, 0], [0, -pert[0, 1] / 1.0, -pert[0, 2] / 2.0])
        assert np.max(np.abs(mat - first_only)) < 10 * eps**2

    def test_bad_side_and_index(self, real):
        with pytest.raises(ValueError):
            overlap_expansion(real, "up", 1)
        with pytest.raises(ValueError):
            overlap_expansion(real, "leq", 3)
        with pytest.raises(ValueError):
            second_order_expansion(real, "gt", 2)
        with pytest.raises(IndexError):
            interaction_identity(real, 0, 1)


class TestDegeneracy:
    def test_tie_across_split_flagged(self):
        m = custom_model([3.0, 2.0, 2.0, 1.0])
        r = Realization.draw(m, 50, 2, seed=3)
        checks = verify_realization(r)
        so = [c for c in checks if c.name == "second_order_expansion"]
        assert any(c.degenerate for c in so)
        assert all(c.passed() for c in checks)

    def test_degenerate_json_has_no_nan(self):
        m = custom_model([3.0, 2.0, 2.0, 1.0])
        r = Realization.draw(m, 50, 2, seed=3)
        text = checks_to_json(verify_realization(r))
        assert "NaN" not in text
        assert all("passed" in rec for rec in json.loads(text))


class TestCheckRecord:
    def test_tolerances_cover_families(self):
        assert set(TOLERANCES) == {"interaction", "overlap_expansion",
                                   "second_order_expansion", "spectral_split"}

    def test_failing_record(self):
        c = IdentityCheck("spectral_split", 1.0, 2.0, 1.0, 0.5, 1.0, False)
        assert not c.passed()
        c = IdentityCheck("interaction", 1.0, 1.0, 2e-9, 0.0, 1.0, False)
        assert not c.passed()
