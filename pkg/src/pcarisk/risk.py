"""Exact reconstruction errors and excess risk on one realization."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from .models import CovModel
from .sampling import SampleSet, draw_gaussian_samples, empirical_covariance
from .spectral import EigenDecomposition, Projector, as_sym, build_projector, hs_inner, sym_eig


class Realization:
    """Population model, sample covariance and target rank d.

    Eigenvectors of the population are the columns of ``model.basis``;
    empirical eigenpairs come from the Jacobi solver unless supplied.
    """

    def __init__(self, model: CovModel, sigma_hat, d: int, emp: EigenDecomposition | None = None):
        p = model.p
        if int(d) != d or not 1 <= d < p:
            raise ValueError(f"d must satisfy 1 <= d < p={p}, got {d}")
        self.model = model
        self.d = int(d)
        self.sigma = model.sigma()
        self.sigma_hat = as_sym(sigma_hat)
        if self.sigma_hat.shape != (p, p):
            raise ValueError("sample covariance has the wrong shape")
        self.delta = as_sym(self.sigma - self.sigma_hat)
        self.emp = sym_eig(self.sigma_hat) if emp is None else emp

    @classmethod
    def from_samples(cls, model: CovModel, samples: SampleSet | np.ndarray, d: int) -> "Realization":
        return cls(model, empirical_covariance(samples), d)

    @classmethod
    def draw(cls, model: CovModel, n: int, d: int, seed: int, stream: int = 0) -> "Realization":
        return cls.from_samples(model, draw_gaussian_samples(model, n, seed, stream), d)

    @classmethod
    def forced(cls, model: CovModel, values, vectors, d: int) -> "Realization":
        """Realization whose empirical eigenpairs are prescribed.

        The sample covariance is rebuilt from the given pairs, so the
        eigenvectors are used exactly as passed even under ties.
        """
        values = np.asarray(values, dtype=np.float64)
        vectors = np.asarray(vectors, dtype=np.float64)
        if np.any(np.diff(values) > 0):
            raise ValueError("forced eigenvalues must be non-increasing")
        emp = EigenDecomposition(values, vectors)
        return cls(model, emp.reconstruct(), d, emp)

    # population side
    @property
    def lam(self) -> np.ndarray:
        return self.model.values

    @property
    def u(self) -> np.ndarray:
        return self.model.basis

    # empirical side
    @property
    def lam_hat(self) -> np.ndarray:
        return self.emp.values

    @property
    def u_hat(self) -> np.ndarray:
        return self.emp.vectors

    @property
    def p(self) -> int:
        return self.model.p

    @cached_property
    def P_leq(self) -> Projector:
        return build_projector(self.u, range(1, self.d + 1))

    @cached_property
    def Phat_leq(self) -> Projector:
        return build_projector(self.u_hat, range(1, self.d + 1))

    @cached_property
    def overlaps(self) -> np.ndarray:
        """O[j, k] = <P_j, Phat_k> = (u_j . uhat_k)^2, 0-based."""
        return (self.u.T @ self.u_hat) ** 2

    def pop_proj(self, j: int) -> np.ndarray:
        c = self.u[:, j - 1]
        return np.outer(c, c)

    def emp_proj(self, k: int) -> np.ndarray:
        c = self.u_hat[:, k - 1]
        return np.outer(c, c)


def reconstruction_error(sigma_like, proj) -> float:
    """<S, I - P> for a covariance-like matrix S and a projector P."""
    s = np.asarray(sigma_like, dtype=np.float64)
    pm = proj.matrix if isinstance(proj, Projector) else np.asarray(proj, dtype=np.float64)
    if s.shape != pm.shape:
        raise ValueError(f"dimension mismatch {s.shape} vs {pm.shape}")
    return hs_inner(s, np.eye(s.shape[0]) - pm)


def excess_risk(r: Realization) -> float:
    """<Sigma, P_{<=d} - Phat_{<=d}> computed with full matrices."""
    return hs_inner(r.sigma, r.P_leq.matrix - r.Phat_leq.matrix)


def risk_parts(r: Realization, mu: float) -> tuple[float, float]:
    """Split of the excess risk around the level ``mu``.

    Returns
    -------
    part_leq : float
        sum_{j<=d} (lambda_j - mu) <P_j, Phat_{>d}>
    part_gt : float
        sum_{k>d} (mu - lambda_k) <P_k, Phat_{<=d}>

    Both are built from eigenvector overlaps only, never from the
    projector matrices used by :func:`excess_risk`.
    """
    d = r.d
    o = r.overlaps
    lam = r.lam
    leq = [(lam[j] - mu) * math.fsum(o[j, d:]) for j in range(d)]
    gt = [(mu - lam[k]) * math.fsum(o[k, :d]) for k in range(d, r.p)]
    return math.fsum(leq), math.fsum(gt)


def hs_distance_sq(P: Projector, Phat: Projector) -> float:
    """Squared Hilbert-Schmidt distance of two equal-rank projectors."""
    if P.rank != Phat.rank:
        raise ValueError(f"rank mismatch {P.rank} vs {Phat.rank}")
    diff = P.matrix - Phat.matrix
    return hs_inner(diff, diff)


def cross_overlap(r: Realization) -> float:
    """<P_{<=d}, Phat_{>d}> from eigenvector overlaps."""
    return float(math.fsum(r.overlaps[: r.d, r.d :].ravel()))


def erm_gap(r: Realization) -> float:
    """<Sigma - Sigma_hat, P_{<=d} - Phat_{<=d}>."""
    return hs_inner(r.delta, r.P_leq.matrix - r.Phat_leq.matrix)


@dataclass
class RiskReport:
    excess: float
    part_leq: float
    part_gt: float
    mu: float
    hs_sq: float
    erm_gap: float

    def to_dict(self) -> dict:
        out = asdict(self)
        # roundoff below zero is cosmetic here; the raw values stay on the object
        for key in ("excess", "hs_sq", "erm_gap"):
            out[key] = max(out[key], 0.0)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def risk_report(r: Realization, mu: float | None = None) -> RiskReport:
    """All per-realization risk quantities; ``mu`` defaults to lambda_{d+1}."""
    mu = float(r.lam[r.d]) if mu is None else float(mu)
    leq, gt = risk_parts(r, mu)
    return RiskReport(
        excess=excess_risk(r),
        part_leq=leq,
        part_gt=gt,
        mu=mu,
        hs_sq=hs_distance_sq(r.P_leq, r.Phat_leq),
        erm_gap=erm_gap(r),
    )
