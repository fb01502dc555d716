"""Weighted chi-square limit laws for n * excess risk and n * subspace distance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import CovModel, Spectrum
from .sampling import RngStream

LAWS = ("excess_risk", "hs_distance")


@dataclass(frozen=True)
class LimitLawSpec:
    """Pair weights of a limit law sum_{(j,k)} w_jk g_jk^2.

    ``excess_risk``: pairs j <= d < k with lambda_j > lambda_k and
    w_jk = lambda_j lambda_k / (lambda_j - lambda_k).
    ``hs_distance``: requires lambda_d > lambda_{d+1}; all pairs j <= d < k
    with w_jk = 2 lambda_j lambda_k / (lambda_j - lambda_k)^2.
    """

    values: np.ndarray
    d: int
    law: str
    pairs: tuple
    weights: np.ndarray

    @classmethod
    def build(cls, spec, d: int, law: str = "excess_risk") -> "LimitLawSpec":
        if isinstance(spec, CovModel):
            lam = spec.values
        elif isinstance(spec, Spectrum):
            lam = spec.values
        else:
            lam = Spectrum(spec).values
        p = lam.size
        if int(d) != d or not 1 <= d < p:
            raise ValueError(f"d must satisfy 1 <= d < p={p}")
        if law not in LAWS:
            raise ValueError(f"law must be one of {LAWS}")
        if law == "hs_distance" and not lam[d - 1] > lam[d]:
            raise ValueError("subspace-distance law needs lambda_d > lambda_(d+1)")
        pairs, w = [], []
        for j in range(d):
            for k in range(d, p):
                lj, lk = lam[j], lam[k]
                if not lj > lk:
                    continue
                pairs.append((j + 1, k + 1))
                if law == "excess_risk":
                    w.append(lj * lk / (lj - lk))
                else:
                    w.append(2.0 * lj * lk / (lj - lk) ** 2)
        w = np.asarray(w, dtype=np.float64)
        w.setflags(write=False)
        return cls(lam, int(d), law, tuple(pairs), w)

    @property
    def mean(self) -> float:
        return math.fsum(self.weights)


def limit_law_sample(spec: LimitLawSpec, rng: RngStream) -> float:
    """One draw of sum w_jk g_jk^2."""
    if spec.weights.size == 0:
        return 0.0
    g = rng.normal(spec.weights.size)
    return float(math.fsum(spec.weights * g * g))


def limit_law_samples(spec: LimitLawSpec, size: int, rng: RngStream) -> np.ndarray:
    """``size`` draws; draw i consumes the i-th block of normals."""
    m = spec.weights.size
    if m == 0:
        return np.zeros(int(size))
    g = rng.normal((int(size), m))
    return (g * g) @ spec.weights


def hs_limit_law_sample(spec, d: int, rng: RngStream) -> float:
    """One draw of the subspace-distance limit law (factor 2 included)."""
    law = spec if isinstance(spec, LimitLawSpec) else LimitLawSpec.build(spec, d, "hs_distance")
    if law.law != "hs_distance":
        raise ValueError("expected a subspace-distance law")
    return limit_law_sample(law, rng)


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance sup_t |F_a(t) - F_b(t)|.

    Inputs need not be sorted; they are sorted internally.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate((a, b))
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def write_samples(values, path) -> None:
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in values))


def read_samples(path) -> np.ndarray:
    return np.array([float(t) for t in Path(path).read_text().split()])
