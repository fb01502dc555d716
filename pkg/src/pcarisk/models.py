"""Population covariance families and simple spectrum functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("exponential", "polynomial", "spiked", "isotropic", "custom")


@dataclass(frozen=True)
class Spectrum:
    """Non-increasing, strictly positive eigenvalue list."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if v.size == 0:
            raise ValueError("spectrum must be nonempty")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(v) > 0):
            raise ValueError("eigenvalues must be non-increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def p(self) -> int:
        return int(self.values.size)

    def lam(self, j: int) -> float:
        """1-based eigenvalue access."""
        return float(self.values[j - 1])

    @property
    def trace(self) -> float:
        return math.fsum(self.values)


@dataclass(frozen=True)
class CovModel:
    spectrum: Spectrum
    basis: np.ndarray | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.spectrum.p
        u = np.eye(p) if self.basis is None else np.array(self.basis, dtype=np.float64)
        if u.shape != (p, p):
            raise ValueError(f"basis shape {u.shape} does not match p={p}")
        if np.max(np.abs(u.T @ u - np.eye(p))) > 1e-8:
            raise ValueError("basis is not orthonormal")
        u.setflags(write=False)
        object.__setattr__(self, "basis", u)

    @property
    def p(self) -> int:
        return self.spectrum.p

    @property
    def values(self) -> np.ndarray:
        return self.spectrum.values

    def sigma(self) -> np.ndarray:
        u = self.basis
        s = (u * self.values) @ u.T
        return 0.5 * (s + s.T)

    def sqrt_factor(self) -> np.ndarray:
        """L = U diag(sqrt(lambda)), so that L L^T = Sigma."""
        return self.basis * np.sqrt(self.values)

    def with_basis(self, basis) -> "CovModel":
        return CovModel(self.spectrum, basis, self.kind, dict(self.params))


def make_model(kind: str, p: int, **params) -> CovModel:
    """Build one of the covariance families.

    Parameters
    ----------
    kind : {"exponential", "polynomial", "spiked", "isotropic", "custom"}
    p : int
        Dimension.
    **params
        ``alpha`` for the decay families; ``x``, ``d``, ``kappa`` and an
        optional ``top`` profile for the spiked family; ``sigma2`` for the
        isotropic one; ``values`` for custom spectra.

    Notes
    -----
    The spiked spectrum is 1 outside the top block. With no explicit
    ``top`` all d spikes sit at 1 + x, the lower edge of the allowed band
    [1 + x, 1 + kappa x]. An explicit ``top`` must lie inside that band.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    if kind != "custom" and (int(p) != p or p < 1):
        raise ValueError(f"p must be a positive integer, got {p}")
    j = np.arange(1, int(p) + 1, dtype=np.float64) if kind != "custom" else None
    if kind == "exponential":
        alpha = float(params.get("alpha", 1.0))
        if not alpha > 0:
            raise ValueError("exponential decay needs alpha > 0")
        vals = np.exp(-alpha * j)
        rec = {"alpha": alpha}
    elif kind == "polynomial":
        alpha = float(params.get("alpha", 2.0))
        if not alpha > 1:
            raise ValueError("polynomial decay needs alpha > 1")
        vals = j ** (-alpha)
        rec = {"alpha": alpha}
    elif kind == "spiked":
        x = float(params.get("x", 1.0))
        kappa = float(params.get("kappa", 1.0))
        d = params.get("d")
        if d is None:
            raise ValueError("spiked model needs d")
        d = int(d)
        if x < 0:
            raise ValueError("spiked model needs x >= 0")
        if kappa < 1:
            raise ValueError("spiked model needs kappa >= 1")
        if not 1 <= d < p:
            raise ValueError(f"spiked model needs 1 <= d < p, got d={d}, p={p}")
        vals = np.ones(int(p))
        top = params.get("top")
        if top is None:
            vals[:d] = 1.0 + x
        else:
            top = np.sort(np.asarray(top, dtype=np.float64))[::-1]
            if top.size != d:
                raise ValueError(f"top profile needs {d} values")
            lo, hi = 1.0 + x, 1.0 + kappa * x
            if np.any(top < lo - 1e-15) or np.any(top > hi + 1e-15):
                raise ValueError(f"top profile must lie in [{lo}, {hi}]")
            vals[:d] = top
        rec = {"x": x, "kappa": kappa, "d": d}
        if top is not None:
            rec["top"] = [float(t) for t in top]
    elif kind == "isotropic":
        s2 = float(params.get("sigma2", 1.0))
        if not s2 > 0:
            raise ValueError("isotropic model needs sigma2 > 0")
        vals = np.full(int(p), s2)
        rec = {"sigma2": s2}
    else:
        vals = np.asarray(params.get("values"), dtype=np.float64)
        if vals.ndim != 1 or (p is not None and vals.size != p):
            raise ValueError("custom values must be a list of length p")
        rec = {}
    return CovModel(Spectrum(vals), params.get("basis"), kind, rec)


def custom_model(values, basis=None) -> CovModel:
    vals = np.asarray(values, dtype=np.float64)
    return make_model("custom", vals.size, values=vals, basis=basis)


def _as_spectrum(spec) -> Spectrum:
    if isinstance(spec, Spectrum):
        return spec
    if isinstance(spec, CovModel):
        return spec.spectrum
    return Spectrum(spec)


def partial_trace(spec, r: int, strict: bool = True) -> float:
    """Sum of eigenvalues with index > r (strict) or >= r (not strict)."""
    s = _as_spectrum(spec)
    if int(r) != r or not 0 <= r <= s.p:
        raise ValueError(f"r must be in 0..{s.p}, got {r}")
    r = int(r)
    start = r if strict else max(r - 1, 0)
    return math.fsum(s.values[start:])


def head_trace(spec, r: int) -> float:
    """Sum of the r largest eigenvalues."""
    s = _as_spectrum(spec)
    return math.fsum(s.values[:r])


def effective_rank(spec) -> float:
    s = _as_spectrum(spec)
    return s.trace / s.values[0]


def random_orthonormal_frame(p: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix from QR of a Gaussian matrix."""
    g = rng.standard_normal((p, p))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


def read_spectrum(path) -> Spectrum:
    lines = Path(path).read_text().split()
    return Spectrum([float(t) for t in lines])


def write_spectrum(spec, path) -> None:
    s = _as_spectrum(spec)
    Path(path).write_text("".join(f"{v!r}\n" for v in s.values.tolist()))
