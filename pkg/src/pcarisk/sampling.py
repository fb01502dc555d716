"""Seeded Gaussian sampling.

Random numbers come from the Philox4x64-10 counter-based generator. A
stream is identified by ``(base_seed, stream)``; the pair is hashed through
numpy's ``SeedSequence`` with ``stream`` as the spawn key, so replication r
of an experiment owns stream r and never touches another replication's
numbers. Normals are produced by an explicit Box-Muller transform on 53-bit
uniforms built from the raw 64-bit output, so the only thing borrowed from
numpy is the Philox bit generator itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import CovModel
from .spectral import as_sym

ALGORITHM = "philox4x64-10/box-muller"
_TWO_NEG_53 = 2.0**-53


class RngStream:
    """One independent stream of a counter-based generator.

    Parameters
    ----------
    base_seed : int
        Experiment seed, 0 <= base_seed < 2**64.
    stream : int
        Stream index; replications use their own index.
    """

    algorithm = ALGORITHM

    def __init__(self, base_seed: int, stream: int = 0):
        if base_seed < 0 or stream < 0:
            raise ValueError("seed and stream index must be non-negative")
        self.base_seed = int(base_seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.base_seed, spawn_key=(self.stream,))
        self._bitgen = np.random.Philox(ss)

    def raw(self, size: int) -> np.ndarray:
        return self._bitgen.random_raw(int(size))

    def uniform(self, size: int) -> np.ndarray:
        """Uniforms on the open interval (0, 1), 53-bit resolution."""
        bits = self.raw(size) >> np.uint64(11)
        return (bits.astype(np.float64) + 0.5) * _TWO_NEG_53

    def normal(self, size) -> np.ndarray:
        """Standard normals by Box-Muller; ``size`` may be an int or shape."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        m = int(np.prod(shape))
        half = (m + 1) // 2
        u = self.uniform(2 * half)
        rad = np.sqrt(-2.0 * np.log(u[:half]))
        ang = (2.0 * math.pi) * u[half:]
        z = np.concatenate((rad * np.cos(ang), rad * np.sin(ang)))
        return z[:m].reshape(shape)

    def chisquare(self, df) -> np.ndarray:
        """Chi-square variates with the given degrees of freedom.

        Uses numpy's gamma sampler driven by this stream's bit generator.
        """
        return np.random.Generator(self._bitgen).chisquare(np.asarray(df, dtype=np.float64))


@dataclass(frozen=True)
class SampleSet:
    rows: np.ndarray
    seed: int
    stream: int = 0

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    def to_csv(self, path) -> None:
        header = ",".join(f"x{i + 1}" for i in range(self.p))
        lines = [header]
        lines += [",".join(repr(v) for v in row) for row in self.rows.tolist()]
        Path(path).write_text("\n".join(lines) + "\n")


def draw_gaussian_samples(model: CovModel, n: int, seed: int, stream: int = 0) -> SampleSet:
    """Draw n i.i.d. rows from N(0, Sigma).

    Row i is ``U diag(sqrt(lambda)) z_i`` with z_i filled row-major from the
    stream.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    z = RngStream(seed, stream).normal((int(n), model.p))
    x = z @ model.sqrt_factor().T
    x.setflags(write=False)
    return SampleSet(x, int(seed), int(stream))


def empirical_covariance(s) -> np.ndarray:
    """Uncentered sample covariance (1/n) sum_i x_i x_i^T."""
    rows = s.rows if isinstance(s, SampleSet) else np.asarray(s, dtype=np.float64)
    if rows.shape[0] < 1:
        raise ValueError("need at least one observation")
    return as_sym(rows.T @ rows / rows.shape[0])


def draw_wishart_covariance(model: CovModel, n: int, seed: int, stream: int = 0) -> np.ndarray:
    """Sample covariance of n Gaussian rows drawn directly as a scaled Wishart matrix.

    Bartlett decomposition: with A lower triangular, A_ii^2 ~ chi^2(n - i + 1)
    and A_ij ~ N(0, 1) below the diagonal, L A A^T L^T / n has the law of
    the uncentered sample covariance. The cost does not grow with n.
    Requires n >= p.
    """
    p = model.p
    if n < p:
        raise ValueError("Wishart sampling needs n >= p")
    rng = RngStream(seed, stream)
    a = np.zeros((p, p))
    a[np.tril_indices(p, -1)] = rng.normal(p * (p - 1) // 2)
    a[np.diag_indices(p)] = np.sqrt(rng.chisquare(n - np.arange(p)))
    la = model.sqrt_factor() @ a
    return as_sym(la @ la.T / n)
