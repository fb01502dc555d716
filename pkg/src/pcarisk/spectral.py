"""Dense symmetric linear algebra used throughout the package.

The eigensolver is a cyclic Jacobi method compiled with numba. It is slower
than LAPACK for large matrices but it is deterministic: the same input gives
the same rotations, in the same order, on every platform and thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 64


class ConvergenceError(RuntimeError):
    """Raised when the Jacobi iteration fails to converge.

    The off-diagonal Frobenius mass left after the last sweep is kept in
    ``residual``.
    """

    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


class FrameError(ValueError):
    """Raised when a set of columns is not orthonormal."""


def as_sym(a) -> np.ndarray:
    """Return a float64 copy of ``a`` symmetrized as (A + A^T)/2.

    After this call ``out[i, j] == out[j, i]`` holds bitwise.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    out = 0.5 * (a + a.T)
    return out


@numba.njit(cache=True, nogil=True)
def _jacobi(a, want_vectors, tol, max_sweeps):
    # a is overwritten; returns (vectors, sweeps, residual), sweeps == -1 on failure
    n = a.shape[0]
    v = np.eye(n)
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += a[i, j] * a[i, j]
    thresh = tol * math.sqrt(fro)
    off = 0.0
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        off = math.sqrt(off)
        if off <= thresh:
            return v, sweep, off
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                if want_vectors:
                    for k in range(n):
                        vkp = v[k, p]
                        vkq = v[k, q]
                        v[k, p] = c * vkp - s * vkq
                        v[k, q] = s * vkp + c * vkq
    return v, -1, off


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues in non-increasing order.

    Column ``vectors[:, i]`` belongs to ``values[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector together with its rank."""

    matrix: np.ndarray
    rank: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def complement(self) -> "Projector":
        return Projector(as_sym(np.eye(self.dim) - self.matrix), self.dim - self.rank)


def _jacobi_run(a, want_vectors):
    a = as_sym(a)
    work = a.copy()
    v, sweeps, off = _jacobi(work, want_vectors, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError(
            f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps", off
        )
    w = np.diag(work).copy()
    # stable sort keeps the rotation-frame order among exact ties
    order = np.argsort(-w, kind="stable")
    return w[order], (v[:, order] if want_vectors else None)


def sym_eig(a) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    a : array_like
        Square matrix; it is symmetrized before use.

    Returns
    -------
    EigenDecomposition
        Eigenvalues sorted non-increasingly. Exact ties keep the order of
        the converged rotation frame.

    Raises
    ------
    ConvergenceError
        If the off-diagonal mass does not drop below ``1e-13 * ||A||_2``
        within 64 sweeps.
    """
    values, vectors = _jacobi_run(a, True)
    return EigenDecomposition(values, vectors)


def sym_eigvals(a) -> np.ndarray:
    """Eigenvalues only, non-increasing."""
    return _jacobi_run(a, False)[0]


def orthonormality_residual(frame) -> float:
    frame = np.asarray(frame, dtype=np.float64)
    k = frame.shape[1]
    return float(np.max(np.abs(frame.T @ frame - np.eye(k)))) if k else 0.0


def build_projector(frame, indices) -> Projector:
    """Projector onto the span of the selected columns of an orthonormal frame.

    ``indices`` are 1-based column numbers, matching the usual eigenvalue
    numbering lambda_1 >= lambda_2 >= ...
    """
    frame = np.asarray(frame, dtype=np.float64)
    dim = frame.shape[0]
    idx = sorted(set(int(i) for i in indices))
    if any(i < 1 or i > frame.shape[1] for i in idx):
        raise IndexError(f"indices {idx} out of range 1..{frame.shape[1]}")
    if orthonormality_residual(frame) > 1e-8:
        raise FrameError("frame columns are not orthonormal")
    cols = frame[:, [i - 1 for i in idx]]
    m = cols @ cols.T if idx else np.zeros((dim, dim))
    return Projector(as_sym(m), len(idx))


def hs_inner(s, t) -> float:
    """Hilbert-Schmidt inner product tr(S^T T)."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if s.shape != t.shape:
        raise ValueError(f"dimension mismatch {s.shape} vs {t.shape}")
    return float(np.sum(s * t))


def hs_norm_sq(s) -> float:
    return hs_inner(s, s)


def op_norm(s) -> float:
    """Operator norm of a symmetric matrix: the largest |eigenvalue|."""
    w = sym_eigvals(s)
    if w.size == 0:
        return 0.0
    return float(max(abs(w[0]), abs(w[-1])))


def spectral_norm(m) -> float:
    """Largest singular value of a (possibly non-symmetric) matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.size == 0:
        return 0.0
    gram = m.T @ m if m.shape[0] >= m.shape[1] else m @ m.T
    return math.sqrt(max(op_norm(gram), 0.0))
