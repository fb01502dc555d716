"""Numerical checks of the exact projector identities.

Every check compares two independently computed sides and records the
absolute and relative discrepancy. Checks whose divisions involve a
denominator below ``DEGENERACY * lambda_1`` are flagged as degenerate and
do not count toward pass/fail.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .risk import Realization, excess_risk, risk_parts
from .spectral import hs_inner

DEGENERACY = 1e-9

# how each family is judged: (error measure, tolerance)
TOLERANCES = {
    "interaction": ("scaled", 1e-9),
    "overlap_expansion": ("rel", 1e-6),
    "second_order_expansion": ("rel", 1e-6),
    "spectral_split": ("rel", 1e-8),
}


@dataclass
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    abs_err: float
    rel_err: float
    scale: float
    degenerate: bool
    params: dict = field(default_factory=dict)

    def passed(self) -> bool:
        """True when non-degenerate and within the family tolerance."""
        if self.degenerate:
            return True
        measure, tol = TOLERANCES[self.name]
        if measure == "rel":
            return self.rel_err <= tol
        return self.abs_err <= tol * self.scale

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("lhs", "rhs", "abs_err", "rel_err"):
            if not math.isfinite(out[key]):
                out[key] = None
        out["passed"] = self.passed()
        return out


def _rel(abs_err, a, b, zero_level):
    m = max(abs(a), abs(b))
    if m <= zero_level:
        return 0.0
    return abs_err / m


def _fro(m) -> float:
    return math.sqrt(hs_inner(m, m))


def _is_degenerate(r: Realization, denominators) -> bool:
    thr = DEGENERACY * r.lam[0]
    return bool(np.any(np.abs(np.asarray(denominators, dtype=np.float64)) < thr))


def interaction_identity(r: Realization, j: int, k: int) -> IdentityCheck:
    """Compare (lambda_j - lambdahat_k) P_j Phat_k with P_j Delta Phat_k.

    The identity is checked in multiplied-out form, so no division occurs
    and the check stays meaningful near degeneracy. ``scale`` is
    max(lambda_1, ||Delta||_2).
    """
    p = r.p
    if not (1 <= j <= p and 1 <= k <= p):
        raise IndexError(f"indices ({j}, {k}) out of range 1..{p}")
    pj = r.pop_proj(j)
    pk_hat = r.emp_proj(k)
    gap = r.lam[j - 1] - r.lam_hat[k - 1]
    left = gap * (pj @ pk_hat)
    right = pj @ r.delta @ pk_hat
    lhs, rhs = _fro(left), _fro(right)
    err = _fro(left - right)
    scale = max(float(r.lam[0]), _fro(r.delta))
    return IdentityCheck(
        "interaction", lhs, rhs, err, _rel(err, lhs, rhs, 1e-300), scale,
        _is_degenerate(r, [gap]), {"j": j, "k": k},
    )


def overlap_expansion(r: Realization, side: str, index: int) -> IdentityCheck:
    """Overlap of one population direction with the opposite empirical block.

    For ``side="leq"`` and j <= d: <P_j, Phat_{>d}> against
    sum_{k>d} ||P_j Delta Phat_k||^2 / (lambda_j - lambdahat_k)^2.
    For ``side="gt"`` and k > d the roles of the blocks are swapped.
    """
    d, p = r.d, r.p
    if side == "leq":
        if not 1 <= index <= d:
            raise ValueError(f"index must be in 1..{d} for side='leq'")
        others = range(d + 1, p + 1)
    elif side == "gt":
        if not d < index <= p:
            raise ValueError(f"index must be in {d + 1}..{p} for side='gt'")
        others = range(1, d + 1)
    else:
        raise ValueError("side must be 'leq' or 'gt'")
    pi = r.pop_proj(index)
    block = sum(r.emp_proj(k) for k in others)
    lhs = hs_inner(pi, block)
    lam_i = r.lam[index - 1]
    terms, dens = [], []
    for k in others:
        den = lam_i - r.lam_hat[k - 1]
        dens.append(den)
        m = pi @ r.delta @ r.emp_proj(k)
        terms.append(hs_inner(m, m) / den**2 if den != 0 else math.inf)
    rhs = math.fsum(terms)
    err = abs(lhs - rhs)
    return IdentityCheck(
        "overlap_expansion", lhs, rhs, err, _rel(err, lhs, rhs, 1e-14), 1.0,
        _is_degenerate(r, dens), {"side": side, "index": index},
    )


def second_order_rhs(r: Realization, side: str, index: int) -> tuple[np.ndarray, list]:
    """Four-term second-order expansion of P_i Phat_O.

    O is the block opposite to ``index`` (the tail if index <= d, the head
    otherwise) and S is the block containing ``index``. With
    A = U^T Delta U and B = U^T Delta Uhat the terms are::

        sum_{k in O}           A_ik / (l_i - l_k)                  u_i u_k^T
        sum_{k in S, m in O}   A_ik B_km / ((l_i - h_m)(l_k - h_m)) u_i uh_m^T
        sum_{k in O, m in S}   A_ik B_km / ((l_i - l_k)(h_m - l_k)) u_i uh_m^T
      - sum_{k in O, m in O}   A_ik B_km / ((l_i - h_m)(l_i - l_k)) u_i uh_m^T

    where l are population and h empirical eigenvalues.
    Returns the matrix and the list of all denominators used.
    """
    d, p = r.d, r.p
    head = list(range(d))
    tail = list(range(d, p))
    i = index - 1
    own, opp = (head, tail) if side == "leq" else (tail, head)
    lam, lh = r.lam, r.lam_hat
    u, uh = r.u, r.u_hat
    a = u.T @ r.delta @ u
    b = u.T @ r.delta @ uh
    dens = []
    first = np.zeros(p)
    for k in opp:
        den = lam[i] - lam[k]
        dens.append(den)
        first[k] = a[i, k] / den
    coef = np.zeros(p)  # coefficients on the empirical frame
    for m in opp:
        for k in own:
            den = (lam[i] - lh[m]) * (lam[k] - lh[m])
            dens += [lam[i] - lh[m], lam[k] - lh[m]]
            coef[m] += a[i, k] * b[k, m] / den
        for k in opp:
            den = (lam[i] - lh[m]) * (lam[i] - lam[k])
            dens += [lam[i] - lh[m]]
            coef[m] -= a[i, k] * b[k, m] / den
    for m in own:
        for k in opp:
            den = (lam[i] - lam[k]) * (lh[m] - lam[k])
            dens += [lh[m] - lam[k]]
            coef[m] += a[i, k] * b[k, m] / den
    ui = u[:, i]
    mat = np.outer(ui, u @ first) + np.outer(ui, uh @ coef)
    return mat, dens


def second_order_expansion(r: Realization, side: str, index: int) -> IdentityCheck:
    """Matrix-level check of the second-order expansion of P_i Phat_O.

    ``lhs`` and ``rhs`` hold Hilbert-Schmidt norms of the two sides and
    ``abs_err`` the norm of their difference.
    """
    d, p = r.d, r.p
    if side == "leq" and not 1 <= index <= d:
        raise ValueError(f"index must be in 1..{d} for side='leq'")
    if side == "gt" and not d < index <= p:
        raise ValueError(f"index must be in {d + 1}..{p} for side='gt'")
    if side not in ("leq", "gt"):
        raise ValueError("side must be 'leq' or 'gt'")
    opp = range(d + 1, p + 1) if side == "leq" else range(1, d + 1)
    left = r.pop_proj(index) @ sum(r.emp_proj(m) for m in opp)
    with np.errstate(divide="ignore", invalid="ignore"):
        right, dens = second_order_rhs(r, side, index)
    degenerate = _is_degenerate(r, dens) or not np.all(np.isfinite(right))
    lhs, rhs = _fro(left), _fro(right)
    err = _fro(left - right) if not degenerate else math.nan
    rel = _rel(err, lhs, rhs, 1e-14) if not degenerate else math.nan
    return IdentityCheck(
        "second_order_expansion", lhs, rhs, err, rel, float(r.lam[0]),
        degenerate, {"side": side, "index": index},
    )


def spectral_split_identity(r: Realization, mu: float) -> IdentityCheck:
    """Excess risk (projector matrices) against the two overlap-based parts.

    Values below ``1e-12 * (lambda_1 + |mu|) * d`` count as zero, since
    the two parts may cancel to roundoff when the excess risk vanishes.
    """
    lhs = excess_risk(r)
    leq, gt = risk_parts(r, mu)
    rhs = leq + gt
    err = abs(lhs - rhs)
    zero = 1e-12 * (float(r.lam[0]) + abs(mu)) * r.d
    return IdentityCheck(
        "spectral_split", lhs, rhs, err, _rel(err, lhs, rhs, zero), 1.0, False,
        {"mu": float(mu), "part_leq": leq, "part_gt": gt},
    )


def verify_realization(r: Realization, mus=None) -> list[IdentityCheck]:
    """Run every identity family on one realization."""
    d, p = r.d, r.p
    if mus is None:
        mus = (-1.0, 0.0, float(r.lam[d]), float(r.lam[d - 1]), 1.0)
    checks = [spectral_split_identity(r, mu) for mu in mus]
    checks += [interaction_identity(r, j, k) for j in range(1, p + 1) for k in range(1, p + 1)]
    checks += [overlap_expansion(r, "leq", j) for j in range(1, d + 1)]
    checks += [overlap_expansion(r, "gt", k) for k in range(d + 1, p + 1)]
    checks += [second_order_expansion(r, "leq", j) for j in range(1, d + 1)]
    checks += [second_order_expansion(r, "gt", k) for k in range(d + 1, p + 1)]
    return checks


def checks_to_json(checks) -> str:
    return json.dumps([c.to_dict() for c in checks], indent=1, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)
