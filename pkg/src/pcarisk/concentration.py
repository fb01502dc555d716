"""Weighted operators and eigenvalue deviation inequalities.

Probability bounds above 1 are kept as computed and flagged ``vacuous``;
:meth:`DeviationBound.reported` clamps them for display only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundConstants, _lam, _num, separation_lhs
from .models import CovModel
from .spectral import as_sym, build_projector, sym_eig, sym_eigvals

WEIGHTED_KINDS = ("S_leq", "R_leq", "S_gt", "T_gt", "T_leq")
SIDES = ("upper_d_plus_1", "lower_d", "relative_upper", "relative_lower",
         "weighted_cov", "gap_right", "gap_left")


@dataclass
class WeightedOperator:
    kind: str
    weights: np.ndarray  # on the population eigenbasis, 0 outside the block
    matrix: np.ndarray
    params: dict = field(default_factory=dict)


def _diag_operator(model: CovModel, w: np.ndarray) -> np.ndarray:
    u = model.basis
    return as_sym((u * w) @ u.T)


def weighted_operator(model: CovModel, kind: str, **params) -> WeightedOperator:
    """Diagonal operators in the population eigenbasis.

    ``S_leq``  sum_{j<=s} (lambda_j - mu)^{-1/2} P_j       (params s, mu)
    ``R_leq``  sum_{j<=s} (lambda_j - mu)^{1/2} P_j        (params s, mu)
    ``S_gt``   sum_{k>d} (mu - lambda_k)^{-1/2} P_k        (params d, mu)
    ``T_gt``   sum_{k>d} (lambda_{d+1} - lambda_k + x)^{-1/2} P_k   (params d, x)
    ``T_leq``  sum_{j<=d} (lambda_j - lambda_d + x)^{-1/2} P_j      (params d, x)

    For the S/R pair the product S_leq R_leq = P_{<=s} is checked on
    construction.
    """
    lam = model.values
    p = model.p
    w = np.zeros(p)
    if kind in ("S_leq", "R_leq"):
        s, mu = int(params["s"]), float(params["mu"])
        if not 1 <= s <= p:
            raise ValueError(f"s must be in 1..{p}")
        base = lam[:s] - mu
        if np.any(base <= 0):
            raise ValueError("weights must be positive: need lambda_s > mu")
        w[:s] = base ** (-0.5 if kind == "S_leq" else 0.5)
    elif kind == "S_gt":
        d, mu = int(params["d"]), float(params["mu"])
        base = mu - lam[d:]
        if np.any(base <= 0):
            raise ValueError("weights must be positive: need mu > lambda_(d+1)")
        w[d:] = base**-0.5
    elif kind in ("T_gt", "T_leq"):
        d, x = int(params["d"]), float(params["x"])
        if not x > 0:
            raise ValueError("weights must be positive: need x > 0")
        if not 1 <= d < p:
            raise ValueError(f"d must be in 1..{p - 1}")
        if kind == "T_gt":
            w[d:] = (lam[d] - lam[d:] + x) ** -0.5
        else:
            w[:d] = (lam[:d] - lam[d - 1] + x) ** -0.5
    else:
        raise ValueError(f"unknown kind {kind!r}; expected one of {WEIGHTED_KINDS}")
    op = WeightedOperator(kind, w, _diag_operator(model, w), dict(params))
    if kind in ("S_leq", "R_leq"):
        other = w.copy()
        other[:s] = 1.0 / w[:s]
        prod = op.matrix @ _diag_operator(model, other)
        proj = build_projector(model.basis, range(1, s + 1)).matrix
        if np.max(np.abs(prod - proj)) > 1e-10 * max(1.0, float(np.max(w * other))):
            raise ArithmeticError("S R != P_(<=s) on construction")
    return op


@dataclass
class DeviationBound:
    name: str
    side: str
    x_or_y: float
    prob_bound: float
    condition_ok: bool
    condition_lhs: float | None
    condition_rhs: float | None
    params: dict = field(default_factory=dict)

    @property
    def vacuous(self) -> bool:
        return self.prob_bound > 1.0

    def reported(self) -> float:
        return min(self.prob_bound, 1.0)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "side": self.side,
            "x_or_y": _num(float(self.x_or_y)),
            "value": _num(float(self.reported())),
            "raw_value": _num(float(self.prob_bound)),
            "vacuous": self.vacuous,
            "condition_ok": bool(self.condition_ok),
            "condition_lhs": _num(self.condition_lhs),
            "condition_rhs": _num(self.condition_rhs),
            "params": {k: _num(v) for k, v in self.params.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check_d(lam, d):
    if int(d) != d or not 1 <= d < lam.size:
        raise ValueError(f"d must satisfy 1 <= d < p={lam.size}")
    return int(d)


def _tail_exp(n, x, scale, C3):
    t = x / (C3 * scale)
    return math.exp(-n * min(t * t, t))


def right_deviation_bound(spec, n, d, x, k: BoundConstants = BoundConstants()) -> DeviationBound:
    """P(lambdahat_{d+1} - lambda_{d+1} > x) <= exp(-n min(x^2/(C3 l)^2, x/(C3 l))), l = lambda_{d+1}.

    Hypothesis: max(C3 lambda_{d+1}/x, 1) sum_{k>d} lambda_k/(lambda_{d+1} - lambda_k + x) <= n/C3.
    """
    lam = _lam(spec)
    d = _check_d(lam, d)
    if not x > 0:
        raise ValueError("x must be positive")
    l1 = lam[d]
    lhs = max(k.C3 * l1 / x, 1.0) * math.fsum(lam[d:] / (l1 - lam[d:] + x))
    rhs = n / k.C3
    return DeviationBound("right_deviation", "upper_d_plus_1", x, _tail_exp(n, x, l1, k.C3),
                          lhs <= rhs, lhs, rhs, {"d": d, "n": n, "C3": k.C3})


def left_deviation_bound(spec, n, d, x, k: BoundConstants = BoundConstants()) -> DeviationBound:
    """P(lambdahat_d - lambda_d < -x) <= exp(-n min(x^2/(C3 lambda_d)^2, x/(C3 lambda_d))).

    Hypothesis: max(C3 lambda_d/x, 1) sum_{j<=d} lambda_j/(lambda_j - lambda_d + x) <= n/C3.
    """
    lam = _lam(spec)
    d = _check_d(lam, d)
    if not x > 0:
        raise ValueError("x must be positive")
    ld = lam[d - 1]
    lhs = max(k.C3 * ld / x, 1.0) * math.fsum(lam[:d] / (lam[:d] - ld + x))
    rhs = n / k.C3
    return DeviationBound("left_deviation", "lower_d", x, _tail_exp(n, x, ld, k.C3),
                          lhs <= rhs, lhs, rhs, {"d": d, "n": n, "C3": k.C3})


def gap_event_bound(spec, n, d, index, side, k: BoundConstants = BoundConstants()) -> DeviationBound:
    """Deviation by half a population gap across the split.

    side="right", index j <= d:
        P(lambdahat_{d+1} - lambda_{d+1} > (lambda_j - lambda_{d+1})/2)
        <= exp(-n (lambda_j - lambda_{d+1})^2 / (4 C3^2 lambda_j^2))
        when (lambda_j/(lambda_j - lambda_{d+1})) sum_{k>d} lambda_k/(lambda_j - lambda_k) <= n/(4 C3^2).
    side="left", index k > d:
        P(lambdahat_d - lambda_d < -(lambda_d - lambda_k)/2)
        <= 2 exp(-n (lambda_d - lambda_k)^2 / (4 C3^2 lambda_d^2))
        when (lambda_d/(lambda_d - lambda_k)) sum_{j<=d} lambda_j/(lambda_j - lambda_k) <= n/(4 C3^2).
    """
    lam = _lam(spec)
    d = _check_d(lam, d)
    p = lam.size
    rhs = n / (4 * k.C3**2)
    if side == "right":
        if not 1 <= index <= d:
            raise ValueError(f"index must be in 1..{d} for side='right'")
        top, bot = lam[index - 1], lam[d]
        gap = top - bot
        if not gap > 0:
            raise ValueError("zero gap: lambda_j == lambda_(d+1)")
        lhs = top / gap * math.fsum(lam[d:] / (top - lam[d:]))
        prob = math.exp(-n * gap**2 / (4 * k.C3**2 * top**2))
        sname = "gap_right"
    elif side == "left":
        if not d < index <= p:
            raise ValueError(f"index must be in {d + 1}..{p} for side='left'")
        top, bot = lam[d - 1], lam[index - 1]
        gap = top - bot
        if not gap > 0:
            raise ValueError("zero gap: lambda_d == lambda_k")
        lhs = top / gap * math.fsum(lam[:d] / (lam[:d] - bot))
        prob = 2.0 * math.exp(-n * gap**2 / (4 * k.C3**2 * top**2))
        sname = "gap_left"
    else:
        raise ValueError("side must be 'right' or 'left'")
    return DeviationBound("gap_event", sname, gap / 2, prob, lhs <= rhs, lhs, rhs,
                          {"d": d, "n": n, "index": index, "C3": k.C3})


def separation_condition(spec, n, d, k: BoundConstants = BoundConstants()):
    """(lhs, rhs, ok) of the one-sided separation condition

    (lambda_d/(lambda_d - lambda_{d+1})) sum_{j<=d} lambda_j/(n (lambda_j - lambda_{d+1})) <= 1/(8 C3^2).

    Up to the constant on the right, its left side is the left gap-event
    hypothesis at k = d + 1 divided by n, and the partial-trace hypothesis
    at s = d divided by n.
    """
    lam = _lam(spec)
    d = _check_d(lam, d)
    lhs = separation_lhs(lam, d, float(lam[d])) / n
    rhs = 1.0 / (8 * k.C3**2)
    return lhs, rhs, lhs <= rhs


def relative_deviation_bounds(spec, n, d, y, k: BoundConstants = BoundConstants()):
    """Relative deviations of lambdahat_d in both directions.

    upper: P((lambdahat_d - lambda_d)/lambda_d > y) <= e^{1 - c n (y ^ y^2)}
        when (1/(n (y ^ 1))) sum_{k>d} lambda_k/(lambda_d - lambda_k + y lambda_d) <= 1/(2 C3^2)
    lower: same bound for < -y, with the sum over j < d of
        lambda_j/(lambda_j - lambda_d + y lambda_d).

    ``c`` is ``k.c_eff``.
    """
    lam = _lam(spec)
    d = _check_d(lam, d)
    if not y > 0:
        raise ValueError("y must be positive")
    ld = lam[d - 1]
    c = k.c_eff
    prob = math.exp(1.0 - c * n * min(y, y * y))
    rhs = 1.0 / (2 * k.C3**2)
    lhs_up = math.fsum(lam[d:] / (ld - lam[d:] + y * ld)) / (n * min(y, 1.0))
    lhs_lo = math.fsum(lam[: d - 1] / (lam[: d - 1] - ld + y * ld)) / (n * min(y, 1.0))
    params = {"d": d, "n": n, "c": c, "C3": k.C3}
    return (
        DeviationBound("relative_deviation", "relative_upper", y, prob, lhs_up <= rhs, lhs_up, rhs, params),
        DeviationBound("relative_deviation", "relative_lower", y, prob, lhs_lo <= rhs, lhs_lo, rhs, dict(params)),
    )


def weighted_cov_concentration(spec, n, s_idx, mu, k: BoundConstants = BoundConstants()) -> DeviationBound:
    """P(||S_{<=s} Delta S_{<=s}||_op > 1/16) <= exp(-n (lambda_s - mu)^2 / (256 C3^2 lambda_s^2)).

    Hypothesis: (lambda_s/(lambda_s - mu)) sum_{j<=s} lambda_j/(lambda_j - mu) <= n/(256 C3^2).
    With mu = lambda_{d+1} this is the partial-trace hypothesis.
    """
    lam = _lam(spec)
    if int(s_idx) != s_idx or not 1 <= s_idx <= lam.size:
        raise ValueError(f"s must be in 1..{lam.size}")
    ls = lam[s_idx - 1]
    if not 0 <= mu < ls:
        raise ValueError(f"mu must lie in [0, lambda_s) = [0, {ls})")
    lhs = separation_lhs(lam, s_idx, mu)
    rhs = n / (256 * k.C3**2)
    prob = math.exp(-n * (ls - mu) ** 2 / (256 * k.C3**2 * ls**2))
    return DeviationBound("weighted_cov", "weighted_cov", mu, prob, lhs <= rhs, lhs, rhs,
                          {"s": s_idx, "n": n, "mu": mu, "C3": k.C3})


def _inv_sqrt_shift(y, s):
    e = sym_eig(y * np.eye(s.shape[0]) - s)
    return as_sym((e.vectors / np.sqrt(e.values)) @ e.vectors.T)


def operator_shift_equivalence_check(S, T, y) -> bool:
    """Check lambda_1(T) > y  <=>  lambda_1((y-S)^{-1/2}(T-S)(y-S)^{-1/2}) > 1 on one instance.

    Returns True when both sides agree.
    """
    s, t = as_sym(S), as_sym(T)
    if s.shape != t.shape:
        raise ValueError("S and T must have the same shape")
    top_s = sym_eigvals(s)[0]
    if not y > top_s:
        raise ValueError(f"y must exceed lambda_1(S) = {top_s}")
    w = _inv_sqrt_shift(y, s)
    left = bool(sym_eigvals(t)[0] > y)
    right = bool(sym_eigvals(w @ (t - s) @ w)[0] > 1.0)
    return left == right
