"""Closed-form excess-risk bounds evaluated as explicit numbers.

Every evaluator returns a :class:`BoundValue`. Hypotheses are never used to
skip a bound: the value is always computed and ``condition_ok`` records
whether the hypothesis holds.

Division follows the convention x/0 = +inf for x > 0. A term whose
numerator carries an explicit zero weight (for example lambda_j - mu = 0)
is zero even if its denominator vanishes.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .models import CovModel, Spectrum, partial_trace
from .risk import Realization, excess_risk, risk_parts, hs_distance_sq
from .spectral import hs_inner, op_norm, spectral_norm

INF = math.inf


@dataclass(frozen=True)
class BoundConstants:
    """Numerical constants entering the bounds.

    Attributes
    ----------
    C1 : float
        Sub-Gaussian norm constant. Carried for provenance only.
    C2 : float
        Fourth-moment constant; 1 for Gaussian data.
    C3 : float
        Constant of the sample-covariance concentration inequality. Its
        numeric value is not known, so it is a knob.
    C_display : float or None
        When set, replaces the leading constant of every expectation bound
        (used with 1.1 for the spectral-gap sweep).
    c1 : float or None
        Lower-gap ratio for the relative-gap bounds. ``None`` picks the
        largest admissible value for the spectrum at hand.
    c : float or None
        Exponent constant of the relative eigenvalue deviation bound;
        defaults to 1/(32 C3^2).
    c_lower : float
        Constant in front of the spiked minimax lower bound.
    """

    C1: float = 1.0
    C2: float = 1.0
    C3: float = 1.0
    C_display: float | None = None
    c1: float | None = None
    c: float | None = None
    c_lower: float = 1.0

    def __post_init__(self):
        for name in ("C1", "C2", "C3", "c_lower"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("C_display", "c1", "c"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive when set")

    @property
    def c_eff(self) -> float:
        return self.c if self.c is not None else 1.0 / (32.0 * self.C3**2)

    def lead(self, default: float) -> float:
        return self.C_display if self.C_display is not None else default

    @property
    def C_top(self) -> float:
        """8 C2 + 8 C3^2, the constant of the two-part bound."""
        return 8.0 * self.C2 + 8.0 * self.C3**2

    @property
    def C_partial(self) -> float:
        """16 C2 + 8 C3^2, the constant of the partial-trace bound."""
        return 16.0 * self.C2 + 8.0 * self.C3**2

    def as_dict(self) -> dict:
        out = asdict(self)
        out["c_eff"] = self.c_eff
        return out

    @classmethod
    def from_mapping(cls, m: dict) -> "BoundConstants":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(m) - known
        if bad:
            raise ValueError(f"unknown constants: {sorted(bad)}")
        vals = {}
        for key, v in m.items():
            if v is None or (isinstance(v, str) and v.strip().lower() in ("", "none")):
                vals[key] = None
            else:
                vals[key] = float(v)
        return cls(**vals)

    @classmethod
    def from_file(cls, path) -> "BoundConstants":
        return cls.from_mapping(parse_kv(Path(path).read_text()))

    def updated(self, **kw) -> "BoundConstants":
        return replace(self, **kw)


def parse_kv(text: str) -> dict:
    """Parse flat ``key=value`` text; ``#`` starts a comment."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _num(x):
    if isinstance(x, (float, np.floating)) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class BoundValue:
    name: str
    value: float
    condition_ok: bool = True
    condition_lhs: float | None = None
    condition_rhs: float | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": _num(float(self.value)),
            "condition_ok": bool(self.condition_ok),
            "condition_lhs": _num(self.condition_lhs),
            "condition_rhs": _num(self.condition_rhs),
            "params": {k: _num(v) for k, v in self.params.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def bounds_to_json(bounds) -> str:
    return json.dumps([b.to_dict() for b in bounds], indent=1)


def _lam(spec) -> np.ndarray:
    if isinstance(spec, CovModel):
        return spec.values
    if isinstance(spec, Spectrum):
        return spec.values
    return Spectrum(spec).values


def _div(num: float, den: float) -> float:
    """num/den with x/0 = inf for x > 0 and an explicit zero numerator winning."""
    if num == 0.0:
        return 0.0
    if den == 0.0:
        return INF if num > 0 else -INF
    return num / den


def _fsum(terms) -> float:
    terms = list(terms)
    if any(math.isinf(t) for t in terms):
        return math.fsum(t for t in terms if math.isinf(t))
    return math.fsum(terms)


def _check_d(lam, d, allow_zero=False):
    p = lam.size
    lo = 0 if allow_zero else 1
    if int(d) != d or not lo <= d < p:
        raise ValueError(f"d must satisfy {lo} <= d < p={p}, got {d}")
    return int(d)


def _base_params(d, n, k: BoundConstants, **extra):
    out = {"d": d, "n": n, "C2": k.C2, "C3": k.C3}
    if k.C_display is not None:
        out["C_display"] = k.C_display
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# bounds from the basic ERM inequality


def erm_deterministic_bound(r: Realization) -> BoundValue:
    """min(sqrt(2d) ||Delta||_2, 2 ||Delta||_2^2 / (lambda_d - lambda_{d+1}))."""
    d = r.d
    hs = math.sqrt(hs_inner(r.delta, r.delta))
    gap = float(r.lam[d - 1] - r.lam[d])
    first = math.sqrt(2 * d) * hs
    second = _div(2 * hs * hs, gap)
    return BoundValue(
        "erm_deterministic", min(first, second), True, None, None,
        {"d": d, "hs_delta": hs, "global_branch": first, "local_branch": second},
    )


def erm_expectation_bound(spec, n: int, d: int, k: BoundConstants = BoundConstants()) -> BoundValue:
    """min(sqrt(4 C2 d) tr / sqrt(n), 4 C2 tr^2 / (n (lambda_d - lambda_{d+1})))."""
    lam = _lam(spec)
    d = _check_d(lam, d)
    tr = math.fsum(lam)
    gap = float(lam[d - 1] - lam[d])
    first = math.sqrt(4 * k.C2 * d) * tr / math.sqrt(n)
    second = _div(4 * k.C2 * tr * tr, n * gap)
    return BoundValue(
        "erm_expectation", min(first, second), True, None, None,
        _base_params(d, n, k, global_branch=first, local_branch=second),
    )


def global_expectation_bound(spec, n: int, d: int, k: BoundConstants = BoundConstants()) -> BoundValue:
    """C sum_{j<=d} max(sqrt(lambda_j tr_{>=j} / n), tr_{>=j} / n), C = C_display or 1."""
    lam = _lam(spec)
    d = _check_d(lam, d, allow_zero=True)
    C = k.lead(1.0)
    terms = []
    for j in range(1, d + 1):
        tj = partial_trace(lam, j, strict=False)
        terms.append(max(math.sqrt(lam[j - 1] * tj / n), tj / n))
    return BoundValue("global_expectation", C * math.fsum(terms), True, None, None,
                      _base_params(d, n, k, C=C))


def empirical_global_bound(r: Realization) -> BoundValue:
    """sum_{j<=d} ||P_{>=j} Delta P_{>=j}||_op on the realization."""
    dm = r.u.T @ r.delta @ r.u
    blocks = [op_norm(dm[j:, j:]) for j in range(r.d)]
    return BoundValue("empirical_global", math.fsum(blocks), True, None, None,
                      {"d": r.d, "blocks": blocks})


# ---------------------------------------------------------------------------
# two-part bounds


def _check_mu(lam, d, mu):
    lo, hi = float(lam[d]), float(lam[d - 1])
    if not lo <= mu <= hi:
        raise ValueError(f"mu={mu} must lie in [lambda_(d+1), lambda_d] = [{lo}, {hi}]")


def top_part_bound(spec, n, d, mu, r_idx, k: BoundConstants = BoundConstants()) -> BoundValue:
    """Bound on E[sum_{j<=d} (lambda_j - mu) <P_j, Phat_{>d}>].

    C sum_{j<=r} (lambda_j - mu) lambda_j tr / (n (lambda_j - lambda_{d+1})^2)
    + sum_{j=r+1}^{min(d, r+p-d)} (lambda_j - mu), with C = 8 C2 + 8 C3^2.
    """
    lam = _lam(spec)
    d = _check_d(lam, d)
    p = lam.size
    _check_mu(lam, d, mu)
    if int(r_idx) != r_idx or not 0 <= r_idx <= d:
        raise ValueError(f"r must be in 0..{d}")
    C = k.lead(k.C_top)
    tr = math.fsum(lam)
    l1 = lam[d]
    first = _fsum(_div((lam[j] - mu) * lam[j] * tr, n * (lam[j] - l1) ** 2) for j in range(r_idx))
    upper = min(d, r_idx + p - d)
    second = math.fsum(lam[j - 1] - mu for j in range(r_idx + 1, upper + 1))
    return BoundValue("top_part", C * first + second if first else second, True, None, None,
                      _base_params(d, n, k, mu=mu, r=r_idx, C=C, main=C * first, trivial=second))


def tail_part_bound(spec, n, d, mu, l_idx, k: BoundConstants = BoundConstants()) -> BoundValue:
    """Bound on E[sum_{k>d} (mu - lambda_k) <P_k, Phat_{<=d}>].

    C sum_{k>=l} (mu - lambda_k) lambda_k tr / (n (lambda_d - lambda_k)^2)
    + sum_{k=max(d+1, l-d)}^{l-1} (mu - lambda_k) + (mu - lambda_p) exp(-n/(32 C3^2)),
    valid when d <= n/(16 C3^2). ``l_idx = p + 1`` empties the first sum.
    """
    lam = _lam(spec)
    d = _check_d(lam, d)
    p = lam.size
    _check_mu(lam, d, mu)
    if int(l_idx) != l_idx or not d + 1 <= l_idx <= p + 1:
        raise ValueError(f"l must be in {d + 1}..{p + 1}")
    C = k.lead(k.C_top)
    tr = math.fsum(lam)
    ld = lam[d - 1]
    first = _fsum(_div((mu - lam[i - 1]) * lam[i - 1] * tr, n * (ld - lam[i - 1]) ** 2)
                  for i in range(l_idx, p + 1))
    middle = math.fsum(mu - lam[i - 1] for i in range(max(d + 1, l_idx - d), l_idx))
    rem = (mu - lam[-1]) * math.exp(-n / (32 * k.C3**2))
    value = (C * first if first else 0.0) + middle + rem
    rhs = n / (16 * k.C3**2)
    return BoundValue("tail_part", value, d <= rhs, float(d), rhs,
                      _base_params(d, n, k, mu=mu, l=l_idx, C=C, main=C * first,
                                   trivial=middle, remainder=rem))


def minima_bounds(spec, n, d, k: BoundConstants = BoundConstants()) -> tuple[BoundValue, BoundValue]:
    """Term-wise minima versions of the two-part bound (any mu in the gap)."""
    lam = _lam(spec)
    d = _check_d(lam, d)
    p = lam.size
    C = k.lead(k.C_top)
    tr = math.fsum(lam)
    l1, ld = lam[d], lam[d - 1]
    top = []
    for j in range(d):
        g = lam[j] - l1
        top.append(min(_div(C * lam[j] * tr, n * g), g))
    tail = []
    for i in range(d, p):
        g = ld - lam[i]
        tail.append(min(_div(C * lam[i] * tr, n * g), g))
    rem = (ld - lam[-1]) * math.exp(-n / (32 * k.C3**2))
    rhs = n / (16 * k.C3**2)
    a = BoundValue("minima_top", math.fsum(top), True, None, None,
                   _base_params(d, n, k, C=C))
    b = BoundValue("minima_tail", math.fsum(tail) + rem, d <= rhs, float(d), rhs,
                   _base_params(d, n, k, C=C, remainder=rem))
    return a, b


def local_global_bounds(spec, n, d, k: BoundConstants = BoundConstants()) -> tuple[BoundValue, BoundValue]:
    """Local (1/n) and global (1/sqrt(n)) bounds on the expected excess risk."""
    lam = _lam(spec)
    d = _check_d(lam, d)
    p = lam.size
    C = k.lead(k.C_top)
    tr = math.fsum(lam)
    l1, ld = lam[d], lam[d - 1]
    s1 = math.fsum(lam[j] * tr / (n * (lam[j] - l1)) for j in range(d) if lam[j] > l1)
    s2 = math.fsum(lam[i] * tr / (n * (ld - lam[i])) for i in range(d, p) if lam[i] < ld)
    local = C * s1 + C * s2 + ld * math.exp(-n / (32 * k.C3**2))
    glob = (math.fsum(math.sqrt(C * lam[j] * tr / n) for j in range(d))
            + math.sqrt(C * d * partial_trace(lam, d) * tr / n))
    rhs = n / (16 * k.C3**2)
    ok = d <= rhs
    return (
        BoundValue("local", local, ok, float(d), rhs, _base_params(d, n, k, C=C)),
        BoundValue("global", glob, ok, float(d), rhs, _base_params(d, n, k, C=C)),
    )


# ---------------------------------------------------------------------------
# partial-trace bounds


def separation_lhs(spec, s_idx: int, mu: float) -> float:
    """(lambda_s/(lambda_s - mu)) sum_{j<=s} lambda_j/(lambda_j - mu), inf when lambda_s <= mu."""
    lam = _lam(spec)
    ls = lam[s_idx - 1]
    if ls <= mu:
        return INF
    return ls / (ls - mu) * math.fsum(lam[j] / (lam[j] - mu) for j in range(s_idx))


def partial_trace_condition(spec, n, d, s_idx, k: BoundConstants = BoundConstants()):
    """(lhs, rhs, ok) of the partial-trace hypothesis at index s with mu = lambda_{d+1}."""
    lam = _lam(spec)
    lhs = separation_lhs(lam, s_idx, float(lam[d]))
    rhs = n / (256 * k.C3**2)
    return lhs, rhs, lhs <= rhs


def largest_admissible_s(spec, n, d, k: BoundConstants = BoundConstants()) -> int:
    """Largest s <= d satisfying the partial-trace hypothesis, 0 if none."""
    for s in range(d, 0, -1):
        if partial_trace_condition(spec, n, d, s, k)[2]:
            return s
    return 0


def partial_trace_bound(spec, n, d, s_idx, r_idx, k: BoundConstants = BoundConstants()) -> BoundValue:
    """Bound on E[E_{<=d}(lambda_{d+1})] with the tail trace tr_{>s} in front.

    C sum_{j<=r} lambda_j tr_{>s} / (n (lambda_j - lambda_{d+1}))
    + 2 sum_{r<j<=d} (lambda_j - lambda_{d+1}) + R, where
    R = C sum_{j<=r} lambda_j tr / (n (lambda_j - lambda_{d+1}))
        * exp(-n (lambda_s - lambda_{d+1})^2 / (16 C3 lambda_s)^2)
    and C = 16 C2 + 8 C3^2.
    """
    lam = _lam(spec)
    d = _check_d(lam, d)
    if int(s_idx) != s_idx or not 1 <= s_idx <= d:
        raise ValueError(f"s must be in 1..{d}")
    if int(r_idx) != r_idx or not 0 <= r_idx <= s_idx:
        raise ValueError(f"r must be in 0..{s_idx}")
    C = k.lead(k.C_partial)
    tr = math.fsum(lam)
    l1 = lam[d]
    ls = lam[s_idx - 1]
    tr_s = partial_trace(lam, s_idx)
    w = _fsum(_div(lam[j], n * (lam[j] - l1)) for j in range(r_idx))
    main = C * w * tr_s if w else 0.0
    gaps = 2.0 * math.fsum(lam[j] - l1 for j in range(r_idx, d))
    expo = math.exp(-n * (ls - l1) ** 2 / (16 * k.C3 * ls) ** 2)
    rem = C * w * tr * expo if w else 0.0
    lhs, rhs, ok = partial_trace_condition(lam, n, d, s_idx, k)
    return BoundValue("partial_trace", main + gaps + rem, ok, lhs, rhs,
                      _base_params(d, n, k, s=s_idx, r=r_idx, C=C, main=main,
                                   gap_sum=gaps, remainder=rem))


def relative_gap_bounds(spec, n, d, k: BoundConstants = BoundConstants()) -> tuple[BoundValue, BoundValue]:
    """Local and global bounds under lambda_d - lambda_{d+1} >= c1 (lambda_d - lambda_p).

    local  = C/(c1 n) (tr_{>d} + tr exp(-c1^2 n (lambda_d - lambda_p)^2 / (Ce lambda_d^2)))
             * sum_{j<=d} lambda_j/(lambda_j - lambda_{d+1})
    global = Cg/(c1 sqrt(n)) (sqrt(tr_{>s}) + sqrt(tr) exp(-c1^2 n (lambda_s - lambda_p)^2 / (Ce lambda_s^2)))
             * sum_{j<=d} sqrt(lambda_j)

    with Ce = 256 C3^2, C = 16 C2 + 8 C3^2, Cg = C + 512 C3^2 (or C_display
    for both) and s the largest index satisfying the partial-trace
    hypothesis. For s = 0 the exponential factor is taken as 1.
    """
    lam = _lam(spec)
    d = _check_d(lam, d)
    l1, ld, lp = lam[d], lam[d - 1], lam[-1]
    if k.c1 is not None:
        c1 = k.c1
    else:
        c1 = (ld - l1) / (ld - lp) if ld > lp else 1.0
    c1_ok = c1 > 0 and (ld - l1) >= c1 * (ld - lp) * (1 - 1e-12)
    Ce = 256 * k.C3**2
    C = k.lead(k.C_partial)
    Cg = k.lead(k.C_partial + 512 * k.C3**2)
    tr = math.fsum(lam)
    wsum = _fsum(_div(lam[j], lam[j] - l1) for j in range(d))
    expo_d = math.exp(-c1**2 * n * (ld - lp) ** 2 / (Ce * ld**2))
    local = _div(C, c1 * n) * (partial_trace(lam, d) + tr * expo_d) * wsum
    lhs_d, rhs, ok_d = partial_trace_condition(lam, n, d, d, k)
    s = largest_admissible_s(lam, n, d, k)
    if s > 0:
        ls = lam[s - 1]
        expo_s = math.exp(-c1**2 * n * (ls - lp) ** 2 / (Ce * ls**2))
    else:
        expo_s = 1.0
    glob = (Cg / (c1 * math.sqrt(n))
            * (math.sqrt(partial_trace(lam, s)) + math.sqrt(tr) * expo_s)
            * math.fsum(np.sqrt(lam[:d])))
    common = dict(c1=c1, c1_ok=c1_ok)
    return (
        BoundValue("relative_gap_local", local, bool(c1_ok and ok_d), lhs_d, rhs,
                   _base_params(d, n, k, C=C, s=d, **common)),
        BoundValue("relative_gap_global", glob, bool(c1_ok), None, None,
                   _base_params(d, n, k, C=Cg, s=s, **common)),
    )


def oracle_bound(spec, n, d, s_idx, k: BoundConstants = BoundConstants()) -> BoundValue:
    """Bound on E[R(Phat_{<=d})] of oracle-inequality form.

    C_lead tr_{>s} + C_rem tr exp(-n (lambda_s - lambda_{d+1})^2 / (Ce lambda_s^2))
    with Ce = 256 C3^2, C_rem = C/(256 C3^2), C_lead = 2 + C_rem,
    C = 16 C2 + 8 C3^2. With C_display set, all three constants take that value.
    """
    lam = _lam(spec)
    d = _check_d(lam, d)
    if int(s_idx) != s_idx or not 1 <= s_idx <= d:
        raise ValueError(f"s must be in 1..{d}")
    if k.C_display is not None:
        c_lead = c_rem = Ce = k.C_display
    else:
        Ce = 256 * k.C3**2
        c_rem = k.C_partial / Ce
        c_lead = 2.0 + c_rem
    tr = math.fsum(lam)
    ls, l1 = lam[s_idx - 1], lam[d]
    value = c_lead * partial_trace(lam, s_idx) + c_rem * tr * math.exp(-n * (ls - l1) ** 2 / (Ce * ls**2))
    lhs, rhs, ok = partial_trace_condition(lam, n, d, s_idx, k)
    return BoundValue("oracle", value, ok, lhs, rhs,
                      _base_params(d, n, k, s=s_idx, C_lead=c_lead, C_rem=c_rem, C_exp=Ce,
                                   oracle_risk=partial_trace(lam, d)))


def spiked_bounds(x, kappa, p, d, n, k: BoundConstants = BoundConstants()) -> tuple[BoundValue, BoundValue]:
    """Upper and minimax-lower bounds for the spiked class.

    upper = min(C kappa (1+kappa x) d (p-d) / (n x), d kappa x, (p-d) kappa x)
            + kappa x exp(-n/(32 C3^2)),  C = C_display or 8 C2 + 8 C3^2
    lower = c_lower min((1+x) d (p-d) / (n x), d x, (p-d) x)
    """
    if x < 0 or kappa < 1 or not 1 <= d < p:
        raise ValueError("need x >= 0, kappa >= 1, 1 <= d < p")
    C = k.lead(k.C_top)
    up = min(_div(C * kappa * (1 + kappa * x) * d * (p - d), n * x), d * kappa * x, (p - d) * kappa * x)
    up += kappa * x * math.exp(-n / (32 * k.C3**2))
    lo = k.c_lower * min(_div((1 + x) * d * (p - d), n * x), d * x, (p - d) * x)
    rhs = n / (16 * k.C3**2)
    params = _base_params(d, n, k, x=x, kappa=kappa, p=p, C=C)
    return (
        BoundValue("spiked_upper", up, d <= rhs, float(d), rhs, params),
        BoundValue("spiked_lower", lo, True, None, None, dict(params, c_lower=k.c_lower)),
    )


# ---------------------------------------------------------------------------
# per-realization chains and linear-expansion bounds


def davis_kahan_chain(r: Realization) -> tuple[float, float, float]:
    """(||P - Phat||_2^2, 2 E_{<=d}(lambda_{d+1}) / gap, 2 E / gap)."""
    d = r.d
    gap = float(r.lam[d - 1] - r.lam[d])
    if not gap > 0:
        raise ValueError("chain needs lambda_d > lambda_{d+1}")
    leq, _ = risk_parts(r, float(r.lam[d]))
    return hs_distance_sq(r.P_leq, r.Phat_leq), 2 * leq / gap, 2 * excess_risk(r) / gap


def _split_gaps(r: Realization) -> np.ndarray:
    d = r.d
    lam = r.lam
    g = lam[:d, None] - lam[None, d:]
    if np.any(g <= 0):
        raise ValueError("linear-expansion bounds need lambda_d > lambda_{d+1}")
    return g


def _expansion_pieces(r: Realization):
    """Quantities shared by the two linear-expansion bounds, in eigen-coordinates.

    With D = U^T Delta U, P_j Delta P_k has HS norm |D_jk| and
    P_j Delta P_k Delta P_B has HS norm |D_jk| ||D[k, B]||.
    """
    d, p = r.d, r.p
    lam = r.lam
    g = _split_gaps(r)
    D = r.u.T @ r.delta @ r.u
    D = 0.5 * (D + D.T)
    head, tail = slice(0, d), slice(d, p)
    Dx = D[head, tail]  # D_jk, j <= d < k
    gj = lam[:d] - lam[d]  # lambda_j - lambda_{d+1}
    gk = lam[d - 1] - lam[d:]  # lambda_d - lambda_k
    # row j: sum_k D_jk / (l_j - l_k) * D[k, :]
    M_top = (Dx / g) @ D[tail, :]
    # row k: sum_j D_kj / (l_j - l_k) * D[j, :]
    M_tail = (Dx / g).T @ D[head, :]
    return D, Dx, g, gj, gk, M_top, M_tail


def linear_expansion_excess_bound(r: Realization) -> BoundValue:
    """Per-realization bound on the excess risk from linear expansions.

    Main part::

        32 sum_{j<=d<k} D_jk^2 / (l_j - l_k)
        + 128 sum_j ||sum_k P_j Delta P_k Delta P_{>d} / (l_j - l_k)||^2 / (l_j - l_{d+1})
        + 128 sum_k ||sum_j P_k Delta P_j Delta P_{<=d} / (l_j - l_k)||^2 / (l_d - l_k)

    plus the event-weighted remainders R1 and R2. In R2 the second term
    uses ||P_k Delta P_{>d}||^2, which is what the mirrored argument
    produces.
    """
    d, p = r.d, r.p
    lam, lh = r.lam, r.lam_hat
    D, Dx, g, gj, gk, M_top, M_tail = _expansion_pieces(r)
    head, tail = slice(0, d), slice(d, p)
    main1 = 32.0 * float(np.sum(Dx**2 / g))
    top_tail = np.sum(M_top[:, tail] ** 2, axis=1)  # ||... Delta P_{>d}||^2 per j
    top_head = np.sum(M_top[:, head] ** 2, axis=1)
    tail_head = np.sum(M_tail[:, head] ** 2, axis=1)
    tail_tail = np.sum(M_tail[:, tail] ** 2, axis=1)
    main2 = 128.0 * float(np.sum(top_tail / gj))
    main3 = 128.0 * float(np.sum(tail_head / gk))

    # R1
    s_top = 1.0 / np.sqrt(gj)
    SDS_top = s_top[:, None] * D[head, head] * s_top[None, :]
    ev_sds1 = op_norm(SDS_top) > 1.0 / 16
    ev_right = (lh[d] - lam[d]) > gj / 2
    q1 = float(np.sum(np.sum((M_top[:, head] * s_top[None, :]) ** 2, axis=1) / gj))
    ev1 = q1 > 1.0 / 128
    r1 = (4.0 * float(np.sum(gj * ev_right))
          + (32.0 * float(np.sum(np.sum(D[head, head] ** 2, axis=1) / gj)) if ev_sds1 else 0.0)
          + (128.0 * float(np.sum(top_head / gj)) if ev1 else 0.0))

    # R2
    s_tail = 1.0 / np.sqrt(gk)
    SDS_tail = s_tail[:, None] * D[tail, tail] * s_tail[None, :]
    ev_sds2 = op_norm(SDS_tail) > 1.0 / 16
    ev_left = (lh[d - 1] - lam[d - 1]) < -gk / 2
    q2 = float(np.sum(np.sum((M_tail[:, tail] * s_tail[None, :]) ** 2, axis=1) / gk))
    ev2 = q2 > 1.0 / 128
    r2 = (4.0 * float(np.sum(gk * ev_left))
          + (32.0 * float(np.sum(np.sum(D[tail, tail] ** 2, axis=1) / gk)) if ev_sds2 else 0.0)
          + (128.0 * float(np.sum(tail_tail / gk)) if ev2 else 0.0))

    value = main1 + main2 + main3 + r1 + r2
    return BoundValue(
        "linear_expansion_excess", value, True, None, None,
        {"d": d, "main": main1 + main2 + main3, "R1": r1, "R2": r2,
         "event_weighted_top": bool(ev_sds1), "event_weighted_tail": bool(ev_sds2),
         "event_E1": bool(ev1), "event_E2": bool(ev2),
         "right_deviations": int(np.sum(ev_right)), "left_deviations": int(np.sum(ev_left))},
    )


def linear_expansion_hs_bound(r: Realization) -> BoundValue:
    """Per-realization bound on ||P_{<=d} - Phat_{<=d}||_2^2.

    Valid on the event lambdahat_{d+1} - lambda_{d+1} <= (lambda_d - lambda_{d+1})/2,
    which is reported as ``condition_ok``. Value::

        4 sum D_jk^2/(l_j - l_k)^2
        + 64 sum_j ||sum_k P_j Delta P_k Delta P_{>d}/(l_j - l_k)||^2 / (l_j - l_{d+1})^2
        + 32 ||S^2 Delta S||_op^2 E_{<=d}
        + 64 sum_j ||sum_k P_j Delta P_k Delta S/(l_j - l_k)||^2 / (l_j - l_{d+1})^2 E_{<=d}

    with S = sum_{j<=d} (l_j - l_{d+1})^{-1/2} P_j and E_{<=d} = E_{<=d}(l_{d+1}).
    """
    d, p = r.d, r.p
    lam, lh = r.lam, r.lam_hat
    D, Dx, g, gj, gk, M_top, M_tail = _expansion_pieces(r)
    head, tail = slice(0, d), slice(d, p)
    s_top = 1.0 / np.sqrt(gj)
    t1 = 4.0 * float(np.sum(Dx**2 / g**2))
    t2 = 64.0 * float(np.sum(np.sum(M_top[:, tail] ** 2, axis=1) / gj**2))
    s2ds = (s_top**2)[:, None] * D[head, head] * s_top[None, :]
    e_leq, _ = risk_parts(r, float(lam[d]))
    t3 = 32.0 * spectral_norm(s2ds) ** 2 * e_leq
    t4 = 64.0 * float(np.sum(np.sum((M_top[:, head] * s_top[None, :]) ** 2, axis=1) / gj**2)) * e_leq
    gap = lam[d - 1] - lam[d]
    lhs = float(lh[d] - lam[d])
    return BoundValue(
        "linear_expansion_hs", t1 + t2 + t3 + t4, lhs <= gap / 2, lhs, float(gap / 2),
        {"d": d, "terms": [t1, t2, t3, t4], "e_leq": e_leq},
    )


# ---------------------------------------------------------------------------


def all_expectation_bounds(spec, n, d, k: BoundConstants = BoundConstants(), mu=None,
                           r_idx=None, l_idx=None, s_idx=None) -> list[BoundValue]:
    """Every spectrum-level bound with default index choices.

    Defaults: mu = lambda_{d+1}, r = d, l = p + 1, s = largest admissible
    index (or d when none is admissible).
    """
    lam = _lam(spec)
    d = _check_d(lam, d)
    p = lam.size
    mu = float(lam[d]) if mu is None else mu
    r_idx = d if r_idx is None else r_idx
    l_idx = p + 1 if l_idx is None else l_idx
    if s_idx is None:
        s_idx = largest_admissible_s(lam, n, d, k) or d
    out = [
        erm_expectation_bound(lam, n, d, k),
        global_expectation_bound(lam, n, d, k),
        top_part_bound(lam, n, d, mu, r_idx, k),
        tail_part_bound(lam, n, d, mu, l_idx, k),
        *minima_bounds(lam, n, d, k),
        *local_global_bounds(lam, n, d, k),
        partial_trace_bound(lam, n, d, s_idx, min(r_idx, s_idx), k),
        *relative_gap_bounds(lam, n, d, k),
        oracle_bound(lam, n, d, s_idx, k),
    ]
    return out
