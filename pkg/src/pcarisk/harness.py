"""Seeded Monte Carlo replication engine and named experiments.

Replication r of an experiment always draws from RNG stream r of the base
seed, and per-replication values are reduced in index order with
``math.fsum``. Results therefore do not depend on the number of worker
threads or on scheduling.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .asymptotics import LimitLawSpec, ks_statistic, limit_law_samples
from .bounds import (
    BoundConstants,
    empirical_global_bound,
    oracle_bound,
    spiked_bounds,
)
from .concentration import left_deviation_bound, right_deviation_bound
from .models import CovModel, make_model, partial_trace, random_orthonormal_frame
from .risk import Realization, cross_overlap, erm_gap, excess_risk, hs_distance_sq
from .sampling import RngStream, draw_gaussian_samples, draw_wishart_covariance, empirical_covariance
from .spectral import sym_eig, sym_eigvals

# Frozen after pilot runs, then checked on fresh seeds by the acceptance suite.
# Deviation experiment (spiked x=1 and exponential alpha=0.5, p=10, d=3,
# n in {100, 400, 1600}, 2000 reps, seed 101): the smallest dominating C3 on
# the grid {1, 1.5, 2, 3, ...} was 3 and 2 respectively; one value serves both.
CALIBRATED_C3 = 3.0
CALIBRATION_SEED = 101
# Oracle ratio (exponential alpha=1, p=20, n=2000, d in {2, 5, 10}, 500 reps,
# seeds 5 and 6): largest ratio 1.0053.
ORACLE_RATIO_K = 1.05

# stream namespaces kept apart from replication indices
LIMIT_STREAM_BASE = 1 << 40
BATCH_STRIDE = 1 << 20


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment bit for bit."""

    model: str = "spiked"
    p: int = 40
    d: int = 15
    n: int = 500
    reps: int = 1000
    seed: int = 0
    threads: int = 1
    model_params: dict = field(default_factory=dict)
    constants: BoundConstants = field(default_factory=BoundConstants)
    x_grid: tuple = ()
    n_grid: tuple = ()
    y_grid: tuple = ()
    d_grid: tuple = ()
    out: str | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        for name in ("x_grid", "n_grid", "y_grid", "d_grid"):
            g = tuple(getattr(self, name))
            if any(b <= a for a, b in zip(g, g[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            setattr(self, name, g)

    def build_model(self, **override) -> CovModel:
        params = dict(self.model_params)
        if self.model == "spiked":
            params.setdefault("d", self.d)
        params.update(override)
        return make_model(self.model, self.p, **params)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["constants"] = self.constants.as_dict()
        for name in ("x_grid", "n_grid", "y_grid", "d_grid"):
            out[name] = list(out[name])
        return out


@dataclass
class MCResult:
    estimate: float
    stderr: float
    reps: int
    base_seed: int
    values: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr,
                "reps": self.reps, "base_seed": self.base_seed}


def mean_stderr(values) -> tuple[float, float]:
    """Mean and sample std / sqrt(m), both accumulated with fsum."""
    v = np.asarray(values, dtype=np.float64)
    m = v.size
    mean = math.fsum(v) / m
    if m < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2) / (m - 1)
    return mean, math.sqrt(var / m)


@dataclass
class SweepTable:
    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    def add(self, **row) -> None:
        missing = set(self.columns) - set(row)
        if missing:
            raise KeyError(f"row lacks columns {sorted(missing)}")
        self.rows.append(row)

    def column(self, name) -> list:
        return [row[name] for row in self.rows]

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_fmt(row[c]) for c in self.columns))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    f = float(v)
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return repr(f)


def write_manifest(path, cfg: ExperimentConfig, wall_time: float, extra: dict | None = None) -> dict:
    man = {
        "config": cfg.as_dict(),
        "constants": cfg.constants.as_dict(),
        "version": f"v{__version__}",
        "wall_time": wall_time,
    }
    if extra:
        man.update(extra)
    Path(path).write_text(json.dumps(man, indent=1, sort_keys=True, default=_json_default) + "\n")
    return man


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# ---------------------------------------------------------------------------
# replication engine

ESTIMATORS: dict[str, Callable] = {
    "excess_risk": lambda r, **kw: excess_risk(r),
    "hs_sq": lambda r, **kw: hs_distance_sq(r.P_leq, r.Phat_leq),
    "erm_gap": lambda r, **kw: erm_gap(r),
    "cross_overlap": lambda r, **kw: cross_overlap(r),
    "right_event": lambda r, x, **kw: float(r.lam_hat[r.d] - r.lam[r.d] > x),
    "left_event": lambda r, x, **kw: float(r.lam_hat[r.d - 1] - r.lam[r.d - 1] < -x),
    "empirical_global": lambda r, **kw: empirical_global_bound(r).value,
    "risk_of_estimate": lambda r, **kw: risk_of_estimate(r),
}


def register_estimator(name: str, fn: Callable) -> None:
    ESTIMATORS[name] = fn


def risk_of_estimate(r: Realization) -> float:
    """R(Phat_{<=d}) = sum_{k>d} uhat_k^T Sigma uhat_k, free of trace cancellation."""
    tail = r.u_hat[:, r.d:]
    return math.fsum(np.einsum("ik,ij,jk->k", tail, r.sigma, tail))


def parallel_map(fn, items, threads: int) -> list:
    """Map preserving input order; threads only affect wall time."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def run_replications(cfg: ExperimentConfig, estimator: str, keep_values: bool = False,
                     model: CovModel | None = None, **params) -> MCResult:
    """Monte Carlo estimate of E[estimator] with replication r on stream r."""
    if estimator not in ESTIMATORS:
        raise KeyError(f"unknown estimator {estimator!r}; known: {sorted(ESTIMATORS)}")
    fn = ESTIMATORS[estimator]
    model = cfg.build_model() if model is None else model

    def one(rep):
        return float(fn(Realization.draw(model, cfg.n, cfg.d, cfg.seed, rep), **params))

    vals = np.array(parallel_map(one, range(cfg.reps), cfg.threads))
    est, se = mean_stderr(vals)
    return MCResult(est, se, cfg.reps, cfg.seed, vals if keep_values else None)


# ---------------------------------------------------------------------------
# spectral-gap sweep for the spiked model

FIG1_COLUMNS = ["x", "mc_mean", "mc_stderr", "erm_curve", "global_curve", "scm_curve",
                "scm_lower", "C2", "C3", "C_display", "scm_condition_ok"]
DOMINANCE_SLACK = 1e-9


def figure1_sweep(cfg: ExperimentConfig) -> SweepTable:
    """Expected excess risk and three upper curves along the spike strength x.

    The same standard normal draws (stream r for replication r) are reused
    at every x. ``erm_curve`` averages the ERM gap, ``global_curve`` the
    realized block operator-norm sum, ``scm_curve`` is the spiked-model
    bound with the constants of ``cfg``. Any grid point where the Monte
    Carlo mean exceeds a curve by more than 1e-9 is listed in
    ``violations``.
    """
    if cfg.model != "spiked":
        raise ValueError("the spectral-gap sweep needs the spiked model")
    kappa = float(cfg.model_params.get("kappa", 1.0))
    grid = cfg.x_grid or tuple(round(0.05 * i, 10) for i in range(21))
    k = cfg.constants
    table = SweepTable(list(FIG1_COLUMNS))
    for x in grid:
        model = cfg.build_model(x=x)

        def one(rep, model=model):
            r = Realization.draw(model, cfg.n, cfg.d, cfg.seed, rep)
            return excess_risk(r), erm_gap(r), empirical_global_bound(r).value

        res = np.array(parallel_map(one, range(cfg.reps), cfg.threads))
        mc, se = mean_stderr(res[:, 0])
        erm, _ = mean_stderr(res[:, 1])
        glob, _ = mean_stderr(res[:, 2])
        up, lo = spiked_bounds(x, kappa, cfg.p, cfg.d, cfg.n, k)
        table.add(x=x, mc_mean=mc, mc_stderr=se, erm_curve=erm, global_curve=glob,
                  scm_curve=up.value, scm_lower=lo.value, C2=k.C2, C3=k.C3,
                  C_display=k.C_display, scm_condition_ok=up.condition_ok)
        for name, curve in (("erm_curve", erm), ("global_curve", glob), ("scm_curve", up.value)):
            if mc > curve + DOMINANCE_SLACK:
                table.violations.append({"x": x, "curve": name, "mc_mean": mc, "curve_value": curve})
    table.meta["grid"] = list(grid)
    return table


# ---------------------------------------------------------------------------
# eigenvalue deviation frequencies

DEV_COLUMNS = ["n", "x", "freq_right", "stderr_right", "bound_right", "cond_right",
               "freq_left", "stderr_left", "bound_left", "cond_left", "C3"]


def _emp_values(model, n, seed, stream):
    return sym_eigvals(empirical_covariance(draw_gaussian_samples(model, n, seed, stream)))


def deviation_frequency_experiment(cfg: ExperimentConfig) -> SweepTable:
    """Frequencies of {lambdahat_{d+1} - lambda_{d+1} > x} and {lambdahat_d - lambda_d < -x}.

    For each n in ``cfg.n_grid`` the replications are drawn once and every
    x in ``cfg.x_grid`` is evaluated on the same draws. Theoretical bounds
    use ``cfg.constants`` and carry their condition flags.
    """
    if not cfg.n_grid or not cfg.x_grid:
        raise ValueError("deviation experiment needs n_grid and x_grid")
    model = cfg.build_model()
    lam = model.values
    d = cfg.d
    k = cfg.constants
    table = SweepTable(list(DEV_COLUMNS))
    for n in cfg.n_grid:
        vals = np.array(parallel_map(lambda rep: _emp_values(model, n, cfg.seed, rep),
                                     range(cfg.reps), cfg.threads))
        right = vals[:, d] - lam[d]
        left = vals[:, d - 1] - lam[d - 1]
        for x in cfg.x_grid:
            fr = float(np.count_nonzero(right > x)) / cfg.reps
            fl = float(np.count_nonzero(left < -x)) / cfg.reps
            br = right_deviation_bound(lam, n, d, x, k)
            bl = left_deviation_bound(lam, n, d, x, k)
            table.add(n=n, x=x,
                      freq_right=fr, stderr_right=math.sqrt(fr * (1 - fr) / cfg.reps),
                      bound_right=br.prob_bound, cond_right=br.condition_ok,
                      freq_left=fl, stderr_left=math.sqrt(fl * (1 - fl) / cfg.reps),
                      bound_left=bl.prob_bound, cond_left=bl.condition_ok, C3=k.C3)
    return table


def dominance_failures(table: SweepTable) -> list:
    """Rows where a bound with a satisfied hypothesis lies below the frequency."""
    bad = []
    for row in table.rows:
        for side in ("right", "left"):
            if row[f"cond_{side}"] and row[f"freq_{side}"] > row[f"bound_{side}"]:
                bad.append((row["n"], row["x"], side))
    return bad


def monotonicity_failures(table: SweepTable) -> list:
    """Pairs violating non-increase in n (fixed x) or in x (fixed n)."""
    bad = []
    by_x, by_n = {}, {}
    for row in table.rows:
        by_x.setdefault(row["x"], []).append(row)
        by_n.setdefault(row["n"], []).append(row)
    for groups, key in ((by_x, "n"), (by_n, "x")):
        for rows in groups.values():
            rows = sorted(rows, key=lambda r: r[key])
            for a, b in zip(rows, rows[1:]):
                for side in ("right", "left"):
                    if b[f"freq_{side}"] > a[f"freq_{side}"]:
                        bad.append((key, a[key], b[key], side))
    return bad


def calibrate_c3(cfg: ExperimentConfig, candidates) -> tuple[float, SweepTable]:
    """Smallest C3 among ``candidates`` whose bounds dominate on ``cfg``'s draws."""
    last = None
    for c3 in sorted(candidates):
        trial = ExperimentConfig(**{**cfg.__dict__, "constants": cfg.constants.updated(C3=c3)})
        table = deviation_frequency_experiment(trial)
        last = table
        if not dominance_failures(table):
            return c3, table
    raise RuntimeError("no candidate C3 dominates the pilot frequencies")


# ---------------------------------------------------------------------------
# oracle ratio


ORACLE_COLUMNS = ["d", "mc_risk", "mc_stderr", "oracle_risk", "ratio", "oracle_bound",
                  "bound_condition_ok", "s", "C2", "C3"]


def oracle_ratio_grid(cfg: ExperimentConfig, inject_population: bool = False) -> SweepTable:
    """E[R(Phat_{<=d})] / tr_{>d}(Sigma) along ``cfg.d_grid``.

    With ``inject_population`` the sample covariance is replaced by Sigma,
    which makes every ratio exactly 1.
    """
    if not cfg.d_grid:
        raise ValueError("oracle ratio needs d_grid")
    model = cfg.build_model()
    lam = model.values
    k = cfg.constants
    table = SweepTable(list(ORACLE_COLUMNS))
    for d in cfg.d_grid:
        if inject_population:
            r = Realization(model, model.sigma(), d)
            vals = np.array([risk_of_estimate(r)])
        else:
            def one(rep, d=d):
                samples = draw_gaussian_samples(model, cfg.n, cfg.seed, rep)
                return risk_of_estimate(Realization.from_samples(model, samples, d))
            vals = np.array(parallel_map(one, range(cfg.reps), cfg.threads))
        mc, se = mean_stderr(vals)
        orc = partial_trace(lam, d)
        ob = oracle_bound(lam, cfg.n, d, d, k)
        table.add(d=d, mc_risk=mc, mc_stderr=se, oracle_risk=orc, ratio=mc / orc,
                  oracle_bound=ob.value, bound_condition_ok=ob.condition_ok, s=d,
                  C2=k.C2, C3=k.C3)
    return table


# ---------------------------------------------------------------------------
# convergence to the limit law

ASYM_COLUMNS = ["n", "batch", "ks", "mean_scaled", "limit_mean"]


SAMPLERS = ("rows", "wishart")


def overlap_excess(model: CovModel, sigma_hat: np.ndarray, d: int) -> float:
    """Excess risk from eigenvector overlaps split at mu = lambda_{d+1}.

    Same quantity as :func:`excess_risk` without building projector
    matrices; both parts are non-negative so nothing cancels.
    """
    lam = model.values
    e = sym_eig(sigma_hat)
    o = (model.basis.T @ e.vectors) ** 2
    mu = lam[d]
    top = (lam[:d] - mu) * o[:d, d:].sum(axis=1)
    bottom = (mu - lam[d:]) * o[d:, :d].sum(axis=1)
    return math.fsum(top) + math.fsum(bottom)


def scaled_excess_samples(model: CovModel, n: int, d: int, reps: int, seed: int,
                          first_stream: int = 0, threads: int = 1,
                          sampler: str = "rows") -> np.ndarray:
    """n * excess risk over ``reps`` replications on consecutive streams.

    ``sampler="rows"`` draws the n observations; ``"wishart"`` draws the
    sample covariance directly, which has the same law and is much cheaper
    for large n.
    """
    if sampler not in SAMPLERS:
        raise ValueError(f"sampler must be one of {SAMPLERS}")

    def one(rep):
        if sampler == "rows":
            return n * excess_risk(Realization.draw(model, n, d, seed, first_stream + rep))
        return n * overlap_excess(model, draw_wishart_covariance(model, n, seed, first_stream + rep), d)

    return np.array(parallel_map(one, range(reps), threads))


def limit_samples(model_or_spec, d: int, size: int, seed: int, batch: int = 0) -> np.ndarray:
    law = LimitLawSpec.build(model_or_spec, d, "excess_risk")
    return limit_law_samples(law, size, RngStream(seed, LIMIT_STREAM_BASE + batch))


def asymptotic_convergence(cfg: ExperimentConfig, batches: int = 5,
                           limit_draws: int = 100_000, sampler: str = "rows") -> SweepTable:
    """KS distance between n * excess risk and its limit law along ``cfg.n_grid``.

    Batch b uses replication streams b * 2^20 + r and its own limit-law
    stream, so batches are independent.
    """
    if not cfg.n_grid:
        raise ValueError("asymptotic experiment needs n_grid")
    model = cfg.build_model()
    law = LimitLawSpec.build(model, cfg.d, "excess_risk")
    table = SweepTable(list(ASYM_COLUMNS))
    for b in range(batches):
        lim = limit_samples(model, cfg.d, limit_draws, cfg.seed, b)
        for n in cfg.n_grid:
            xs = scaled_excess_samples(model, n, cfg.d, cfg.reps, cfg.seed,
                                       b * BATCH_STRIDE, cfg.threads, sampler)
            table.add(n=n, batch=b, ks=ks_statistic(xs, lim),
                      mean_scaled=mean_stderr(xs)[0], limit_mean=law.mean)
    return table


def median_ks_by_n(table: SweepTable) -> dict:
    out = {}
    for row in table.rows:
        out.setdefault(row["n"], []).append(row["ks"])
    return {n: float(np.median(v)) for n, v in sorted(out.items())}


# ---------------------------------------------------------------------------
# randomized instances for the identity and inequality suites

FAMILIES = ("exponential", "polynomial", "spiked", "clustered", "uniform")
NEAR_TIE = 1e-3


def _snap_ties(vals: np.ndarray) -> np.ndarray:
    """Turn gaps below NEAR_TIE * lambda_1 into exact ties."""
    v = np.sort(vals)[::-1].copy()
    for i in range(1, v.size):
        if 0 < v[i - 1] - v[i] < NEAR_TIE * v[0]:
            v[i] = v[i - 1]
    return v


def random_instance(seed: int, index: int, p_range=(3, 10), n_range=(20, 100)):
    """Randomized (model, d, n, stream) with a mixed spectrum and Haar basis.

    Instance ``index`` owns its own generator, so instances can be produced
    in any order. Near-ties below 1e-3 * lambda_1 are snapped to exact ties
    so that every population gap is either zero or well resolved.
    """
    g = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index, 1))))
    p = int(g.integers(p_range[0], p_range[1] + 1))
    d = int(g.integers(1, p))
    n = int(g.integers(n_range[0], n_range[1] + 1))
    fam = FAMILIES[index % len(FAMILIES)]
    j = np.arange(1, p + 1)
    if fam == "exponential":
        vals = np.exp(-g.uniform(0.1, 1.5) * j)
    elif fam == "polynomial":
        vals = j ** -g.uniform(1.1, 3.0)
    elif fam == "spiked":
        x = g.uniform(0.05, 3.0)
        kappa = g.uniform(1.0, 3.0)
        vals = np.ones(p)
        vals[:d] = g.uniform(1 + x, 1 + kappa * x, size=d)
    elif fam == "clustered":
        levels = np.sort(g.uniform(0.1, 5.0, size=int(g.integers(1, p + 1))))[::-1]
        vals = levels[np.sort(g.integers(0, levels.size, size=p))]
    else:
        vals = g.uniform(0.05, 10.0, size=p)
    vals = _snap_ties(vals * g.uniform(0.5, 2.0))
    basis = random_orthonormal_frame(p, g)
    model = make_model("custom", p, values=vals, basis=basis)
    return model, d, n, index
