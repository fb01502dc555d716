"""Command-line front end.

Every verb prints its resolved configuration as one JSON line before
running. Exit status: 0 on success, 1 when an invariant check fails
during the run, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    BoundConstants,
    bounds_to_json,
    empirical_global_bound,
    erm_deterministic_bound,
    erm_expectation_bound,
    global_expectation_bound,
    largest_admissible_s,
    linear_expansion_excess_bound,
    linear_expansion_hs_bound,
    local_global_bounds,
    minima_bounds,
    oracle_bound,
    parse_kv,
    partial_trace_bound,
    relative_gap_bounds,
    spiked_bounds,
    tail_part_bound,
    top_part_bound,
)
from .harness import (
    CALIBRATED_C3,
    CALIBRATION_SEED,
    ORACLE_RATIO_K,
    ExperimentConfig,
    asymptotic_convergence,
    deviation_frequency_experiment,
    dominance_failures,
    figure1_sweep,
    mean_stderr,
    median_ks_by_n,
    monotonicity_failures,
    oracle_ratio_grid,
    write_manifest,
)
from .identities import TOLERANCES, verify_realization
from .models import make_model, read_spectrum
from .risk import Realization, risk_report

VERBS = ("verify-identities", "excess-risk", "bounds", "figure1", "concentration",
         "asymptotics", "oracle-ratio")
BOUND_NAMES = ("erm_expectation", "global_expectation", "top_part", "tail_part", "minima",
               "local_global", "partial_trace", "relative_gap", "oracle", "spiked",
               "erm_deterministic", "empirical_global", "linear_expansion_excess",
               "linear_expansion_hs")
SLACK = 1e-9


class UsageError(Exception):
    pass


def _grid(text):
    """Comma list ``a,b,c`` or range ``start:stop:step`` (stop inclusive)."""
    if text is None:
        return ()
    text = str(text).strip()
    if ":" in text:
        parts = [float(t) for t in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise argparse.ArgumentTypeError(f"bad range {text!r}; use start:stop:step")
        start, stop, step = parts
        m = int(math.floor((stop - start) / step + 1e-9))
        return tuple(round(start + i * step, 12) for i in range(m + 1))
    return tuple(float(t) for t in text.split(",") if t.strip())


def _int_grid(text):
    return tuple(int(v) for v in _grid(text))


def _values(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _add_common(sp, model_default="spiked", p=40, d=15, n=500, reps=100):
    g = sp.add_argument_group("common")
    g.add_argument("--seed", type=int, default=None,
                   help="base seed (default: $PCA_RISK_SEED or 0)")
    g.add_argument("--threads", type=int, default=None, help="worker threads (default: cores)")
    g.add_argument("--config", default=None, help="flat key=value file with flag defaults")
    g.add_argument("--constants", default=None, help="key=value file with C2, C3, C_display, c, ...")
    g.add_argument("--out", default=None, help="output data file")
    m = sp.add_argument_group("model")
    m.add_argument("--model", default=model_default,
                   choices=("exponential", "polynomial", "spiked", "isotropic", "custom"))
    m.add_argument("--x", type=float, default=1.0, help="spike strength")
    m.add_argument("--kappa", type=float, default=1.0)
    m.add_argument("--alpha", type=float, default=None)
    m.add_argument("--sigma2", type=float, default=1.0)
    m.add_argument("--values", type=_values, default=None, help="comma-separated custom spectrum")
    m.add_argument("--spectrum-file", default=None, help="one eigenvalue per line")
    m.add_argument("--p", type=int, default=p)
    m.add_argument("--d", type=int, default=d)
    m.add_argument("--n", type=int, default=n)
    m.add_argument("--reps", type=int, default=reps)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pcarisk", description="PCA excess-risk laboratory")
    ap.add_argument("--version", action="version", version=f"pcarisk {__version__}")
    sub = ap.add_subparsers(dest="verb", metavar="VERB")
    sub.required = True

    sp = sub.add_parser("verify-identities", help="check the exact projector identities")
    _add_common(sp, "exponential", p=6, d=2, n=80, reps=100)

    sp = sub.add_parser("excess-risk", help="per-replication excess risk and its split")
    _add_common(sp)
    sp.add_argument("--mu", type=float, default=None)

    sp = sub.add_parser("bounds", help="evaluate bounds as JSON")
    _add_common(sp, reps=1)
    sp.add_argument("--which", default="all", help=f"'all' or comma list of {', '.join(BOUND_NAMES)}")
    sp.add_argument("--mu", type=float, default=None)
    sp.add_argument("--r", type=int, default=None)
    sp.add_argument("--l", type=int, default=None)
    sp.add_argument("--s", type=int, default=None)

    sp = sub.add_parser("figure1", help="excess risk and upper curves along the spike strength")
    _add_common(sp, reps=1000)
    sp.add_argument("--x-grid", type=_grid, default=_grid("0:1:0.05"))

    sp = sub.add_parser("concentration", help="eigenvalue deviation frequencies vs bounds")
    _add_common(sp, p=10, d=3, reps=2000)
    sp.add_argument("--n-grid", type=_int_grid, default=_int_grid("100,400,1600"))
    sp.add_argument("--x-grid", type=_grid, default=_grid("0.25,0.5,1,2"))

    sp = sub.add_parser("asymptotics", help="KS distance of n*excess risk to its limit law")
    _add_common(sp, "custom", p=5, d=2, reps=2000)
    sp.add_argument("--n-grid", type=_int_grid, default=_int_grid("500,2000,8000"))
    sp.add_argument("--batches", type=int, default=5)
    sp.add_argument("--limit-draws", type=int, default=100_000)
    sp.add_argument("--sampler", choices=("rows", "wishart"), default="rows")

    sp = sub.add_parser("oracle-ratio", help="E[R(Phat)] / tr_{>d} along a d grid")
    _add_common(sp, "exponential", p=20, n=2000, reps=200)
    sp.add_argument("--d-grid", type=_int_grid, default=_int_grid("2,5,10"))
    sp.add_argument("--inject-population", action="store_true")
    return ap


def _apply_config_file(ap: argparse.ArgumentParser, argv) -> None:
    """Turn ``--config FILE`` entries into subcommand defaults."""
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        entries = parse_kv(Path(known.config).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    verb = next((a for a in argv if a in VERBS), None)
    if verb is None:
        return
    sp = ap._subparsers._group_actions[0].choices[verb]
    actions = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, raw in entries.items():
        dest = key.replace("-", "_")
        if dest not in actions or dest == "config":
            raise UsageError(f"unknown config key {key!r}")
        act = actions[dest]
        if act.nargs == 0:
            defaults[dest] = raw.lower() in ("1", "true", "yes")
        elif act.type is not None:
            defaults[dest] = act.type(raw)
        else:
            defaults[dest] = raw
    sp.set_defaults(**defaults)


def _constants(args, verb) -> BoundConstants:
    k = BoundConstants(C_display=1.1) if verb == "figure1" else BoundConstants()
    if args.constants:
        try:
            overrides = parse_kv(Path(args.constants).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read constants: {exc}") from exc
        base = k.as_dict()
        base.pop("c_eff")
        base.update(overrides)
        k = BoundConstants.from_mapping(base)
    return k


def _model_params(args) -> tuple[str, int, dict]:
    kind = args.model
    params = {}
    p = args.p
    if args.spectrum_file or args.values is not None:
        vals = read_spectrum(args.spectrum_file).values if args.spectrum_file else np.array(args.values)
        kind = "custom"
        params["values"] = [float(v) for v in vals]
        p = len(vals)
    elif kind == "custom":
        raise UsageError("custom model needs --values or --spectrum-file")
    elif kind == "spiked":
        params.update(x=args.x, kappa=args.kappa, d=args.d)
    elif kind in ("exponential", "polynomial"):
        if args.alpha is not None:
            params["alpha"] = args.alpha
    elif kind == "isotropic":
        params["sigma2"] = args.sigma2
    return kind, p, params


def _experiment_config(args, verb) -> ExperimentConfig:
    kind, p, params = _model_params(args)
    seed = args.seed
    if seed is None:
        env = os.environ.get("PCA_RISK_SEED")
        try:
            seed = int(env) if env else 0
        except ValueError as exc:
            raise UsageError(f"PCA_RISK_SEED must be an integer, got {env!r}") from exc
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    return ExperimentConfig(
        model=kind, p=p, d=args.d, n=args.n, reps=args.reps, seed=seed, threads=threads,
        model_params=params, constants=_constants(args, verb),
        x_grid=getattr(args, "x_grid", ()) or (), n_grid=getattr(args, "n_grid", ()) or (),
        d_grid=getattr(args, "d_grid", ()) or (), out=args.out,
    )


def _print_config(verb, cfg: ExperimentConfig, extra: dict) -> None:
    rec = {"verb": verb, **cfg.as_dict(), **extra}
    print(json.dumps(rec, sort_keys=True, default=float))


def _write(path, text) -> None:
    if path:
        Path(path).write_text(text)


def _manifest_path(out):
    return str(out) + ".manifest.json"


# ---------------------------------------------------------------------------
# verbs


def cmd_verify_identities(args, cfg) -> int:
    model = cfg.build_model()
    counts = {name: {"checks": 0, "failed": 0, "degenerate": 0, "max_err": 0.0} for name in TOLERANCES}
    failures = []
    for rep in range(cfg.reps):
        r = Realization.draw(model, cfg.n, cfg.d, cfg.seed, rep)
        for c in verify_realization(r):
            rec = counts[c.name]
            rec["checks"] += 1
            if c.degenerate:
                rec["degenerate"] += 1
                continue
            measure, _ = TOLERANCES[c.name]
            err = c.rel_err if measure == "rel" else c.abs_err / c.scale
            rec["max_err"] = max(rec["max_err"], err)
            if not c.passed():
                rec["failed"] += 1
                if len(failures) < 20:
                    failures.append({"rep": rep, **c.to_dict()})
    summary = {"families": counts, "tolerances": {k: list(v) for k, v in TOLERANCES.items()},
               "failures": failures, "all_passed": not any(v["failed"] for v in counts.values())}
    _write(cfg.out, json.dumps(summary, indent=1, sort_keys=True) + "\n")
    for name, rec in counts.items():
        print(f"{name}: {rec['checks']} checks, {rec['failed']} failed, "
              f"{rec['degenerate']} degenerate, max error {rec['max_err']:.3e}")
    return 0 if summary["all_passed"] else 1


def cmd_excess_risk(args, cfg) -> int:
    model = cfg.build_model()
    cols = ["rep", "excess", "part_leq", "part_gt", "mu", "hs_sq", "erm_gap"]
    lines = [",".join(cols)]
    excess, bad = [], 0
    for rep in range(cfg.reps):
        r = Realization.draw(model, cfg.n, cfg.d, cfg.seed, rep)
        rep_ = risk_report(r, args.mu)
        excess.append(rep_.excess)
        if not (-SLACK <= rep_.excess <= rep_.erm_gap + SLACK):
            bad += 1
        lines.append(",".join([str(rep)] + [repr(float(getattr(rep_, c))) for c in cols[1:]]))
    _write(cfg.out, "\n".join(lines) + "\n")
    mean, se = mean_stderr(excess)
    print(f"mean excess risk {mean!r} (stderr {se!r}) over {cfg.reps} replications; "
          f"{bad} violations of 0 <= excess <= ERM gap")
    return 1 if bad else 0


def _select(which: str):
    if which == "all":
        return list(BOUND_NAMES)
    names = [w.strip() for w in which.split(",") if w.strip()]
    unknown = [w for w in names if w not in BOUND_NAMES]
    if unknown:
        raise UsageError(f"unknown bound names {unknown}; known: {', '.join(BOUND_NAMES)}")
    return names


def cmd_bounds(args, cfg) -> int:
    names = _select(args.which)
    model = cfg.build_model()
    lam = model.values
    d, n, k = cfg.d, cfg.n, cfg.constants
    mu = float(lam[d]) if args.mu is None else args.mu
    r_idx = d if args.r is None else args.r
    l_idx = model.p + 1 if args.l is None else args.l
    s_idx = args.s if args.s is not None else (largest_admissible_s(lam, n, d, k) or d)
    out = []
    real = None
    for name in names:
        if name in ("erm_deterministic", "empirical_global", "linear_expansion_excess",
                    "linear_expansion_hs"):
            if real is None:
                real = Realization.draw(model, n, d, cfg.seed, 0)
            if name.startswith("linear_expansion") and not lam[d - 1] > lam[d]:
                continue
            fn = {"erm_deterministic": erm_deterministic_bound,
                  "empirical_global": empirical_global_bound,
                  "linear_expansion_excess": linear_expansion_excess_bound,
                  "linear_expansion_hs": linear_expansion_hs_bound}[name]
            out.append(fn(real))
        elif name == "erm_expectation":
            out.append(erm_expectation_bound(lam, n, d, k))
        elif name == "global_expectation":
            out.append(global_expectation_bound(lam, n, d, k))
        elif name == "top_part":
            out.append(top_part_bound(lam, n, d, mu, r_idx, k))
        elif name == "tail_part":
            out.append(tail_part_bound(lam, n, d, mu, l_idx, k))
        elif name == "minima":
            out.extend(minima_bounds(lam, n, d, k))
        elif name == "local_global":
            out.extend(local_global_bounds(lam, n, d, k))
        elif name == "partial_trace":
            out.append(partial_trace_bound(lam, n, d, s_idx, min(r_idx, s_idx), k))
        elif name == "relative_gap":
            out.extend(relative_gap_bounds(lam, n, d, k))
        elif name == "oracle":
            out.append(oracle_bound(lam, n, d, s_idx, k))
        elif name == "spiked":
            if cfg.model == "spiked":
                out.extend(spiked_bounds(args.x, args.kappa, cfg.p, d, n, k))
    text = bounds_to_json(out) + "\n"
    _write(cfg.out, text)
    for b in out:
        flag = "" if b.condition_ok else "  [hypothesis not satisfied]"
        print(f"{b.name}: {b.value!r}{flag}")
    if cfg.out is None:
        print(text, end="")
    return 0


def cmd_figure1(args, cfg) -> int:
    if cfg.model != "spiked":
        raise UsageError("figure1 needs --model spiked")
    t0 = time.perf_counter()
    table = figure1_sweep(cfg)
    out = cfg.out or "figure1.csv"
    table.write_csv(out)
    write_manifest(_manifest_path(out), cfg, time.perf_counter() - t0,
                   {"violations": table.violations})
    for row in table.rows:
        print(f"x={row['x']:.2f} mc={row['mc_mean']:.4f} erm={row['erm_curve']:.4f} "
              f"global={row['global_curve']:.4f} scm={row['scm_curve']:.4f}")
    if table.violations:
        print(f"{len(table.violations)} dominance violations", file=sys.stderr)
        return 1
    return 0


def cmd_concentration(args, cfg) -> int:
    t0 = time.perf_counter()
    table = deviation_frequency_experiment(cfg)
    out = cfg.out or "concentration.csv"
    table.write_csv(out)
    mono = monotonicity_failures(table)
    dom = dominance_failures(table)
    write_manifest(_manifest_path(out), cfg, time.perf_counter() - t0,
                   {"monotonicity_failures": mono, "dominance_failures": dom,
                    "calibrated_C3": CALIBRATED_C3, "calibration_seed": CALIBRATION_SEED})
    nesting = [m for m in mono if m[0] == "x"]
    print(f"{len(table.rows)} grid points; {len(mono)} monotonicity failures "
          f"({len(nesting)} in x); {len(dom)} points where a bound with a satisfied "
          f"hypothesis lies below the frequency (C3={cfg.constants.C3})")
    # frequencies of nested events must be non-increasing in x
    return 1 if nesting else 0


def cmd_asymptotics(args, cfg) -> int:
    t0 = time.perf_counter()
    table = asymptotic_convergence(cfg, args.batches, args.limit_draws, args.sampler)
    out = cfg.out or "asymptotics.csv"
    table.write_csv(out)
    med = median_ks_by_n(table)
    write_manifest(_manifest_path(out), cfg, time.perf_counter() - t0,
                   {"median_ks": {str(k): v for k, v in med.items()}, "sampler": args.sampler,
                    "batches": args.batches, "limit_draws": args.limit_draws})
    for n, v in med.items():
        print(f"n={n}: median KS {v:.5f}")
    return 0


def cmd_oracle_ratio(args, cfg) -> int:
    t0 = time.perf_counter()
    table = oracle_ratio_grid(cfg, args.inject_population)
    out = cfg.out or "oracle_ratio.csv"
    table.write_csv(out)
    ratios = table.column("ratio")
    write_manifest(_manifest_path(out), cfg, time.perf_counter() - t0,
                   {"inject_population": args.inject_population, "K": ORACLE_RATIO_K,
                    "max_ratio": max(ratios), "within_K": max(ratios) <= ORACLE_RATIO_K})
    bad = 0
    for row in table.rows:
        print(f"d={row['d']}: ratio {row['ratio']!r} (K={ORACLE_RATIO_K})")
        # the estimated projector can never beat the oracle
        if row["ratio"] < 1 - 1e-9:
            bad += 1
    return 1 if bad else 0


COMMANDS = {
    "verify-identities": cmd_verify_identities,
    "excess-risk": cmd_excess_risk,
    "bounds": cmd_bounds,
    "figure1": cmd_figure1,
    "concentration": cmd_concentration,
    "asymptotics": cmd_asymptotics,
    "oracle-ratio": cmd_oracle_ratio,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        _apply_config_file(ap, argv)
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    except (UsageError, ValueError, argparse.ArgumentTypeError) as exc:
        ap.print_usage(sys.stderr)
        print(f"pcarisk: error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = _experiment_config(args, args.verb)
        extra = {k: v for k, v in vars(args).items()
                 if k not in ("config", "constants", "verb") and k not in cfg.as_dict()}
        cfg.build_model()
        _print_config(args.verb, cfg, extra)
        return COMMANDS[args.verb](args, cfg)
    except (UsageError, ValueError, KeyError) as exc:
        print(f"pcarisk {args.verb}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
