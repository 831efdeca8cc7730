"""Batch front end: ``aoiretx {solve,verify,simulate,oracle,sweep,compare}``.

Exit codes: 0 success, 1 invalid input, 2 a structural or oracle check failed,
3 an iterative solver did not converge.
"""
from __future__ import annotations

import argparse
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

from . import serialize
from .model import Params, TruncatedSpace, build_kernel
from .sim import (
    ALWAYS_PREEMPT,
    NEVER_PREEMPT,
    THRESHOLD,
    extend_policy,
    make_baseline,
    simulate,
    simulate_drop_baseline,
    trace,
)
from .solver import (
    ConvergenceError,
    OracleSizeError,
    brute_force_optimal,
    discounted_vi,
    evaluate_policy_exact,
    rvia,
)
from .structure import run_all_checks

EXIT_OK, EXIT_INPUT, EXIT_CHECK, EXIT_CONVERGENCE = 0, 1, 2, 3
COMMANDS = ("solve", "verify", "simulate", "oracle", "sweep", "compare")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    p: float
    q1: float
    q2: float
    N: int = 200
    alpha: float = 0.95
    tol: float = 1e-9
    max_iter: int = 1_000_000
    horizon: int = 1_000_000
    seed: int = 1
    out_dir: str = "."

    @property
    def params(self) -> Params:
        return Params(self.p, self.q1, self.q2)


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"float": float, "int": int, "str": str}


def _raw_pairs(text: str):
    """``[(lineno, key, value)]`` from key=value text with ``#`` comments."""
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {line!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        if not value:
            raise ConfigError(f"line {n}: key {key!r} has no value")
        out.append((n, key, value))
    return out


def _cast(key, value, where):
    try:
        v = _CASTS[_TYPES[key]](value)
    except ValueError:
        raise ConfigError(f"{where}: key {key!r}: cannot parse {value!r}") from None
    if key == "p" and not 0 < v <= 1:
        raise ConfigError(f"{where}: key 'p': p must be > 0 and <= 1")
    if key in ("q1", "q2") and not 0 < v <= 1:
        raise ConfigError(f"{where}: key {key!r}: {key} must be > 0 and <= 1")
    if key == "N" and v < 1:
        raise ConfigError(f"{where}: key 'N': N must be >= 1")
    if key == "tol" and not v > 0:
        raise ConfigError(f"{where}: key 'tol': tol must be > 0")
    if key == "alpha" and not 0 < v < 1:
        raise ConfigError(f"{where}: key 'alpha': alpha must lie in (0, 1)")
    if key in ("max_iter", "horizon") and v < 1:
        raise ConfigError(f"{where}: key {key!r}: must be >= 1")
    return v


def _build(values: dict, lines: dict) -> RunConfig:
    if "q1" in values and "q2" in values and values["q1"] > values["q2"]:
        where = f"line {lines['q1']}" if "q1" in lines else "config"
        raise ConfigError(f"{where}: key 'q1': q1 must be ≤ q2")
    for key in ("p", "q1", "q2"):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    return RunConfig(**values)


def parse_config(text: str, overrides=None) -> RunConfig:
    """Parse key=value text; ``overrides`` (already typed or strings) win over the text."""
    values, lines = {}, {}
    for n, key, value in _raw_pairs(text):
        values[key] = _cast(key, value, f"line {n}")
        lines[key] = n
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = _cast(key, value, "flag") if isinstance(value, str) else value
            lines.pop(key, None)
    return _build(values, lines)


# ---------------------------------------------------------------- commands


def _out(cfg, name):
    return os.path.join(cfg.out_dir, name)


def cmd_solve(cfg, args):
    space = TruncatedSpace(cfg.N)
    res = rvia(space, cfg.params, cfg.tol, cfg.max_iter)
    serialize.atomic_write(_out(cfg, "values.csv"), serialize.values_csv(res.values))
    serialize.atomic_write(_out(cfg, "policy.csv"), serialize.policy_csv(res.policy))
    print(f"gain {serialize.fmt(res.gain)}")
    print(f"iterations {res.iterations} residual {serialize.fmt(res.residual)}")
    return EXIT_OK


def cmd_verify(cfg, args):
    N_solve = cfg.N + args.pad
    space = TruncatedSpace(N_solve)
    prm = cfg.params
    K = build_kernel(space, prm)
    V = discounted_vi(space, prm, cfg.alpha, cfg.tol, cfg.max_iter, kernel=K)
    pol = rvia(space, prm, cfg.tol, cfg.max_iter, kernel=K).policy
    if args.pad:
        V, pol = V.restrict(cfg.N), pol.restrict(cfg.N)
    reports = run_all_checks(V, pol, prm)
    text = serialize.report_text(reports)
    serialize.atomic_write(_out(cfg, "report.txt"), text)
    serialize.atomic_write(_out(cfg, "violations.csv"), serialize.violations_csv(reports))
    sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


def _sim_policy(cfg, args):
    prm = cfg.params
    if args.policy == "always_preempt":
        return make_baseline(ALWAYS_PREEMPT)
    if args.policy == "never_preempt":
        return make_baseline(NEVER_PREEMPT)
    if args.policy == "threshold":
        theta = args.theta if args.theta is not None else _switch_theta(prm)
        if theta is None:
            raise ConfigError("threshold policy needs --theta when q1 == q2")
        return make_baseline(THRESHOLD(theta))
    res = rvia(TruncatedSpace(cfg.N), prm, cfg.tol, cfg.max_iter)
    return extend_policy(res.policy, "optimal")


def cmd_simulate(cfg, args):
    prm = cfg.params
    if args.policy == "drop_baseline":
        avg = simulate_drop_baseline(prm, cfg.horizon, cfg.seed)
        row = [prm.p, prm.q1, prm.q2, "drop_baseline(engine-check)", cfg.horizon, cfg.seed, avg, ""]
    else:
        policy = _sim_policy(cfg, args)
        st = simulate(policy, prm, cfg.horizon, cfg.seed)
        row = serialize.stats_row(st)
        if args.trace:
            rows = ((t, v1, serialize.fmt_v2(v2), b, a)
                    for t, v1, v2, b, a in trace(policy, prm, cfg.horizon, cfg.seed))
            serialize.atomic_write(_out(cfg, "trace.csv"),
                                   serialize.to_csv(["slot", "v1", "v2", "b", "action"], rows))
    text = serialize.to_csv(serialize.STATS_HEADER, [row])
    serialize.atomic_write(_out(cfg, "stats.csv"), text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(cfg, args):
    space = TruncatedSpace(cfg.N)
    prm = cfg.params
    K = build_kernel(space, prm)
    g_oracle, _ = brute_force_optimal(space, prm, kernel=K)
    res = rvia(space, prm, cfg.tol, cfg.max_iter, kernel=K)
    delta = abs(g_oracle - res.gain)
    print(f"oracle gain {serialize.fmt(g_oracle)}")
    print(f"rvia gain {serialize.fmt(res.gain)}")
    print(f"|Δgain| = {delta:.3e}")
    if delta < 1e-6:
        print("|Δgain| < 1e-6")
        return EXIT_OK
    return EXIT_CHECK


def _switch_theta(prm):
    return None if prm.q1 == prm.q2 else prm.q2 / (prm.q2 - prm.q1)


def cmd_compare(cfg, args):
    space = TruncatedSpace(cfg.N)
    prm = cfg.params
    K = build_kernel(space, prm)
    res = rvia(space, prm, cfg.tol, cfg.max_iter, kernel=K)
    candidates = [("optimal", res.policy),
                  (ALWAYS_PREEMPT.label, make_baseline(ALWAYS_PREEMPT).on(space)),
                  (NEVER_PREEMPT.label, make_baseline(NEVER_PREEMPT).on(space))]
    theta = _switch_theta(prm)
    if theta is not None:
        kind = THRESHOLD(theta)
        candidates.append((kind.label, make_baseline(kind).on(space)))
    rows = [(name, evaluate_policy_exact(space, prm, pol, kernel=K).gain) for name, pol in candidates]
    text = serialize.to_csv(["policy", "gain"], rows)
    serialize.atomic_write(_out(cfg, "compare.csv"), text)
    sys.stdout.write(text)
    return EXIT_OK


def _sweep_point(job):
    p, q1, q2, N, tol, max_iter = job
    res = rvia(TruncatedSpace(N), Params(p, q1, q2), tol, max_iter)
    return (p, q1, q2, N, res.gain, res.iterations, res.residual)


def cmd_sweep(cfg_text, args):
    """Grid over comma-separated p, q1, q2; infeasible combinations (q1 > q2) are skipped."""
    raw = {key: value for _, key, value in _raw_pairs(cfg_text)}
    grids = {}
    for key in ("p", "q1", "q2"):
        value = raw.pop(key, None)
        if getattr(args, key) is not None:
            value = getattr(args, key)
        if value is None:
            raise ConfigError(f"missing required key {key!r}")
        grids[key] = [_cast(key, t.strip(), "sweep list") for t in str(value).split(",") if t.strip()]
    scalars = {k: _cast(k, v, "config") for k, v in raw.items()}
    scalars.update(_scalar_overrides(args))
    base = RunConfig(p=1.0, q1=1.0, q2=1.0, **scalars)  # grid values replace p, q1, q2
    jobs = []
    for p, q1, q2 in itertools.product(grids["p"], grids["q1"], grids["q2"]):
        if q1 > q2:
            print(f"skipping p={p} q1={q1} q2={q2}: q1 must be ≤ q2", file=sys.stderr)
            continue
        jobs.append((p, q1, q2, base.N, base.tol, base.max_iter))
    workers = args.workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    text = serialize.to_csv(serialize.SWEEP_HEADER, rows)
    serialize.atomic_write(os.path.join(base.out_dir, "sweep.csv"), text)
    sys.stdout.write(text)
    return EXIT_OK


def _scalar_overrides(args):
    keys = ("N", "alpha", "tol", "max_iter", "horizon", "seed")
    out = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    if args.out is not None:
        out["out_dir"] = args.out
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aoiretx", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key=value file")
    ap.add_argument("--p", type=str)
    ap.add_argument("--q1", type=str)
    ap.add_argument("--q2", type=str)
    ap.add_argument("--N", type=int)
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--max-iter", dest="max_iter", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--horizon", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--policy", default="optimal",
                    choices=("optimal", "always_preempt", "never_preempt", "threshold",
                             "drop_baseline"), help="simulate: policy to run")
    ap.add_argument("--theta", type=float, help="simulate: THRESHOLD parameter")
    ap.add_argument("--trace", action="store_true", help="simulate: dump per-slot trace.csv")
    ap.add_argument("--pad", type=int, default=0,
                    help="verify: solve on N+pad and check the rows v1 <= N")
    ap.add_argument("--workers", type=int, help="sweep: worker processes")
    return ap


def run_command(name, config_text, args) -> int:
    handlers = {"solve": cmd_solve, "verify": cmd_verify, "simulate": cmd_simulate,
                "oracle": cmd_oracle, "compare": cmd_compare}
    try:
        if name == "sweep":
            return cmd_sweep(config_text, args)
        overrides = _scalar_overrides(args)
        overrides.update({k: getattr(args, k) for k in ("p", "q1", "q2")
                          if getattr(args, k) is not None})
        cfg = parse_config(config_text, overrides)
        if args.pad < 0:
            raise ConfigError("--pad must be >= 0")
        return handlers[name](cfg, args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, OracleSizeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    text = ""
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    return run_command(args.command, text, args)


if __name__ == "__main__":
    sys.exit(main())
