"""Command-line entry point.

Three commands over a config file: `run` (closed-loop episodes, trace
CSV + summary JSON + set JSON), `sweep` (cost statistics across seeds
per parameter value, CSV), `envelope` (feasible-envelope fraction per
parameter value for CE and benchmark, JSON).  Exit codes: 0 completed
(recorded infeasibility included), 2 config error, 3 solver failure.
"""

import argparse
import json
import math
import sys

import numpy as np

from .config import (
    ConfigError,
    build_experiment,
    config_hash,
    load_config,
    sweep_targets,
)
from .geom import LpError
from .mpc import SolverError
from .sim.quadrotor import learned_wind_grid
from .sim.envelope import feasible_fraction
from .sim.run import (
    CONTROLLERS,
    parallel_map,
    run_episode,
    run_experiment,
    setup_experiment,
    write_trace_csv,
)
from .sim.seeding import make_rng
from .terminal import RpiIterationError

__all__ = ["main", "cmd_run", "cmd_sweep", "cmd_envelope"]


def _parse_values(text):
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values: {exc}") from exc
    if not values:
        raise ConfigError("--values: empty list")
    return values


def _sidecar(out, suffix):
    stem = out[:-4] if out.endswith(".csv") else out
    return f"{stem}.{suffix}"


def _episode_summary(result):
    return {
        "realized_cost": None if math.isnan(result.realized_cost)
        else result.realized_cost,
        "feasible": result.feasible,
        "violation": result.violation,
        "final_x": [float(v) for v in result.final_x],
        "final_position_error":
            float(np.linalg.norm(result.final_x[:2])),
        "steps": len(result.trace) - 1,
    }


def cmd_run(args):
    cfg = load_config(args.config)
    if args.controller:
        cfg = cfg.replace_key("run", "controller", args.controller)
    if args.refresh:
        cfg = cfg.replace_key("bounds", "refresh", args.refresh)
    controller = cfg.run.get("controller", "ce")
    if controller not in CONTROLLERS:
        raise ConfigError(f"[run] unknown controller {controller!r}")
    episodes = cfg.run.get("episodes", 1)
    exp, wind = build_experiment(cfg, seed=args.seed)
    seed = cfg.run.get("seed", 0) if args.seed is None else args.seed
    state = setup_experiment(exp, make_rng(seed, 0))
    results = []
    for ep in range(episodes):
        results.append(run_episode(exp, state, make_rng(seed, 1, ep),
                                   controller, collect_sets=ep == 0))
    summary = {
        "name": exp.name,
        "controller": controller,
        "seed": seed,
        "config_hash": config_hash(cfg),
        "episodes": [_episode_summary(r) for r in results],
        "realized_cost": _episode_summary(results[-1])["realized_cost"],
        "feasible": all(r.feasible for r in results),
    }
    if wind is not None:
        summary["wind"] = {
            "theta_deg": wind.theta_deg, "v0": wind.v0, "ell": wind.ell,
            "c_d": wind.c_d, "offset": wind.offset,
        }
        summary["learned_wind"] = learned_wind_grid(
            exp.plant.features, state.estimator.committed.W_hat,
            c_d=wind.c_d)
    if args.out:
        write_trace_csv(args.out, results[-1].trace, exp.plant.n,
                        exp.plant.m)
        with open(_sidecar(args.out, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=1)
        sets = results[0].sets
        if sets is not None:
            with open(_sidecar(args.out, "sets.json"), "w") as fh:
                json.dump(sets, fh, indent=1)
    else:
        json.dump(summary, sys.stdout, indent=1)
        print()
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config)
    section, key = sweep_targets(cfg, args.param)
    values = _parse_values(args.values)
    if args.controller:
        cfg = cfg.replace_key("run", "controller", args.controller)
    controller = cfg.run.get("controller", "ce")
    seeds = cfg.sweep.get("seeds", 20)
    base_seed = cfg.run.get("seed", 0) if args.seed is None else args.seed
    episodes = cfg.run.get("episodes", 1)

    def one(task):
        value, seed_index = task
        varied = cfg.replace_key(section, key, value)
        exp, _ = build_experiment(varied, seed=base_seed + seed_index)
        results = run_experiment(exp, episodes, base_seed + seed_index,
                                 controller=controller)
        last = results[-1]
        return value, last.realized_cost, last.feasible

    tasks = [(v, s) for v in values for s in range(seeds)]
    rows = parallel_map(one, tasks)
    lines = ["param,n_seeds,n_feasible,cost_mean,cost_2sigma"]
    for value in values:
        costs = [c for v, c, ok in rows if v == value and ok]
        n_ok = len(costs)
        if n_ok == 0:
            lines.append(f"{value},{seeds},0,,")
            continue
        mean = float(np.mean(costs))
        two_sigma = 2.0 * float(np.std(costs))
        lines.append(f"{value},{seeds},{n_ok},{mean!r},{two_sigma!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_envelope(args):
    cfg = load_config(args.config)
    section, key = sweep_targets(cfg, args.param)
    values = _parse_values(args.values)
    seed = cfg.run.get("seed", 0) if args.seed is None else args.seed
    grid = args.grid

    def one(task):
        value, controller = task
        varied = cfg.replace_key(section, key, value)
        exp, _ = build_experiment(varied, seed=seed)
        state = setup_experiment(exp, make_rng(seed, 0))
        fraction, hull = feasible_fraction(exp, state, controller,
                                           grid=grid,
                                           rng=make_rng(seed, 4))
        return value, controller, fraction, hull

    tasks = [(v, c) for v in values for c in ("ce", "benchmark")]
    rows = parallel_map(one, tasks)
    out = {"param": args.param, "grid": grid,
           "ce": {}, "benchmark": {}, "hulls": {"ce": {}, "benchmark": {}}}
    for value, controller, fraction, hull in rows:
        out[controller][repr(float(value))] = fraction
        out["hulls"][controller][repr(float(value))] = hull
    text = json.dumps(out, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="armpc",
        description="Adaptive robust tube MPC experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="TOML or JSON experiment config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)

    p_run = sub.add_parser("run", help="closed-loop episodes")
    common(p_run)
    p_run.add_argument("--controller", choices=CONTROLLERS, default=None)
    p_run.add_argument("--refresh", choices=("episode", "step"),
                       default=None)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="cost vs parameter value")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True)
    p_sweep.add_argument("--values", required=True)
    p_sweep.add_argument("--controller", choices=CONTROLLERS, default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_env = sub.add_parser("envelope", help="feasible-envelope fractions")
    common(p_env)
    p_env.add_argument("--param", required=True)
    p_env.add_argument("--values", required=True)
    p_env.add_argument("--grid", type=int, default=41)
    p_env.set_defaults(fn=cmd_envelope)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, LpError, RpiIterationError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
