"""Command-line entry point: ``backhaul-mg <command> <config> ...``.

``<config>`` is a config file path or a preset name (default, case1,
case2, case3).
"""

from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from ..baselines import oca
from ..game import NoInteriorEquilibrium, bmmg_mixed_strategy, build_game, solve_fair_pmne
from ..learning import (ContractionWarning, bge_fixed_point, contraction_condition,
                        epsilon_bound, max_deviation_gain, run_learning)
from .config import ConfigError, build_scenario, load_config
from .runner import (_LEARN, _SCENARIO, ALGORITHMS, aggregate, compare_report, run_many,
                     bmrl_metrics, stream, sweep, write_csv, write_trace)


def _scenario_and_game(cfg, run):
    sc = build_scenario(cfg, stream(cfg["run.seed"], run, _SCENARIO))
    return sc, build_game(sc, unit=cfg["game.unit"])


def cmd_phi(args, cfg):
    sc, game = _scenario_and_game(cfg, args.run)
    print(f"phi = {game.phi}")
    print(f"predicted files = {game.g} (per SBS: {sc.demands.num_predicted.tolist()})")
    return 0


def cmd_pmne(args, cfg):
    sc, game = _scenario_and_game(cfg, args.run)
    try:
        p = solve_fair_pmne(game)
    except NoInteriorEquilibrium as exc:
        print(f"no interior fair equilibrium: {exc}")
        return 1
    print(f"p* = {p:.10f}  (phi = {game.phi}, G = {game.g})")
    for n, F in enumerate(sc.demands.num_predicted):
        probs = bmmg_mixed_strategy(int(F), p)
        mode = int(np.argmax(probs))
        print(f"SBS {n}: F = {F}, most likely request count {mode} (prob {probs[mode]:.4f})")
        if args.full:
            print("  " + " ".join(f"{x:.4g}" for x in probs))
    return 0


def cmd_bge(args, cfg):
    _, game = _scenario_and_game(cfg, args.run)
    kappa = args.kappa if args.kappa is not None else cfg["learning.kappa"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ContractionWarning)
        p = bge_fixed_point(game, kappa, tol=args.tol)
    for w in caught:
        print(f"warning: {w.message}")
    gain = max_deviation_gain(p, game)
    print(f"kappa = {kappa:g}, contraction inequality {'holds' if contraction_condition(game, kappa) else 'violated'}")
    print(f"p: min {p.min():.6f}  mean {p.mean():.6f}  max {p.max():.6f}  sum {p.sum():.3f}  (phi = {game.phi})")
    print(f"max deviation gain {gain:.6g} <= ln2/kappa = {epsilon_bound(kappa):.6g}")
    return 0


def cmd_learn(args, cfg):
    sc, game = _scenario_and_game(cfg, args.run)
    res = run_learning(game, cfg.schedule(), cfg.noise_for(game.u_c[0] if game.g else 0.0),
                       stream(cfg["run.seed"], args.run, _LEARN), cfg.convergence(),
                       trace=bool(args.trace))
    if args.trace:
        write_trace(args.trace, cfg, args.run, res.trace, game)
    o = oca(sc, game.phi)
    m = bmrl_metrics(sc, game, res, args.run, o.total_files)
    status = "converged" if res.converged else "NOT converged (cap reached)"
    print(f"{status}: iterations = {res.iterations} (sub-slots simulated {res.steps})")
    print(f"expected requests = {m.requested_files:.2f} files, {m.requested_bits / 1e6:.1f} Mbit "
          f"(phi = {game.phi}, OCA {o.requested_bits / 1e6:.1f} Mbit)")
    print(f"p: min {res.p.min():.4f}  mean {res.p.mean():.4f}  max {res.p.max():.4f}")
    if args.full:
        print(" ".join(f"{x:.4f}" for x in res.p))
    return 0


def _apply_runs(cfg, runs):
    return cfg.with_overrides({"run.runs": runs}) if runs is not None else cfg


def cmd_sweep(args, cfg):
    cfg = _apply_runs(cfg, args.runs)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    result = sweep(cfg, args.axis, values)
    if args.out:
        write_csv(result, args.out, deterministic=args.deterministic_output)
    else:
        write_csv(result, sys.stdout, deterministic=args.deterministic_output)
    if args.summary:
        for line in compare_report(list(result.per_run.values())).lines():
            print(line, file=sys.stderr)
    return 0


def cmd_compare(args, cfg):
    cfg = _apply_runs(cfg, args.runs)
    metrics = run_many(cfg)
    print(f"{'algorithm':<6} {'requested Mbit':>15} {'std':>9} {'slack Mbps':>11} {'iterations':>11}")
    for a in ALGORITHMS:
        ag = aggregate(0, a, metrics[a])
        print(f"{a:<6} {ag.mean_requested_bits / 1e6:>15.2f} {ag.std_requested_bits / 1e6:>9.2f} "
              f"{ag.mean_slack_bps / 1e6:>11.2f} {ag.iterations_mean:>11.1f}")
    for line in compare_report(metrics).lines():
        print(line)
    return 0


def cmd_verify(args, cfg):
    from .verify import verify_instance

    checks = verify_instance(cfg, args.run)
    for c in checks:
        print(c.line())
    return 0 if all(c.ok for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="backhaul-mg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="config file or preset name")
        p.add_argument("--run", type=int, default=0, help="run index (seed stream)")
        p.set_defaults(func=func)
        return p

    add("phi", cmd_phi, "print the capacity threshold")
    p = add("pmne", cmd_pmne, "fair mixed equilibrium and per-SBS request-count distributions")
    p.add_argument("--full", action="store_true")
    p = add("bge", cmd_bge, "solve the Boltzmann-Gibbs equilibrium")
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    p = add("learn", cmd_learn, "run the decentralized learner")
    p.add_argument("--trace", help="write a JSON-lines trace here")
    p.add_argument("--full", action="store_true", help="print every probability")
    p = add("sweep", cmd_sweep, "sweep an axis and emit CSV")
    p.add_argument("--axis", required=True, choices=["file_count", "capacity", "kappa"])
    p.add_argument("--values", required=True, help="comma-separated, SI suffixes allowed")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--deterministic-output", action="store_true", help="omit the timestamp line")
    p.add_argument("--summary", action="store_true", help="print the comparison summary to stderr")
    p = add("compare", cmd_compare, "all four algorithms plus summary")
    p.add_argument("--runs", type=int, default=None)
    add("verify", cmd_verify, "run invariant checks on the instance")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
