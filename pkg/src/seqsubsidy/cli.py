"""Command-line interface: solve, optimize, simulate, sweep, region.

Exit codes: 0 success, 2 configuration or validation error, 3 resource cap
exceeded, 4 numerical failure (quadrature or convexity violation).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ProtocolConfig, apply_overrides, load_config, parse_override
from .core import DomainError
from .experiments import sweep
from .mdp import DEFAULT_STATE_CAP, ResourceError, layer_bounds, solve
from .mixture import MixtureSpec, QuadratureError, rejection_region_table
from .report import RunManifest, write_csv, write_json
from .rollout import RolloutConfig, exact_outcome, simulate, simulate_prior_mixture
from .subsidy import VERTEX_SLACK, ConvexityError, optimize

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_NUMERICAL = 0, 2, 3, 4
CONJECTURE_NOTE = ("uniform-mixture test process: convexity and optimality of the subsidy search "
                   "are conjectured, not proven, for this statistic")


def _load(args) -> tuple[ProtocolConfig, dict]:
    _, raw = load_config(args.config)
    overrides = dict(parse_override(s) for s in args.set)
    raw = apply_overrides(raw, overrides)
    cfg = ProtocolConfig.from_dict(raw)
    cfg.validate()
    return cfg, raw


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, cfg: ProtocolConfig, seed=None) -> RunManifest:
    return RunManifest(args.command, cfg.config_hash(), list(args.set), seed, __version__)


def _finish(out: Path, manifest: RunManifest) -> None:
    (out / "manifest.json").write_text(json.dumps(manifest.finish(), indent=2, sort_keys=True) + "\n")


def _notes(cfg: ProtocolConfig) -> list[str]:
    return [CONJECTURE_NOTE] if cfg.test_process_kind == "uniform-mixture" else []


def _check_epsilon(cfg: ProtocolConfig, eps: float) -> None:
    if not 0.0 <= eps <= cfg.epsilon_max:
        raise ConfigError(f"epsilon={eps} outside [0, {cfg.epsilon_max}]")


def cmd_solve(args) -> int:
    cfg, _ = _load(args)
    _check_epsilon(cfg, args.epsilon)
    out = _out_dir(args)
    manifest = _manifest(args, cfg)
    policy = solve(cfg, args.epsilon, cap=args.state_cap)
    manifest.mdp_solve_count = 1
    root = policy.q_averaged()
    write_json(out / "summary.json", {
        "epsilon": args.epsilon,
        "first_action": root.first_action,
        "value": root.value,
        "v_zero": root.v_zero,
        "a_cost": root.a_cost,
        "p_approve": root.p_approve,
        "p_optout": root.p_optout,
        "social_utility": cfg.rho_social * root.p_approve - args.epsilon * root.a_cost,
        "notes": _notes(cfg),
    }, manifest)
    if args.dump_policy:
        write_csv(out / "policy.csv", "policy", _policy_rows(policy), manifest)
    _finish(out, manifest)
    print(f"first action n={root.first_action}, value={root.value:.12g}, p_approve={root.p_approve:.12g}")
    return EXIT_OK


def _policy_rows(policy):
    tab = policy.table()
    for l in range(policy.cfg.horizon_T + 1):
        lo, hi = layer_bounds(l, policy.cfg.n_max)
        for n in range(lo, hi + 1):
            for x in range(n + 1):
                yield {
                    "l": l, "total_n": n, "total_x": x,
                    "action": int(tab.action[l][n, x]),
                    "v_zero": tab.v_zero[l][n, x],
                    "a_cost": tab.a_cost[l][n, x],
                    "p_approve": tab.p_approve[l][n, x],
                    "p_optout": tab.p_optout[l][n, x],
                    "absorbing": bool(tab.absorbing[l][n, x]),
                }


def _vertex_rows(solution):
    return [
        {"epsilon": v.epsilon, "social_utility": v.social_utility(solution.cfg.rho_social),
         "agent_value": v.agent_value, "policy_id": v.policy_id}
        for v in solution.vertices
    ]


def cmd_optimize(args) -> int:
    cfg, _ = _load(args)
    out = _out_dir(args)
    manifest = _manifest(args, cfg)
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    solution = optimize(cfg, log=log, vertex_slack=args.vertex_slack)
    manifest.mdp_solve_count = solution.mdp_solve_count
    star = solution.vertices[solution.star_index].policy
    write_csv(out / "vertices.csv", "vertices", _vertex_rows(solution), manifest)
    write_json(out / "solution.json", {
        "eps_star": solution.eps_star,
        "u_star": solution.u_star,
        "n_intervals": solution.n_intervals,
        "mdp_solve_count": solution.mdp_solve_count,
        "first_action_at_eps_star": star.first_action,
        "p_approve_at_eps_star": star.p_approve,
        "p_optout_at_eps_star": star.p_optout,
        "vertex_slack": args.vertex_slack,
        "notes": _notes(cfg),
    }, manifest)
    _finish(out, manifest)
    print(f"eps_star={solution.eps_star:.12g} u_star={solution.u_star:.12g} "
          f"intervals={solution.n_intervals} solves={solution.mdp_solve_count}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg, raw = _load(args)
    out = _out_dir(args)
    manifest = _manifest(args, cfg, seed=args.seed)
    if args.use_optimal:
        solution = optimize(cfg)
        policy = solution.star_policy()
        manifest.mdp_solve_count = solution.mdp_solve_count + 1
    else:
        _check_epsilon(cfg, args.epsilon)
        policy = solve(cfg, args.epsilon)
        manifest.mdp_solve_count = 1
    theta = args.theta_star if args.theta_star is not None else float(raw.get("theta_star", 0.65))
    rcfg = RolloutConfig(theta_star=theta, num_rollouts=args.rollouts,
                         bootstrap_resamples=args.resamples, rng_seed=args.seed)
    if args.prior_mixture:
        batch = simulate_prior_mixture(policy, cfg, rcfg)
    else:
        batch = simulate(policy, cfg, rcfg)
    write_csv(out / "summary.csv", "simulate", batch.summary_rows(), manifest)
    payload = {
        "epsilon": policy.epsilon,
        "theta_star": None if args.prior_mixture else theta,
        "num_rollouts": batch.num_rollouts,
        "counts": batch.counts,
        "means": batch.means,
        "ci95": {k: list(v) for k, v in batch.ci.items()},
        "notes": _notes(cfg),
    }
    if not args.prior_mixture:
        payload["exact"] = exact_outcome(policy, cfg, theta)
    write_json(out / "simulate.json", payload, manifest)
    _finish(out, manifest)
    m, ci = batch.means, batch.ci
    print(f"eps={policy.epsilon:.6g} social={m['social_utility']:.6g} "
          f"[{ci['social_utility'][0]:.6g}, {ci['social_utility'][1]:.6g}] "
          f"approved={m['approved']:.4f} opted_out={m['opted_out']:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, raw = _load(args)
    out = _out_dir(args)
    manifest = _manifest(args, cfg, seed=args.seed if args.rollouts else None)
    theta = args.theta_star if args.theta_star is not None else float(raw.get("theta_star", 0.65))
    rcfg = None
    if args.rollouts:
        rcfg = RolloutConfig(theta_star=theta, num_rollouts=args.rollouts,
                             bootstrap_resamples=args.resamples, rng_seed=args.seed)
    results = sweep(cfg, args.param, args.values, theta_star=theta, baseline=args.baseline,
                    baseline_n_max=args.baseline_n_max, rcfg=rcfg)
    manifest.mdp_solve_count = sum(r.solution.mdp_solve_count for r in results)
    rows = [row for r in results for row in r.long_rows(args.param)]
    write_csv(out / "sweep.csv", "sweep", rows, manifest)
    _finish(out, manifest)
    for r in results:
        line = f"{args.param}={r.value:.6g} eps_star={r.solution.eps_star:.6g} seq_social={r.seq_social:.6g}"
        if r.base_zero_social is not None:
            g0, g1 = r.gain(r.base_zero_social), r.gain(r.base_opt_social)
            line += f" gain={_pct(g0)} gain_subsidized={_pct(g1)}"
        print(line)
    return EXIT_OK


def _pct(g):
    return "n/a" if g is None else f"{g:.1f}%"


def cmd_region(args) -> int:
    cfg, _ = _load(args)
    out = _out_dir(args)
    manifest = _manifest(args, cfg)
    alpha = np.arange(cfg.prior_alpha0, cfg.prior_alpha0 + args.alpha_span + 1)
    beta = np.arange(cfg.prior_beta0, cfg.prior_beta0 + args.beta_span + 1)
    exp_region = rejection_region_table(cfg, None, alpha, beta)
    mix_region = rejection_region_table(cfg, MixtureSpec(quadrature_nodes=cfg.mixture_nodes), alpha, beta)
    rows = [
        {"alpha": a, "beta": b, "exponential": bool(exp_region[i, j]), "uniform_mixture": bool(mix_region[i, j])}
        for i, a in enumerate(alpha) for j, b in enumerate(beta)
    ]
    write_csv(out / "region.csv", "region", rows, manifest)
    _finish(out, manifest)
    print(f"exponential rejects {int(exp_region.sum())} cells, uniform mixture {int(mix_region.sum())} "
          f"of {exp_region.size}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqsubsidy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="JSON config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field (JSON value); repeatable")

    p = sub.add_parser("solve", help="solve the agent's MDP at one subsidy")
    common(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--dump-policy", action="store_true", help="also write the per-state policy table")
    p.add_argument("--state-cap", type=int, default=DEFAULT_STATE_CAP)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("optimize", help="recover the subsidy partition and the optimal subsidy")
    common(p)
    p.add_argument("--vertex-slack", type=float, default=VERTEX_SLACK,
                   help="relative tolerance of the vertex test")
    p.add_argument("--verbose", action="store_true", help="log every MDP solve to stderr")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="Monte Carlo rollouts of the true approval process")
    common(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--epsilon", type=float)
    group.add_argument("--use-optimal", action="store_true", help="simulate at the optimal subsidy")
    p.add_argument("--theta-star", type=float, default=None)
    p.add_argument("--prior-mixture", action="store_true", help="draw theta* from the agent's prior per rollout")
    p.add_argument("--rollouts", type=int, default=100_000)
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="optimize and evaluate across values of one parameter")
    common(p)
    p.add_argument("--param", required=True)
    p.add_argument("--values", type=float, nargs="+", required=True)
    p.add_argument("--baseline", choices=("none", "single_trial"), default="none")
    p.add_argument("--baseline-n-max", type=int, default=800)
    p.add_argument("--theta-star", type=float, default=None)
    p.add_argument("--rollouts", type=int, default=0, help="0 evaluates the true process exactly")
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("region", help="tabulate rejection regions of both test processes")
    common(p)
    p.add_argument("--alpha-span", type=int, default=60)
    p.add_argument("--beta-span", type=int, default=60)
    p.set_defaults(func=cmd_region)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (QuadratureError, ConvexityError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
