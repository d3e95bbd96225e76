"""Optimal subsidy for the fiducial antibiotic setting and its effect at theta* = 0.65."""
import argparse
import time
from pathlib import Path

from seqsubsidy import exact_outcome, load_config, optimize
from seqsubsidy.mdp import solve
from seqsubsidy.rollout import RolloutConfig, simulate

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=ROOT / "configs" / "fiducial.json")
    parser.add_argument("--theta-star", type=float, default=0.65)
    parser.add_argument("--rollouts", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    cfg, _ = load_config(args.config)
    start = time.perf_counter()
    sol = optimize(cfg)
    elapsed = time.perf_counter() - start
    star = sol.star_policy()
    print(f"eps*            {sol.eps_star:.6f}")
    print(f"u*              {sol.u_star:.4f}")
    print(f"intervals       {sol.n_intervals}")
    print(f"MDP solves      {sol.mdp_solve_count} ({elapsed:.1f} s)")
    print(f"first action    {star.first_action}")

    zero = solve(cfg, 0.0)
    ex_star = exact_outcome(star, cfg, args.theta_star)
    ex_zero = exact_outcome(zero, cfg, args.theta_star)
    rcfg = RolloutConfig(theta_star=args.theta_star, num_rollouts=args.rollouts, rng_seed=args.seed)
    mc_star = simulate(star, cfg, rcfg)
    mc_zero = simulate(zero, cfg, rcfg)
    print(f"\ntrue efficacy {args.theta_star}: exact | Monte Carlo ({args.rollouts} rollouts)")
    for key in ("social_utility", "opted_out", "approved"):
        print(f"{key:15s} eps=0 {ex_zero[key]:10.4f} | {mc_zero.means[key]:10.4f}    "
              f"eps* {ex_star[key]:10.4f} | {mc_star.means[key]:10.4f}")
    gain = 100 * (ex_star["social_utility"] / ex_zero["social_utility"] - 1)
    drop = 100 * (1 - ex_star["opted_out"] / ex_zero["opted_out"])
    print(f"\nsocial utility {gain:+.2f}%, opt-out probability {-drop:+.2f}% (relative)")


if __name__ == "__main__":
    main()
