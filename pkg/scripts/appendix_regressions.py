"""Optimal subsidy for every bundled configuration next to its reference value."""
import argparse
import time
from pathlib import Path

from seqsubsidy import exact_outcome, load_config, optimize

ROOT = Path(__file__).resolve().parent.parent
# reference optimal subsidies and tolerances; None where no single number is reported
REFERENCE = {
    "fiducial": (0.108, 0.002),
    "high_rho_agent": (0.0, 0.0),
    "high_cost": (0.551, 0.005),
    "pessimistic": (0.40, 0.02),
    "calibrated": (0.234, 0.005),
    "mixture": (0.027, 0.003),
    "optimistic": None,
    "uncalibrated": None,
}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("names", nargs="*", default=list(REFERENCE))
    args = parser.parse_args()
    print(f"{'config':15s} {'eps*':>9} {'reference':>16} {'ok':>3} {'n0':>4} {'pieces':>6} "
          f"{'solves':>6} {'secs':>6} {'U_S(0.65)':>10}")
    for name in args.names:
        cfg, raw = load_config(ROOT / "configs" / f"{name}.json")
        start = time.perf_counter()
        sol = optimize(cfg)
        secs = time.perf_counter() - start
        star = sol.star_policy()
        true = exact_outcome(star, cfg, raw.get("theta_star", 0.65))["social_utility"]
        ref = REFERENCE.get(name)
        if ref is None:
            ref_text, ok = "-", "-"
        else:
            target, tol = ref
            ref_text = f"{target} +/- {tol}"
            ok = "yes" if abs(sol.eps_star - target) <= tol else "no"
        print(f"{name:15s} {sol.eps_star:9.6f} {ref_text:>16} {ok:>3} {star.first_action:4d} "
              f"{sol.n_intervals:6d} {sol.mdp_solve_count:6d} {secs:6.1f} {true:10.2f}")


if __name__ == "__main__":
    main()
