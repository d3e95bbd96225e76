"""Partition size of the fiducial run as the vertex-test slack is coarsened."""
import argparse
from pathlib import Path

from seqsubsidy import load_config, optimize

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=ROOT / "configs" / "fiducial.json")
    parser.add_argument("--slacks", type=float, nargs="+", default=[1e-9, 1e-8, 1e-7, 1e-6])
    args = parser.parse_args()
    cfg, _ = load_config(args.config)
    print(f"{'slack':>8} {'pieces':>6} {'solves':>6} {'eps*':>9} {'u*':>10}")
    for slack in args.slacks:
        sol = optimize(cfg, vertex_slack=slack)
        print(f"{slack:8.0e} {sol.n_intervals:6d} {sol.mdp_solve_count:6d} {sol.eps_star:9.6f} {sol.u_star:10.4f}")


if __name__ == "__main__":
    main()
