"""Optimal subsidy and gains over single-trial baselines across rho_S / rho_A."""
import argparse
from pathlib import Path

import numpy as np

from seqsubsidy import __version__, load_config
from seqsubsidy.experiments import sweep
from seqsubsidy.report import RunManifest, write_csv
from seqsubsidy.rollout import RolloutConfig

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=ROOT / "configs" / "fiducial.json")
    parser.add_argument("--ratios", type=float, nargs="+", default=list(np.arange(2.0, 20.5, 2.0)))
    parser.add_argument("--theta-star", type=float, default=0.65)
    parser.add_argument("--rollouts", type=int, default=0, help="0 reports exact values only")
    parser.add_argument("--out", default="ratio_sweep.csv")
    args = parser.parse_args()

    cfg, _ = load_config(args.config)
    values = [r * cfg.rho_agent for r in args.ratios]
    rcfg = RolloutConfig(num_rollouts=args.rollouts) if args.rollouts > 0 else None
    points = sweep(cfg, "rho_social", values, args.theta_star, "single_trial", rcfg=rcfg)
    print(f"{'ratio':>6} {'eps*':>8} {'n0':>4} {'seq U_S':>9} {'base U_S':>9} {'gain %':>7} "
          f"{'base eps*':>9} {'gain sub %':>10}")
    rows = []
    for ratio, p in zip(args.ratios, points):
        print(f"{ratio:6.2f} {p.solution.eps_star:8.4f} {p.first_action:4d} {p.seq_social:9.2f} "
              f"{p.base_zero_social:9.2f} {p.gain(p.base_zero_social):7.2f} {p.base_opt_eps:9.4f} "
              f"{p.gain(p.base_opt_social):10.2f}")
        rows += p.long_rows("rho_social")
    write_csv(Path(args.out), "sweep", rows, RunManifest("ratio_sweep", cfg.config_hash(), version=__version__))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
