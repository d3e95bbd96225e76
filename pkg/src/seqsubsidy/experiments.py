"""Parameter sweeps comparing the sequential protocol with single-trial baselines."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .config import ConfigError, ProtocolConfig
from .mdp import solve
from .rollout import RolloutConfig, exact_outcome, simulate, single_trial_config
from .subsidy import SubsidySolution, optimize

# the partition does not depend on these, so one optimize serves every value
_RERANK_ONLY = ("rho_social", "theta_star")


@dataclass(frozen=True)
class PointResult:
    value: float
    solution: SubsidySolution
    first_action: int
    seq_social: float
    seq_social_ci: tuple[float, float] | None
    seq_optout: float
    zero_social: float
    zero_optout: float
    base_zero_social: float | None = None
    base_opt_social: float | None = None
    base_opt_eps: float | None = None

    def gain(self, reference: float | None) -> float | None:
        if reference is None or reference <= 0.0:
            return None
        return 100.0 * (self.seq_social / reference - 1.0)

    def gain_ci(self, reference: float | None) -> tuple[float, float] | None:
        if reference is None or reference <= 0.0 or self.seq_social_ci is None:
            return None
        lo, hi = self.seq_social_ci
        return 100.0 * (lo / reference - 1.0), 100.0 * (hi / reference - 1.0)

    def long_rows(self, param: str) -> list[dict]:
        def row(metric, estimate, ci=None):
            lo, hi = ci if ci is not None else (None, None)
            return {"param": param, "value": self.value, "metric": metric,
                    "estimate": estimate, "ci_low": lo, "ci_high": hi}

        rows = [
            row("eps_star", self.solution.eps_star),
            row("u_star", self.solution.u_star),
            row("n_intervals", self.solution.n_intervals),
            row("mdp_solve_count", self.solution.mdp_solve_count),
            row("first_action", self.first_action),
            row("seq_social_utility", self.seq_social, self.seq_social_ci),
            row("seq_opt_out", self.seq_optout),
            row("zero_subsidy_social_utility", self.zero_social),
            row("zero_subsidy_opt_out", self.zero_optout),
        ]
        if self.base_zero_social is not None:
            rows += [
                row("baseline_social_utility", self.base_zero_social),
                row("baseline_opt_eps_star", self.base_opt_eps),
                row("baseline_opt_social_utility", self.base_opt_social),
                row("gain_vs_baseline_pct", self.gain(self.base_zero_social), self.gain_ci(self.base_zero_social)),
                row("gain_vs_subsidized_baseline_pct", self.gain(self.base_opt_social),
                    self.gain_ci(self.base_opt_social)),
            ]
        return rows


def _sweepable(cfg: ProtocolConfig) -> set[str]:
    numeric = {f.name for f in dataclasses.fields(cfg) if f.type in ("int", "float")}
    return numeric | {"theta_star"}


def evaluate_point(cfg: ProtocolConfig, solution: SubsidySolution, theta_star: float,
                   base_solution: SubsidySolution | None = None, baseline_n_max: int = 800,
                   rcfg: RolloutConfig | None = None, value: float = float("nan")) -> PointResult:
    """True-process outcomes at eps* and at zero subsidy, plus baseline utilities.

    Sequential utilities are exact; with ``rcfg`` the social utility at eps*
    is also estimated by rollouts, which supplies the bootstrap interval.
    """
    star = solution.star_policy()
    seq = exact_outcome(star, cfg, theta_star)
    zero = exact_outcome(solve(cfg, 0.0), cfg, theta_star)
    ci = None
    if rcfg is not None:
        batch = simulate(star, cfg, dataclasses.replace(rcfg, theta_star=theta_star))
        ci = batch.ci["social_utility"]
    result = PointResult(value, solution, star.first_action, seq["social_utility"], ci, seq["opted_out"],
                         zero["social_utility"], zero["opted_out"])
    if base_solution is None:
        return result
    bcfg = base_solution.cfg
    base_zero = exact_outcome(solve(bcfg, 0.0), bcfg, theta_star)["social_utility"]
    base_opt = exact_outcome(base_solution.star_policy(), bcfg, theta_star)["social_utility"]
    return dataclasses.replace(result, base_zero_social=base_zero, base_opt_social=base_opt,
                               base_opt_eps=base_solution.eps_star)


def sweep(cfg: ProtocolConfig, param: str, values, theta_star: float = 0.65, baseline: str = "none",
          baseline_n_max: int = 800, rcfg: RolloutConfig | None = None, log=None) -> list[PointResult]:
    """Optimize and evaluate the protocol for each value of ``param``.

    rho_social and theta_star do not change the agent's problem, so a single
    partition is re-ranked for every value; other parameters re-optimize.
    """
    if param not in _sweepable(cfg):
        raise ConfigError(f"cannot sweep unknown parameter {param!r}")
    if baseline not in ("none", "single_trial"):
        raise ConfigError(f"unknown baseline {baseline!r}")
    shared = base_shared = None
    if param in _RERANK_ONLY:
        shared = optimize(cfg, log=log)
        if baseline == "single_trial":
            base_shared = optimize(single_trial_config(cfg, baseline_n_max))
    results = []
    for value in values:
        theta = float(value) if param == "theta_star" else theta_star
        if param == "theta_star":
            pcfg, sol, base = cfg, shared, base_shared
        elif param == "rho_social":
            pcfg = cfg.replace(rho_social=float(value))
            sol = shared.with_rho_social(float(value))
            base = base_shared.with_rho_social(float(value)) if base_shared else None
        else:
            current = getattr(cfg, param)
            pcfg = cfg.replace(**{param: type(current)(value)})
            sol = optimize(pcfg, log=log)
            base = optimize(single_trial_config(pcfg, baseline_n_max)) if baseline == "single_trial" else None
        results.append(evaluate_point(pcfg, sol, theta, base, baseline_n_max, rcfg, float(value)))
    return results
