"""Monte Carlo rollouts of the true approval process under a hidden efficacy.

The agent follows a solved policy; outcomes are drawn from Bin(n, theta*)
rather than the agent's Beta-Binomial predictive. Rollouts are simulated in
fixed-size chunks, each with its own Philox substream spawned from the seed,
so results do not depend on how chunks are scheduled.

``exact_outcome`` propagates the state distribution forward instead of
sampling; it gives the same expectations without Monte Carlo error and is
what the non-sequential baselines use.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numba as nb
import numpy as np
from scipy import stats

from .config import ProtocolConfig
from .core import rejection_grid
from .mdp import SolvedPolicy, solve

CHUNK = 8192
APPROVED, OPTED_OUT, EXHAUSTED = 0, 1, 2
TERMINAL_NAMES = ("approved", "opted_out", "exhausted")
SUMMARY_FIELDS = ("agent_utility", "social_utility", "approved", "opted_out", "exhausted", "total_cost", "trials")


@dataclass(frozen=True)
class RolloutConfig:
    theta_star: float = 0.65
    num_rollouts: int = 100_000
    bootstrap_resamples: int = 1000
    rng_seed: int = 0
    baseline: str = "none"
    baseline_n_max: int = 800

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta_star <= 1.0:
            raise ValueError(f"theta_star={self.theta_star} outside [0, 1]")
        if self.num_rollouts < 1:
            raise ValueError("num_rollouts must be >= 1")
        if self.bootstrap_resamples < 1:
            raise ValueError("bootstrap_resamples must be >= 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")
        if self.baseline not in ("none", "single_trial"):
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.baseline_n_max < 1:
            raise ValueError("baseline_n_max must be >= 1")


@dataclass(frozen=True)
class RolloutBatch:
    epsilon: float
    theta_star: float | None  # None when theta* is drawn from the prior
    trial_sizes: np.ndarray  # (R, T+1), 0 after termination
    outcomes: np.ndarray  # (R, T+1) successes per trial
    terminal: np.ndarray  # (R,) APPROVED / OPTED_OUT / EXHAUSTED
    total_cost: np.ndarray
    agent_utility: np.ndarray
    social_utility: np.ndarray
    means: dict = field(default_factory=dict)
    ci: dict = field(default_factory=dict)

    @property
    def num_rollouts(self) -> int:
        return int(self.terminal.size)

    @property
    def counts(self) -> dict:
        c = np.bincount(self.terminal, minlength=3)
        return {name: int(c[i]) for i, name in enumerate(TERMINAL_NAMES)}

    def per_rollout(self) -> dict[str, np.ndarray]:
        return {
            "agent_utility": self.agent_utility,
            "social_utility": self.social_utility,
            "approved": (self.terminal == APPROVED).astype(float),
            "opted_out": (self.terminal == OPTED_OUT).astype(float),
            "exhausted": (self.terminal == EXHAUSTED).astype(float),
            "total_cost": self.total_cost,
            "trials": (self.trial_sizes > 0).sum(axis=1).astype(float),
        }

    def summary_rows(self) -> list[dict]:
        return [
            {"statistic": k, "mean": self.means[k], "ci_low": self.ci[k][0], "ci_high": self.ci[k][1]}
            for k in SUMMARY_FIELDS
        ]


def _simulate_chunk(action, rej, cfg: ProtocolConfig, theta: np.ndarray, rng: np.random.Generator):
    size = theta.size
    T = cfg.horizon_T
    sizes = np.zeros((size, T + 1), dtype=np.int32)
    outs = np.zeros((size, T + 1), dtype=np.int32)
    terminal = np.full(size, EXHAUSTED, dtype=np.int8)
    N = np.zeros(size, dtype=np.int64)
    X = np.zeros(size, dtype=np.int64)
    cost = np.zeros(size)
    active = np.arange(size)
    for l in range(T + 1):
        if active.size == 0:
            break
        n = action[l][N[active], X[active]].astype(np.int64)
        stop = n == 0
        terminal[active[stop]] = OPTED_OUT
        active, n = active[~stop], n[~stop]
        x = rng.binomial(n, theta[active])
        sizes[active, l] = n
        outs[active, l] = x
        cost[active] += cfg.cost_fixed + cfg.cost_per_sample * n
        N[active] += n
        X[active] += x
        hit = rej[N[active], X[active]]
        terminal[active[hit]] = APPROVED
        active = active[~hit]
    return sizes, outs, terminal, cost


def _payoffs(cfg: ProtocolConfig, epsilon: float, terminal: np.ndarray, cost: np.ndarray):
    approved = terminal == APPROVED
    agent = np.where(approved, cfg.rho_agent + epsilon * cost, 0.0) - cost
    social = np.where(approved, cfg.rho_social - epsilon * cost, 0.0)
    return agent, social


def bootstrap_ci(values: dict[str, np.ndarray], resamples: int, rng: np.random.Generator,
                 level: float = 0.95, batch: int = 50) -> dict[str, tuple[float, float]]:
    """Percentile bootstrap of the mean, resampling whole rollouts jointly."""
    keys = list(values)
    mat = np.stack([np.asarray(values[k], dtype=float) for k in keys])
    R = mat.shape[1]
    draws = np.empty((len(keys), resamples))
    done = 0
    while done < resamples:
        b = min(batch, resamples - done)
        idx = rng.integers(0, R, size=(b, R))
        draws[:, done:done + b] = mat[:, idx].mean(axis=2)
        done += b
    q = [(1 - level) / 2 * 100, (1 + level) / 2 * 100]
    out = {}
    for i, k in enumerate(keys):
        lo, hi = np.percentile(draws[i], q)
        out[k] = (float(lo), float(hi))
    return out


def _run(policy: SolvedPolicy, cfg: ProtocolConfig, rcfg: RolloutConfig, theta_sampler) -> RolloutBatch:
    action = policy.table(cfg.agent_prior).action
    rej = rejection_grid(cfg)
    n_chunks = -(-rcfg.num_rollouts // CHUNK)
    seeds = np.random.SeedSequence(rcfg.rng_seed).spawn(n_chunks + 1)
    parts = []
    for c in range(n_chunks):
        rng = np.random.Generator(np.random.Philox(seeds[c]))
        size = min(CHUNK, rcfg.num_rollouts - c * CHUNK)
        theta = theta_sampler(rng, size)
        parts.append(_simulate_chunk(action, rej, cfg, theta, rng))
    sizes, outs, terminal, cost = (np.concatenate(p) for p in zip(*parts))
    agent, social = _payoffs(cfg, policy.epsilon, terminal, cost)
    batch = RolloutBatch(policy.epsilon, None, sizes, outs, terminal, cost, agent, social)
    per = batch.per_rollout()
    means = {k: float(v.mean()) for k, v in per.items()}
    boot_rng = np.random.Generator(np.random.Philox(seeds[-1]))
    ci = bootstrap_ci(per, rcfg.bootstrap_resamples, boot_rng)
    return RolloutBatch(policy.epsilon, None, sizes, outs, terminal, cost, agent, social, means, ci)


def simulate(policy: SolvedPolicy, cfg: ProtocolConfig, rcfg: RolloutConfig) -> RolloutBatch:
    """Roll out the true process at the fixed efficacy ``rcfg.theta_star``."""
    theta_star = rcfg.theta_star
    batch = _run(policy, cfg, rcfg, lambda rng, size: np.full(size, theta_star))
    return replace(batch, theta_star=theta_star)


def simulate_prior_mixture(policy: SolvedPolicy, cfg: ProtocolConfig, rcfg: RolloutConfig) -> RolloutBatch:
    """Roll out with theta* ~ Beta(alpha0, beta0) drawn afresh for every rollout."""
    a0, b0 = cfg.agent_prior
    return _run(policy, cfg, rcfg, lambda rng, size: rng.beta(a0, b0, size))


def false_positive_rate(cfg: ProtocolConfig, policy: SolvedPolicy, theta_null: float,
                        rcfg: RolloutConfig) -> tuple[float, float, float]:
    """Approval frequency under a null efficacy: (rate, ci_low, ci_high)."""
    if not theta_null < cfg.theta_baseline:
        raise ValueError(f"theta_null={theta_null} must lie below theta_b={cfg.theta_baseline}")
    batch = simulate(policy, cfg, replace(rcfg, theta_star=theta_null))
    lo, hi = batch.ci["approved"]
    return batch.means["approved"], lo, hi


@nb.njit(cache=True)
def _forward_layer(l, T, n_max, c0, c1, rho_a, rho_s, eps, action, rej, pmf, mass, nxt, acc):
    lo = 0 if l == 0 else l
    hi = l * n_max
    for N in range(lo, hi + 1):
        for X in range(N + 1):
            m = mass[N, X]
            if m == 0.0:
                continue
            n = action[N, X]
            if n == 0:
                c = l * c0 + N * c1
                acc[1] += m
                acc[3] -= m * c
                continue
            c = (l + 1) * c0 + (N + n) * c1
            for x in range(n + 1):
                w = m * pmf[n, x]
                if rej[N + n, X + x]:
                    acc[0] += w
                    acc[3] += w * (rho_a + eps * c - c)
                    acc[4] += w * (rho_s - eps * c)
                elif l == T:
                    acc[2] += w
                    acc[3] -= w * c
                else:
                    nxt[N + n, X + x] += w


def exact_outcome(policy: SolvedPolicy, cfg: ProtocolConfig, theta_star: float) -> dict[str, float]:
    """Expected true-process outcome of ``policy`` at a fixed efficacy, computed exactly."""
    table = policy.table(cfg.agent_prior)
    rej = rejection_grid(cfg)
    ns = np.arange(cfg.n_max + 1)
    pmf = stats.binom.pmf(ns[None, :], ns[:, None], theta_star)
    pmf = np.where(ns[None, :] <= ns[:, None], pmf, 0.0)
    size = cfg.n_total_max + 1
    mass = np.zeros((size, size))
    mass[0, 0] = 1.0
    acc = np.zeros(5)
    for l in range(cfg.horizon_T + 1):
        nxt = np.zeros_like(mass)
        act = np.zeros((size, size), dtype=np.int64)
        a = table.action[l]
        act[: a.shape[0], : a.shape[1]] = a
        _forward_layer(l, cfg.horizon_T, cfg.n_max, cfg.cost_fixed, cfg.cost_per_sample,
                       cfg.rho_agent, cfg.rho_social, policy.epsilon, act, rej, pmf, mass, nxt, acc)
        mass = nxt
    return {
        "approved": float(acc[0]),
        "opted_out": float(acc[1]),
        "exhausted": float(acc[2]),
        "agent_utility": float(acc[3]),
        "social_utility": float(acc[4]),
    }


def single_trial_config(cfg: ProtocolConfig, baseline_n_max: int = 800) -> ProtocolConfig:
    """The non-sequential variant: one trial of up to ``baseline_n_max`` samples."""
    return cfg.replace(horizon_T=0, n_max=baseline_n_max)


def baseline_single_trial(cfg: ProtocolConfig, epsilon: float, baseline_n_max: int = 800,
                          theta_star: float | None = None) -> dict[str, float]:
    """Agent's best single trial at ``epsilon`` and the resulting utilities.

    ``social_utility`` is the anticipated one; with ``theta_star`` the true
    outcome at that efficacy is added under ``true_*`` keys.
    """
    bcfg = single_trial_config(cfg, baseline_n_max)
    policy = solve(bcfg, epsilon)
    root = policy.q_averaged()
    out = {
        "n": root.first_action,
        "agent_value": root.value,
        "social_utility": bcfg.rho_social * root.p_approve - epsilon * root.a_cost,
        "p_approve": root.p_approve,
    }
    if theta_star is not None:
        true = exact_outcome(policy, bcfg, theta_star)
        out.update({f"true_{k}": v for k, v in true.items()})
    return out
