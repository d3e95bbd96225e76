"""Primitive mathematics of the approval protocol.

Everything that touches the test process lives in log-space: with n_max=200
and four trials the belief can reach alpha=801, far beyond exp() range.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .config import ProtocolConfig


class DomainError(ValueError):
    pass


class TerminalState(enum.Enum):
    OPTED_OUT = "opted_out"
    APPROVED = "approved"


@dataclass(frozen=True)
class BeliefState:
    """Reachable interior state, indexed by trials run, samples and successes."""

    t: int
    total_n: int
    total_x: int
    alpha0: float = 1.0
    beta0: float = 1.0

    def __post_init__(self) -> None:
        if self.t < 0 or not 0 <= self.total_x <= self.total_n:
            raise DomainError(f"invalid state (t={self.t}, N={self.total_n}, X={self.total_x})")
        if self.t == 0 and self.total_n != 0:
            raise DomainError("the initial state has no samples")
        if self.t >= 1 and self.total_n < self.t:
            raise DomainError("each trial contributes at least one sample")

    @classmethod
    def initial(cls, cfg: ProtocolConfig) -> "BeliefState":
        return cls(0, 0, 0, cfg.prior_alpha0, cfg.prior_beta0)

    @property
    def alpha(self) -> float:
        return self.alpha0 + self.total_x

    @property
    def beta(self) -> float:
        return self.beta0 + self.total_n - self.total_x

    def cost(self, cfg: ProtocolConfig) -> float:
        return state_cost(self.t, self.total_n, cfg)

    def check(self, cfg: ProtocolConfig) -> None:
        if self.total_n > self.t * cfg.n_max:
            raise DomainError(f"N={self.total_n} unreachable in {self.t} trials of at most {cfg.n_max}")


def trial_cost(n: int, cfg: ProtocolConfig) -> float:
    if n < 0 or n > cfg.n_max:
        raise DomainError(f"sample size {n} outside [0, {cfg.n_max}]")
    if n == 0:
        return 0.0
    return cfg.cost_fixed + cfg.cost_per_sample * n


def state_cost(t: int, total_n, cfg: ProtocolConfig):
    """Cumulative cost after ``t`` trials totalling ``total_n`` samples (linear cost)."""
    return t * cfg.cost_fixed + total_n * cfg.cost_per_sample


def log_e_value(x: int, n: int, cfg: ProtocolConfig) -> float:
    """Log of the exponentiated-count e-value exp(x - n*lambda)."""
    if n < 1:
        raise DomainError("e-value needs a positive sample size")
    if not 0 <= x <= n:
        raise DomainError(f"success count {x} outside [0, {n}]")
    return x - n * cfg.lam


def log_f(state: BeliefState, cfg: ProtocolConfig) -> float:
    """Log of the test-process value M_t at ``state``."""
    if cfg.test_process_kind == "uniform-mixture":
        from .mixture import MixtureSpec, log_f_mix

        return log_f_mix(state, cfg, MixtureSpec(quadrature_nodes=cfg.mixture_nodes))
    return state.total_x - state.total_n * cfg.lam


def is_rejected(state: BeliefState, cfg: ProtocolConfig) -> bool:
    return log_f(state, cfg) >= cfg.log_threshold


def update_belief(state: BeliefState, n: int, x: int, cfg: ProtocolConfig | None = None) -> BeliefState:
    if n < 1 or (cfg is not None and n > cfg.n_max):
        raise DomainError(f"sample size {n} out of range")
    if not 0 <= x <= n:
        raise DomainError(f"success count {x} outside [0, {n}]")
    return BeliefState(state.t + 1, state.total_n + n, state.total_x + x, state.alpha0, state.beta0)


def log_beta_binomial_pmf(x, n, alpha, beta):
    """log C(n,x) B(x+alpha, n-x+beta) / B(alpha, beta), vectorised over ``x``.

    Built from successive term ratios outward from the mode and normalised
    with a log-sum-exp, so the row sums to one at machine precision even for
    Beta parameters in the hundreds, where log-gamma differences lose digits.
    """
    x = np.asarray(x)
    if np.any(x < 0) or np.any(x > n) or n < 0:
        raise DomainError("need 0 <= x <= n")
    if not (alpha > 0 and beta > 0):
        raise DomainError("Beta parameters must be positive")
    out = _log_bb_row(int(n), float(alpha), float(beta))[x]
    return float(out) if out.ndim == 0 else out


def _log_bb_row(n: int, alpha: float, beta: float) -> np.ndarray:
    if n == 0:
        return np.zeros(1)
    k = np.arange(n)
    # log p(k+1) - log p(k)
    step = np.log(n - k) + np.log(k + alpha) - np.log(k + 1.0) - np.log(n - k - 1.0 + beta)
    mode = int(np.searchsorted(-step, 0.0))  # first k whose ratio drops to <= 1
    row = np.empty(n + 1)
    row[mode] = 0.0
    row[mode + 1:] = np.cumsum(step[mode:])
    row[:mode] = -np.cumsum(step[:mode][::-1])[::-1]
    return row - logsumexp(row)


def log_f_grid(cfg: ProtocolConfig, n_total: int | None = None) -> np.ndarray:
    """Log test-process value on the full (N, X) grid; entries with X > N are -inf."""
    if n_total is None:
        n_total = cfg.n_total_max
    if cfg.test_process_kind == "uniform-mixture":
        from .mixture import MixtureSpec, log_f_mix_grid

        return log_f_mix_grid(cfg.theta_baseline, n_total, MixtureSpec(quadrature_nodes=cfg.mixture_nodes))
    n = np.arange(n_total + 1)[:, None]
    x = np.arange(n_total + 1)[None, :]
    g = x - n * cfg.lam
    return np.where(x <= n, g, -np.inf)


def rejection_grid(cfg: ProtocolConfig, n_total: int | None = None) -> np.ndarray:
    """Boolean (N, X) grid of states inside the rejection region."""
    return log_f_grid(cfg, n_total) >= cfg.log_threshold
