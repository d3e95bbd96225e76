"""Finite-horizon belief MDP: state enumeration, backward induction, policy values.

States are indexed by (layer l, total samples N, total successes X); the
belief is (alpha0 + X, beta0 + N - X) and the running cost l*c0 + N*c1.

The expectation over a trial of size n under the Beta-Binomial predictive is
computed by chaining n single-sample Bayesian updates: drawing n outcomes
one at a time from the evolving posterior gives the same joint law as the
Beta-Binomial draw. With F_0 = G (next-layer payoff on the (N, X) grid) and

    F_k(N, X) = p(N, X) F_{k-1}(N+1, X+1) + (1 - p(N, X)) F_{k-1}(N+1, X),
    p(N, X)   = (alpha0 + X) / (alpha0 + beta0 + N),

F_n(N, X) is the expected next-layer payoff of action n at (N, X). One sweep
over k = 1..n_max yields every action's Q-value for a whole layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .config import ProtocolConfig
from .core import BeliefState, rejection_grid, state_cost

DEFAULT_STATE_CAP = 10**8


class ResourceError(RuntimeError):
    """State space larger than the configured cap."""


class UnknownStateError(KeyError):
    pass


# --------------------------------------------------------------------------
# state space


def count_interior_states(horizon_T: int, n_max: int) -> int:
    """Closed-form number of post-trial states over all layers."""
    total = 0
    for t in range(horizon_T + 1):
        lo, hi = t + 1, (t + 1) * n_max
        # sum_{N=lo}^{hi} (N + 1)
        total += (hi - lo + 1) * (lo + hi + 2) // 2
    return total


def count_states(horizon_T: int, n_max: int) -> int:
    """Reachable states including the opt-out state, excluding the prior state."""
    return 1 + count_interior_states(horizon_T, n_max)


def layer_bounds(l: int, n_max: int) -> tuple[int, int]:
    """Smallest and largest total sample size N at layer ``l`` (after l trials)."""
    return (0, 0) if l == 0 else (l, l * n_max)


@dataclass(frozen=True)
class Layer:
    l: int
    n_lo: int
    n_hi: int
    total_n: np.ndarray
    total_x: np.ndarray
    absorbing: np.ndarray

    def __len__(self) -> int:
        return len(self.total_n)

    def index(self, total_n: int, total_x: int) -> int:
        if not (self.n_lo <= total_n <= self.n_hi and 0 <= total_x <= total_n):
            raise UnknownStateError((self.l, total_n, total_x))
        tri = lambda n: n * (n + 1) // 2  # noqa: E731
        return tri(total_n) - tri(self.n_lo) + total_x


@dataclass(frozen=True)
class StateSpace:
    """Reachable states layer by layer; layer T+1 holds post-horizon outcomes."""

    horizon_T: int
    n_max: int
    layers: tuple[Layer, ...]

    @property
    def interior_count(self) -> int:
        return sum(len(layer) for layer in self.layers[1:])

    @property
    def total_count(self) -> int:
        # + the opt-out state
        return 1 + self.interior_count

    def contains(self, l: int, total_n: int, total_x: int) -> bool:
        if not 0 <= l < len(self.layers):
            return False
        layer = self.layers[l]
        return layer.n_lo <= total_n <= layer.n_hi and 0 <= total_x <= total_n


def _check_cap(cfg: ProtocolConfig, cap: int) -> None:
    n = count_states(cfg.horizon_T, cfg.n_max)
    if n > cap:
        raise ResourceError(f"state space has {n} states, cap is {cap}")


def enumerate_states(cfg: ProtocolConfig, cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    _check_cap(cfg, cap)
    rej = rejection_grid(cfg)
    layers = []
    for l in range(cfg.horizon_T + 2):
        lo, hi = layer_bounds(l, cfg.n_max)
        ns = np.arange(lo, hi + 1)
        total_n = np.repeat(ns, ns + 1)
        starts = np.repeat(np.cumsum(ns + 1) - (ns + 1), ns + 1)
        total_x = np.arange(len(total_n)) - starts
        layers.append(Layer(l, lo, hi, total_n, total_x, rej[total_n, total_x]))
    return StateSpace(cfg.horizon_T, cfg.n_max, tuple(layers))


# --------------------------------------------------------------------------
# backward induction kernel


@njit(cache=True)
def _solve_layer(l, n_max, c0, c1, rho_a, eps, a0, b0, rej,
                 nxt_v0, nxt_a, nxt_p, nxt_o, work,
                 out_act, out_v0, out_a, out_p, out_o, out_abs):
    lo = l + 1
    hi = (l + 1) * n_max
    next_cost0 = (l + 1) * c0
    # F_0: payoff of landing on next-layer state (r, x)
    for r in range(lo, hi + 1):
        cr = next_cost0 + r * c1
        for x in range(r + 1):
            if rej[r, x]:
                work[0, r, x] = rho_a
                work[1, r, x] = cr
                work[2, r, x] = 1.0
                work[3, r, x] = 0.0
            else:
                work[0, r, x] = nxt_v0[r, x]
                work[1, r, x] = nxt_a[r, x]
                work[2, r, x] = nxt_p[r, x]
                work[3, r, x] = nxt_o[r, x]

    s_lo = 0 if l == 0 else l
    s_hi = l * n_max
    best_q = np.full((s_hi + 1, s_hi + 1), -np.inf)
    for r in range(s_lo, s_hi + 1):
        for x in range(r + 1):
            out_abs[r, x] = rej[r, x]
            out_act[r, x] = 0

    row_lo = l
    for k in range(1, n_max + 1):
        row_hi = hi - k
        # in-place ascending sweep: row r reads only the old row r+1
        for r in range(row_lo, row_hi + 1):
            denom = a0 + b0 + r
            for x in range(r + 1):
                pr = (a0 + x) / denom
                qr = 1.0 - pr
                for ch in range(4):
                    work[ch, r, x] = pr * work[ch, r + 1, x + 1] + qr * work[ch, r + 1, x]
        cost_k = c0 + c1 * k
        for r in range(s_lo, s_hi + 1):
            for x in range(r + 1):
                if out_abs[r, x]:
                    continue
                v0 = work[0, r, x] - cost_k
                q = v0 + eps * work[1, r, x]
                if q > best_q[r, x]:
                    best_q[r, x] = q
                    out_act[r, x] = k
                    out_v0[r, x] = v0
                    out_a[r, x] = work[1, r, x]
                    out_p[r, x] = work[2, r, x]
                    out_o[r, x] = work[3, r, x]

    for r in range(s_lo, s_hi + 1):
        for x in range(r + 1):
            if out_abs[r, x]:
                out_act[r, x] = 0
                out_v0[r, x] = 0.0
                out_a[r, x] = 0.0
                out_p[r, x] = 0.0
                out_o[r, x] = 0.0
            elif not best_q[r, x] > 0.0:
                # opting out is free; indifference resolves to opting out
                out_act[r, x] = 0
                out_v0[r, x] = 0.0
                out_a[r, x] = 0.0
                out_p[r, x] = 0.0
                out_o[r, x] = 1.0


# --------------------------------------------------------------------------
# solved policy


@dataclass(frozen=True)
class PolicyTable:
    """Optimal action and value decomposition for one prior, per layer.

    Layer ``l`` arrays are indexed ``[N, X]`` for N in [l, l*n_max]
    (only [0, 0] at l = 0); other entries are unused.
    """

    alpha0: float
    beta0: float
    action: tuple[np.ndarray, ...]
    v_zero: tuple[np.ndarray, ...]
    a_cost: tuple[np.ndarray, ...]
    p_approve: tuple[np.ndarray, ...]
    p_optout: tuple[np.ndarray, ...]
    absorbing: tuple[np.ndarray, ...]

    @property
    def first_action(self) -> int:
        return int(self.action[0][0, 0])


@dataclass(frozen=True)
class RootSummary:
    epsilon: float
    v_zero: float
    a_cost: float
    p_approve: float
    p_optout: float
    first_action: int

    @property
    def value(self) -> float:
        return self.v_zero + self.epsilon * self.a_cost


@dataclass(frozen=True)
class SolvedPolicy:
    cfg: ProtocolConfig
    epsilon: float
    tables: dict = field(repr=False)

    def table(self, prior: tuple[float, float] | None = None) -> PolicyTable:
        return self.tables[prior or self.cfg.agent_prior]

    @property
    def first_action(self) -> int:
        return self.table().first_action

    def action(self, l: int, total_n: int, total_x: int, prior=None) -> int:
        tab = self.table(prior)
        _check_index(self.cfg, l, total_n, total_x)
        return int(tab.action[l][total_n, total_x])

    def root(self, prior=None) -> RootSummary:
        tab = self.table(prior)
        return RootSummary(
            self.epsilon,
            float(tab.v_zero[0][0, 0]),
            float(tab.a_cost[0][0, 0]),
            float(tab.p_approve[0][0, 0]),
            float(tab.p_optout[0][0, 0]),
            tab.first_action,
        )

    def q_averaged(self) -> RootSummary:
        """Root decomposition averaged over the principal's belief Q."""
        v0 = a = p = o = 0.0
        for atom in self.cfg.principal_belief_Q:
            r = self.root((atom.alpha0, atom.beta0))
            v0 += atom.weight * r.v_zero
            a += atom.weight * r.a_cost
            p += atom.weight * r.p_approve
            o += atom.weight * r.p_optout
        return RootSummary(self.epsilon, v0, a, p, o, self.first_action)

    def values(self, epsilon_query: float | None = None, prior=None) -> list[np.ndarray]:
        """Per-layer value arrays of this fixed policy at ``epsilon_query``."""
        eps = self.epsilon if epsilon_query is None else epsilon_query
        tab = self.table(prior)
        return [v + eps * a for v, a in zip(tab.v_zero, tab.a_cost)]


def _check_index(cfg: ProtocolConfig, l: int, total_n: int, total_x: int) -> None:
    lo, hi = layer_bounds(l, cfg.n_max) if 0 <= l <= cfg.horizon_T else (1, 0)
    if not (lo <= total_n <= hi and 0 <= total_x <= total_n):
        raise UnknownStateError((l, total_n, total_x))


def _solve_prior(cfg: ProtocolConfig, epsilon: float, prior: tuple[float, float], rej: np.ndarray) -> PolicyTable:
    T, n_max = cfg.horizon_T, cfg.n_max
    size_all = cfg.n_total_max + 1
    work = np.zeros((4, size_all + 1, size_all + 1))
    a0, b0 = prior
    outs = [None] * (T + 1)
    nxt = [np.zeros((size_all, size_all)) for _ in range(4)]
    for l in range(T, -1, -1):
        s = l * n_max + 1
        act = np.zeros((s, s), dtype=np.int32)
        v0, a, p, o = (np.zeros((s, s)) for _ in range(4))
        absorbing = np.zeros((s, s), dtype=np.bool_)
        _solve_layer(l, n_max, cfg.cost_fixed, cfg.cost_per_sample, cfg.rho_agent, float(epsilon),
                     float(a0), float(b0), rej, nxt[0], nxt[1], nxt[2], nxt[3], work,
                     act, v0, a, p, o, absorbing)
        outs[l] = (act, v0, a, p, o, absorbing)
        nxt = [v0, a, p, o]
    for arrs in outs:
        for arr in arrs:
            arr.setflags(write=False)
    return PolicyTable(a0, b0, *(tuple(o[i] for o in outs) for i in range(6)))


def solve(cfg: ProtocolConfig, epsilon: float, cap: int = DEFAULT_STATE_CAP) -> SolvedPolicy:
    """Optimal agent policy and its V0 / A decomposition at subsidy ``epsilon``."""
    if not 0.0 <= epsilon <= cfg.epsilon_max:
        raise ValueError(f"epsilon={epsilon} outside [0, {cfg.epsilon_max}]")
    _check_cap(cfg, cap)
    rej = np.ascontiguousarray(rejection_grid(cfg))
    tables = {prior: _solve_prior(cfg, epsilon, prior, rej) for prior in cfg.priors()}
    return SolvedPolicy(cfg, float(epsilon), tables)


# --------------------------------------------------------------------------
# evaluation


def value_at(policy: SolvedPolicy, state: BeliefState, l: int, epsilon_query: float) -> float:
    """Value of the fixed ``policy`` at ``state`` and layer ``l`` under another subsidy."""
    cfg = policy.cfg
    if not 0.0 <= epsilon_query <= cfg.epsilon_max:
        raise ValueError(f"epsilon={epsilon_query} outside [0, {cfg.epsilon_max}]")
    prior = (state.alpha0, state.beta0)
    if prior not in policy.tables:
        raise UnknownStateError(prior)
    _check_index(cfg, l, state.total_n, state.total_x)
    tab = policy.tables[prior]
    if tab.absorbing[l][state.total_n, state.total_x]:
        return 0.0
    return float(tab.v_zero[l][state.total_n, state.total_x]
                 + epsilon_query * tab.a_cost[l][state.total_n, state.total_x])


def anticipated_agent_utility(policy: SolvedPolicy, cfg: ProtocolConfig, epsilon: float) -> float:
    total = 0.0
    for atom in cfg.principal_belief_Q:
        state = BeliefState(0, 0, 0, atom.alpha0, atom.beta0)
        total += atom.weight * value_at(policy, state, 0, epsilon)
    return total


def anticipated_social_utility(policy: SolvedPolicy, cfg: ProtocolConfig, epsilon: float) -> float:
    r = policy.q_averaged()
    return cfg.rho_social * r.p_approve - epsilon * r.a_cost


def state_value_bound(cfg: ProtocolConfig, l: int, total_n, epsilon: float):
    """Upper bound rho_A + eps * C(S) on any state's optimal value."""
    return cfg.rho_agent + epsilon * state_cost(l, total_n, cfg)


def opt_out_threshold(policy: SolvedPolicy, l: int, total_n: int, prior=None) -> int:
    """Largest X at (l, N) where the policy opts out, or -1 if it never does."""
    tab = policy.table(prior)
    row = tab.action[l][total_n, : total_n + 1]
    live = ~tab.absorbing[l][total_n, : total_n + 1]
    xs = np.nonzero((row == 0) & live)[0]
    return int(xs.max()) if len(xs) else -1

