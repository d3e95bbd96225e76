"""Principal's optimal subsidy by divide and conquer over the agent's value.

The agent's Q-averaged optimal value is convex and piecewise affine in the
subsidy; each affine piece belongs to one policy. Intersecting the lines of
the policies optimal at an interval's endpoints either certifies a breakpoint
(no policy beats the two lines there) or exposes a new piece to split on.
Social utility is affine and decreasing on each piece, so the optimum sits at
a left endpoint.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from typing import Callable

from .config import ProtocolConfig
from .mdp import RootSummary, SolvedPolicy, solve

VERTEX_SLACK = 1e-9
SLOPE_RTOL = 1e-12
MERGE_TOL = 1e-12
MAX_POPS = 100_000


class ConvexityError(RuntimeError):
    """The intersection left its bracketing interval: the solver broke convexity."""


@dataclass(frozen=True)
class Vertex:
    epsilon: float
    # root summary (Q-averaged) of the policy optimal on [epsilon, next vertex)
    policy: RootSummary
    policy_id: int

    def social_utility(self, rho_social: float) -> float:
        return rho_social * self.policy.p_approve - self.epsilon * self.policy.a_cost

    @property
    def agent_value(self) -> float:
        return self.policy.v_zero + self.epsilon * self.policy.a_cost


@dataclass(frozen=True)
class SubsidySolution:
    cfg: ProtocolConfig
    vertices: tuple[Vertex, ...]
    eps_star: float
    u_star: float
    mdp_solve_count: int
    star_index: int = field(default=0)

    @property
    def n_intervals(self) -> int:
        return len(self.vertices)

    @property
    def breakpoints(self) -> list[float]:
        return [v.epsilon for v in self.vertices] + [self.cfg.epsilon_max]

    @property
    def social_utilities(self) -> list[float]:
        return [v.social_utility(self.cfg.rho_social) for v in self.vertices]

    def interval_index(self, epsilon: float) -> int:
        if not 0.0 <= epsilon <= self.cfg.epsilon_max:
            raise ValueError(f"epsilon={epsilon} outside [0, {self.cfg.epsilon_max}]")
        starts = [v.epsilon for v in self.vertices]
        return max(0, bisect.bisect_right(starts, epsilon) - 1)

    def agent_value(self, epsilon: float) -> float:
        """Upper envelope of the recovered affine pieces."""
        return max(v.policy.v_zero + epsilon * v.policy.a_cost for v in self.vertices)

    def social_utility(self, epsilon: float) -> float:
        v = self.vertices[self.interval_index(epsilon)]
        return self.cfg.rho_social * v.policy.p_approve - epsilon * v.policy.a_cost

    def with_rho_social(self, rho_social: float) -> "SubsidySolution":
        """Re-rank the same partition under another social benefit.

        The agent's problem does not involve rho_S, so the partition and the
        per-piece policies carry over unchanged.
        """
        cfg = self.cfg.replace(rho_social=rho_social)
        idx, u = _argmax_vertex(self.vertices, rho_social)
        return replace(self, cfg=cfg, eps_star=self.vertices[idx].epsilon, u_star=u, star_index=idx)

    def star_policy(self, solver: Callable[[ProtocolConfig, float], SolvedPolicy] = solve) -> SolvedPolicy:
        """Full policy optimal on the interval starting at eps_star.

        At a breakpoint two policies tie for the agent; the piece's interior
        midpoint selects the one the principal's utility was recorded for.
        The returned policy is labelled with eps_star, the subsidy actually paid.
        Its fixed-policy values at eps_star match the optimum at the root, but
        states the policy never reaches may hold actions tuned to the midpoint;
        use ``solve(cfg, eps_star)`` for the optimal value at every state.
        """
        lo = self.breakpoints[self.star_index]
        hi = self.breakpoints[self.star_index + 1]
        return replace(solver(self.cfg, 0.5 * (lo + hi)), epsilon=self.eps_star)


def _argmax_vertex(vertices, rho_social: float) -> tuple[int, float]:
    best, best_u = 0, -float("inf")
    for i, v in enumerate(vertices):
        u = v.social_utility(rho_social)
        if u > best_u:
            best, best_u = i, u
    return best, best_u


def _line(s: RootSummary, eps: float) -> float:
    return s.v_zero + eps * s.a_cost


def optimize(
    cfg: ProtocolConfig,
    solver: Callable[[ProtocolConfig, float], SolvedPolicy] = solve,
    log: Callable[[str], None] | None = None,
    vertex_slack: float = VERTEX_SLACK,
) -> SubsidySolution:
    """Recover the partition of [0, epsilon_max] and the principal's best subsidy.

    ``vertex_slack`` is the relative tolerance of the vertex test; raising it
    merges pieces whose lines rise less than that above their neighbours.
    """
    solves = 0

    def solve_summary(eps: float) -> RootSummary:
        nonlocal solves
        solves += 1
        s = solver(cfg, eps).q_averaged()
        if log:
            log(f"solve #{solves}: eps={eps:.12g} first_action={s.first_action} value={s.value:.12g}")
        return s

    eps_max = cfg.epsilon_max
    left = solve_summary(0.0)
    right = solve_summary(eps_max)
    found: list[tuple[float, RootSummary]] = [(0.0, left)]
    stack = [(0.0, left, eps_max, right)]
    pops = 0
    while stack:
        pops += 1
        if pops > MAX_POPS:
            raise ConvexityError("subsidy search did not terminate")
        eps_l, s_l, eps_r, s_r = stack.pop()
        scale = max(abs(s_l.a_cost), abs(s_r.a_cost), 1.0)
        if abs(s_r.a_cost - s_l.a_cost) <= SLOPE_RTOL * scale:
            continue
        eps_int = (s_l.v_zero - s_r.v_zero) / (s_r.a_cost - s_l.a_cost)
        tol = 1e-9 * max(1.0, eps_max)
        if not eps_l - tol <= eps_int <= eps_r + tol:
            raise ConvexityError(f"intersection {eps_int} outside [{eps_l}, {eps_r}]")
        eps_int = min(max(eps_int, eps_l), eps_r)
        s_int = solve_summary(eps_int)
        slack = vertex_slack * max(1.0, abs(s_l.v_zero))
        if _line(s_int, eps_int) <= _line(s_l, eps_int) + slack:
            found.append((eps_int, s_r))
        else:
            stack.append((eps_l, s_l, eps_int, s_int))
            stack.append((eps_int, s_int, eps_r, s_r))

    found.sort(key=lambda item: item[0])
    merged: list[tuple[float, RootSummary]] = []
    for eps, s in found:
        if merged and eps - merged[-1][0] <= MERGE_TOL:
            # keep the policy to the right of the merged point
            merged[-1] = (merged[-1][0], s) if merged[-1][0] > 0.0 else merged[-1]
            continue
        if eps >= eps_max - MERGE_TOL and merged:
            continue
        merged.append((eps, s))
    vertices = tuple(Vertex(eps, s, i) for i, (eps, s) in enumerate(merged))
    idx, u = _argmax_vertex(vertices, cfg.rho_social)
    return SubsidySolution(cfg, vertices, vertices[idx].epsilon, u, solves, idx)


def evaluate_social_curve(cfg: ProtocolConfig, solution: SubsidySolution, grid) -> list[dict]:
    """Social utility along ``grid`` using each interval's policy decomposition."""
    rows = []
    for eps in grid:
        eps = float(eps)
        if not 0.0 <= eps <= cfg.epsilon_max:
            raise ValueError(f"grid point {eps} outside [0, {cfg.epsilon_max}]")
        i = solution.interval_index(eps)
        v = solution.vertices[i]
        rows.append({
            "epsilon": eps,
            "interval": i,
            "policy_id": v.policy_id,
            "social_utility": cfg.rho_social * v.policy.p_approve - eps * v.policy.a_cost,
            "agent_value": v.policy.v_zero + eps * v.policy.a_cost,
            "p_approve": v.policy.p_approve,
            "p_optout": v.policy.p_optout,
        })
    return rows
