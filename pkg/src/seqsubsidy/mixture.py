"""Mixture test supermartingale over alternatives on (theta_b, 1).

f_mix(X, N) = int_{theta_b}^1 p(theta) (theta/theta_b)^X ((1-theta)/(1-theta_b))^(N-X) dtheta

evaluated by Gauss-Legendre quadrature with a log-space integrand. The node
count doubles until two successive rules agree to ``tolerance``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .config import ProtocolConfig

MAX_NODES = 6400


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class MixtureSpec:
    kind: str = "uniform"
    quadrature_nodes: int = 200
    tolerance: float = 1e-10
    # rate of the truncated exponential mixture; unused for "uniform"
    rate: float = 10.0

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "exponential"):
            raise ValueError(f"unknown mixture kind {self.kind!r}")
        if self.quadrature_nodes < 16:
            raise ValueError("need at least 16 quadrature nodes")


@functools.lru_cache(maxsize=64)
def _rule(theta_b: float, nodes: int, kind: str, rate: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-node (log weight * density, log success ratio, log failure ratio)."""
    u, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (1.0 - theta_b)
    theta = theta_b + half * (u + 1.0)
    if kind == "uniform":
        log_density = np.full(nodes, -math.log1p(-theta_b))
    else:
        # density proportional to exp(-rate*theta) on (theta_b, 1)
        log_norm = math.log(-math.expm1(-rate * (1.0 - theta_b))) - rate * theta_b - math.log(rate)
        log_density = -rate * theta - log_norm
    log_w = np.log(w * half) + log_density
    a = np.log(theta / theta_b)
    b = np.log1p(-theta) - math.log1p(-theta_b)
    return log_w, a, b


def _log_f_mix_raw(x, y, theta_b: float, spec: MixtureSpec, nodes: int) -> np.ndarray:
    log_w, a, b = _rule(theta_b, nodes, spec.kind, spec.rate)
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    return logsumexp(log_w + x * a + y * b, axis=-1)


def log_f_mix_xy(x, y, theta_b: float, spec: MixtureSpec) -> np.ndarray:
    """Log mixture statistic for success excess ``x`` and failure excess ``y``.

    Node doubling starts at ``spec.quadrature_nodes``; raises QuadratureError
    if the rule has not stabilised by MAX_NODES.
    """
    nodes = spec.quadrature_nodes
    prev = _log_f_mix_raw(x, y, theta_b, spec, nodes)
    while nodes < MAX_NODES:
        nodes *= 2
        cur = _log_f_mix_raw(x, y, theta_b, spec, nodes)
        if np.all(np.abs(cur - prev) <= spec.tolerance * np.maximum(1.0, np.abs(cur))):
            return cur
        prev = cur
    raise QuadratureError(f"mixture quadrature did not converge within {MAX_NODES} nodes")


@functools.lru_cache(maxsize=200_000)
def _log_f_mix_state(total_x: int, total_n: int, theta_b: float, spec: MixtureSpec) -> float:
    return float(log_f_mix_xy(total_x, total_n - total_x, theta_b, spec))


def log_f_mix(state, cfg: ProtocolConfig, spec: MixtureSpec | None = None) -> float:
    """Log mixture test-process value at a BeliefState (memoised on (N, X))."""
    spec = spec or MixtureSpec(quadrature_nodes=cfg.mixture_nodes)
    if state.total_n == 0:
        return 0.0
    return _log_f_mix_state(state.total_x, state.total_n, cfg.theta_baseline, spec)


@functools.lru_cache(maxsize=8)
def _grid_cached(theta_b: float, n_total: int, spec: MixtureSpec) -> np.ndarray:
    out = np.full((n_total + 1, n_total + 1), -np.inf)
    for n in range(n_total + 1):
        x = np.arange(n + 1)
        out[n, : n + 1] = log_f_mix_xy(x, n - x, theta_b, spec)
    out[0, 0] = 0.0
    out.setflags(write=False)
    return out


def log_f_mix_grid(theta_b: float, n_total: int, spec: MixtureSpec) -> np.ndarray:
    """Log mixture statistic on the (N, X) grid; -inf where X > N."""
    return _grid_cached(float(theta_b), int(n_total), spec)


def rejection_region_table(cfg: ProtocolConfig, spec: MixtureSpec | None, alpha_range, beta_range) -> np.ndarray:
    """Boolean table ``[i, j]`` of f(alpha_i, beta_j) >= 1/kappa.

    ``spec=None`` tabulates the non-mixed exponential e-value process instead.
    """
    alpha = np.asarray(alpha_range, dtype=float)[:, None]
    beta = np.asarray(beta_range, dtype=float)[None, :]
    x = alpha - cfg.prior_alpha0
    y = beta - cfg.prior_beta0
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("belief grid must not lie below the prior")
    if spec is None:
        vals = x - (x + y) * cfg.lam
    else:
        x, y = np.broadcast_arrays(x, y)
        vals = log_f_mix_xy(x, y, cfg.theta_baseline, spec)
    return vals >= cfg.log_threshold
