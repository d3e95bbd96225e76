"""Independent reference computations used only by the tests.

Nothing here imports the solver: transition weights come from
scipy.stats.betabinom, the approval rule and costs are recomputed from the
raw parameters, and values are obtained by recursion over explicit
(alpha, beta, C) states or by enumerating whole policy trees.
"""
from __future__ import annotations

import functools
import itertools
import math

import numpy as np
from scipy import stats


def lam(theta_b):
    return math.log(1 + theta_b * (math.e - 1))


def approved(alpha, beta, a0, b0, theta_b, kappa):
    return (alpha - a0) - (alpha + beta - a0 - b0) * lam(theta_b) >= math.log(1 / kappa)


def bb_weights(n, alpha, beta):
    return stats.betabinom(n, alpha, beta).pmf(np.arange(n + 1))


def make_direct_solver(T, n_max, theta_b, kappa, c0, c1, rho_a, eps, a0, b0, approve=None):
    """Bellman recursion over explicit (alpha, beta, C, l) states.

    Returns ``V(alpha, beta, C, l) -> (value, action)``.
    """
    approve = approve or (lambda a, b: approved(a, b, a0, b0, theta_b, kappa))

    @functools.lru_cache(maxsize=None)
    def V(alpha, beta, C, l):
        if l > T:
            return 0.0, 0
        best, best_n = 0.0, 0
        for n in range(1, n_max + 1):
            cn = c0 + c1 * n
            w = bb_weights(n, alpha, beta)
            q = -cn
            for x in range(n + 1):
                a2, b2 = alpha + x, beta + n - x
                if approve(a2, b2):
                    q += w[x] * (rho_a + eps * (C + cn))
                else:
                    q += w[x] * V(a2, b2, C + cn, l + 1)[0]
            if q > best:
                best, best_n = q, n
        return best, best_n

    return V


def exhaustive_depth2(n_max, theta_b, kappa, c0, c1, rho_a, eps, a0, b0):
    """Best expected reward over every deterministic two-trial policy tree.

    A tree is a first action n0 plus one follow-up action per first outcome;
    every combination is enumerated and evaluated in full.
    """
    best = 0.0
    for n0 in range(0, n_max + 1):
        if n0 == 0:
            best = max(best, 0.0)
            continue
        c_first = c0 + c1 * n0
        w0 = bb_weights(n0, a0, b0)
        for follow in itertools.product(range(n_max + 1), repeat=n0 + 1):
            total = -c_first
            for x0 in range(n0 + 1):
                a1, b1 = a0 + x0, b0 + n0 - x0
                if approved(a1, b1, a0, b0, theta_b, kappa):
                    total += w0[x0] * (rho_a + eps * c_first)
                    continue
                n1 = follow[x0]
                if n1 == 0:
                    continue
                c_second = c0 + c1 * n1
                w1 = bb_weights(n1, a1, b1)
                inner = -c_second
                for x1 in range(n1 + 1):
                    if approved(a1 + x1, b1 + n1 - x1, a0, b0, theta_b, kappa):
                        inner += w1[x1] * (rho_a + eps * (c_first + c_second))
                total += w0[x0] * inner
            best = max(best, total)
    return best


def exact_e_value_mean(n, theta, theta_b):
    """E[exp(X - n*lambda)] for X ~ Bin(n, theta), summed exactly."""
    x = np.arange(n + 1)
    pmf = stats.binom(n, theta).pmf(x)
    return float(np.sum(pmf * np.exp(x - n * lam(theta_b))))


def log_f_mix_closed_form(x, y, theta_b):
    """Uniform-mixture statistic via the incomplete beta function at 50 digits.

    The upper-tail integral underflows float64 once the posterior mass above
    theta_b drops below about 1e-308, so this is evaluated in mpmath.
    """
    import mpmath

    with mpmath.workdps(50):
        tb = mpmath.mpf(theta_b)
        # reflect t -> 1 - t so the tail is a lower integral, free of cancellation
        tail = mpmath.betainc(y + 1, x + 1, 0, 1 - tb)
        return float(mpmath.log(tail) - mpmath.log1p(-tb)
                     - x * mpmath.log(tb) - y * mpmath.log1p(-tb))
