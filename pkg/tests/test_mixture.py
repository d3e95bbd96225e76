import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize as sopt
from scipy import stats

from oracles import log_f_mix_closed_form
from seqsubsidy.config import ProtocolConfig
from seqsubsidy.core import BeliefState, log_f
from seqsubsidy.mixture import (
    MixtureSpec,
    QuadratureError,
    log_f_mix,
    log_f_mix_grid,
    log_f_mix_xy,
    rejection_region_table,
)

MIX = ProtocolConfig(test_process_kind="uniform-mixture")
SPEC = MixtureSpec()


def test_initial_state_is_zero():
    assert log_f_mix(BeliefState.initial(MIX), MIX, SPEC) == 0.0
    assert float(log_f_mix_xy(0, 0, 0.5, SPEC)) == pytest.approx(0.0, abs=1e-13)


@given(st.integers(0, 800), st.data(), st.sampled_from([0.2, 0.5, 0.8]))
def test_matches_incomplete_beta_closed_form(n, data, theta_b):
    x = data.draw(st.integers(0, n))
    got = float(log_f_mix_xy(x, n - x, theta_b, SPEC))
    ref = float(log_f_mix_closed_form(x, n - x, theta_b))
    assert got == pytest.approx(ref, rel=1e-8, abs=1e-8)


def test_point_mass_alternative_recovers_exponential_e_value():
    # the e-value exp(x - n*lam) is the likelihood ratio against theta~ = theta_b * e^(1 - lam)
    theta_b = 0.5
    lam = math.log1p(theta_b * math.expm1(1))
    alt = theta_b * math.exp(1 - lam)
    assert math.log(alt / theta_b) == pytest.approx(1 - lam, abs=1e-14)
    assert math.log((1 - alt) / (1 - theta_b)) == pytest.approx(-lam, abs=1e-14)
    assert alt * (1 - theta_b) / ((1 - alt) * theta_b) == pytest.approx(math.e, rel=1e-14)


def test_quadrature_converged_on_fiducial_space():
    n_total = 800
    coarse = MixtureSpec(quadrature_nodes=400)
    fine = MixtureSpec(quadrature_nodes=800)
    for n in range(0, n_total + 1, 37):
        x = np.arange(n + 1)
        a = log_f_mix_xy(x, n - x, 0.5, coarse)
        b = log_f_mix_xy(x, n - x, 0.5, fine)
        assert np.all(np.abs(a - b) <= 1e-8 * np.maximum(1.0, np.abs(b)))


def test_non_convergence_raises(monkeypatch):
    import seqsubsidy.mixture as mixture

    monkeypatch.setattr(mixture, "MAX_NODES", 32)
    with pytest.raises(QuadratureError):
        log_f_mix_xy(700, 100, 0.5, MixtureSpec(quadrature_nodes=16, tolerance=1e-14))


def test_mixture_spec_validation():
    with pytest.raises(ValueError):
        MixtureSpec(quadrature_nodes=8)
    with pytest.raises(ValueError):
        MixtureSpec(kind="beta")


def test_core_dispatches_to_mixture():
    s = BeliefState(2, 40, 30)
    assert log_f(s, MIX) == pytest.approx(float(log_f_mix_closed_form(30, 10, 0.5)), rel=1e-9)


def test_grid_is_read_only_and_consistent():
    grid = log_f_mix_grid(0.5, 60, SPEC)
    assert not grid.flags.writeable
    assert grid[0, 0] == 0.0
    assert np.isneginf(grid[3, 5])
    assert grid[40, 30] == pytest.approx(float(log_f_mix_closed_form(30, 10, 0.5)), rel=1e-9)


def test_all_failures_never_rejected():
    for n in (1, 10, 100, 800):
        assert float(log_f_mix_xy(0, n, 0.5, SPEC)) < 0.0


def test_monotone_in_successes():
    grid = log_f_mix_grid(0.5, 300, SPEC)
    for n in range(1, 301):
        row = grid[n, : n + 1]
        assert np.all(np.diff(row) > 0)


@pytest.mark.parametrize("theta", [0.0, 0.2, 0.4, 0.49])
def test_supermartingale_exact_one_step(theta):
    # E[M_{t+1} / M_t | past] <= 1 under the null, summed exactly over a 20-sample trial
    n = 20
    pmf = stats.binom(n, theta).pmf(np.arange(n + 1))
    for X, Y in [(0, 0), (5, 5), (30, 10), (12, 40), (100, 80)]:
        base = float(log_f_mix_xy(X, Y, 0.5, SPEC))
        x = np.arange(n + 1)
        nxt = log_f_mix_xy(X + x, Y + n - x, 0.5, SPEC)
        ratio = float(np.sum(pmf * np.exp(nxt - base)))
        assert ratio <= 1 + 1e-10


def test_supermartingale_monte_carlo():
    # sampled histories, then a Monte Carlo estimate of the next-step ratio with its CI
    rng = np.random.default_rng(11)
    theta, n = 0.49, 20
    for _ in range(5):
        X = int(rng.integers(0, 60))
        Y = int(rng.integers(0, 60))
        base = float(log_f_mix_xy(X, Y, 0.5, SPEC))
        x = rng.binomial(n, theta, size=20_000)
        r = np.exp(log_f_mix_xy(X + x, Y + n - x, 0.5, SPEC) - base)
        upper = r.mean() - 1.96 * r.std(ddof=1) / math.sqrt(r.size)
        assert upper <= 1.0


def _boundary_beta(alpha, cfg, spec):
    """Real beta at which the mixture statistic crosses the threshold (alpha fixed)."""
    g = lambda b: float(log_f_mix_xy(alpha - cfg.prior_alpha0, b - cfg.prior_beta0,
                                     cfg.theta_baseline, spec)) - cfg.log_threshold
    return sopt.brentq(g, cfg.prior_beta0, 50 * alpha)


def test_mixture_boundary_slope_increases():
    alphas = np.arange(20.0, 200.0, 20.0)
    betas = np.array([_boundary_beta(a, MIX, SPEC) for a in alphas])
    slopes = np.diff(betas) / np.diff(alphas)
    assert np.all(np.diff(slopes) > 0)
    # the exponential e-value boundary is a straight line of slope (1 - lam)/lam
    assert slopes[-1] > 0 and slopes[0] < (1 - MIX.lam) / MIX.lam < slopes[-1]


def test_region_tables_not_nested():
    alpha = np.arange(1.0, 121.0)
    beta = np.arange(1.0, 121.0)
    expo = rejection_region_table(MIX, None, alpha, beta)
    mix = rejection_region_table(MIX, SPEC, alpha, beta)
    only_expo = expo & ~mix
    only_mix = mix & ~expo
    assert np.any(only_expo) and np.any(only_mix)
    # the exponential process rejects more at moderate failure counts, the mixture at large ones
    assert np.any(only_expo[:, 3:25]) and not np.any(only_mix[:, 3:25])
    assert np.any(only_mix[:, 60:]) and not np.any(only_expo[:, 60:])


def test_region_table_rejects_below_prior():
    with pytest.raises(ValueError):
        rejection_region_table(MIX, SPEC, [0.5], [1.0])


def test_exponential_mixture_density_normalised():
    spec = MixtureSpec(kind="exponential", rate=10.0)
    assert float(log_f_mix_xy(0, 0, 0.5, spec)) == pytest.approx(0.0, abs=1e-12)
