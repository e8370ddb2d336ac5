import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgconv import matrix_game as mg
from pgconv.core_numeric import entropy, kl_divergence, total_variation
from pgconv.errors import ConfigError, DomainError
from pgconv.experiments import rate_fit

RPS = mg.MatrixGame.rock_paper_scissors()
MATCH = mg.MatrixGame(np.array([[1.0, -1.0], [-1.0, 1.0]]))


def test_game_validation():
    with pytest.raises(DomainError):
        mg.MatrixGame(np.array([[2.0]]))
    with pytest.raises(DomainError):
        mg.StrategyPair(np.array([0.5, 0.6]), np.array([1.0]))
    g = mg.MatrixGame.from_dict({"payoff": [[0.5, -0.5]]})
    assert g.shape == (1, 2)


def test_mwu_examples():
    u = mg.StrategyPair.uniform(3, 3)
    p = mg.mwu_step(RPS, u, 0.3)
    np.testing.assert_allclose(p.mu, u.mu, atol=1e-16)
    start = mg.StrategyPair(np.array([0.6, 0.4]), np.array([0.6, 0.4]))
    same = mg.mwu_step(MATCH, start, 0.0)
    np.testing.assert_array_equal(same.mu, start.mu)
    p = mg.mwu_step(MATCH, start, 0.1)
    mu = np.array([0.6 * math.exp(0.02), 0.4 * math.exp(-0.02)])
    nu = np.array([0.6 * math.exp(-0.02), 0.4 * math.exp(0.02)])
    np.testing.assert_allclose(p.mu, mu / mu.sum(), atol=1e-15)
    np.testing.assert_allclose(p.nu, nu / nu.sum(), atol=1e-15)


def test_omwu_examples():
    st0 = mg.OmwuState.initial(3, 3, 0.1)
    for _ in range(3):
        st0 = mg.omwu_step(RPS, st0)
    np.testing.assert_allclose(st0.mu, np.full(3, 1 / 3), atol=1e-15)

    # at t = 0 the predictive pair equals the current pair and the step is MWU
    rng = np.random.default_rng(1)
    game = mg.MatrixGame.random(rng, 3, 4)
    mu, nu = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
    a = mg.omwu_step(game, mg.OmwuState(mu, nu, mu, nu, 0.1))
    b = mg.mwu_step(game, mg.StrategyPair(mu, nu), 0.1)
    np.testing.assert_allclose(a.mu, b.mu, atol=1e-15)
    np.testing.assert_allclose(a.nu, b.nu, atol=1e-15)


def test_omwu_kl_contraction_on_rps():
    p = np.array([0.5, 0.3, 0.2])
    eta, tau = 0.25, 0.1
    mus, nus, _ = mg.omwu_trajectory(RPS, mg.OmwuState(p, p, p, p, eta, tau), 3000)
    u = np.full(3, 1 / 3)
    kl = np.array([kl_divergence(u, m) + kl_divergence(u, n) for m, n in zip(mus, nus)])
    assert total_variation(mus[-1], u) <= 1e-12
    last = int(np.nonzero(kl > 1e-13)[0][-1])
    fit = rate_fit(np.arange(kl.size), kl, 50, last)
    assert fit.factor <= 1 - eta * tau + 0.01


def test_reg_mwu_examples(rng):
    game = mg.MatrixGame.random(rng, 3, 3)
    star = mg.solve_qre(game, 0.2, 1e-14)
    p = mg.reg_mwu_step(game, star, 0.05, 0.2)
    np.testing.assert_allclose(p.mu, star.mu, atol=1e-12)
    start = mg.StrategyPair(rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3)))
    a = mg.reg_mwu_step(game, start, 0.1, 1e-12)
    b = mg.mwu_step(game, start, 0.1)
    np.testing.assert_allclose(a.mu, b.mu, atol=1e-12)

    pert = mg.StrategyPair(np.array([0.5, 0.3, 0.2]), np.array([0.2, 0.2, 0.6]))
    tau, eta = 0.2, 0.05
    e0 = max(total_variation(pert.mu, np.full(3, 1 / 3)), total_variation(pert.nu, np.full(3, 1 / 3)))
    budget = int(math.ceil(math.log(e0 / 1e-8) / -math.log(1 - eta * tau))) + 200
    mus, nus = mg.mwu_trajectory(RPS, pert, eta, budget, tau)
    assert max(total_variation(mus[-1], np.full(3, 1 / 3)), total_variation(nus[-1], np.full(3, 1 / 3))) <= 1e-8
    with pytest.raises(ConfigError):
        mg.reg_mwu_step(game, start, 10.0, 0.2)


def test_ne_gap_examples(rng):
    assert mg.ne_gap(RPS, mg.StrategyPair.uniform(3, 3)) == pytest.approx(0.0, abs=1e-16)
    rock = mg.StrategyPair(np.array([1.0, 0.0, 0.0]), np.full(3, 1 / 3))
    assert mg.ne_gap(RPS, rock) == pytest.approx(1.0)
    game = mg.MatrixGame.random(rng, 4, 3)
    for _ in range(20):
        p = mg.StrategyPair(rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(3)))
        assert mg.ne_gap(game, p) >= 0


def _grid_qre_gap(A, mu, nu, tau, n=4001):
    x = np.linspace(0, 1, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.nan_to_num(x * np.log(x)) - np.nan_to_num((1 - x) * np.log(1 - x))
    best_mu = np.max(x * (A[0] @ nu) + (1 - x) * (A[1] @ nu) + tau * h)
    best_nu = np.min(x * (mu @ A[:, 0]) + (1 - x) * (mu @ A[:, 1]) - tau * h)
    return best_mu - tau * entropy(nu) - (best_nu + tau * entropy(mu))


def test_qre_gap_examples():
    for tau in (0.01, 0.5, 3.0):
        assert mg.qre_gap(RPS, mg.StrategyPair.uniform(3, 3), tau) == pytest.approx(0.0, abs=1e-14)
    u = mg.StrategyPair.uniform(2, 2)
    assert mg.qre_gap(MATCH, u, 0.5) == pytest.approx(_grid_qre_gap(MATCH.payoff, u.mu, u.nu, 0.5), abs=1e-6)
    p = mg.StrategyPair(np.array([0.7, 0.3]), np.array([0.2, 0.8]))
    assert mg.qre_gap(MATCH, p, 0.5) == pytest.approx(_grid_qre_gap(MATCH.payoff, p.mu, p.nu, 0.5), abs=1e-6)
    # entropy dominates for large tau
    tau = 1e4
    big = mg.qre_gap(MATCH, p, tau)
    lead = tau * (2 * math.log(2) - entropy(p.mu) - entropy(p.nu))
    assert abs(big - lead) <= 2.0


def test_solve_qre_examples(rng):
    for tau in (0.05, 1.0):
        p = mg.solve_qre(RPS, tau)
        np.testing.assert_allclose(p.mu, np.full(3, 1 / 3), atol=1e-12)
    p = mg.solve_qre(mg.MatrixGame(np.array([[0.3]])), 0.1)
    np.testing.assert_array_equal(p.mu, [1.0])

    # matching pennies is symmetric, so its QRE is uniform at every tau
    p = mg.solve_qre(MATCH, 0.5)
    np.testing.assert_allclose(p.mu, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(p.nu, [0.5, 0.5], atol=1e-12)

    # damped soft best-response iteration as an independent oracle
    A, tau = np.array([[0.8, -0.3], [-0.5, 0.6]]), 0.7
    mu, nu = np.array([0.9, 0.1]), np.array([0.3, 0.7])
    for _ in range(20000):
        bm = np.exp(A @ nu / tau)
        bn = np.exp(-A.T @ mu / tau)
        mu = 0.9 * mu + 0.1 * bm / bm.sum()
        nu = 0.9 * nu + 0.1 * bn / bn.sum()
    assert np.max(np.abs(mu - np.exp(A @ nu / tau) / np.exp(A @ nu / tau).sum())) <= 1e-12
    p = mg.solve_qre(A, tau)
    np.testing.assert_allclose(p.mu, mu, atol=1e-8)
    np.testing.assert_allclose(p.nu, nu, atol=1e-8)


def test_solve_qre_on_random_games(rng):
    for _ in range(10):
        game = mg.MatrixGame.random(rng, int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        tau = float(rng.choice([0.05, 0.2, 1.0]))
        p = mg.solve_qre(game, tau, 1e-10)
        assert mg.qre_gap(game, p, tau) <= 1e-10
        assert mg.qre_fixed_point_residual(game, p, tau) <= 1e-10


def test_solve_qre_large_payoffs_use_scaling(rng):
    A = rng.uniform(0, 5, size=(3, 3))
    tau = 0.3
    p = mg.solve_qre(A, tau, 1e-11)
    assert mg.qre_gap(A, p, tau) <= 1e-11


def test_qre_to_ne_transfer(rng):
    eps = 0.05
    for _ in range(10):
        m, n = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        game = mg.MatrixGame.random(rng, m, n)
        tau = eps / (2 * (math.log(m) + math.log(n)))
        p = mg.solve_qre(game, tau, eps / 2)
        assert mg.ne_gap(game, p) <= eps


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3))
def test_payoff_shift_leaves_iterates_unchanged(seed, c):
    r = np.random.default_rng(seed)
    A = r.uniform(-1, 1, size=(3, 4))
    mu, nu = r.dirichlet(np.ones(3)), r.dirichlet(np.ones(4))
    a = mg.mwu_step(A, mg.StrategyPair(mu, nu), 0.2)
    b = mg.mwu_step(A + c, mg.StrategyPair(mu, nu), 0.2)
    np.testing.assert_allclose(a.mu, b.mu, atol=1e-12)
    np.testing.assert_allclose(a.nu, b.nu, atol=1e-12)
    s1 = mg.OmwuState(mu, nu, mu, nu, 0.2, 0.1, 1)
    x = mg.omwu_step(A, s1)
    y = mg.omwu_step(A + c, s1)
    np.testing.assert_allclose(x.mu, y.mu, atol=1e-12)
    np.testing.assert_allclose(x.nu_bar, y.nu_bar, atol=1e-12)
    # soft best-response values shift by c
    tau = 0.3
    v = tau * np.log(np.sum(np.exp(A @ nu / tau)))
    w = tau * np.log(np.sum(np.exp((A + c) @ nu / tau)))
    assert w - v == pytest.approx(c, abs=1e-12)


def test_mwu_cycles_while_average_converges():
    start = np.array([0.4, 0.4, 0.2])
    mus, nus = mg.mwu_trajectory(RPS, mg.StrategyPair(start, start), 0.1, 1000)
    gaps = mg.ne_gaps(RPS, mus, nus)
    assert gaps[500:].max() >= gaps[10]
    k = np.arange(1, 1002)[:, None]
    avg_gaps = mg.ne_gaps(RPS, np.cumsum(mus, 0) / k, np.cumsum(nus, 0) / k)
    assert avg_gaps[-1] < 0.5 * avg_gaps[10]


def test_omwu_last_iterate_convergence():
    start = np.array([0.4, 0.4, 0.2])
    mus, nus, _ = mg.omwu_trajectory(RPS, mg.OmwuState(start, start, start, start, 1 / 8), 10000)
    gaps = mg.ne_gaps(RPS, mus, nus)
    assert gaps[-1] <= 1e-6
    assert rate_fit(np.arange(10001), gaps, 5000, 10000).slope < 0


def test_regularized_omwu_rate(rng):
    game = mg.MatrixGame.random(rng, 4, 3)
    tau = 0.1
    eta = mg.default_qre_rate(tau)
    state = mg.OmwuState.initial(4, 3, eta, tau)
    e0 = mg.qre_gap(game, state.pair, tau)
    n = mg.iteration_budget(e0, 1e-8, eta, tau)
    mus, nus, final = mg.omwu_trajectory(game, state, n)
    q = mg.qre_gaps(game, mus, nus, tau)
    assert q.min() <= 1e-8
    assert final.t == n
    last = int(np.nonzero(q > 1e-13)[0][-1])
    assert rate_fit(np.arange(q.size), q, n // 10, last).factor <= 1 - eta * tau + 0.02


def test_omwu_warns_outside_certified_range():
    with pytest.warns(UserWarning):
        mg.omwu_step(RPS, mg.OmwuState.initial(3, 3, 0.5, 1.0))
    assert mg.rate_certified(1.0, 0.25) and not mg.rate_certified(1.0, 0.26)


def test_vectorized_gaps_match_scalar(rng):
    game = mg.MatrixGame.random(rng, 3, 5)
    mus = rng.dirichlet(np.ones(3), size=7)
    nus = rng.dirichlet(np.ones(5), size=7)
    for i in range(7):
        p = mg.StrategyPair(mus[i], nus[i])
        assert mg.ne_gaps(game, mus, nus)[i] == pytest.approx(mg.ne_gap(game, p), abs=1e-15)
        assert mg.qre_gaps(game, mus, nus, 0.2)[i] == pytest.approx(mg.qre_gap(game, p, 0.2), abs=1e-14)
