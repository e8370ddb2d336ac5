"""Executable acceptance criteria.

Each ``criterion_*`` function runs one check end to end and returns a
``CriterionResult`` holding the verdict, the measured numbers and the wall
time. ``run_suite`` executes a selection of them.
"""
from __future__ import annotations

import math
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import lqr
from . import markov_game as mk
from . import matrix_game as mg
from . import pg_single_agent as pg
from . import tabular_mdp as tm
from .core_numeric import is_distribution, softmax, spectral_norm, total_variation


@dataclass
class CriterionResult:
    number: int
    name: str
    module: str
    passed: bool
    runtime: float
    budget: float
    measured: dict = field(default_factory=dict)

    @property
    def within_budget(self):
        return self.runtime < self.budget

    @property
    def ok(self):
        return self.passed and self.within_budget

    def line(self):
        verdict = "PASS" if self.ok else "FAIL"
        shown = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        return (f"[{verdict}] {self.number:2d} {self.name} ({self.runtime:.2f}s / {self.budget:g}s)"
                + (f": {shown}" if shown else ""))

    def to_dict(self):
        return {"criterion": self.number, "name": self.name, "module": self.module, "passed": self.ok,
                "checks_passed": self.passed, "runtime_s": round(self.runtime, 3), "budget_s": self.budget,
                "measured": {k: _plain(v) for k, v in self.measured.items()}}


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _plain(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


# absolute slack for inequalities that compare two computed costs; Lyapunov
# solves are accurate to about 1e-13 relative, so below this the comparison
# only measures rounding
COST_FLOOR = 1e-11


def _random_mdps(rng, n, gammas, max_s=6, max_a=4, rho_uniform=True):
    out = []
    for i in range(n):
        S = int(rng.integers(2, max_s + 1))
        A = int(rng.integers(2, max_a + 1))
        out.append(tm.TabularMdp.random(rng, S, A, float(gammas[i % len(gammas)])))
    return out


def _value_rho(mdp, theta):
    return float(mdp.rho @ tm.evaluate_policy(mdp, tm.policy_from_softmax(theta)).V)


# ---------------------------------------------------------------------------


def criterion_1(seed=0):
    """Softmax policy gradient against central finite differences."""
    rng = np.random.default_rng(seed)
    h = 1e-5
    worst = 0.0
    for mdp in _random_mdps(rng, 20, (0.5, 0.9, 0.99)):
        theta = rng.normal(size=(mdp.n_states, mdp.n_actions))
        g = pg.softmax_policy_gradient(mdp, theta)
        fd = np.empty_like(theta)
        for idx in np.ndindex(theta.shape):
            e = np.zeros_like(theta)
            e[idx] = h
            fd[idx] = (_value_rho(mdp, theta + e) - _value_rho(mdp, theta - e)) / (2 * h)
        worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(g)))
    return worst <= 1e-6, {"max_rel_err": worst}


def criterion_2(seed=0, horizon=2000):
    """Projected PG: monotone values and the min-gap bound at every horizon."""
    rng = np.random.default_rng(seed)
    monotone = bound_ok = True
    worst_ratio = 0.0
    for mdp in _random_mdps(rng, 10, (0.5, 0.9, 0.99)):
        eta = pg.projected_pg_max_rate(mdp)
        ref = tm.optimal_values(mdp, 1e-12)
        tr = pg.run_single_agent(mdp, pg.PgConfig("projected_pg", eta, max_iters=horizon), reference=ref)
        v = np.array(tr.value_rho)
        monotone &= bool(np.all(np.diff(v) >= -1e-12))
        mismatch = pg.distribution_mismatch(mdp, ref[2])
        best = np.minimum.accumulate(np.array(tr.gap_rho))[1:]
        T = np.arange(1, horizon + 1)
        bound = (4.0 * math.sqrt(mdp.n_states) / (1.0 - mdp.gamma) * mismatch
                 * np.sqrt(2.0 * tr.gap_rho[0] / (eta * T)))
        bound_ok &= bool(np.all(best <= bound + 1e-12))
        worst_ratio = max(worst_ratio, float(np.max(best / bound)))
    return monotone and bound_ok, {"monotone": monotone, "bound_holds": bound_ok,
                                   "max_gap_over_bound": worst_ratio}


def criterion_3(seed=0, horizon=1000):
    """NPG sublinear bound for three learning rates."""
    rng = np.random.default_rng(seed)
    ok = True
    worst = 0.0
    for mdp in _random_mdps(rng, 10, (0.5, 0.9, 0.99)):
        ref = tm.optimal_values(mdp, 1e-12)
        T = np.arange(1, horizon + 1)
        for eta in (0.1, 1.0, 10.0):
            tr = pg.run_single_agent(mdp, pg.PgConfig("npg", eta, max_iters=horizon), reference=ref)
            gap = np.array(tr.gap_rho)[1:]
            bound = (math.log(mdp.n_actions) / eta + 1.0 / (1.0 - mdp.gamma) ** 2) / T
            ok &= bool(np.all(gap <= bound))
            worst = max(worst, float(np.max(gap / bound)))
    return ok, {"max_gap_over_bound": worst}


def _fit_until_floor(iters, errs, floor, t_start=1):
    iters = np.asarray(iters)
    errs = np.asarray(errs)
    above = np.nonzero(errs > floor)[0]
    if above.size == 0 or iters[above[-1]] - t_start < 2:
        return None
    return ex.rate_fit(iters, errs, t_start, int(iters[above[-1]]))


def criterion_4(seed=0, n_mdps=10, horizon=300):
    """Entropy-regularized NPG: sup-norm bound and fitted linear rate."""
    rng = np.random.default_rng(seed)
    gamma, tau = 0.9, 0.1
    eta = 0.5 * (1.0 - gamma) / tau
    bound_ok = True
    worst_factor = 0.0
    for mdp in _random_mdps(rng, n_mdps, (gamma,)):
        ref = tm.soft_optimal_values(mdp, tau, 1e-12)
        tr = pg.run_single_agent(mdp, pg.PgConfig("entropy_npg", eta, tau=tau, max_iters=horizon), reference=ref)
        gaps = np.array(tr.gap_sup)
        bound = np.array([pg.entropy_npg_sup_bound(mdp, eta, tau, T) for T in tr.iters])
        bound_ok &= bool(np.all(gaps <= bound))
        fit = _fit_until_floor(tr.iters, gaps, 1e-11)
        if fit is not None:
            worst_factor = max(worst_factor, fit.factor)
    rate_ok = worst_factor <= 1.0 - eta * tau + 0.02
    return bound_ok and rate_ok, {"bound_holds": bound_ok, "max_factor": worst_factor,
                                  "allowed": 1.0 - eta * tau + 0.02}


def criterion_5(out_dir=None):
    """Bandit preset: entropy NPG reaches the soft optimum, entropy PG lags."""
    with tempfile.TemporaryDirectory() as tmp:
        paths = ex.run_preset("fig1-bandit", out_dir or tmp)
        pg_cols = ex.read_trace(paths[0])
        npg_cols = ex.read_trace(paths[1])
    npg_tv = npg_cols["policy_tv"]
    hit = np.nonzero(npg_tv <= 1e-6)[0]
    first = int(npg_cols["iter"][hit[0]]) if hit.size else None
    # independent check of the TV column against softmax(r / tau)
    mdp = tm.TabularMdp.bandit(np.array(ex.BANDIT_REWARDS))
    tr = pg.run_single_agent(mdp, pg.PgConfig("entropy_npg", 1.0, tau=0.1, max_iters=200))
    target = softmax(np.array(ex.BANDIT_REWARDS) / 0.1)
    tv_direct = total_variation(tr.final_policy[0], target)
    pg100 = float(pg_cols["policy_tv"][100])
    npg100 = float(npg_tv[100])
    ok = first is not None and first <= 200 and tv_direct <= 1e-6 and pg100 > npg100
    return ok, {"npg_first_iter_tv_1e-6": first, "pg_tv_at_100": pg100, "npg_tv_at_100": npg100}


def criterion_6():
    """MWU cycles on rock-paper-scissors while OMWU converges in the last iterate."""
    game = mg.MatrixGame.rock_paper_scissors()
    start = np.array(ex.RPS_START)
    mus, nus = mg.mwu_trajectory(game, mg.StrategyPair(start, start), 0.1, 1000)
    gaps = mg.ne_gaps(game, mus, nus)
    late_max = float(np.max(gaps[500:1001]))
    cycling = late_max >= gaps[10]
    state = mg.OmwuState(start, start, start.copy(), start.copy(), 1.0 / 8.0)
    mus, nus, _ = mg.omwu_trajectory(game, state, 5000)
    og = mg.ne_gaps(game, mus, nus)
    hit = np.nonzero(og <= 1e-6)[0]
    first = int(hit[0]) if hit.size else None
    t_end = first if first is not None else 5000
    fit = ex.rate_fit(np.arange(t_end + 1), og[:t_end + 1], t_end // 2, t_end)
    ok = cycling and first is not None and fit.slope < 0
    return ok, {"mwu_gap_10": float(gaps[10]), "mwu_late_max": late_max, "omwu_first_iter": first,
                "omwu_tail_slope": fit.slope}


def _test_games(seed):
    rng = np.random.default_rng(seed)
    games = [mg.MatrixGame.random(rng, int(rng.integers(2, 6)), int(rng.integers(2, 6))) for _ in range(10)]
    return games + [mg.MatrixGame.rock_paper_scissors()]


def criterion_7(seed=0):
    """Entropy-regularized OMWU: iteration budget and linear rate."""
    target = 1e-8
    budget_ok = True
    worst_excess = -math.inf
    for game in _test_games(seed):
        m, n = game.shape
        for tau in (0.05, 0.2):
            eta = mg.default_qre_rate(tau)
            state = mg.OmwuState.initial(m, n, eta, tau)
            e0 = mg.qre_gap(game, state.pair, tau)
            n_steps = mg.iteration_budget(e0, target, eta, tau)
            mus, nus, _ = mg.omwu_trajectory(game, state, n_steps)
            q = mg.qre_gaps(game, mus, nus, tau)
            budget_ok &= bool(np.any(q <= target))
            fit = _fit_until_floor(np.arange(q.size), q, 1e-13, t_start=max(1, n_steps // 10))
            if fit is not None:  # None when the start is already the QRE
                worst_excess = max(worst_excess, fit.factor - (1.0 - eta * tau))
    rate_ok = worst_excess <= 0.02
    return budget_ok and rate_ok, {"budget_met": budget_ok, "max_factor_minus_1_eta_tau": worst_excess}


def criterion_8(seed=0, max_iters=400_000):
    """Regularized MWU with eta = tau / 4 converges to the QRE."""
    worst = 0.0
    chunk = 20_000
    for game in _test_games(seed):
        m, n = game.shape
        for tau in (0.05, 0.2):
            star = mg.solve_qre(game, tau, 1e-13)
            pair = mg.StrategyPair.uniform(m, n)
            tv = math.inf
            for _ in range(max_iters // chunk):
                mus, nus = mg.mwu_trajectory(game, pair, tau / 4.0, chunk, tau)
                pair = mg.StrategyPair(mus[-1], nus[-1])
                tv = max(total_variation(pair.mu, star.mu), total_variation(pair.nu, star.nu))
                if tv <= 1e-7:
                    break
            worst = max(worst, tv)
    return worst <= 1e-7, {"max_tv_to_qre": worst}


def _reduction_bitwise(seed):
    """Actor-critic on a 1-state game against a loop of matrix-game OMWU steps."""
    rng = np.random.default_rng(seed)
    game = mk.ZeroSumMarkovGame.from_matrix(rng.uniform(0, 1, size=(3, 2)), gamma=0.8)
    eta, tau, n = 0.05, 0.1, 200
    alpha = eta * tau
    _, _, tr, _ = mk.actor_critic_run(game, eta=eta, tau=tau, max_iters=n, record_every=1, track_ne_gap=False)
    Q = np.zeros((1, 3, 2))
    V = np.zeros(1)
    state = mg.OmwuState.initial(3, 2, eta, tau)
    same = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for t in range(n):
            state = mg.omwu_step(Q[0], state)
            Q = mk.game_q_from_v(game, V)
            V = np.array([(1.0 - alpha) * V[0] + alpha * mk.one_step_value(Q[0], state.mu, state.nu, tau)])
            same &= bool(np.array_equal(tr.mu[t + 1, 0], state.mu) and np.array_equal(tr.nu[t + 1, 0], state.nu)
                         and np.array_equal(tr.V[t + 1], V))
    return same


def criterion_9(seed=0, n_games=1, cs=(0.25, 0.125, 0.0625), target=1e-4):
    """Markov-game actor-critic: linear convergence to the QRE for several constants."""
    rng = np.random.default_rng(seed)
    gamma, tau = 0.8, 0.1
    reached = rate_ok = True
    worst_excess = -math.inf
    factors = []
    for _ in range(n_games):
        game = mk.ZeroSumMarkovGame.random(rng, 3, 2, 2, gamma)
        ref = mk.soft_minimax_oracle(game, tau, 1e-11)
        for c in cs:
            eta = mk.default_policy_rate(game, c)
            # the value error contracts by 1 - eta tau (1 - gamma) per step
            n_iters = int(math.ceil(math.log(10.0 / target) / (eta * tau * (1.0 - gamma))))
            rec = max(1, n_iters // 2000)
            _, _, tr, _ = mk.actor_critic_run(game, eta=eta, tau=tau, max_iters=n_iters, record_every=rec,
                                              reference=ref, track_ne_gap=False)
            q = tr.qre_gap
            reached &= bool(q[-1] <= target)
            burn = int(0.3 * tr.iters[-1])
            fit = ex.rate_fit(tr.iters, q, burn, int(tr.iters[-1]))
            factors.append(fit.factor)
            worst_excess = max(worst_excess, fit.factor - (1.0 - eta * tau))
    rate_ok = worst_excess <= 0.02
    bitwise = _reduction_bitwise(seed)
    return reached and rate_ok and bitwise, {"reached_target": reached, "max_factor_minus_1_eta_tau": worst_excess,
                                            "max_factor": max(factors), "reduction_bitwise": bitwise}


def _random_lqr(rng):
    d = int(rng.integers(1, 5))
    k = int(rng.integers(1, d + 1))
    return lqr.LqrProblem.random(rng, d, k)


def _contraction_holds(costs, c_star, factor):
    gaps = np.asarray(costs) - c_star
    floor = COST_FLOOR * max(1.0, c_star)
    return bool(np.all(gaps[1:] <= factor * gaps[:-1] + floor))


def criterion_10(seed=0):
    """LQR: Riccati oracle, gradients, gradient dominance, NPG, Gauss-Newton and PG rates."""
    rng = np.random.default_rng(seed)
    m = {}
    P, K = lqr.solve_dare(lqr.LqrProblem.scalar(1.0, 1.0, 1.0, 1.0))
    a = abs(P[0, 0] - (1 + math.sqrt(5)) / 2) <= 1e-9 and abs(K[0, 0] - (math.sqrt(5) - 1) / 2) <= 1e-9
    m["a_scalar_dare"] = bool(a)

    worst = 0.0
    h = 1e-6
    for _ in range(20):
        prob = _random_lqr(rng)
        _, _, Ks = lqr.optimal_cost(prob)
        K0 = lqr.perturbed_stable_gain(prob, rng, Ks, 0.3)
        g = lqr.evaluate_gain(prob, K0).gradient
        fd = np.empty_like(g)
        for idx in np.ndindex(K0.shape):
            e = np.zeros_like(K0)
            e[idx] = h
            fd[idx] = (lqr.cost(prob, K0 + e) - lqr.cost(prob, K0 - e)) / (2 * h)
        worst = max(worst, float(np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-300)))
    m["b_grad_rel_err"] = worst
    b = worst <= 1e-6

    c = True
    for i in range(100):
        if i % 10 == 0:
            prob = _random_lqr(rng)
            Ps, Ks = lqr.solve_dare(prob)
        K = lqr.perturbed_stable_gain(prob, rng, Ks, 0.5)
        c &= lqr.gradient_dominance(prob, K, Ps, Ks)[2]
    m["c_gradient_dominance"] = bool(c)

    d = e = f = True
    gn_iters = 0
    npg_violations = []
    # the unit scalar instance first, then random ones
    instances = [(lqr.LqrProblem.scalar(1.0, 1.0, 1.0, 1.0), np.array([[1.0]]))]
    instances += [(_random_lqr(rng), None) for _ in range(5)]
    for j, (prob, K0) in enumerate(instances):
        c_star, _, Ks = lqr.optimal_cost(prob)
        s_star = spectral_norm(lqr.evaluate_gain(prob, Ks).Sigma_K)
        if K0 is None:
            K0 = lqr.perturbed_stable_gain(prob, rng, Ks, 0.3)

        eta = lqr.npg_safe_rate(prob, K0)
        gain = lqr.make_gain(prob, K0)
        costs = [lqr.cost(prob, gain)]
        for _ in range(200):
            gain = lqr.lqr_step(prob, gain, eta, "npg")
            d &= gain.stable
            costs.append(lqr.cost(prob, gain))
        if not _contraction_holds(costs, c_star, lqr.npg_contraction_factor(prob, eta, s_star)):
            d = False
            npg_violations.append(f"#{j}(d={prob.d},k={prob.k})")

        costs, _ = lqr.run(prob, K0, 1.0, "gauss_newton", 30)
        hit = np.nonzero(costs - c_star <= 1e-10)[0]
        e &= bool(hit.size)
        gn_iters = max(gn_iters, int(hit[0]) if hit.size else 31)

        eta_pg = lqr.backtracking_rate(prob, K0, 64.0 * lqr.pg_default_rate(prob, K0), 200)
        costs, _ = lqr.run(prob, K0, eta_pg, "pg", 300)
        f &= _contraction_holds(costs, c_star, lqr.pg_contraction_factor(prob, eta_pg, s_star))
    m.update({"d_npg_lemma": bool(d), "d_violating_instances": " ".join(npg_violations) or "none",
              "e_gauss_newton_iters": gn_iters, "f_pg_contraction": bool(f)})
    return a and b and c and d and e and f, m


def criterion_11():
    """Normalization invariants across methods and byte-identical CLI output."""
    rng = np.random.default_rng(11)
    ok_dist = True
    mdp = tm.TabularMdp.random(rng, 4, 3, 0.9)
    confs = [pg.PgConfig("projected_pg", pg.projected_pg_max_rate(mdp), max_iters=50, keep_policies=True),
             pg.PgConfig("softmax_pg", 1e-4, max_iters=50, keep_policies=True),
             pg.PgConfig("log_barrier_pg", 1e-4, omega=0.1, max_iters=50, keep_policies=True),
             pg.PgConfig("entropy_pg", 0.1, tau=0.1, max_iters=50, keep_policies=True),
             pg.PgConfig("npg", 1.0, max_iters=50, keep_policies=True),
             pg.PgConfig("entropy_npg", 0.5, tau=0.1, max_iters=50, keep_policies=True)]
    for conf in confs:
        tr = pg.run_single_agent(mdp, conf)
        ok_dist &= all(all(is_distribution(row) for row in p) for p in tr.policies)
    pi = tr.final_policy
    ok_dist &= is_distribution(tm.visitation_distribution(mdp, pi, mdp.rho))
    ok_dist &= is_distribution(tm.stationary_distribution(mdp, pi))
    for game in _test_games(11)[:3]:
        m_, n_ = game.shape
        mus, nus, _ = mg.omwu_trajectory(game, mg.OmwuState.initial(m_, n_, 0.2, 0.1), 100)
        ok_dist &= all(is_distribution(p) for p in mus) and all(is_distribution(p) for p in nus)
        mus, nus = mg.mwu_trajectory(game, mg.StrategyPair.uniform(m_, n_), 0.1, 100)
        ok_dist &= all(is_distribution(p) for p in mus) and all(is_distribution(p) for p in nus)
    mgame = mk.ZeroSumMarkovGame.random(rng, 2, 2, 3, 0.8)
    _, _, tr, _ = mk.actor_critic_run(mgame, tau=0.1, max_iters=200, record_every=10, track_ne_gap=False)
    ok_dist &= all(is_distribution(p) for p in tr.mu.reshape(-1, 2))
    ok_dist &= all(is_distribution(p) for p in tr.nu.reshape(-1, 3))

    same = True
    configs = [("fig2-rps", None), (None, {"family": "markov_game", "problem": {"random": {"dims": [2, 2, 2],
                                                                                          "gamma": 0.8}},
                                           "method": "actor_critic", "params": {"tau": 0.1},
                                           "iterations": 300, "record_every": 10, "seed": 5}),
               (None, {"family": "lqr", "problem": {"random": {"dims": [3, 2]}}, "method": "npg",
                       "iterations": 20, "seed": 3})]
    with tempfile.TemporaryDirectory() as tmp:
        for preset, cfg in configs:
            blobs = []
            for rep in range(2):
                d = Path(tmp) / f"rep{rep}"
                if preset:
                    paths = ex.run_preset(preset, d)
                else:
                    paths = [ex.run(ex.ExperimentConfig.from_dict(cfg), d, "trace.csv")]
                blobs.append([p.read_bytes() for p in paths])
            same &= blobs[0] == blobs[1]
    return ok_dist and same, {"distributions_valid": bool(ok_dist), "csv_byte_identical": bool(same)}


CRITERIA = {
    1: ("gradient correctness (MDP)", "pg_single_agent", 5.0, criterion_1),
    2: ("projected PG monotonicity and bound", "pg_single_agent", 30.0, criterion_2),
    3: ("NPG sublinear bound", "pg_single_agent", 30.0, criterion_3),
    4: ("entropy-regularized NPG linear rate", "pg_single_agent", 30.0, criterion_4),
    5: ("bandit preset (PG vs NPG)", "experiment_cli", 5.0, criterion_5),
    6: ("MWU cycling vs OMWU convergence", "matrix_game", 10.0, criterion_6),
    7: ("entropy-regularized OMWU rate", "matrix_game", 20.0, criterion_7),
    8: ("regularized MWU converges to QRE", "matrix_game", 20.0, criterion_8),
    9: ("Markov-game actor-critic", "markov_game", 60.0, criterion_9),
    10: ("LQR suite", "lqr", 60.0, criterion_10),
    11: ("structural invariants and determinism", "experiment_cli", 10.0, criterion_11),
}

SUITES = {
    "core_numeric": (11,),
    "tabular_mdp": (1, 11),
    "pg_single_agent": (1, 2, 3, 4, 5),
    "matrix_game": (6, 7, 8),
    "markov_game": (9,),
    "lqr": (10,),
    "experiment_cli": (5, 11),
}


def run_criterion(number):
    name, module, budget, fn = CRITERIA[number]
    start = time.perf_counter()
    passed, measured = fn()
    runtime = time.perf_counter() - start
    return CriterionResult(number, name, module, bool(passed), runtime, budget, measured)


def suite_numbers(suite="all"):
    if suite == "all":
        return tuple(CRITERIA)
    if suite not in SUITES:
        raise KeyError(suite)
    return SUITES[suite]


def run_suite(suite="all"):
    return [run_criterion(n) for n in suite_numbers(suite)]
