"""Two-player zero-sum Markov games and the smooth-value actor-critic.

Shapes: ``r[s, a, b]``, ``P[s, a, b, s']``, policies ``mu[s, a]`` and
``nu[s, b]``. The max player picks ``a``; the min player picks ``b``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core_numeric import as_finite, check_distribution, solve_linear
from .errors import ConfigError, ConvergenceError, DimensionError, DomainError
from .matrix_game import OmwuState, solve_qre

VI_MAX_ITERS = 1_000_000


@dataclass(frozen=True, eq=False)
class ZeroSumMarkovGame:
    P: np.ndarray
    r: np.ndarray
    gamma: float

    def __post_init__(self):
        P = np.ascontiguousarray(check_distribution(self.P, "P"))
        r = np.ascontiguousarray(as_finite(self.r, "r"))
        if P.ndim != 4 or P.shape[0] != P.shape[3]:
            raise DimensionError(f"P must have shape (S, m, n, S), got {P.shape}")
        if r.shape != P.shape[:3]:
            raise DimensionError(f"r must have shape {P.shape[:3]}, got {r.shape}")
        if np.any(r < 0) or np.any(r > 1):
            raise DomainError("rewards must lie in [0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise DomainError("discount must lie in [0, 1)")
        for name, arr in (("P", P), ("r", r)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self):
        return self.r.shape[0]

    @property
    def n_max(self):
        return self.r.shape[1]

    @property
    def n_min(self):
        return self.r.shape[2]

    @classmethod
    def random(cls, rng, n_states, m, n, gamma):
        P = rng.dirichlet(np.ones(n_states), size=(n_states, m, n))
        r = rng.uniform(0.0, 1.0, size=(n_states, m, n))
        return cls(P=P, r=r, gamma=gamma)

    @classmethod
    def from_matrix(cls, payoff, gamma=0.0):
        """Single-state game whose stage reward is ``payoff`` (entries in [0, 1])."""
        payoff = np.asarray(payoff, dtype=np.float64)
        return cls(P=np.ones(payoff.shape + (1,))[None], r=payoff[None], gamma=gamma)

    def to_dict(self):
        return {"gamma": self.gamma, "r": self.r.tolist(), "P": self.P.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(P=np.asarray(d["P"]), r=np.asarray(d["r"]), gamma=float(d["gamma"]))

    def to_json(self):
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class JointPolicy:
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        mu = check_distribution(self.mu, "mu")
        nu = check_distribution(self.nu, "nu")
        if mu.ndim != 2 or nu.ndim != 2 or mu.shape[0] != nu.shape[0]:
            raise DimensionError("joint policy needs per-state rows for both players")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)

    @classmethod
    def uniform(cls, game):
        S = game.n_states
        return cls(np.full((S, game.n_max), 1.0 / game.n_max), np.full((S, game.n_min), 1.0 / game.n_min))


@dataclass
class ActorCriticState:
    """Value table, per-state OMWU iterates and the payoff used by the next inner step."""
    V: np.ndarray
    Q: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    mu_bar: np.ndarray
    nu_bar: np.ndarray
    eta: float
    tau: float
    t: int = 0

    @classmethod
    def initial(cls, game, eta, tau):
        S, m, n = game.r.shape
        mu = np.full((S, m), 1.0 / m)
        nu = np.full((S, n), 1.0 / n)
        return cls(V=np.zeros(S), Q=np.zeros((S, m, n)), mu=mu, nu=nu, mu_bar=mu.copy(),
                   nu_bar=nu.copy(), eta=float(eta), tau=float(tau))

    def inner_state(self, s):
        return OmwuState(self.mu[s], self.nu[s], self.mu_bar[s], self.nu_bar[s], self.eta, self.tau, self.t)

    @property
    def policy(self):
        return JointPolicy(self.mu.copy(), self.nu.copy())


@dataclass
class ActorCriticTrace:
    iters: np.ndarray
    V: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    qre_gap: np.ndarray | None = None
    ne_gap: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def game_q_from_v(game, V):
    """Per-state payoff matrices ``r + gamma E[V(s')]``."""
    V = as_finite(V, "V")
    if V.shape != (game.n_states,):
        raise DimensionError("value table has the wrong length")
    return kernels.game_q_from_v(game.r, game.P, V, game.gamma)


def one_step_value(Q_s, mu_s, nu_s, tau=0.0):
    """``mu^T Q nu``, plus ``tau H(mu) - tau H(nu)`` when ``tau > 0``."""
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    return float(kernels.one_step_value(np.ascontiguousarray(Q_s, dtype=np.float64), mu_s, nu_s, float(tau)))


def _entropy_rows(p):
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.where(p > 0, p * np.log(p), 0.0).sum(axis=1)


def _check_policy(game, policy):
    if policy.mu.shape != (game.n_states, game.n_max) or policy.nu.shape != (game.n_states, game.n_min):
        raise DimensionError("policy shape does not match the game")


def evaluate_joint_policy(game, policy, tau=0.0):
    """Exact (regularized) values of a policy pair; returns ``(V, Q)``."""
    _check_policy(game, policy)
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    mu, nu = policy.mu, policy.nu
    if tau > 0 and (np.any(mu <= 0) or np.any(nu <= 0)):
        raise DomainError("regularized evaluation needs strictly positive policies")
    r_bar = np.einsum("sa,sab,sb->s", mu, game.r, nu)
    if tau > 0:
        r_bar = r_bar + tau * _entropy_rows(mu) - tau * _entropy_rows(nu)
    P_bar = np.einsum("sa,sabt,sb->st", mu, game.P, nu)
    if game.gamma == 0.0:
        V = r_bar
    else:
        V = solve_linear(np.eye(game.n_states) - game.gamma * P_bar, r_bar)
    return V, game_q_from_v(game, V)


def best_response_values(game, fixed, side, tol=1e-12):
    """Optimal value of the opponent against a fixed strategy.

    ``side="max_fixed"`` fixes ``mu`` (rows per state) and the min player
    best-responds; ``side="min_fixed"`` fixes ``nu`` and the max player does.
    """
    fixed = check_distribution(fixed, "fixed policy")
    if side == "max_fixed":
        r = np.einsum("sa,sab->sb", fixed, game.r)
        P = np.einsum("sa,sabt->sbt", fixed, game.P)
        V, _, ok = kernels.value_iteration(P, -r, game.gamma, tol, 0.0, VI_MAX_ITERS)
        V = -V
    elif side == "min_fixed":
        r = np.einsum("sb,sab->sa", fixed, game.r)
        P = np.einsum("sb,sabt->sat", fixed, game.P)
        V, _, ok = kernels.value_iteration(P, r, game.gamma, tol, 0.0, VI_MAX_ITERS)
    else:
        raise ValueError(f"unknown side {side!r}")
    if not ok:
        raise ConvergenceError("best-response value iteration did not converge")
    return V


def markov_ne_gap(game, policy, tol=1e-12):
    """``max_s`` of (max-player best response to nu) minus (min-player best response to mu)."""
    _check_policy(game, policy)
    v_max = best_response_values(game, policy.nu, "min_fixed", tol)
    v_min = best_response_values(game, policy.mu, "max_fixed", tol)
    return float(max(0.0, np.max(v_max - v_min)))


def soft_minimax_oracle(game, tau, tol=1e-10, max_sweeps=100_000):
    """Regularized Shapley iteration: per-state QRE values until the sweep change is small.

    Returns ``(V_tau_star, JointPolicy)``.
    """
    if tau <= 0:
        raise DomainError("tau must be positive")
    S = game.n_states
    V = np.zeros(S)
    warm = [None] * S
    thr = math.inf if game.gamma == 0.0 else tol * (1.0 - game.gamma) / (2.0 * game.gamma)
    inner_tol = min(1e-13, tol * (1.0 - game.gamma) / 10.0)
    mu = np.empty((S, game.n_max))
    nu = np.empty((S, game.n_min))
    for _ in range(max_sweeps):
        Q = game_q_from_v(game, V)
        V_new = np.empty(S)
        for s in range(S):
            pair = solve_qre(Q[s], tau, inner_tol, warm_start=warm[s])
            mu[s], nu[s] = pair.mu, pair.nu
            warm[s] = OmwuState(pair.mu, pair.nu, pair.mu, pair.nu, 0.25, tau, 0)
            V_new[s] = one_step_value(Q[s], pair.mu, pair.nu, tau)
        diff = float(np.max(np.abs(V_new - V)))
        V = V_new
        if diff <= thr:
            return V, JointPolicy(mu.copy(), nu.copy())
    raise ConvergenceError("soft minimax iteration did not converge")


def default_policy_rate(game, c=1.0 / 8.0):
    """``c (1 - gamma)^3 / S``."""
    return c * (1.0 - game.gamma) ** 3 / game.n_states


def _alphas(schedule, t0, n_iters):
    if callable(schedule):
        a = np.array([schedule(t0 + k + 1) for k in range(n_iters)], dtype=np.float64)
    elif np.isscalar(schedule):
        a = np.full(n_iters, float(schedule))
    else:
        a = np.asarray(schedule, dtype=np.float64)[:n_iters]
        if a.shape[0] != n_iters:
            raise ConfigError("alpha schedule is shorter than the iteration budget")
    if n_iters and (np.any(a <= 0) or np.any(a > 1)):
        raise ConfigError("value learning rates must lie in (0, 1]")
    return a


def actor_critic_run(game, inner="reg_omwu", eta=None, tau=0.1, alpha_schedule=None, max_iters=1000,
                     record_every=None, state=None, reference=None, track_ne_gap=True):
    """Actor-critic with an OMWU inner solver per state and smoothed value updates.

    Each outer iteration performs one OMWU step on ``Q^(t)(s)`` for every
    state, recomputes ``Q^(t+1) = r + gamma P V^(t)`` and mixes the one-step
    value into ``V`` with weight ``alpha``. ``inner="omwu"`` runs without
    regularization. ``reference`` is an optional ``(V_tau_star, JointPolicy)``
    used for the recorded QRE gap ``max(|V - V*|_inf, max_s TV)``.

    Returns ``(JointPolicy, V, trace, state)``; pass ``state`` back in to resume.
    """
    if inner not in ("omwu", "reg_omwu"):
        raise ConfigError(f"unknown inner solver {inner!r}")
    if inner == "omwu":
        tau = 0.0
    elif tau <= 0:
        raise ConfigError("reg_omwu needs tau > 0")
    if eta is None:
        eta = default_policy_rate(game)
    if alpha_schedule is None:
        if tau <= 0:
            raise ConfigError("an alpha schedule is required when tau = 0")
        alpha_schedule = eta * tau
    if record_every is None:
        record_every = 1 if game.n_states <= 5 else 10
    if state is None:
        state = ActorCriticState.initial(game, eta, tau)
    alphas = _alphas(alpha_schedule, state.t, int(max_iters))
    rec_t, rec_v, rec_mu, rec_nu = kernels.actor_critic_loop(
        game.r, game.P, game.gamma, state.Q, state.mu, state.nu, state.mu_bar, state.nu_bar, state.V,
        state.t, float(eta), float(tau), alphas, int(record_every))
    state.t += int(max_iters)
    trace = ActorCriticTrace(iters=rec_t, V=rec_v, mu=rec_mu, nu=rec_nu)
    if reference is not None:
        trace.qre_gap = qre_distance(reference, rec_v, rec_mu, rec_nu)
    if track_ne_gap:
        trace.ne_gap = np.array([markov_ne_gap(game, JointPolicy(m_, n_)) for m_, n_ in zip(rec_mu, rec_nu)])
    return state.policy, state.V.copy(), trace, state


def qre_distance(reference, Vs, mus, nus):
    """Distance of recorded iterates to a reference QRE: value error and worst per-state TV."""
    V_star, pol = reference
    v_err = np.max(np.abs(Vs - V_star[None, :]), axis=1)
    tv_mu = 0.5 * np.abs(mus - pol.mu[None]).sum(axis=2).max(axis=1)
    tv_nu = 0.5 * np.abs(nus - pol.nu[None]).sum(axis=2).max(axis=1)
    return np.maximum(v_err, np.maximum(tv_mu, tv_nu))
