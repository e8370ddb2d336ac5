"""Tabular discounted MDPs with exact policy evaluation.

Transition tensors are stored as ``P[s, a, s']`` and rewards as ``r[s, a]``.
A discount of zero is admitted so that bandits can be expressed as
single-state MDPs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core_numeric import as_finite, check_distribution, softmax, solve_linear
from .errors import ConvergenceError, DimensionError, DomainError, ReducibilityError

VI_MAX_ITERS = 1_000_000


@dataclass(frozen=True, eq=False)
class TabularMdp:
    P: np.ndarray
    r: np.ndarray
    gamma: float
    rho: np.ndarray

    def __post_init__(self):
        P = check_distribution(self.P, "P")
        r = as_finite(self.r, "r")
        rho = check_distribution(self.rho, "rho")
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise DimensionError(f"P must have shape (S, A, S), got {P.shape}")
        if r.shape != P.shape[:2]:
            raise DimensionError(f"r must have shape {P.shape[:2]}, got {r.shape}")
        if rho.shape != (P.shape[0],):
            raise DimensionError(f"rho must have length {P.shape[0]}")
        if np.any(r < 0) or np.any(r > 1):
            raise DomainError("rewards must lie in [0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise DomainError(f"discount must lie in [0, 1), got {self.gamma}")
        for name, arr in (("P", P), ("r", r), ("rho", rho)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self):
        return self.P.shape[0]

    @property
    def n_actions(self):
        return self.P.shape[1]

    @classmethod
    def bandit(cls, rewards):
        rewards = np.asarray(rewards, dtype=np.float64)
        return cls(P=np.ones((1, rewards.size, 1)), r=rewards[None, :], gamma=0.0, rho=np.ones(1))

    @classmethod
    def random(cls, rng, n_states, n_actions, gamma, rho=None):
        """Dirichlet(1) transitions per (s, a) and uniform [0, 1] rewards."""
        P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
        r = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
        if rho is None:
            rho = np.full(n_states, 1.0 / n_states)
        return cls(P=P, r=r, gamma=gamma, rho=rho)

    def to_dict(self):
        return {"gamma": self.gamma, "rho": self.rho.tolist(), "r": self.r.tolist(), "P": self.P.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(P=np.asarray(d["P"]), r=np.asarray(d["r"]), gamma=float(d["gamma"]),
                   rho=np.asarray(d["rho"]))

    def to_json(self):
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class EvaluationResult:
    V: np.ndarray
    Q: np.ndarray
    adv: np.ndarray
    d_rho: np.ndarray
    value_at_rho: float


@dataclass(frozen=True, eq=False)
class SoftEvaluationResult:
    V_tau: np.ndarray
    Q_tau: np.ndarray
    tau: float

    def value_at(self, rho):
        return float(np.asarray(rho) @ self.V_tau)


def check_policy(mdp, pi):
    pi = check_distribution(pi, "policy")
    if pi.shape != (mdp.n_states, mdp.n_actions):
        raise DimensionError(f"policy shape {pi.shape} does not match MDP {(mdp.n_states, mdp.n_actions)}")
    return pi


def policy_from_softmax(theta):
    """Row-wise softmax of logits ``theta[s, a]``."""
    theta = as_finite(theta, "theta")
    if theta.ndim != 2:
        raise DimensionError("logits must be a 2-d table")
    return softmax(theta, axis=1)


def uniform_policy(mdp):
    return np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)


def induced_chain(mdp, pi):
    """State transition matrix and reward vector of the chain driven by ``pi``."""
    P_pi = np.einsum("sa,sat->st", pi, mdp.P)
    r_pi = np.einsum("sa,sa->s", pi, mdp.r)
    return P_pi, r_pi


def _evaluate_rewards(mdp, pi, reward):
    P_pi, _ = induced_chain(mdp, pi)
    r_pi = np.einsum("sa,sa->s", pi, reward)
    if mdp.gamma == 0.0:
        V = r_pi
    else:
        V = solve_linear(np.eye(mdp.n_states) - mdp.gamma * P_pi, r_pi)
    return V, P_pi


def evaluate_policy(mdp, pi):
    pi = check_policy(mdp, pi)
    V, P_pi = _evaluate_rewards(mdp, pi, mdp.r)
    Q = mdp.r + mdp.gamma * (mdp.P @ V)
    d_rho = _visitation(mdp, P_pi, mdp.rho)
    return EvaluationResult(V=V, Q=Q, adv=Q - V[:, None], d_rho=d_rho, value_at_rho=float(mdp.rho @ V))


def _visitation(mdp, P_pi, start):
    if mdp.gamma == 0.0:
        return start.copy()
    d = (1.0 - mdp.gamma) * solve_linear(np.eye(mdp.n_states) - mdp.gamma * P_pi.T, start)
    # clip round-off negatives so the result is a valid distribution
    d = np.maximum(d, 0.0)
    return d / d.sum()


def visitation_distribution(mdp, pi, start):
    """Discounted state-visitation distribution from ``start``."""
    pi = check_policy(mdp, pi)
    start = check_distribution(start, "start")
    P_pi, _ = induced_chain(mdp, pi)
    return _visitation(mdp, P_pi, start)


def optimal_values(mdp, tol=1e-10):
    """Value iteration; returns ``(V_star, Q_star, greedy_policy)``.

    The returned ``V_star`` is within ``tol`` of the fixed point in sup norm.
    The greedy policy breaks ties towards the lowest action index.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    V, _, converged = kernels.value_iteration(mdp.P, mdp.r, mdp.gamma, tol, 0.0, VI_MAX_ITERS)
    if not converged:
        raise ConvergenceError("value iteration did not converge")
    Q = mdp.r + mdp.gamma * (mdp.P @ V)
    greedy = np.zeros_like(Q)
    greedy[np.arange(mdp.n_states), np.argmax(Q, axis=1)] = 1.0
    return V, Q, greedy


def soft_evaluate_policy(mdp, pi, tau):
    """Entropy-regularized evaluation: exact evaluation with reward ``r - tau log pi``."""
    if tau <= 0:
        raise DomainError("tau must be positive")
    pi = check_policy(mdp, pi)
    if np.any(pi <= 0):
        raise DomainError("soft evaluation needs a strictly positive policy")
    V, _ = _evaluate_rewards(mdp, pi, mdp.r - tau * np.log(pi))
    Q = mdp.r + mdp.gamma * (mdp.P @ V)
    return SoftEvaluationResult(V_tau=V, Q_tau=Q, tau=float(tau))


def soft_optimal_values(mdp, tau, tol=1e-10):
    """Soft value iteration; returns ``(V_tau_star, Q_tau_star, pi_tau_star)``."""
    if tau <= 0 or tol <= 0:
        raise DomainError("tau and tol must be positive")
    V, _, converged = kernels.value_iteration(mdp.P, mdp.r, mdp.gamma, tol, float(tau), VI_MAX_ITERS)
    if not converged:
        raise ConvergenceError("soft value iteration did not converge")
    Q = mdp.r + mdp.gamma * (mdp.P @ V)
    return V, Q, softmax(Q / tau, axis=1)


def stationary_distribution(mdp, pi, tol=1e-14, max_iters=200_000):
    """Stationary distribution of the chain induced by ``pi`` via power iteration."""
    pi = check_policy(mdp, pi)
    P_pi, _ = induced_chain(mdp, pi)
    nu = np.full(mdp.n_states, 1.0 / mdp.n_states)
    for _ in range(max_iters):
        nxt = nu @ P_pi
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - nu)) <= tol:
            nu = nxt
            break
        nu = nxt
    resid = np.max(np.abs(nu @ P_pi - nu))
    if resid > 1e-10:
        raise ReducibilityError(
            f"power iteration did not converge (residual {resid:.3g}); chain may be reducible or periodic",
            final_error=resid)
    return nu
