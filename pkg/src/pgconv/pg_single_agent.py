"""Policy-optimization updates for tabular MDPs and a trace-recording driver.

Policies are ``(S, A)`` arrays of action probabilities; softmax methods carry
logits of the same shape. Every step uses exact evaluation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core_numeric import as_finite, check_distribution
from .errors import ConfigError, DomainError
from .tabular_mdp import (
    evaluate_policy,
    optimal_values,
    policy_from_softmax,
    soft_evaluate_policy,
    soft_optimal_values,
    stationary_distribution,
    visitation_distribution,
)

METHODS = ("projected_pg", "softmax_pg", "log_barrier_pg", "npg", "entropy_npg", "entropy_pg")
SOFTMAX_METHODS = ("softmax_pg", "log_barrier_pg", "entropy_pg")


@dataclass(frozen=True)
class PgConfig:
    method: str
    learning_rate: float
    tau: float = 0.0
    omega: float = 0.0
    max_iters: int = 1000
    record_every: int = 1
    keep_policies: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        regularized = self.method in ("entropy_npg", "entropy_pg")
        if regularized != (self.tau > 0):
            raise ConfigError("tau > 0 is required exactly for the entropy-regularized methods")
        if (self.method == "log_barrier_pg") != (self.omega > 0):
            raise ConfigError("omega > 0 is required exactly for log_barrier_pg")
        if self.tau < 0 or self.omega < 0:
            raise ConfigError("regularization weights must be nonnegative")
        if self.max_iters < 0 or self.record_every < 1:
            raise ConfigError("max_iters must be >= 0 and record_every >= 1")


@dataclass
class PgTrace:
    method: str
    iters: list = field(default_factory=list)
    value_rho: list = field(default_factory=list)
    gap_rho: list = field(default_factory=list)
    gap_sup: list = field(default_factory=list)
    policy_tv: list = field(default_factory=list)
    policies: list = field(default_factory=list)
    final_policy: np.ndarray | None = None
    final_theta: np.ndarray | None = None

    def append(self, t, value, gap_rho, gap_sup, tv, policy=None):
        if self.iters and t <= self.iters[-1]:
            raise ValueError("trace iterations must be strictly increasing")
        self.iters.append(int(t))
        self.value_rho.append(float(value))
        self.gap_rho.append(float(gap_rho))
        self.gap_sup.append(float(gap_sup))
        self.policy_tv.append(float(tv))
        if policy is not None:
            self.policies.append(policy.copy())

    def rows(self):
        return list(zip(self.iters, self.value_rho, self.gap_rho, self.gap_sup, self.policy_tv))


# ---------------------------------------------------------------------------
# gradients


def softmax_policy_gradient(mdp, theta, ev=None):
    """Exact gradient of ``V(rho)`` in the softmax logits."""
    pi = policy_from_softmax(theta)
    if ev is None:
        ev = evaluate_policy(mdp, pi)
    return ev.d_rho[:, None] * pi * ev.adv / (1.0 - mdp.gamma)


def log_barrier_gradient(theta, omega):
    """Gradient of ``omega/(S A) * sum log pi(a|s)`` in the logits."""
    pi = policy_from_softmax(theta)
    S, A = pi.shape
    return omega / (S * A) * (1.0 - A * pi)


def entropy_softmax_gradient(mdp, theta, tau):
    """Exact gradient of the entropy-regularized ``V_tau(rho)`` in the logits."""
    pi = policy_from_softmax(theta)
    soft = soft_evaluate_policy(mdp, pi, tau)
    d_rho = visitation_distribution(mdp, pi, mdp.rho)
    soft_adv = soft.Q_tau - tau * np.log(pi) - soft.V_tau[:, None]
    return d_rho[:, None] * pi * soft_adv / (1.0 - mdp.gamma)


def direct_gradient(mdp, pi, ev=None):
    if ev is None:
        ev = evaluate_policy(mdp, pi)
    return ev.d_rho[:, None] * ev.Q / (1.0 - mdp.gamma)


# ---------------------------------------------------------------------------
# steps


def direct_pg_step(mdp, pi, eta):
    """Projected gradient ascent on the direct parameterization."""
    pi = check_distribution(pi, "policy")
    if eta == 0:
        return pi.copy()
    return kernels.project_simplex_rows(pi + eta * direct_gradient(mdp, pi))


def softmax_pg_step(mdp, theta, eta):
    theta = as_finite(theta, "theta")
    return theta + eta * softmax_policy_gradient(mdp, theta)


def log_barrier_pg_step(mdp, theta, eta, omega):
    theta = as_finite(theta, "theta")
    g = softmax_policy_gradient(mdp, theta) + log_barrier_gradient(theta, omega)
    return theta + eta * g


def entropy_pg_step(mdp, theta, eta, tau):
    theta = as_finite(theta, "theta")
    return theta + eta * entropy_softmax_gradient(mdp, theta, tau)


def _positive_rows(pi):
    pi = check_distribution(pi, "policy")
    if np.any(pi <= 0):
        raise DomainError("multiplicative updates need strictly positive policies")
    return np.atleast_2d(pi)


def npg_step(pi, Q, eta, gamma):
    """NPG for softmax policies: ``pi * exp(eta Q / (1 - gamma))``, renormalized per state."""
    pi = _positive_rows(pi)
    Q = np.atleast_2d(as_finite(Q, "Q"))
    return kernels.damped_mw_rows(pi, Q, 1.0, eta / (1.0 - gamma))


def entropy_npg_step(pi, Q_tau, eta, tau, gamma):
    """Entropy-regularized NPG: ``pi^(1 - eta tau/(1-gamma)) * exp(eta Q_tau/(1-gamma))``."""
    if not 0 < eta <= (1.0 - gamma) / tau * (1 + 1e-12):
        raise ConfigError(f"entropy NPG needs 0 < eta <= (1-gamma)/tau = {(1.0 - gamma) / tau:g}, got {eta:g}")
    pi = _positive_rows(pi)
    Q_tau = np.atleast_2d(as_finite(Q_tau, "Q_tau"))
    decay = max(0.0, 1.0 - eta * tau / (1.0 - gamma))
    return kernels.damped_mw_rows(pi, Q_tau, decay, eta / (1.0 - gamma))


def mirror_descent_step(pi, Q_tau, tau, eta_md):
    """Closed-form ``argmin_p <p, -Q> - tau H(p) + KL(p || pi) / eta_md`` per row."""
    pi = _positive_rows(pi)
    Q_tau = np.atleast_2d(Q_tau)
    z = (eta_md * Q_tau + np.log(pi)) / (1.0 + eta_md * tau)
    w = np.exp(z - z.max(axis=1, keepdims=True))
    return w / w.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# theorem bounds


def projected_pg_max_rate(mdp):
    """Largest step with guaranteed monotone improvement, ``(1-g)^3 / (2 g A)``."""
    if mdp.gamma == 0:
        return math.inf
    return (1.0 - mdp.gamma) ** 3 / (2.0 * mdp.gamma * mdp.n_actions)


def distribution_mismatch(mdp, pi_star):
    d_star = visitation_distribution(mdp, pi_star, mdp.rho)
    return float(np.max(d_star / mdp.rho))


def projected_pg_bound(mdp, eta, T, initial_gap, mismatch):
    if T == 0:
        return math.inf
    return (4.0 * math.sqrt(mdp.n_states) / (1.0 - mdp.gamma) * mismatch
            * math.sqrt(2.0 * initial_gap / (eta * T)))


def npg_bound(mdp, eta, T):
    if T == 0:
        return math.inf
    return (math.log(mdp.n_actions) / eta + 1.0 / (1.0 - mdp.gamma) ** 2) / T


def entropy_npg_sup_bound(mdp, eta, tau, T):
    return (15.0 * (1.0 + tau * math.log(mdp.n_actions)) / (1.0 - mdp.gamma)
            * (1.0 - eta * tau) ** (T - 1))


def entropy_npg_rho_bound(mdp, eta, tau, T, pi_tau_star):
    """Second entropy-NPG bound, weighted by the soft-optimal stationary distribution."""
    nu = stationary_distribution(mdp, pi_tau_star)
    if np.any(nu <= 0):
        return math.inf
    A = mdp.n_actions
    g = mdp.gamma
    pref = float(np.max(mdp.rho / nu)) * ((1.0 + tau * math.log(A)) / (1.0 - g)
                                        + (1.0 - g) * math.log(A) / eta)
    return pref * max(g, 1.0 - eta * tau / (1.0 - g)) ** T


# ---------------------------------------------------------------------------
# driver


def _check_rate(mdp, config):
    eta = config.learning_rate
    if config.method == "projected_pg" and eta > projected_pg_max_rate(mdp):
        warnings.warn("learning rate exceeds (1-gamma)^3/(2 gamma A); monotonicity not guaranteed",
                      stacklevel=3)
    elif config.method in ("softmax_pg", "log_barrier_pg") and eta > (1.0 - mdp.gamma) ** 3 / 8.0:
        warnings.warn("learning rate exceeds (1-gamma)^3/8", stacklevel=3)
    elif config.method == "entropy_npg" and eta > (1.0 - mdp.gamma) / config.tau * (1 + 1e-12):
        raise ConfigError("entropy NPG needs eta <= (1-gamma)/tau")


def run_single_agent(mdp, config, theta=None, policy=None, reference=None, vi_tol=1e-12):
    """Iterate ``config.method`` from the given start and record optimality gaps.

    Gaps are measured against ``optimal_values`` or, for the entropy-regularized
    methods, ``soft_optimal_values``. A precomputed ``reference`` tuple in the
    same format may be passed to skip that solve.
    """
    _check_rate(mdp, config)
    method, eta, tau = config.method, config.learning_rate, config.tau
    regularized = method in ("entropy_npg", "entropy_pg")
    if reference is None:
        reference = soft_optimal_values(mdp, tau, vi_tol) if regularized else optimal_values(mdp, vi_tol)
    V_ref, _, pi_ref = reference

    # the multiplicative methods are carried as logits so that long runs never underflow
    logit_methods = SOFTMAX_METHODS + ("npg", "entropy_npg")
    if method in logit_methods:
        if theta is None:
            theta = np.zeros((mdp.n_states, mdp.n_actions)) if policy is None else np.log(policy)
        theta = as_finite(theta, "theta").copy()
        pi = policy_from_softmax(theta)
    else:
        if policy is None:
            policy = np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions) if theta is None \
                else policy_from_softmax(theta)
        pi = check_distribution(policy, "policy").copy()

    trace = PgTrace(method=method)

    def record(t, pi, ev):
        if regularized:
            V = soft_evaluate_policy(mdp, pi, tau).V_tau
        else:
            V = ev.V
        value = float(mdp.rho @ V)
        tv = float(np.max(0.5 * np.abs(pi - pi_ref).sum(axis=1)))
        trace.append(t, value, float(mdp.rho @ V_ref) - value, float(np.max(np.abs(V_ref - V))), tv,
                     pi if config.keep_policies else None)

    for t in range(config.max_iters + 1):
        ev = evaluate_policy(mdp, pi)
        if t % config.record_every == 0 or t == config.max_iters:
            record(t, pi, ev)
        if t == config.max_iters:
            break
        if method == "projected_pg":
            pi = kernels.project_simplex_rows(pi + eta * direct_gradient(mdp, pi, ev))
        elif method == "softmax_pg":
            theta = theta + eta * softmax_policy_gradient(mdp, theta, ev)
        elif method == "log_barrier_pg":
            theta = theta + eta * (softmax_policy_gradient(mdp, theta, ev)
                                   + log_barrier_gradient(theta, config.omega))
        elif method == "entropy_pg":
            theta = entropy_pg_step(mdp, theta, eta, tau)
        elif method == "npg":
            theta = theta + eta / (1.0 - mdp.gamma) * ev.Q
        else:
            Q_tau = soft_evaluate_policy(mdp, pi, tau).Q_tau
            theta = (1.0 - eta * tau / (1.0 - mdp.gamma)) * theta + eta / (1.0 - mdp.gamma) * Q_tau
        if method in ("npg", "entropy_npg"):
            theta = theta - theta.max(axis=1, keepdims=True)
        if method in logit_methods:
            pi = policy_from_softmax(theta)

    trace.final_policy = pi
    trace.final_theta = theta if method in logit_methods else None
    return trace
