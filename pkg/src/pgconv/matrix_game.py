"""Two-player zero-sum matrix games ``max_mu min_nu mu^T A nu``.

All learning dynamics update both players simultaneously and run in log
space. ``OmwuState`` follows the optimistic listing with a predictive pair
``(mu_bar, nu_bar)``; with ``tau = 0`` it is plain optimistic MWU.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .core_numeric import as_finite, check_distribution
from .errors import ConfigError, ConvergenceError, DimensionError, DomainError


@dataclass(frozen=True, eq=False)
class MatrixGame:
    payoff: np.ndarray

    def __post_init__(self):
        A = as_finite(self.payoff, "payoff")
        if A.ndim != 2 or 0 in A.shape:
            raise DimensionError(f"payoff must be a non-empty matrix, got shape {A.shape}")
        if np.max(np.abs(A)) > 1.0:
            raise DomainError("payoff entries must satisfy |A_ij| <= 1")
        A = np.ascontiguousarray(A)
        A.setflags(write=False)
        object.__setattr__(self, "payoff", A)

    @property
    def shape(self):
        return self.payoff.shape

    @classmethod
    def random(cls, rng, m, n):
        return cls(rng.uniform(-1.0, 1.0, size=(m, n)))

    @classmethod
    def rock_paper_scissors(cls):
        return cls(np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]]))

    def to_dict(self):
        return {"payoff": self.payoff.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["payoff"], dtype=np.float64))

    def to_json(self):
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class StrategyPair:
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", check_distribution(self.mu, "mu"))
        object.__setattr__(self, "nu", check_distribution(self.nu, "nu"))

    @classmethod
    def uniform(cls, m, n):
        return cls(np.full(m, 1.0 / m), np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class OmwuState:
    mu: np.ndarray
    nu: np.ndarray
    mu_bar: np.ndarray
    nu_bar: np.ndarray
    eta: float
    tau: float = 0.0
    t: int = 0

    def __post_init__(self):
        for name in ("mu", "nu", "mu_bar", "nu_bar"):
            p = check_distribution(getattr(self, name), name)
            if np.any(p <= 0):
                raise DomainError(f"{name} must be strictly positive")
            object.__setattr__(self, name, p)
        if self.eta <= 0 or self.tau < 0:
            raise ConfigError("OMWU needs eta > 0 and tau >= 0")

    @classmethod
    def initial(cls, m, n, eta, tau=0.0, mu=None, nu=None):
        """Uniform start as in the listing, unless explicit strategies are given.

        The predictive pair starts equal to the current pair.
        """
        mu = np.full(m, 1.0 / m) if mu is None else np.asarray(mu, dtype=np.float64)
        nu = np.full(n, 1.0 / n) if nu is None else np.asarray(nu, dtype=np.float64)
        return cls(mu, nu, mu.copy(), nu.copy(), eta, tau, 0)

    @property
    def pair(self):
        return StrategyPair(self.mu, self.nu)


def _payoff(game):
    return game.payoff if isinstance(game, MatrixGame) else np.ascontiguousarray(game, dtype=np.float64)


def _positive_pair(pair):
    if np.any(pair.mu <= 0) or np.any(pair.nu <= 0):
        raise DomainError("multiplicative updates need strictly positive strategies")


def mwu_step(game, pair, eta):
    """Simultaneous MWU: ``mu * exp(eta A nu)``, ``nu * exp(-eta A^T mu)``."""
    _positive_pair(pair)
    mu, nu = kernels.mwu_update(_payoff(game), pair.mu, pair.nu, float(eta), 0.0)
    return StrategyPair(mu, nu)


def reg_mwu_step(game, pair, eta, tau):
    """Entropy-regularized MWU with damping exponent ``1 - eta tau``."""
    if tau <= 0:
        raise ConfigError("reg_mwu_step needs tau > 0")
    if eta * tau >= 1:
        raise ConfigError(f"eta * tau must be < 1, got {eta * tau:g}")
    _positive_pair(pair)
    mu, nu = kernels.mwu_update(_payoff(game), pair.mu, pair.nu, float(eta), float(tau))
    return StrategyPair(mu, nu)


def omwu_step(game, state):
    """One iteration of (entropy-regularized) optimistic MWU.

    At ``t = 0`` the predictive pair is used as-is; afterwards it is first
    advanced with the current opponent strategy.
    """
    if state.tau > 0 and state.eta > min(1.0 / (2.0 * state.tau + 2.0), 0.25):
        warnings.warn("eta outside the certified range min{1/(2 tau + 2), 1/4}", stacklevel=2)
    mu, nu, mb, nb = kernels.omwu_update(_payoff(game), state.mu, state.nu, state.mu_bar,
                                         state.nu_bar, state.eta, state.tau, state.t >= 1)
    return replace(state, mu=mu, nu=nu, mu_bar=mb, nu_bar=nb, t=state.t + 1)


def mwu_trajectory(game, pair, eta, n_steps, tau=0.0):
    """Iterates of (regularized) MWU as arrays of shape ``(n_steps + 1, m)`` and ``(n_steps + 1, n)``."""
    _positive_pair(pair)
    return kernels.mwu_trajectory(_payoff(game), pair.mu, pair.nu, float(eta), float(tau), int(n_steps))


def omwu_trajectory(game, state, n_steps):
    """Run ``n_steps`` OMWU iterations; returns ``(mus, nus, final_state)``."""
    mus, nus, mb, nb = kernels.omwu_trajectory(_payoff(game), state.mu, state.nu, state.mu_bar,
                                               state.nu_bar, state.eta, state.tau, state.t, int(n_steps))
    final = replace(state, mu=mus[-1].copy(), nu=nus[-1].copy(), mu_bar=mb, nu_bar=nb,
                    t=state.t + int(n_steps))
    return mus, nus, final


def ne_gap(game, pair):
    """Duality gap ``max_a (A nu)_a - min_b (A^T mu)_b``."""
    A = _payoff(game)
    return float(np.max(A @ pair.nu) - np.min(A.T @ pair.mu))


def ne_gaps(game, mus, nus):
    A = _payoff(game)
    return np.max(nus @ A.T, axis=1) - np.min(mus @ A, axis=1)


def regularized_value(game, pair, tau):
    A = _payoff(game)
    return float(pair.mu @ A @ pair.nu) + tau * kernels.entropy(pair.mu) - tau * kernels.entropy(pair.nu)


def qre_gap(game, pair, tau):
    """Duality gap of the entropy-regularized game; zero exactly at the QRE."""
    if tau <= 0:
        raise DomainError("tau must be positive")
    return float(kernels.qre_gap(_payoff(game), pair.mu, pair.nu, float(tau)))


def qre_gaps(game, mus, nus, tau):
    A = _payoff(game)
    x = nus @ A.T / tau
    y = -(mus @ A) / tau
    mx = x.max(axis=1)
    my = y.max(axis=1)
    lse_x = mx + np.log(np.exp(x - mx[:, None]).sum(axis=1))
    lse_y = my + np.log(np.exp(y - my[:, None]).sum(axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        h_mu = -np.where(mus > 0, mus * np.log(mus), 0.0).sum(axis=1)
        h_nu = -np.where(nus > 0, nus * np.log(nus), 0.0).sum(axis=1)
    return tau * (lse_x + lse_y - h_mu - h_nu)


def qre_fixed_point_residual(game, pair, tau):
    """Largest TV distance between a strategy and the soft best response to its opponent."""
    return float(kernels.qre_residual(_payoff(game), pair.mu, pair.nu, float(tau)))


def default_qre_rate(tau):
    return min(1.0 / (2.0 * tau + 2.0), 0.25)


def solve_qre(game, tau, tol=1e-12, max_iters=2_000_000, warm_start=None):
    """QRE via entropy-regularized OMWU at the largest certified learning rate.

    Stops once both the regularized duality gap and the fixed-point TV
    residual are below ``tol``.
    """
    if tau <= 0:
        raise DomainError("tau must be positive")
    A = _payoff(game)
    m, n = A.shape
    # the QRE is unchanged by shifting A and scaling (A, tau) jointly
    scale = 1.0
    if np.max(np.abs(A)) > 1.0:
        A = A - 0.5 * (A.max() + A.min())
        scale = max(1.0, float(np.max(np.abs(A))))
        A = A / scale
    tau = tau / scale
    eta = default_qre_rate(tau)
    if warm_start is None:
        state = OmwuState.initial(m, n, eta, tau)
    else:
        state = replace(warm_start, eta=eta, tau=tau)
    mu, nu, _, _, t, err = kernels.omwu_solve(A, state.mu, state.nu, state.mu_bar, state.nu_bar,
                                              eta, float(tau), state.t, float(tol) / scale, int(max_iters), 10)
    err *= scale
    if err > tol:
        raise ConvergenceError(f"QRE solver stopped after {t} iterations with gap {err:.3g}", final_error=err)
    return StrategyPair(mu, nu)


def rate_certified(tau, eta):
    return 0 < eta <= default_qre_rate(tau)


def iteration_budget(initial_gap, target, eta, tau, slack=200):
    """Iterations needed for ``initial_gap * (1 - eta tau)^t <= target``, plus ``slack``."""
    if initial_gap <= target:
        return slack
    return int(math.ceil(math.log(initial_gap / target) / -math.log(1.0 - eta * tau))) + slack
