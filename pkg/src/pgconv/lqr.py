"""Policy optimization over linear state-feedback gains for discrete-time LQR.

Dynamics ``x' = A x + B u`` with ``u = -K x``; cost
``C(K) = tr(P_K Sigma0)`` where ``P_K`` solves the closed-loop Lyapunov
equation. The initial-state distribution enters only through
``Sigma0 = E[x0 x0^T]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core_numeric import (
    as_finite,
    sigma_min,
    solve_discrete_lyapunov,
    spectral_norm,
    spectral_radius,
)
from .errors import DimensionError, DomainError, NumericError, StabilityError, StabilizabilityError

KINDS = ("pg", "npg", "gauss_newton")


def _sym(M):
    return 0.5 * (M + M.T)


def _check_pd(M, name):
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise DomainError(f"{name} must be symmetric positive definite") from None


@dataclass(frozen=True, eq=False)
class LqrProblem:
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Sigma0: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(as_finite(self.A, "A"))
        B = np.atleast_2d(as_finite(self.B, "B"))
        Q = np.atleast_2d(as_finite(self.Q, "Q"))
        R = np.atleast_2d(as_finite(self.R, "R"))
        S0 = np.atleast_2d(as_finite(self.Sigma0, "Sigma0"))
        d, k = B.shape
        if A.shape != (d, d) or Q.shape != (d, d) or R.shape != (k, k) or S0.shape != (d, d):
            raise DimensionError("inconsistent LQR dimensions")
        for name, M in (("Q", Q), ("R", R), ("Sigma0", S0)):
            if not np.allclose(M, M.T, atol=1e-12):
                raise DomainError(f"{name} must be symmetric")
        _check_pd(Q, "Q")
        _check_pd(R, "R")
        for name, M in (("A", A), ("B", B), ("Q", _sym(Q)), ("R", _sym(R)), ("Sigma0", _sym(S0))):
            M.setflags(write=False)
            object.__setattr__(self, name, M)
        if self.lam <= 0:
            raise DomainError("Sigma0 must be positive definite (lambda > 0)")

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def k(self):
        return self.B.shape[1]

    @property
    def lam(self):
        """Smallest singular value of ``Sigma0``."""
        return sigma_min(self.Sigma0)

    @classmethod
    def scalar(cls, a, b, q, r, sigma0=1.0):
        return cls(A=[[a]], B=[[b]], Q=[[q]], R=[[r]], Sigma0=[[sigma0]])

    @classmethod
    def random(cls, rng, d, k, radius=1.2):
        """Gaussian system rescaled so that ``rho(A) = radius``; random SPD costs."""
        A = rng.normal(size=(d, d))
        A *= radius / max(spectral_radius(A), 1e-12)
        B = rng.normal(size=(d, k))
        G = rng.normal(size=(d, d))
        Q = np.eye(d) + G @ G.T / d
        H = rng.normal(size=(k, k))
        R = np.eye(k) + H @ H.T / k
        W = rng.normal(size=(d, d))
        S0 = np.eye(d) + W @ W.T / d
        return cls(A=A, B=B, Q=Q, R=R, Sigma0=S0)

    def to_dict(self):
        return {name: getattr(self, name).tolist() for name in ("A", "B", "Q", "R", "Sigma0")}

    @classmethod
    def from_dict(cls, d):
        return cls(**{name: np.asarray(d[name], dtype=np.float64) for name in ("A", "B", "Q", "R", "Sigma0")})

    def to_json(self):
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class GainMatrix:
    """Feedback gain with its closed-loop stability certificate."""
    K: np.ndarray
    M: np.ndarray
    spectral_radius: float
    spectral_norm: float

    @property
    def stable(self):
        return self.spectral_radius < 1.0

    @property
    def in_norm_ball(self):
        """Membership in ``{K : ||A - BK||_2 < 1}``."""
        return self.spectral_norm < 1.0


@dataclass(frozen=True, eq=False)
class LqrEvaluation:
    P_K: np.ndarray
    Sigma_K: np.ndarray
    cost: float
    gradient: np.ndarray


def make_gain(prob, K):
    K = np.atleast_2d(as_finite(K, "K"))
    if K.shape != (prob.k, prob.d):
        raise DimensionError(f"gain must have shape {(prob.k, prob.d)}, got {K.shape}")
    M = prob.A - prob.B @ K
    return GainMatrix(K=K, M=M, spectral_radius=spectral_radius(M), spectral_norm=spectral_norm(M))


def evaluate_gain(prob, K):
    """Cost, gradient and the two Lyapunov solutions at a stabilizing gain."""
    gain = K if isinstance(K, GainMatrix) else make_gain(prob, K)
    if not gain.stable:
        raise StabilityError(f"A - BK is unstable (spectral radius {gain.spectral_radius:.6g})",
                             spectral_radius=gain.spectral_radius)
    K, M = gain.K, gain.M
    P = solve_discrete_lyapunov(M, prob.Q + K.T @ prob.R @ K, "transpose_on_left")
    Sigma = solve_discrete_lyapunov(M, prob.Sigma0, "transpose_on_right")
    E = (prob.R + prob.B.T @ P @ prob.B) @ K - prob.B.T @ P @ prob.A
    grad = 2.0 * E @ Sigma
    return LqrEvaluation(P_K=P, Sigma_K=Sigma, cost=float(np.trace(P @ prob.Sigma0)), gradient=grad)


def cost(prob, K):
    return evaluate_gain(prob, K).cost


def lqr_step(prob, K, eta, kind="pg", ev=None):
    """One PG, natural PG or Gauss-Newton update; returns the new ``GainMatrix``.

    Raises ``StabilityError`` when the input is unstable or the step leaves
    the stabilizing set.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown step kind {kind!r}")
    if eta <= 0:
        raise DomainError("learning rate must be positive")
    gain = K if isinstance(K, GainMatrix) else make_gain(prob, K)
    if ev is None:
        ev = evaluate_gain(prob, gain)
    if kind == "pg":
        direction = ev.gradient
    else:
        try:
            direction = np.linalg.solve(ev.Sigma_K.T, ev.gradient.T).T  # grad @ Sigma^-1
            if kind == "gauss_newton":
                # (R + B'PB)^-1 E_K with E_K = grad Sigma^-1 / 2, so eta = 1 is policy improvement
                direction = 0.5 * np.linalg.solve(prob.R + prob.B.T @ ev.P_K @ prob.B, direction)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"preconditioner solve failed: {exc}") from None
    new = make_gain(prob, gain.K - eta * direction)
    if not new.stable:
        raise StabilityError(f"{kind} step left the stabilizing set (spectral radius {new.spectral_radius:.6g})",
                             spectral_radius=new.spectral_radius)
    return new


def solve_dare(prob, tol=1e-14, max_iters=100_000):
    """Riccati fixed-point iteration from ``P = Q``; returns ``(P_star, K_star)``."""
    A, B, Q, R = prob.A, prob.B, prob.Q, prob.R
    P = Q.copy()
    for _ in range(max_iters):
        with np.errstate(over="ignore", invalid="ignore"):
            BtPA = B.T @ P @ A
            P_new = _sym(Q + A.T @ P @ A - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA))
        if not np.all(np.isfinite(P_new)):
            break
        change = np.max(np.abs(P_new - P))
        P = P_new
        if change <= tol * max(1.0, np.max(np.abs(P))):
            K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
            if spectral_radius(A - B @ K) >= 1.0:
                break
            return P, K
    raise StabilizabilityError("Riccati iteration did not converge; system may not be stabilizable")


def optimal_cost(prob, tol=1e-14):
    P, K = solve_dare(prob, tol)
    return float(np.trace(P @ prob.Sigma0)), P, K


def gradient_dominance(prob, K, P_star=None, K_star=None):
    """Both sides of ``C(K) - C* <= ||Sigma_K*|| / (lambda^2 sigma_min(R)) ||grad||_F^2``.

    Returns ``(lhs, rhs, holds)``.
    """
    if K_star is None:
        P_star, K_star = solve_dare(prob)
    ev_star = evaluate_gain(prob, K_star)
    ev = evaluate_gain(prob, K)
    lhs = ev.cost - ev_star.cost
    rhs = (spectral_norm(ev_star.Sigma_K) / (prob.lam ** 2 * sigma_min(prob.R))
           * float(np.sum(ev.gradient ** 2)))
    return lhs, rhs, bool(lhs <= rhs + 1e-9)


check_gradient_dominance = gradient_dominance


def pg_contraction_factor(prob, eta, sigma_star_norm):
    return 1.0 - prob.lam ** 2 * sigma_min(prob.R) * eta / sigma_star_norm


def npg_contraction_factor(prob, eta, sigma_star_norm):
    return 1.0 - prob.lam * sigma_min(prob.R) * eta / sigma_star_norm


def npg_safe_rate(prob, K0):
    """``1 / (||R|| + ||B||^2 C(K0) / lambda)``, admissible along the whole trajectory."""
    return 1.0 / (spectral_norm(prob.R) + spectral_norm(prob.B) ** 2 * cost(prob, K0) / prob.lam)


def pg_default_rate(prob, K0):
    """Conservative constant step for plain PG built from the initial gain."""
    g = make_gain(prob, K0)
    ev = evaluate_gain(prob, g)
    return (0.5 * prob.lam * sigma_min(prob.Q)
            / (ev.cost * spectral_norm(prob.B) * (g.spectral_norm + 1.0)
               * spectral_norm(prob.R + prob.B.T @ ev.P_K @ prob.B)))


def perturbed_stable_gain(prob, rng, K_star, scale=0.5, max_tries=10_000):
    """Rejection-sample ``K* + scale * N(0, 1)`` until the closed loop is stable."""
    for _ in range(max_tries):
        K = K_star + scale * rng.normal(size=K_star.shape)
        if spectral_radius(prob.A - prob.B @ K) < 1.0:
            return K
    raise StabilityError("could not sample a stabilizing gain")


def run(prob, K0, eta, kind="pg", n_iters=100):
    """Iterate ``lqr_step``; returns the list of costs (including the start) and the final gain."""
    gain = make_gain(prob, K0)
    ev = evaluate_gain(prob, gain)
    costs = [ev.cost]
    for _ in range(n_iters):
        gain = lqr_step(prob, gain, eta, kind, ev)
        ev = evaluate_gain(prob, gain)
        costs.append(ev.cost)
    return np.array(costs), gain


def backtracking_rate(prob, K0, eta0, n_iters=200, kind="pg", max_halvings=60):
    """Halve ``eta`` until a fixed-rate run of ``n_iters`` steps never raises the cost.

    Only used to pick a valid constant rate; the run is then repeated at
    that fixed rate by the caller.
    """
    eta = eta0
    for _ in range(max_halvings):
        try:
            costs, _ = run(prob, K0, eta, kind, n_iters)
        except StabilityError:
            eta *= 0.5
            continue
        if np.all(np.diff(costs) <= 0):
            return eta
        eta *= 0.5
    raise NumericError("no admissible constant learning rate found")
