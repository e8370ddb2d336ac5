"""Pure NumPy implementations of the hot kernels.

Mirrors the compiled ``_kernels`` module function for function; the
selector in :mod:`pgconv.kernels` picks one of the two at import time.
Inputs are assumed validated by the callers (float64, matching shapes,
strictly positive distributions where logs are taken).
"""
import numpy as np

BACKEND = "python"


def project_simplex(v):
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, n + 1)
    cond = u - (css - 1.0) / k > 0
    rho = np.nonzero(cond)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_simplex_rows(m):
    m = np.asarray(m, dtype=np.float64)
    out = np.empty_like(m)
    for i in range(m.shape[0]):
        out[i] = project_simplex(m[i])
    return out


def damped_mw(p, payoff, decay, scale):
    """Normalized ``p**decay * exp(scale * payoff)`` computed in log space."""
    if decay == 1.0:
        z = np.log(p) + scale * payoff
    elif decay == 0.0:
        z = scale * payoff
    else:
        z = decay * np.log(p) + scale * payoff
    z = z - np.max(z)
    w = np.exp(z)
    return w / np.sum(w)


def damped_mw_rows(p, payoff, decay, scale):
    p = np.asarray(p, dtype=np.float64)
    payoff = np.asarray(payoff, dtype=np.float64)
    out = np.empty_like(p)
    for i in range(p.shape[0]):
        out[i] = damped_mw(p[i], payoff[i], decay, scale)
    return out


def entropy(p):
    p = np.asarray(p, dtype=np.float64)
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz])))


def logsumexp(x):
    m = np.max(x)
    return float(m + np.log(np.sum(np.exp(x - m))))


def mwu_update(A, mu, nu, eta, tau):
    decay = 1.0 - eta * tau
    mu1 = damped_mw(mu, A @ nu, decay, eta)
    nu1 = damped_mw(nu, -(A.T @ mu), decay, eta)
    return mu1, nu1


def omwu_update(A, mu, nu, mubar, nubar, eta, tau, predictive):
    decay = 1.0 - eta * tau
    a_nu = A @ nu
    at_mu = -(A.T @ mu)
    if predictive:
        mubar = damped_mw(mubar, a_nu, decay, eta)
        nubar = damped_mw(nubar, at_mu, decay, eta)
    mu1 = damped_mw(mubar, a_nu, decay, eta)
    nu1 = damped_mw(nubar, at_mu, decay, eta)
    return mu1, nu1, mubar, nubar


def mwu_trajectory(A, mu, nu, eta, tau, n_steps):
    mus = np.empty((n_steps + 1, mu.shape[0]))
    nus = np.empty((n_steps + 1, nu.shape[0]))
    mus[0] = mu
    nus[0] = nu
    for t in range(n_steps):
        mu, nu = mwu_update(A, mu, nu, eta, tau)
        mus[t + 1] = mu
        nus[t + 1] = nu
    return mus, nus


def omwu_trajectory(A, mu, nu, mubar, nubar, eta, tau, t0, n_steps):
    mus = np.empty((n_steps + 1, mu.shape[0]))
    nus = np.empty((n_steps + 1, nu.shape[0]))
    mus[0] = mu
    nus[0] = nu
    for k in range(n_steps):
        mu, nu, mubar, nubar = omwu_update(A, mu, nu, mubar, nubar, eta, tau, t0 + k >= 1)
        mus[k + 1] = mu
        nus[k + 1] = nu
    return mus, nus, mubar, nubar


def qre_gap(A, mu, nu, tau):
    br_max = tau * logsumexp((A @ nu) / tau)
    br_min = tau * logsumexp(-(A.T @ mu) / tau)
    return br_max + br_min - tau * entropy(mu) - tau * entropy(nu)


def qre_residual(A, mu, nu, tau):
    """Largest total-variation distance between a strategy and its soft best response."""
    z = (A @ nu) / tau
    w = np.exp(z - np.max(z))
    mu_br = w / np.sum(w)
    z = -(A.T @ mu) / tau
    w = np.exp(z - np.max(z))
    nu_br = w / np.sum(w)
    return max(0.5 * float(np.sum(np.abs(mu - mu_br))), 0.5 * float(np.sum(np.abs(nu - nu_br))))


def omwu_solve(A, mu, nu, mubar, nubar, eta, tau, t0, tol, max_iters, check_every):
    t = t0
    err = max(qre_gap(A, mu, nu, tau), qre_residual(A, mu, nu, tau))
    while err > tol and t - t0 < max_iters:
        for _ in range(check_every):
            mu, nu, mubar, nubar = omwu_update(A, mu, nu, mubar, nubar, eta, tau, t >= 1)
            t += 1
        err = max(qre_gap(A, mu, nu, tau), qre_residual(A, mu, nu, tau))
    return mu, nu, mubar, nubar, t, err


def one_step_value(Q, mu, nu, tau):
    v = float(mu @ Q @ nu)
    if tau != 0.0:
        v += tau * entropy(mu) - tau * entropy(nu)
    return v


def game_q_from_v(r, P, V, gamma):
    return r + gamma * (P @ V)


def actor_critic_loop(r, P, gamma, Q, mu, nu, mubar, nubar, V, t0, eta, tau, alphas, record_every):
    """Actor-critic outer loop over all states; state arrays are updated in place.

    ``Q`` holds the payoff matrices used by the next inner step. Returns the
    recorded iteration indices with snapshots of (V, mu, nu).
    """
    n_states = r.shape[0]
    n_iters = alphas.shape[0]
    rec_t, rec_v, rec_mu, rec_nu = [t0], [V.copy()], [mu.copy()], [nu.copy()]
    for k in range(n_iters):
        t = t0 + k
        for s in range(n_states):
            mu[s], nu[s], mubar[s], nubar[s] = omwu_update(
                Q[s], mu[s], nu[s], mubar[s], nubar[s], eta, tau, t >= 1)
        Q[...] = game_q_from_v(r, P, V, gamma)
        alpha = alphas[k]
        for s in range(n_states):
            V[s] = (1.0 - alpha) * V[s] + alpha * one_step_value(Q[s], mu[s], nu[s], tau)
        if (k + 1) % record_every == 0 or k + 1 == n_iters:
            rec_t.append(t + 1)
            rec_v.append(V.copy())
            rec_mu.append(mu.copy())
            rec_nu.append(nu.copy())
    return (np.asarray(rec_t, dtype=np.int64), np.asarray(rec_v),
            np.asarray(rec_mu), np.asarray(rec_nu))


def value_iteration(P, r, gamma, tol, tau, max_iters):
    n_states = r.shape[0]
    V = np.zeros(n_states)
    thr = np.inf if gamma == 0.0 else tol * (1.0 - gamma) / (2.0 * gamma)
    it = 0
    while True:
        Q = r + gamma * (P @ V)
        if tau == 0.0:
            V_new = Q.max(axis=1)
        else:
            m = Q.max(axis=1)
            V_new = m + tau * np.log(np.sum(np.exp((Q - m[:, None]) / tau), axis=1))
        it += 1
        diff = float(np.max(np.abs(V_new - V)))
        V = V_new
        if diff <= thr or gamma == 0.0:
            return V, it, True
        if it >= max_iters:
            return V, it, False
