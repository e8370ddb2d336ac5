# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same signatures and semantics as ``_kernels_py``."""
import numpy as np

from libc.math cimport exp, log, fabs, INFINITY
from libc.stdlib cimport qsort, malloc, free

BACKEND = "cython"


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef double x = (<const double*>a)[0]
    cdef double y = (<const double*>b)[0]
    if x < y:
        return 1
    if x > y:
        return -1
    return 0


cdef void _project_simplex(const double* v, Py_ssize_t n, double* u, double* out) noexcept nogil:
    cdef Py_ssize_t i, rho = 0
    cdef double css = 0.0, css_rho = 0.0, theta
    for i in range(n):
        u[i] = v[i]
    qsort(u, n, sizeof(double), _cmp_desc)
    for i in range(n):
        css += u[i]
        if u[i] - (css - 1.0) / (i + 1.0) > 0:
            rho = i
            css_rho = css
    theta = (css_rho - 1.0) / (rho + 1.0)
    for i in range(n):
        out[i] = v[i] - theta
        if out[i] < 0.0:
            out[i] = 0.0


def project_simplex(v):
    cdef double[::1] vv = np.require(v, np.float64, "CW")
    cdef Py_ssize_t n = vv.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double* u = <double*>malloc(n * sizeof(double))
    _project_simplex(&vv[0], n, u, &o[0])
    free(u)
    return out


def project_simplex_rows(m):
    cdef double[:, ::1] mm = np.require(m, np.float64, "CW")
    cdef Py_ssize_t rows = mm.shape[0], n = mm.shape[1], i
    out = np.empty((rows, n))
    cdef double[:, ::1] o = out
    cdef double* u = <double*>malloc(n * sizeof(double))
    for i in range(rows):
        _project_simplex(&mm[i, 0], n, u, &o[i, 0])
    free(u)
    return out


cdef void _damped_mw(const double* p, const double* payoff, Py_ssize_t n,
                     double decay, double scale, double* out) noexcept nogil:
    # p and out may alias
    cdef Py_ssize_t i
    cdef double z, zmax = -INFINITY, s = 0.0
    for i in range(n):
        if decay == 1.0:
            z = log(p[i]) + scale * payoff[i]
        elif decay == 0.0:
            z = scale * payoff[i]
        else:
            z = decay * log(p[i]) + scale * payoff[i]
        out[i] = z
        if z > zmax:
            zmax = z
    for i in range(n):
        out[i] = exp(out[i] - zmax)
        s += out[i]
    for i in range(n):
        out[i] = out[i] / s


def damped_mw(p, payoff, double decay, double scale):
    cdef double[::1] pp = np.require(p, np.float64, "CW")
    cdef double[::1] gg = np.require(payoff, np.float64, "CW")
    out = np.empty(pp.shape[0])
    cdef double[::1] o = out
    _damped_mw(&pp[0], &gg[0], pp.shape[0], decay, scale, &o[0])
    return out


def damped_mw_rows(p, payoff, double decay, double scale):
    cdef double[:, ::1] pp = np.require(p, np.float64, "CW")
    cdef double[:, ::1] gg = np.require(payoff, np.float64, "CW")
    cdef Py_ssize_t i
    out = np.empty((pp.shape[0], pp.shape[1]))
    cdef double[:, ::1] o = out
    for i in range(pp.shape[0]):
        _damped_mw(&pp[i, 0], &gg[i, 0], pp.shape[1], decay, scale, &o[i, 0])
    return out


cdef double _entropy(const double* p, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double h = 0.0
    for i in range(n):
        if p[i] > 0.0:
            h -= p[i] * log(p[i])
    return h


def entropy(p):
    cdef double[::1] pp = np.require(p, np.float64, "CW")
    return _entropy(&pp[0], pp.shape[0])


cdef double _logsumexp(const double* x, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double m = -INFINITY, s = 0.0
    for i in range(n):
        if x[i] > m:
            m = x[i]
    for i in range(n):
        s += exp(x[i] - m)
    return m + log(s)


def logsumexp(x):
    cdef double[::1] xx = np.require(x, np.float64, "CW")
    return _logsumexp(&xx[0], xx.shape[0])


cdef void _payoffs(const double* A, Py_ssize_t m, Py_ssize_t n, const double* mu,
                   const double* nu, double* a_nu, double* neg_at_mu) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += A[i * n + j] * nu[j]
        a_nu[i] = acc
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += A[i * n + j] * mu[i]
        neg_at_mu[j] = -acc


cdef void _omwu_update(const double* A, Py_ssize_t m, Py_ssize_t n, double* mu, double* nu,
                       double* mubar, double* nubar, double eta, double tau, bint predictive,
                       double* a_nu, double* neg_at_mu) noexcept nogil:
    cdef double decay = 1.0 - eta * tau
    _payoffs(A, m, n, mu, nu, a_nu, neg_at_mu)
    if predictive:
        _damped_mw(mubar, a_nu, m, decay, eta, mubar)
        _damped_mw(nubar, neg_at_mu, n, decay, eta, nubar)
    _damped_mw(mubar, a_nu, m, decay, eta, mu)
    _damped_mw(nubar, neg_at_mu, n, decay, eta, nu)


cdef void _mwu_update(const double* A, Py_ssize_t m, Py_ssize_t n, double* mu, double* nu,
                      double eta, double tau, double* a_nu, double* neg_at_mu) noexcept nogil:
    cdef double decay = 1.0 - eta * tau
    _payoffs(A, m, n, mu, nu, a_nu, neg_at_mu)
    _damped_mw(mu, a_nu, m, decay, eta, mu)
    _damped_mw(nu, neg_at_mu, n, decay, eta, nu)


def mwu_update(A, mu, nu, double eta, double tau):
    cdef double[:, ::1] AA = np.require(A, np.float64, "CW")
    cdef Py_ssize_t m = AA.shape[0], n = AA.shape[1]
    mu1 = np.array(mu, dtype=np.float64)
    nu1 = np.array(nu, dtype=np.float64)
    cdef double[::1] vm = mu1, vn = nu1
    cdef double[::1] w1 = np.empty(m), w2 = np.empty(n)
    _mwu_update(&AA[0, 0], m, n, &vm[0], &vn[0], eta, tau, &w1[0], &w2[0])
    return mu1, nu1


def omwu_update(A, mu, nu, mubar, nubar, double eta, double tau, bint predictive):
    cdef double[:, ::1] AA = np.require(A, np.float64, "CW")
    cdef Py_ssize_t m = AA.shape[0], n = AA.shape[1]
    mu1 = np.array(mu, dtype=np.float64)
    nu1 = np.array(nu, dtype=np.float64)
    mb1 = np.array(mubar, dtype=np.float64)
    nb1 = np.array(nubar, dtype=np.float64)
    cdef double[::1] vm = mu1, vn = nu1, vmb = mb1, vnb = nb1
    cdef double[::1] w1 = np.empty(m), w2 = np.empty(n)
    _omwu_update(&AA[0, 0], m, n, &vm[0], &vn[0], &vmb[0], &vnb[0], eta, tau, predictive,
                 &w1[0], &w2[0])
    return mu1, nu1, mb1, nb1


def mwu_trajectory(A, mu, nu, double eta, double tau, Py_ssize_t n_steps):
    cdef double[:, ::1] AA = np.require(A, np.float64, "CW")
    cdef Py_ssize_t m = AA.shape[0], n = AA.shape[1], t
    mus = np.empty((n_steps + 1, m))
    nus = np.empty((n_steps + 1, n))
    cdef double[:, ::1] M = mus, N = nus
    cdef double[::1] w1 = np.empty(m), w2 = np.empty(n)
    mus[0] = mu
    nus[0] = nu
    with nogil:
        for t in range(n_steps):
            M[t + 1, :] = M[t, :]
            N[t + 1, :] = N[t, :]
            _mwu_update(&AA[0, 0], m, n, &M[t + 1, 0], &N[t + 1, 0], eta, tau, &w1[0], &w2[0])
    return mus, nus


def omwu_trajectory(A, mu, nu, mubar, nubar, double eta, double tau, Py_ssize_t t0,
                    Py_ssize_t n_steps):
    cdef double[:, ::1] AA = np.require(A, np.float64, "CW")
    cdef Py_ssize_t m = AA.shape[0], n = AA.shape[1], k
    mus = np.empty((n_steps + 1, m))
    nus = np.empty((n_steps + 1, n))
    mb1 = np.array(mubar, dtype=np.float64)
    nb1 = np.array(nubar, dtype=np.float64)
    cdef double[:, ::1] M = mus, N = nus
    cdef double[::1] vmb = mb1, vnb = nb1
    cdef double[::1] w1 = np.empty(m), w2 = np.empty(n)
    mus[0] = mu
    nus[0] = nu
    with nogil:
        for k in range(n_steps):
            M[k + 1, :] = M[k, :]
            N[k + 1, :] = N[k, :]
            _omwu_update(&AA[0, 0], m, n, &M[k + 1, 0], &N[k + 1, 0], &vmb[0], &vnb[0],
                         eta, tau, t0 + k >= 1, &w1[0], &w2[0])
    return mus, nus, mb1, nb1


cdef double _qre_gap(const double* A, Py_ssize_t m, Py_ssize_t n, const double* mu,
                     const double* nu, double tau, double* a_nu, double* neg_at_mu) noexcept nogil:
    cdef Py_ssize_t i
    _payoffs(A, m, n, mu, nu, a_nu, neg_at_mu)
    for i in range(m):
        a_nu[i] = a_nu[i] / tau
    for i in range(n):
        neg_at_mu[i] = neg_at_mu[i] / tau
    return (tau * _logsumexp(a_nu, m) + tau * _logsumexp(neg_at_mu, n)
            - tau * _entropy(mu, m) - tau * _entropy(nu, n))


cdef double _tv_to_softmax(const double* p, double* z, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double zmax = -INFINITY, s = 0.0, tv = 0.0
    for i in range(n):
        if z[i] > zmax:
            zmax = z[i]
    for i in range(n):
        z[i] = exp(z[i] - zmax)
        s += z[i]
    for i in range(n):
        tv += fabs(p[i] - z[i] / s)
    return 0.5 * tv


cdef double _qre_residual(const double* A, Py_ssize_t m, Py_ssize_t n, const double* mu,
                          const double* nu, double tau, double* a_nu, double* neg_at_mu) noexcept nogil:
    cdef Py_ssize_t i
    cdef double r1, r2
    _payoffs(A, m, n, mu, nu, a_nu, neg_at_mu)
    for i in range(m):
        a_nu[i] = a_nu[i] / tau
    for i in range(n):
        neg_at_mu[i] = neg_at_mu[i] / tau
    r1 = _tv_to_softmax(mu, a_nu, m)
    r2 = _tv_to_softmax(nu, neg_at_mu, n)
    return r1 if r1 > r2 else r2


def qre_gap(A, mu, nu, double tau):
    cdef double[:, ::1] AA = np.require(A, np.float64, "CW")
    cdef double[::1] vm = np.require(mu, np.float64, "CW")
    cdef double[::1] vn = np.require(nu, np.float64, "CW")
    cdef double[::1] w1 = np.empty(AA.shape[0]), w2 = np.empty(AA.shape[1])
    return _qre_gap(&AA[0, 0], AA.shape[0], AA.shape[1], &vm[0], &vn[0], tau, &w1[0], &w2[0])


def qre_residual(A, mu, nu, double tau):
    cdef double[:, ::1] AA = np.require(A, np.float64, "CW")
    cdef double[::1] vm = np.require(mu, np.float64, "CW")
    cdef double[::1] vn = np.require(nu, np.float64, "CW")
    cdef double[::1] w1 = np.empty(AA.shape[0]), w2 = np.empty(AA.shape[1])
    return _qre_residual(&AA[0, 0], AA.shape[0], AA.shape[1], &vm[0], &vn[0], tau, &w1[0], &w2[0])


def omwu_solve(A, mu, nu, mubar, nubar, double eta, double tau, Py_ssize_t t0, double tol,
               Py_ssize_t max_iters, Py_ssize_t check_every):
    cdef double[:, ::1] AA = np.require(A, np.float64, "CW")
    cdef Py_ssize_t m = AA.shape[0], n = AA.shape[1], t = t0, k
    mu1 = np.array(mu, dtype=np.float64)
    nu1 = np.array(nu, dtype=np.float64)
    mb1 = np.array(mubar, dtype=np.float64)
    nb1 = np.array(nubar, dtype=np.float64)
    cdef double[::1] vm = mu1, vn = nu1, vmb = mb1, vnb = nb1
    cdef double[::1] w1 = np.empty(m), w2 = np.empty(n)
    cdef double err, res
    with nogil:
        err = _qre_gap(&AA[0, 0], m, n, &vm[0], &vn[0], tau, &w1[0], &w2[0])
        res = _qre_residual(&AA[0, 0], m, n, &vm[0], &vn[0], tau, &w1[0], &w2[0])
        if res > err:
            err = res
        while err > tol and t - t0 < max_iters:
            for k in range(check_every):
                _omwu_update(&AA[0, 0], m, n, &vm[0], &vn[0], &vmb[0], &vnb[0], eta, tau,
                             t >= 1, &w1[0], &w2[0])
                t += 1
            err = _qre_gap(&AA[0, 0], m, n, &vm[0], &vn[0], tau, &w1[0], &w2[0])
            res = _qre_residual(&AA[0, 0], m, n, &vm[0], &vn[0], tau, &w1[0], &w2[0])
            if res > err:
                err = res
    return mu1, nu1, mb1, nb1, t, err


cdef double _one_step_value(const double* Q, Py_ssize_t m, Py_ssize_t n, const double* mu,
                            const double* nu, double tau) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc, v = 0.0
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += Q[i * n + j] * nu[j]
        v += mu[i] * acc
    if tau != 0.0:
        v += tau * _entropy(mu, m) - tau * _entropy(nu, n)
    return v


def one_step_value(Q, mu, nu, double tau):
    cdef double[:, ::1] QQ = np.require(Q, np.float64, "CW")
    cdef double[::1] vm = np.require(mu, np.float64, "CW")
    cdef double[::1] vn = np.require(nu, np.float64, "CW")
    return _one_step_value(&QQ[0, 0], QQ.shape[0], QQ.shape[1], &vm[0], &vn[0], tau)


cdef void _game_q(const double* r, const double* P, const double* V, double gamma,
                  Py_ssize_t n_cells, Py_ssize_t n_states, double* Q) noexcept nogil:
    cdef Py_ssize_t c, k
    cdef double acc
    for c in range(n_cells):
        acc = 0.0
        for k in range(n_states):
            acc += P[c * n_states + k] * V[k]
        Q[c] = r[c] + gamma * acc


def game_q_from_v(r, P, V, double gamma):
    r_arr = np.require(r, np.float64, "CW")
    cdef double[::1] rr = r_arr.reshape(-1)
    cdef double[::1] PP = np.require(P, np.float64, "CW").reshape(-1)
    cdef double[::1] VV = np.require(V, np.float64, "CW")
    out = np.empty(r_arr.shape)
    cdef double[::1] o = out.reshape(-1)
    _game_q(&rr[0], &PP[0], &VV[0], gamma, rr.shape[0], VV.shape[0], &o[0])
    return out


def actor_critic_loop(r, P, double gamma, Q, mu, nu, mubar, nubar, V, Py_ssize_t t0,
                      double eta, double tau, alphas, Py_ssize_t record_every):
    cdef double[:, :, ::1] rr = np.require(r, np.float64, "CW")
    cdef Py_ssize_t S = rr.shape[0], m = rr.shape[1], n = rr.shape[2]
    cdef double[::1] PP = np.require(P, np.float64, "CW").reshape(-1)
    cdef double[:, :, ::1] QQ = Q
    cdef double[:, ::1] vm = mu, vn = nu, vmb = mubar, vnb = nubar
    cdef double[::1] VV = V
    cdef double[::1] al = np.require(alphas, np.float64, "CW")
    cdef Py_ssize_t n_iters = al.shape[0], k, s, t, rec = 0
    cdef Py_ssize_t n_rec = 1 + n_iters // record_every
    if n_iters > 0 and n_iters % record_every != 0:
        n_rec += 1
    rec_t = np.empty(n_rec, dtype=np.int64)
    rec_v = np.empty((n_rec, S))
    rec_mu = np.empty((n_rec, S, m))
    rec_nu = np.empty((n_rec, S, n))
    cdef long long[::1] RT = rec_t
    cdef double[:, ::1] RV = rec_v
    cdef double[:, :, ::1] RM = rec_mu, RN = rec_nu
    cdef double[::1] w1 = np.empty(m), w2 = np.empty(n)
    cdef double alpha, f
    RT[0] = t0
    RV[0, :] = VV
    RM[0, :, :] = vm
    RN[0, :, :] = vn
    rec = 1
    with nogil:
        for k in range(n_iters):
            t = t0 + k
            for s in range(S):
                _omwu_update(&QQ[s, 0, 0], m, n, &vm[s, 0], &vn[s, 0], &vmb[s, 0], &vnb[s, 0],
                             eta, tau, t >= 1, &w1[0], &w2[0])
            _game_q(&rr[0, 0, 0], &PP[0], &VV[0], gamma, S * m * n, S, &QQ[0, 0, 0])
            alpha = al[k]
            for s in range(S):
                f = _one_step_value(&QQ[s, 0, 0], m, n, &vm[s, 0], &vn[s, 0], tau)
                VV[s] = (1.0 - alpha) * VV[s] + alpha * f
            if (k + 1) % record_every == 0 or k + 1 == n_iters:
                RT[rec] = t + 1
                RV[rec, :] = VV
                RM[rec, :, :] = vm
                RN[rec, :, :] = vn
                rec += 1
    return rec_t, rec_v, rec_mu, rec_nu


def value_iteration(P, r, double gamma, double tol, double tau, Py_ssize_t max_iters):
    cdef double[:, :, ::1] PP = np.require(P, np.float64, "CW")
    cdef double[:, ::1] rr = np.require(r, np.float64, "CW")
    cdef Py_ssize_t S = rr.shape[0], A = rr.shape[1], s, a, k, it = 0
    V_out = np.zeros(S)
    cdef double[::1] V = V_out
    cdef double[::1] Vn = np.zeros(S)
    cdef double[::1] q = np.empty(A)
    cdef double thr, acc, best, diff, lse
    cdef bint converged = False
    thr = INFINITY if gamma == 0.0 else tol * (1.0 - gamma) / (2.0 * gamma)
    with nogil:
        while True:
            diff = 0.0
            for s in range(S):
                best = -INFINITY
                for a in range(A):
                    acc = 0.0
                    for k in range(S):
                        acc += PP[s, a, k] * V[k]
                    q[a] = rr[s, a] + gamma * acc
                    if q[a] > best:
                        best = q[a]
                if tau == 0.0:
                    Vn[s] = best
                else:
                    lse = 0.0
                    for a in range(A):
                        lse += exp((q[a] - best) / tau)
                    Vn[s] = best + tau * log(lse)
                if fabs(Vn[s] - V[s]) > diff:
                    diff = fabs(Vn[s] - V[s])
            for s in range(S):
                V[s] = Vn[s]
            it += 1
            if diff <= thr or gamma == 0.0:
                converged = True
                break
            if it >= max_iters:
                break
    return V_out, it, converged
