"""Dense linear algebra and probability-simplex primitives."""
import numpy as np

from . import kernels
from .errors import DimensionError, DomainError, NumericError, StabilityError

TOL_SIMPLEX = 1e-12
MAX_CONDITION = 1e12


def as_finite(x, name="array"):
    """Return ``x`` as a float64 array, rejecting NaN/Inf entries."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def is_distribution(p, tol=TOL_SIMPLEX):
    p = np.asarray(p, dtype=np.float64)
    return bool(p.ndim >= 1 and np.all(p >= 0) and np.all(np.abs(p.sum(axis=-1) - 1.0) <= tol))


def check_distribution(p, name="distribution", tol=TOL_SIMPLEX):
    """Validate (rows of) ``p`` as probability vectors and return a float array."""
    p = as_finite(p, name)
    if p.ndim == 0 or p.shape[-1] == 0:
        raise DimensionError(f"{name} is empty")
    if np.any(p < 0):
        raise DomainError(f"{name} has negative entries")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > tol):
        raise DomainError(f"{name} does not sum to one (tolerance {tol:g})")
    return p


def project_to_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-and-threshold method: the projection is ``max(v - theta, 0)`` with
    ``theta`` fixed by the largest support index satisfying the KKT
    condition.
    """
    v = as_finite(v, "v")
    if v.ndim != 1 or v.shape[0] == 0:
        raise DimensionError("project_to_simplex expects a non-empty vector")
    return kernels.project_simplex(v)


def project_rows_to_simplex(m):
    m = as_finite(m, "m")
    if m.ndim != 2 or m.shape[1] == 0:
        raise DimensionError("expected a non-empty 2-d array")
    return kernels.project_simplex_rows(m)


def entropy(p):
    """Shannon entropy in nats, with ``0 log 0 = 0``."""
    p = check_distribution(p, "p")
    return kernels.entropy(p)


def kl_divergence(p, q):
    """KL(p || q); requires ``supp(p)`` inside ``supp(q)``."""
    p = check_distribution(p, "p")
    q = check_distribution(q, "q")
    if p.shape != q.shape:
        raise DimensionError(f"shape mismatch {p.shape} vs {q.shape}")
    nz = p > 0
    if np.any(q[nz] == 0):
        raise DomainError("support of p is not contained in support of q")
    return float(np.sum(p[nz] * (np.log(p[nz]) - np.log(q[nz]))))


def total_variation(p, q):
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    w = np.exp(z - np.max(z, axis=axis, keepdims=True))
    return w / np.sum(w, axis=axis, keepdims=True)


def logsumexp(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    m = np.max(z, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(z - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def solve_linear(A, b):
    """Solve ``A x = b`` with LU (partial pivoting), guarding conditioning."""
    A = as_finite(A, "A")
    b = as_finite(b, "b")
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise DimensionError(f"incompatible shapes {A.shape} and {b.shape}")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NumericError(f"matrix is singular or ill-conditioned (cond={cond:.3g})", condition=cond)
    return np.linalg.solve(A, b)


def spectral_radius(M):
    M = as_finite(M, "M")
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"spectral radius needs a square matrix, got {M.shape}")
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def spectral_norm(M):
    return float(np.linalg.norm(np.asarray(M, dtype=np.float64), 2))


def sigma_min(M):
    return float(np.linalg.svd(np.asarray(M, dtype=np.float64), compute_uv=False).min())


def solve_discrete_lyapunov(M, W, mode="transpose_on_left", tol=1e-14, max_doublings=100):
    """Solve ``X = M^T X M + W`` (left mode) or ``X = M X M^T + W`` (right mode).

    Uses the doubling iteration ``X <- X + F^T X F, F <- F F`` on the series
    ``sum_t (M^T)^t W M^t``; every doubling squares the number of summed terms.
    """
    M = as_finite(M, "M")
    W = as_finite(W, "W")
    if M.ndim != 2 or M.shape[0] != M.shape[1] or W.shape != M.shape:
        raise DimensionError(f"incompatible shapes {M.shape} and {W.shape}")
    if mode not in ("transpose_on_left", "transpose_on_right"):
        raise ValueError(f"unknown mode {mode!r}")
    rho = spectral_radius(M)
    if rho >= 1.0:
        raise StabilityError(f"matrix is not stable (spectral radius {rho:.6g})", spectral_radius=rho)
    F = M if mode == "transpose_on_left" else M.T
    X = W.copy()
    for _ in range(max_doublings):
        inc = F.T @ X @ F
        X = X + inc
        F = F @ F
        if np.max(np.abs(inc)) <= tol * max(1.0, np.max(np.abs(X))):
            break
    X = 0.5 * (X + X.T)
    G = M.T if mode == "transpose_on_left" else M
    resid = np.max(np.abs(G @ X @ G.T + W - X))
    scale = max(1.0, np.max(np.abs(W)))
    if resid > 1e-10 * scale * max(1.0, np.max(np.abs(X))):
        raise NumericError(f"Lyapunov residual {resid:.3g} too large")
    return X
