import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pgconv.core_numeric import (
    entropy,
    is_distribution,
    kl_divergence,
    logsumexp,
    project_rows_to_simplex,
    project_to_simplex,
    softmax,
    solve_discrete_lyapunov,
    solve_linear,
    spectral_radius,
    total_variation,
)
from pgconv.errors import DimensionError, DomainError, NumericError, StabilityError

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def _brute_projection(v):
    # KKT threshold by bisection, independent of the sort-based kernel
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.maximum(v - 0.5 * (lo + hi), 0)


def test_projection_examples():
    np.testing.assert_allclose(project_to_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5], atol=1e-15)
    np.testing.assert_allclose(project_to_simplex([0.8, 0.5, 0.5]), [1.6 / 3, 0.7 / 3, 0.7 / 3], atol=1e-12)
    np.testing.assert_allclose(project_to_simplex([10.0, 0.0, 0.0]), [1.0, 0.0, 0.0])


def test_projection_matches_grid_qp():
    v = np.array([0.8, 0.5, 0.5])
    g = np.linspace(0, 1, 601)
    best, arg = np.inf, None
    for a in g:
        for b in g[g <= 1 - a + 1e-12]:
            p = np.array([a, b, 1 - a - b])
            d = np.sum((p - v) ** 2)
            if d < best:
                best, arg = d, p
    np.testing.assert_allclose(project_to_simplex(v), arg, atol=2e-3)


@given(arrays(np.float64, st.integers(1, 12), elements=finite))
def test_projection_is_distribution_and_idempotent(v):
    p = project_to_simplex(v)
    assert is_distribution(p, 1e-10)
    np.testing.assert_allclose(project_to_simplex(p), p, atol=1e-12)
    np.testing.assert_allclose(p, _brute_projection(v), atol=1e-8)


@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(0, 1)))
def test_projection_identity_on_simplex(w):
    if w.sum() == 0:
        return
    p = w / w.sum()
    np.testing.assert_allclose(project_to_simplex(p), p, atol=1e-12)


def test_projection_rejects_bad_input():
    with pytest.raises(DomainError):
        project_to_simplex([1.0, np.nan])
    with pytest.raises(DimensionError):
        project_to_simplex([])
    rows = project_rows_to_simplex(np.array([[0.8, 0.5, 0.5], [10.0, 0.0, 0.0]]))
    np.testing.assert_allclose(rows[1], [1, 0, 0])


def test_entropy_examples():
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy(np.full(3, 1 / 3)) == pytest.approx(math.log(3), abs=1e-15)
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    with pytest.raises(DomainError):
        entropy([0.7, 0.7])


def test_kl_examples():
    assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert kl_divergence([0.7, 0.3], [0.5, 0.5]) == pytest.approx(0.7 * math.log(1.4) + 0.3 * math.log(0.6), abs=1e-15)
    assert kl_divergence([0.7, 0.3], [0.5, 0.5]) == pytest.approx(0.08228, abs=1e-5)
    with pytest.raises(DomainError):
        kl_divergence([0.5, 0.5], [1.0, 0.0])


@settings(max_examples=200)
@given(arrays(np.float64, 4, elements=st.floats(1e-3, 1)), arrays(np.float64, 4, elements=st.floats(1e-3, 1)))
def test_kl_nonnegative(a, b):
    p, q = a / a.sum(), b / b.sum()
    kl = kl_divergence(p, q)
    assert kl >= -1e-15
    if np.max(np.abs(p - q)) > 1e-6:
        assert kl > 0


def test_total_variation_and_softmax():
    assert total_variation([1, 0], [0, 1]) == 1.0
    np.testing.assert_allclose(softmax(np.array([10.0, 9.0, 1.0])), [0.7310585786300049, 0.2689414213699951, 9.02e-5],
                               rtol=1e-3)
    z = np.array([1000.0, 1000.0])
    assert logsumexp(z) == pytest.approx(1000 + math.log(2))


def test_solve_linear(rng):
    b = rng.normal(size=4)
    np.testing.assert_array_equal(solve_linear(np.eye(4), b), b)
    np.testing.assert_allclose(solve_linear(2 * np.eye(3), [2.0, 4.0, 6.0]), [1, 2, 3])
    A = rng.normal(size=(5, 5)) + 5 * np.eye(5)
    b = rng.normal(size=5)
    assert np.max(np.abs(A @ solve_linear(A, b) - b)) <= 1e-10
    with pytest.raises(NumericError) as err:
        solve_linear(np.array([[1.0, 1.0], [1.0, 1.0]]), [1.0, 2.0])
    assert not err.value.condition < 1e12
    with pytest.raises(DimensionError):
        solve_linear(np.eye(2), [1.0, 2.0, 3.0])


def test_spectral_radius_examples():
    assert spectral_radius(np.diag([0.5, -0.9])) == pytest.approx(0.9)
    assert spectral_radius(np.zeros((3, 3))) == 0.0
    assert spectral_radius(np.array([[0.0, 1.0], [-0.81, 0.0]])) == pytest.approx(0.9)


def _series(M, W, left, n=200):
    X = np.zeros_like(W)
    T = np.eye(M.shape[0])
    for _ in range(n):
        X += T.T @ W @ T if left else T @ W @ T.T
        T = M @ T if left else T @ M
    return X


def test_lyapunov_examples(rng):
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(solve_discrete_lyapunov(np.zeros((2, 2)), Q), Q)
    assert solve_discrete_lyapunov([[0.5]], [[1.0]])[0, 0] == pytest.approx(4 / 3)
    with pytest.raises(StabilityError):
        solve_discrete_lyapunov(np.eye(2), np.eye(2))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1), st.sampled_from(["transpose_on_left", "transpose_on_right"]))
def test_lyapunov_matches_truncated_series(d, seed, mode):
    r = np.random.default_rng(seed)
    M = r.normal(size=(d, d))
    M *= r.uniform(0.05, 0.85) / max(spectral_radius(M), 1e-12)
    G = r.normal(size=(d, d))
    W = G @ G.T + np.eye(d)
    X = solve_discrete_lyapunov(M, W, mode)
    np.testing.assert_allclose(X, _series(M, W, mode == "transpose_on_left"), atol=1e-9 * max(1, np.abs(X).max()))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_spectral_radius_predicts_series_convergence(d, seed):
    r = np.random.default_rng(seed)
    M = r.normal(size=(d, d))
    M *= r.choice([0.7, 1.3]) / max(spectral_radius(M), 1e-12)
    tail = np.abs(np.linalg.matrix_power(M, 400)).max()
    assert (spectral_radius(M) < 1) == (tail < 1e-6)
