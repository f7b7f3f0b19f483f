import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from spectrax.eig import NotPositiveDefinite, is_positive_definite, lambda_min_generalized


def pencil(d, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    A = A + A.T
    C = rng.standard_normal((d, d))
    B = C @ C.T + d * np.eye(d)
    return A, B


def test_hypercube_reference_pencil():
    M = np.array([[9, 6, 0, -4], [6, 9, 2, 0], [0, 2, 9, -4], [-4, 0, -4, 9]]) / 4
    lam = lambda_min_generalized(M, np.eye(4) / 4).lambda_min
    assert abs(lam - 0.74) < 0.005


@pytest.mark.parametrize("seed", range(10))
def test_dense_matches_scipy(seed):
    A, B = pencil(30 + seed, seed)
    ref = sla.eigh(A, B, eigvals_only=True)[0]
    res = lambda_min_generalized(A, B)
    assert res.path == "dense"
    assert abs(res.lambda_min - ref) <= 1e-9 * max(1, abs(ref))
    v = res.vector
    assert np.linalg.norm(A @ v - res.lambda_min * B @ v) <= 1e-8 * np.linalg.norm(v) * np.linalg.norm(A)


@pytest.mark.parametrize("seed", range(10))
def test_iterative_matches_dense(seed):
    A, B = pencil(60 + 14 * seed, 100 + seed)
    d = lambda_min_generalized(A, B, path="dense").lambda_min
    it = lambda_min_generalized(A, B, path="iterative")
    assert it.converged
    assert abs(it.lambda_min - d) <= 1e-6 * abs(d)


def test_sparse_inputs_and_diagonal_B():
    rng = np.random.default_rng(3)
    A = sp.random(700, 700, density=0.01, random_state=3)
    A = (A + A.T).tocsr()
    B = sp.diags(rng.uniform(0.5, 2.0, 700)).tocsr()
    ref = sla.eigh(A.toarray(), B.toarray(), eigvals_only=True)[0]
    res = lambda_min_generalized(A, B)
    assert res.path == "iterative" and res.converged
    assert abs(res.lambda_min - ref) <= 1e-6 * abs(ref)


def test_not_positive_definite():
    A = np.eye(3)
    with pytest.raises(NotPositiveDefinite):
        lambda_min_generalized(A, np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(NotPositiveDefinite):
        lambda_min_generalized(A, np.array([[1.0, 2, 0], [2, 1, 0], [0, 0, 1]]), path="iterative")
    assert not is_positive_definite(np.array([[1.0, 2], [2, 1]]))
    assert is_positive_definite(np.array([[2.0, 1], [1, 2]]))


@given(st.integers(0, 10_000), st.floats(-50, 50))
def test_shift_invariance(seed, c):
    A, B = pencil(12, seed)
    a = lambda_min_generalized(A, B).lambda_min
    b = lambda_min_generalized(A + c * B, B).lambda_min
    assert abs(b - (a + c)) <= 1e-8 * max(1.0, abs(a), abs(c))


@given(st.integers(0, 10_000))
def test_congruence_monotonicity(seed):
    # lambda_min(L^T A L, L^T B L) >= lambda_min(A, B) for full-column-rank L
    rng = np.random.default_rng(seed)
    A, B = pencil(10, seed)
    L = rng.standard_normal((10, 6))
    a = lambda_min_generalized(A, B).lambda_min
    b = lambda_min_generalized(L.T @ A @ L, L.T @ B @ L).lambda_min
    assert b >= a - 1e-9 * max(1.0, abs(a))


@given(st.integers(0, 10_000))
def test_congruence_invariance(seed):
    rng = np.random.default_rng(seed)
    A, B = pencil(8, seed)
    G = rng.standard_normal((8, 8)) + 4 * np.eye(8)
    a = lambda_min_generalized(A, B).lambda_min
    b = lambda_min_generalized(G.T @ A @ G, G.T @ B @ G).lambda_min
    assert abs(a - b) <= 1e-7 * max(1.0, abs(a))


def test_iteration_cap_reports_nonconvergence():
    A, B = pencil(300, 7)
    res = lambda_min_generalized(A, B, path="iterative", max_iter=5, max_basis=4, keep=2)
    assert not res.converged
    assert np.isfinite(res.lambda_min)


def test_deterministic_seed():
    A, B = pencil(200, 11)
    r1 = lambda_min_generalized(A, B, path="iterative", seed=5)
    r2 = lambda_min_generalized(A, B, path="iterative", seed=5)
    assert r1.lambda_min == r2.lambda_min
