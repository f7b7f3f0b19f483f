"""Smallest eigenvalue of a symmetric-definite pencil (A, B).

Small problems go through a dense Cholesky reduction.  Larger ones use a
thick-restart Lanczos iteration in the B-inner product on ``B^{-1} A``, with
an explicit Rayleigh–Ritz step on the retained basis; ``A`` may be a dense
array, a scipy sparse matrix or any object with a ``@``/``matvec`` product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_TOL = 1e-9
ITERATIVE_TOL = 1e-7


class NotPositiveDefinite(np.linalg.LinAlgError):
    """The right-hand matrix of the pencil is not positive definite."""


@dataclass
class EigResult:
    lambda_min: float
    vector: Optional[np.ndarray]
    iterations: int
    residual_norm: float
    path: str
    converged: bool = True


def _dim(A) -> int:
    return A.shape[0]


def _matvec(A) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(A, spla.LinearOperator):
        return A.matvec
    return lambda x: A @ x


def _as_dense(A) -> np.ndarray:
    if sp.issparse(A):
        return A.toarray()
    if isinstance(A, spla.LinearOperator):
        return A @ np.eye(A.shape[0])
    return np.asarray(A, dtype=float)


def _is_diagonal(B) -> Optional[np.ndarray]:
    if sp.issparse(B):
        B = B.tocoo()
        if np.all(B.row == B.col):
            diag = np.zeros(B.shape[0])
            np.add.at(diag, B.row, B.data)
            return diag
        return None
    if isinstance(B, spla.LinearOperator):
        return None
    B = np.asarray(B)
    if B.ndim == 2 and np.count_nonzero(B - np.diag(np.diag(B))) == 0:
        return np.diag(B).astype(float)
    return None


def is_positive_definite(B, tol: float = 1e-10) -> bool:
    """Cholesky-style test: every pivot must exceed ``tol * trace(B)/d``."""
    d = _dim(B)
    if d == 0:
        return True
    diag = _is_diagonal(B)
    if diag is not None:
        cut = tol * diag.sum() / d
        return bool(diag.sum() > 0 and np.all(diag > cut))
    if sp.issparse(B) and d > 2000:
        Bc = B.tocsc()
        trace = Bc.diagonal().sum()
        if trace <= 0:
            return False
        try:
            lu = spla.splu(Bc, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError:
            return False
        piv = lu.U.diagonal()
        return bool(np.all(piv > tol * trace / d))
    Bd = _as_dense(B)
    trace = np.trace(Bd)
    if not np.all(np.isfinite(Bd)) or trace <= 0:
        return False
    try:
        R = sla.cholesky(Bd, lower=False)
    except np.linalg.LinAlgError:
        return False
    pivots = np.diag(R) ** 2
    return bool(np.all(pivots > tol * trace / d))


class _BSolver:
    """Applies B^{-1} (diagonal, dense Cholesky or sparse LU in symmetric mode)."""

    def __init__(self, B):
        self.diag = _is_diagonal(B)
        self.B = B
        if self.diag is not None:
            if np.any(self.diag <= 0):
                raise NotPositiveDefinite("B has a non-positive diagonal entry")
            self.solve = lambda x: x / self.diag
            self.mul = lambda x: self.diag * x
            return
        if sp.issparse(B):
            Bc = B.tocsc()
            try:
                lu = spla.splu(Bc, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                               options={"SymmetricMode": True})
            except RuntimeError as exc:
                raise NotPositiveDefinite(str(exc)) from exc
            if np.any(lu.U.diagonal() <= 0):
                raise NotPositiveDefinite("B is not positive definite (non-positive pivot)")
            self.solve = lu.solve
            self.mul = lambda x: Bc @ x
            return
        Bd = _as_dense(B)
        try:
            cf = sla.cho_factor(Bd, lower=False)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("Cholesky factorization of B failed") from exc
        self.solve = lambda x: sla.cho_solve(cf, x)
        self.mul = lambda x: Bd @ x


def _dense(A, B, want_vector: bool) -> EigResult:
    Ad = _as_dense(A)
    Bd = _as_dense(B)
    Ad = 0.5 * (Ad + Ad.T)
    Bd = 0.5 * (Bd + Bd.T)
    try:
        R = sla.cholesky(Bd, lower=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Cholesky factorization of B failed") from exc
    # C = R^{-T} A R^{-1}
    X = sla.solve_triangular(R, Ad.T, trans="T", lower=False)
    C = sla.solve_triangular(R, X.T, trans="T", lower=False)
    C = 0.5 * (C + C.T)
    w, y = sla.eigh(C, subset_by_index=[0, 0])
    lam = float(w[0])
    v = sla.solve_triangular(R, y[:, 0], lower=False)
    res = float(np.linalg.norm(Ad @ v - lam * (Bd @ v)))
    return EigResult(lam, v if want_vector else None, 1, res, "dense", True)


def _lanczos(A, B, tol: float, max_iter: int, seed: int, max_basis: int, keep: int,
             want_vector: bool) -> EigResult:
    d = _dim(A)
    Av = _matvec(A)
    bs = _BSolver(B)
    rng = np.random.default_rng(seed)

    max_basis = min(max_basis, d)
    keep = min(keep, max_basis - 1) if max_basis > 1 else 0

    V = np.zeros((d, max_basis))
    AV = np.zeros((d, max_basis))
    BV = np.zeros((d, max_basis))
    j = 0
    matvecs = 0
    normA = 0.0
    theta = np.inf
    u = None
    res_norm = np.inf
    converged = False

    def orthonormalize(w):
        # two passes of classical Gram–Schmidt in the B-inner product
        for _ in range(2):
            if j:
                w = w - V[:, :j] @ (BV[:, :j].T @ w)
        bw = bs.mul(w)
        nrm2 = float(w @ bw)
        return w, bw, nrm2

    start = rng.standard_normal(d)
    w = start
    while True:
        # expansion
        while j < max_basis:
            w, bw, nrm2 = orthonormalize(w)
            if nrm2 <= 1e-28 * max(1.0, float(w @ w)):
                # invariant subspace reached; continue with a fresh random direction
                if j >= d:
                    break
                w = rng.standard_normal(d)
                w, bw, nrm2 = orthonormalize(w)
                if nrm2 <= 1e-28:
                    break
            nrm = np.sqrt(nrm2)
            V[:, j] = w / nrm
            BV[:, j] = bw / nrm
            AV[:, j] = Av(V[:, j])
            matvecs += 1
            normA = max(normA, float(np.linalg.norm(AV[:, j])) / max(np.linalg.norm(V[:, j]), 1e-300))
            j += 1
            w = bs.solve(AV[:, j - 1])
        # Rayleigh–Ritz on span(V)
        T = V[:, :j].T @ AV[:, :j]
        T = 0.5 * (T + T.T)
        theta_all, S = np.linalg.eigh(T)
        theta = float(theta_all[0])
        u = V[:, :j] @ S[:, 0]
        Au = AV[:, :j] @ S[:, 0]
        Bu = BV[:, :j] @ S[:, 0]
        r = Au - theta * Bu
        res_norm = float(np.linalg.norm(r))
        scale = max(normA, abs(theta) * float(np.linalg.norm(Bu)) / max(np.linalg.norm(u), 1e-300), 1e-300)
        if res_norm <= tol * scale * float(np.linalg.norm(u)) or j >= d:
            converged = True
            break
        if matvecs >= max_iter:
            break
        # thick restart: keep the lowest Ritz vectors, continue along B^{-1} r
        nk = max(1, min(keep, j - 1))
        Sk = S[:, :nk]
        V[:, :nk] = V[:, :j] @ Sk
        AV[:, :nk] = AV[:, :j] @ Sk
        BV[:, :nk] = BV[:, :j] @ Sk
        j = nk
        w = bs.solve(r)
    return EigResult(theta, u if want_vector else None, matvecs, res_norm, "iterative", converged)


def lambda_min_generalized(A, B, tol: Optional[float] = None, dense_cutoff: int = 512,
                           max_iter: Optional[int] = None, seed: int = 0,
                           path: Optional[str] = None, want_vector: bool = True,
                           max_basis: int = 64, keep: int = 16) -> EigResult:
    """Smallest generalized eigenvalue of the symmetric-definite pencil ``(A, B)``.

    ``path`` forces ``"dense"`` or ``"iterative"``; by default the dense path
    is used for ``d <= dense_cutoff``.  Raises :class:`NotPositiveDefinite`
    if B fails its factorization.  An iterative run that hits ``max_iter``
    (default ``10 d`` products with A) returns its best estimate with
    ``converged=False``.
    """
    d = _dim(A)
    if _dim(B) != d or A.shape[1] != d or B.shape[1] != d:
        raise ValueError("A and B must be square of the same size")
    if d == 0:
        raise ValueError("empty pencil")
    if path is None:
        path = "dense" if d <= dense_cutoff else "iterative"
    if path == "dense":
        return _dense(A, B, want_vector)
    if path != "iterative":
        raise ValueError(f"unknown path {path!r}")
    tol = ITERATIVE_TOL if tol is None else tol
    max_iter = 10 * d if max_iter is None else max_iter
    return _lanczos(A, B, tol, max_iter, seed, max_basis, keep, want_vector)


def bound(A, B, **kwargs) -> float:
    return lambda_min_generalized(A, B, want_vector=False, **kwargs).lambda_min
