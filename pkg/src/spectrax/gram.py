"""Gram matrices: the minimum-norm solve, Methods 1 and 2, and level lifting.

Conventions
-----------
``sys.h`` holds unscaled polynomials and ``sys.scale = s`` with
``s * sum(h_i^2) ≡ 1``.  With ``P_raw z ≡ h^{⊗κ}`` and ``Y_raw`` the
minimum-norm Gram matrix for the unscaled tuple, the Gram matrices of the
actual spherical family ``sqrt(s) h`` are

* Method 1:  ``M(q) = P_raw^T Y_raw(q) P_raw``          (the scale cancels)
* Method 2:  ``M(q) = P_raw^T Y_raw(q - q0) P_raw + q0 s^κ P_raw^T P_raw``
* lift:      ``M_{k+1} = s L_raw^T (I ⊗ M_k) L_raw``

Matrices are kept exact (numpy object arrays of Fractions) while they are
small, and always carried in floating point for the eigensolver.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial, prod, sqrt
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ._exact import SparseQ, block_congruence_exact, exact_congruence, frac_zeros, solve_spd_exact
from .eig import is_positive_definite
from .polyring import Polynomial
from .subspace import NotRepresentableError, SphericalSystem, SubspaceBasis, build_basis

# The spherical-product Gram matrix is solved exactly up to this many rows.
EXACT_GRAM_LIMIT = 64
# Lifted matrices stay exact up to this dimension.
EXACT_LIFT_LIMIT = 64
PD_TOL = 1e-10

FROBENIUS = "frobenius"
ENTRYWISE = "entrywise"


class NotPositiveDefiniteError(ValueError):
    def __init__(self, message: str, matrix=None, eigenvalues=None):
        super().__init__(message)
        self.matrix = matrix
        self.eigenvalues = eigenvalues


@dataclass(eq=False)
class GramPair:
    level: int
    M_p: object
    M_1: object
    basis: Optional[SubspaceBasis]
    method: str
    exact_M_p: Optional[np.ndarray] = None
    exact_M_1: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.M_1.shape[0]

    @property
    def is_exact(self) -> bool:
        return self.exact_M_p is not None and self.exact_M_1 is not None


def _multinomial(ms: Tuple[int, ...]) -> int:
    counts = Counter(ms).values()
    return factorial(len(ms)) // prod(factorial(c) for c in counts)


def _pair_weight(ms: Tuple[int, ...], norm: str) -> int:
    """Weight of the multiset ``ms`` (size 2κ) in the reduced normal equations.

    ``N`` counts ordered index pairs (a, b) of κ-tuples whose union is ``ms``;
    ``D`` counts those with a == b.  Frobenius weighs an off-diagonal entry
    twice (it occurs at (a,b) and (b,a)), the entrywise norm counts each
    distinct entry once.
    """
    N = _multinomial(ms)
    if norm == FROBENIUS:
        return N
    counts = Counter(ms)
    if all(c % 2 == 0 for c in counts.values()):
        half = tuple(sorted(i for i, c in counts.items() for _ in range(c // 2)))
        D = _multinomial(half)
    else:
        D = 0
    return 2 * N - D


def min_norm_gram(q: Polynomial, sys: SphericalSystem, kappa: int,
                  basis_2k: Optional[SubspaceBasis] = None, norm: str = FROBENIUS,
                  exact: Optional[bool] = None):
    """Minimum-norm symmetric ``Y`` with ``(h^{⊗κ})^T Y h^{⊗κ} ≡ q`` (unscaled ``h``).

    The minimizer depends on an entry (a, b) only through the multiset of
    indices of ``h_a h_b``, so it is obtained from a ``d_{2κ}``-dimensional
    positive definite system in the coordinates of U_{2κ}.  ``norm`` selects the
    Frobenius norm (off-diagonal entries counted twice) or the entrywise norm
    over the distinct entries of the symmetric matrix.
    Returns an object array of Fractions when exact, else a float array.
    """
    if norm not in (FROBENIUS, ENTRYWISE):
        raise ValueError(f"unknown norm {norm!r}")
    m = sys.m
    N = m ** kappa
    if exact is None:
        exact = N <= EXACT_GRAM_LIMIT
    basis_2k = basis_2k or build_basis(sys, 2 * kappa)
    target = sys.ctx.nf_terms(q.as_dict())
    cq = basis_2k.coords_terms(target)
    if cq is None:
        resid = Polynomial._raw(sys.nvars, basis_2k.residual_terms(target))
        raise NotRepresentableError(f"polynomial is not in U_{2 * kappa}; residual {resid}")
    d = basis_2k.dim
    multisets = list(itertools.combinations_with_replacement(range(m), 2 * kappa))
    coords = []
    for ms in multisets:
        c = basis_2k.coords_terms(sys.product_nf(ms))
        coords.append({j: v for j, v in enumerate(c) if v})
    weights = [_pair_weight(ms, norm) for ms in multisets]

    if exact:
        G: Dict[int, Dict[int, Fraction]] = {}
        for c, g in zip(coords, weights):
            for i, vi in c.items():
                row = G.setdefault(i, {})
                for j, vj in c.items():
                    row[j] = row.get(j, 0) + g * vi * vj
        lam = solve_spd_exact(G, d, cq)
        w = [sum((lam[j] * v for j, v in c.items()), Fraction(0)) for c in coords]
    else:
        C = np.zeros((d, len(multisets)))
        for col, (c, g) in enumerate(zip(coords, weights)):
            rg = sqrt(g)
            for j, v in c.items():
                C[j, col] = float(v) * rg
        rhs = np.array([float(v) for v in cq])
        v, *_ = sla.lstsq(C, rhs, lapack_driver="gelsy")
        w = [v[i] / sqrt(g) for i, g in enumerate(weights)]

    index = {ms: i for i, ms in enumerate(multisets)}
    tuples = list(itertools.product(range(m), repeat=kappa))
    off = 2 if norm == ENTRYWISE else 1
    if exact:
        Y = frac_zeros(N, N)
    else:
        Y = np.zeros((N, N))
    for a, ta in enumerate(tuples):
        for b in range(a, N):
            val = w[index[tuple(sorted(ta + tuples[b]))]]
            if a != b:
                val = val * off
            Y[a, b] = val
            Y[b, a] = val
    return Y


def _congruence(P: SparseQ, Y, exact: bool):
    if exact:
        return exact_congruence(P, Y)
    Pf = P.to_float()
    return Pf.T @ np.asarray(Y, dtype=float) @ Pf


def _float(M) -> np.ndarray:
    return np.array(M, dtype=float)


def constant_of_nf(p: Polynomial, sys: SphericalSystem) -> Fraction:
    nf = sys.ctx.nf_terms(p.as_dict())
    return nf.get((0,) * sys.nvars, Fraction(0))


def method1_init(p: Polynomial, sys: SphericalSystem, kappa: int, basis: SubspaceBasis, P: SparseQ,
                 basis_2k: Optional[SubspaceBasis] = None, norm: str = FROBENIUS,
                 exact: Optional[bool] = None, M1: Optional[Tuple] = None) -> GramPair:
    """``M(q) = P^T Y(q) P`` for q in {p, 1}; fails unless ``M(1)`` is positive definite.

    ``M1`` may carry a previously computed ``(float, exact)`` Gram matrix for 1.
    """
    basis_2k = basis_2k or build_basis(sys, 2 * kappa)
    if exact is None:
        exact = sys.m ** kappa <= EXACT_GRAM_LIMIT
    one = Polynomial.constant(sys.nvars, 1)
    if M1 is None:
        Y1 = min_norm_gram(one, sys, kappa, basis_2k, norm, exact)
        e1 = _congruence(P, Y1, exact)
        f1 = _float(e1)
        if not is_positive_definite(f1, PD_TOL):
            eigs = np.linalg.eigvalsh(f1)
            raise NotPositiveDefiniteError(
                "Method 1 produced a Gram matrix for 1 that is not positive definite "
                f"(eigenvalues {np.array2string(eigs, precision=6)}); use Method 2, "
                "which always yields M(1) = P^T P > 0",
                matrix=e1 if exact else f1, eigenvalues=eigs)
    else:
        f1, e1 = M1
    Yp = min_norm_gram(p, sys, kappa, basis_2k, norm, exact)
    ep = _congruence(P, Yp, exact)
    return GramPair(kappa, _float(ep), f1, basis, "method1",
                    exact_M_p=ep if exact else None, exact_M_1=e1 if exact else None)


def method2_init(p: Polynomial, sys: SphericalSystem, kappa: int, basis: SubspaceBasis, P: SparseQ,
                 basis_2k: Optional[SubspaceBasis] = None, norm: str = FROBENIUS,
                 exact: Optional[bool] = None, M1: Optional[Tuple] = None) -> GramPair:
    """``M(q) = P^T Y(q - q0) P + q0 s^κ P^T P`` with q0 the constant of NF(q)."""
    basis_2k = basis_2k or build_basis(sys, 2 * kappa)
    if exact is None:
        exact = sys.m ** kappa <= EXACT_GRAM_LIMIT
    sk = sys.scale ** kappa
    if M1 is None:
        PtP = P.to_object().T.dot(P.to_object()) if exact else None
        if exact:
            e1 = PtP * sk
            f1 = _float(e1)
        else:
            Pf = P.to_float()
            e1 = None
            f1 = float(sk) * (Pf.T @ Pf)
    else:
        f1, e1 = M1
    p0 = constant_of_nf(p, sys)
    Yp = min_norm_gram(p - p0, sys, kappa, basis_2k, norm, exact)
    ep = _congruence(P, Yp, exact)
    if exact:
        ep = ep + e1 * p0
        fp = _float(ep)
    else:
        fp = _float(ep) + float(p0) * f1
    return GramPair(kappa, fp, f1, basis, "method2",
                    exact_M_p=ep if exact else None, exact_M_1=e1 if exact else None)


def block_congruence_float(L: SparseQ, M, scale: float = 1.0, Lf=None):
    """``scale * L^T (I ⊗ M) L`` in floating point, looping over the diagonal blocks."""
    d = M.shape[0]
    Lf = L.to_scipy() if Lf is None else Lf
    nrows, ncols = Lf.shape
    if sp.issparse(M):
        M = M.tocsr()
    out = None
    for b in range(nrows // d):
        Lb = Lf[b * d:(b + 1) * d]
        if Lb.nnz == 0:
            continue
        term = Lb.T @ (M @ Lb)
        out = term if out is None else out + term
    if out is None:
        out = sp.csr_matrix((ncols, ncols))
    if sp.issparse(out):
        density = out.nnz / max(1, ncols * ncols)
        out = out.toarray() if density > 0.25 or ncols <= 512 else out.tocsr()
    out = out * scale
    if not sp.issparse(out):
        out = 0.5 * (out + out.T)
    return out


def lift(pair: GramPair, sys: SphericalSystem, basis_next: Optional[SubspaceBasis], L: SparseQ,
         exact_limit: int = EXACT_LIFT_LIMIT, keep_exact: Optional[bool] = None,
         M1_next: Optional[Tuple] = None) -> GramPair:
    """One step of the iterative construction: ``M_{k+1} = s L^T (I_m ⊗ M_k) L``."""
    d_next = L.shape[1]
    if keep_exact is None:
        keep_exact = pair.is_exact and d_next <= exact_limit
    s = sys.scale
    if keep_exact and pair.is_exact:
        ep = block_congruence_exact(L, pair.exact_M_p, s)
        if M1_next is not None and M1_next[1] is not None:
            f1, e1 = M1_next
        else:
            e1 = block_congruence_exact(L, pair.exact_M_1, s)
            f1 = _float(e1)
        return GramPair(pair.level + 1, _float(ep), f1, basis_next, pair.method, ep, e1)
    Lf = L.to_scipy()
    fp = block_congruence_float(L, pair.M_p, float(s), Lf)
    if M1_next is not None:
        f1 = M1_next[0]
    else:
        f1 = block_congruence_float(L, pair.M_1, float(s), Lf)
    return GramPair(pair.level + 1, fp, f1, basis_next, pair.method)


def noniterative(pair_kappa: GramPair, T: SparseQ, sys: SphericalSystem, k: int,
                 basis_k: Optional[SubspaceBasis] = None, exact: Optional[bool] = None) -> GramPair:
    """``M_k = s^{k-κ} T_k^T (I ⊗ M_κ) T_k`` directly from the level-κ pair."""
    r = k - pair_kappa.level
    if r < 0:
        raise ValueError("target level below kappa")
    s = sys.scale ** r
    if exact is None:
        exact = pair_kappa.is_exact
    if exact and pair_kappa.is_exact:
        ep = block_congruence_exact(T, pair_kappa.exact_M_p, s)
        e1 = block_congruence_exact(T, pair_kappa.exact_M_1, s)
        return GramPair(k, _float(ep), _float(e1), basis_k, pair_kappa.method, ep, e1)
    Tf = T.to_scipy()
    fp = block_congruence_float(T, pair_kappa.M_p, float(s), Tf)
    f1 = block_congruence_float(T, pair_kappa.M_1, float(s), Tf)
    return GramPair(k, fp, f1, basis_k, pair_kappa.method)


def gram_residual(M, basis: SubspaceBasis, target: Polynomial, sys: SphericalSystem,
                  basis_2k: Optional[SubspaceBasis] = None):
    """Coordinates (in U_{2k}) of ``z^T M z - target``; exact if ``M`` is exact.

    Works through the coordinates of the products ``z_a z_b`` so that the
    residual is a vector in a fixed basis, zero exactly when the Gram
    identity holds.
    """
    from .subspace import _mul_terms

    k = basis.level
    basis_2k = basis_2k or build_basis(sys, 2 * k)
    d = basis.dim
    exact = isinstance(M, np.ndarray) and M.dtype == object
    Md = M if exact else (M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float))
    acc = [Fraction(0)] * basis_2k.dim if exact else np.zeros(basis_2k.dim)
    for a in range(d):
        za = basis.elements[a].as_dict()
        for b in range(a, d):
            coef = Md[a, b] if a == b else 2 * Md[a, b]
            if not coef:
                continue
            nf = sys.ctx.nf_terms(_mul_terms(za, basis.elements[b].as_dict()))
            c = basis_2k.coords_terms(nf)
            if c is None:
                raise NotRepresentableError("product of basis elements outside U_2k")
            for j, v in enumerate(c):
                if v:
                    acc[j] = acc[j] + (coef * v if exact else coef * float(v))
    t = basis_2k.coords_terms(sys.ctx.nf_terms(target.as_dict()))
    if t is None:
        raise NotRepresentableError("target outside U_2k")
    if exact:
        return [a - b for a, b in zip(acc, t)]
    return acc - np.array([float(v) for v in t])
