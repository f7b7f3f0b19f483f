"""Exact rational linear algebra on sparse vectors and small dense matrices.

Vectors are dicts ``key -> Fraction`` (keys are monomials or integer
indices); dense exact matrices are numpy ``object`` arrays of Fractions.
"""

from __future__ import annotations

import heapq
from fractions import Fraction
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

SparseVec = Dict[Hashable, Fraction]


def axpy(y: SparseVec, a: Fraction, x: SparseVec) -> None:
    """In-place ``y += a*x`` dropping exact zeros."""
    if not a:
        return
    for k, v in x.items():
        nv = y.get(k, 0) + a * v
        if nv:
            y[k] = nv
        else:
            y.pop(k, None)


class SparseEchelon:
    """Incremental row echelon form that remembers how each row was formed.

    ``add`` appends a vector if it is independent of those seen so far;
    ``coordinates`` expresses a vector in terms of the *accepted* input
    vectors, or returns ``None`` if it is outside their span.
    """

    def __init__(self, pivot_key=None):
        self.rows: List[SparseVec] = []
        self.combos: List[Dict[int, Fraction]] = []  # row r = sum combos[r][i] * accepted[i]
        self.pivots: List[Hashable] = []
        self.pivot_row: Dict[Hashable, int] = {}
        self.rank = 0
        self._pivot_key = pivot_key

    def _reduce(self, v: SparseVec) -> Tuple[SparseVec, Dict[int, Fraction]]:
        v = dict(v)
        combo: Dict[int, Fraction] = {}
        heap = [self.pivot_row[k] for k in v if k in self.pivot_row]
        heapq.heapify(heap)
        done = set()
        while heap:
            r = heapq.heappop(heap)
            if r in done:
                continue
            done.add(r)
            piv = self.pivots[r]
            c = v.get(piv)
            if not c:
                continue
            row = self.rows[r]
            factor = -c / row[piv]
            for k, val in row.items():
                nv = v.get(k, 0) + factor * val
                if nv:
                    if k not in v:
                        pr = self.pivot_row.get(k)
                        if pr is not None and pr > r:
                            heapq.heappush(heap, pr)
                    v[k] = nv
                else:
                    v.pop(k, None)
            axpy(combo, factor, self.combos[r])
        return v, combo

    def add(self, v: SparseVec) -> bool:
        rem, combo = self._reduce(v)
        if not rem:
            return False
        idx = self.rank
        combo = {k: val for k, val in combo.items()}
        combo[idx] = combo.get(idx, 0) + 1
        piv = max(rem, key=self._pivot_key) if self._pivot_key else next(iter(rem))
        self.pivot_row[piv] = len(self.rows)
        self.pivots.append(piv)
        self.rows.append(rem)
        self.combos.append(combo)
        self.rank += 1
        return True

    def residual(self, v: SparseVec) -> SparseVec:
        return self._reduce(v)[0]

    def coordinates(self, v: SparseVec) -> Optional[List[Fraction]]:
        rem, combo = self._reduce(v)
        if rem:
            return None
        # v - sum(factor * row) = 0  with rows = combos * accepted
        out = [Fraction(0)] * self.rank
        for i, c in combo.items():
            out[i] = -c
        return out


class SparseQ:
    """Exact sparse matrix stored as a list of row dicts ``col -> Fraction``."""

    __slots__ = ("shape", "rows")

    def __init__(self, shape: Tuple[int, int], rows: Optional[List[Dict[int, Fraction]]] = None):
        self.shape = shape
        self.rows = rows if rows is not None else [dict() for _ in range(shape[0])]

    @classmethod
    def from_dense(cls, a) -> "SparseQ":
        a = np.asarray(a, dtype=object)
        rows = [{j: Fraction(v) for j, v in enumerate(r) if v} for r in a]
        return cls(a.shape, rows)

    @classmethod
    def identity(cls, n: int) -> "SparseQ":
        return cls((n, n), [{i: Fraction(1)} for i in range(n)])

    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    def to_object(self) -> np.ndarray:
        out = np.full(self.shape, Fraction(0), dtype=object)
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                out[i, j] = v
        return out

    def to_float(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                out[i, j] = float(v)
        return out

    def to_scipy(self):
        import scipy.sparse as sp

        data, ri, ci = [], [], []
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                ri.append(i)
                ci.append(j)
                data.append(float(v))
        return sp.csr_matrix((data, (ri, ci)), shape=self.shape)

    def column_rank(self) -> int:
        ech = SparseEchelon()
        cols: List[Dict[int, Fraction]] = [dict() for _ in range(self.shape[1])]
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                cols[j][i] = v
        return sum(1 for c in cols if ech.add(c))

    def matmul(self, other: "SparseQ") -> "SparseQ":
        if self.shape[1] != other.shape[0]:
            raise ValueError("shape mismatch")
        rows = []
        for r in self.rows:
            out: Dict[int, Fraction] = {}
            for k, v in r.items():
                axpy(out, v, other.rows[k])
            rows.append(out)
        return SparseQ((self.shape[0], other.shape[1]), rows)

    def __eq__(self, other):
        return isinstance(other, SparseQ) and self.shape == other.shape and self.rows == other.rows


def frac_zeros(n: int, m: int) -> np.ndarray:
    return np.full((n, m), Fraction(0), dtype=object)


def block_congruence_exact(L: SparseQ, M: np.ndarray, scale: Fraction = Fraction(1)) -> np.ndarray:
    """``scale * L^T (I ⊗ M) L`` with ``M`` exact dense, never forming ``I ⊗ M``."""
    d = M.shape[0]
    nrows, ncols = L.shape
    if nrows % d:
        raise ValueError("row count of L is not a multiple of the block size")
    out = frac_zeros(ncols, ncols)
    for b in range(nrows // d):
        block = L.rows[b * d:(b + 1) * d]
        entries = [(j, c, v) for j, r in enumerate(block) for c, v in r.items()]
        if not entries:
            continue
        used_cols = sorted({c for _, c, _ in entries})
        # A = M L_b restricted to used columns
        A = {c: np.full(d, Fraction(0), dtype=object) for c in used_cols}
        for j, c, v in entries:
            A[c] = A[c] + M[:, j] * v
        for j, c1, v1 in entries:
            for c2 in used_cols:
                a = A[c2][j]
                if a:
                    out[c1, c2] += v1 * a
    if scale != 1:
        out = out * scale
    return out


def exact_congruence(P: SparseQ, Y: np.ndarray) -> np.ndarray:
    """``P^T Y P`` exactly."""
    return block_congruence_exact(P, Y)


def solve_spd_exact(G: Dict[int, Dict[int, Fraction]], n: int, rhs: Sequence[Fraction]) -> List[Fraction]:
    """Solve ``G x = rhs`` for a sparse symmetric positive definite rational ``G``.

    Symmetric elimination with diagonal pivots chosen by a minimum-fill rule
    (exact arithmetic means any diagonal pivot of an SPD matrix is nonzero).
    """
    rows = {i: dict(G.get(i, {})) for i in range(n)}
    b = {i: Fraction(v) for i, v in enumerate(rhs) if v}
    remaining = set(range(n))
    order: List[int] = []
    while remaining:
        p = min(remaining, key=lambda i: (len(rows[i]), i))
        remaining.discard(p)
        order.append(p)
        prow = rows[p]
        piv = prow.get(p)
        if not piv:
            raise ZeroDivisionError("matrix is singular or not positive definite")
        bp = b.get(p, 0)
        for i in [k for k in prow if k in remaining]:
            f = rows[i].get(p, 0) / piv
            if not f:
                continue
            ri = rows[i]
            for k, v in prow.items():
                if k in remaining or k == p:
                    nv = ri.get(k, 0) - f * v
                    if nv:
                        ri[k] = nv
                    else:
                        ri.pop(k, None)
            if bp:
                nb = b.get(i, 0) - f * bp
                if nb:
                    b[i] = nb
                else:
                    b.pop(i, None)
    x = [Fraction(0)] * n
    for p in reversed(order):
        prow = rows[p]
        s = b.get(p, Fraction(0))
        for k, v in prow.items():
            if k != p and x[k]:
                s -= v * x[k]
        x[p] = s / prow[p]
    return x


def exact_pd(M: np.ndarray) -> bool:
    """Exact positive-definiteness test via symmetric Gaussian elimination."""
    A = np.array(M, dtype=object)
    n = A.shape[0]
    for k in range(n):
        piv = A[k, k]
        if piv <= 0:
            return False
        for i in range(k + 1, n):
            f = A[i, k] / piv
            if f:
                A[i, k:] = A[i, k:] - A[k, k:] * f
    return True


def inverse_exact(M: np.ndarray) -> np.ndarray:
    """Gauss–Jordan inverse of an exact square matrix."""
    A = np.array(M, dtype=object)
    n = A.shape[0]
    I = frac_zeros(n, n)
    for i in range(n):
        I[i, i] = Fraction(1)
    A = np.concatenate([A, I], axis=1)
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r, col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        if piv != col:
            A[[col, piv]] = A[[piv, col]]
        A[col] = A[col] / A[col, col]
        for r in range(n):
            if r != col and A[r, col] != 0:
                A[r] = A[r] - A[col] * A[r, col]
    return A[:, n:]


def to_float(M) -> np.ndarray:
    return np.array(M, dtype=float)
