"""Builders for max-cut, distance to a bounded variety and tensor spectral norm.

Each builder returns a :class:`~spectrax.hierarchy.ProblemSpec` whose
``transform`` maps the hierarchy bound (in the user's sense) to the reported
quantity: a cut upper bound, a distance lower bound or a norm upper bound.
Max-cut additionally has closed-form Gram pairs for levels 1 and 2.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .hierarchy import ProblemSpec
from .ideal import IdealPresentation
from .polyring import MonomialOrder, Polynomial, parse

DENSE_ADJACENCY_DENSITY = 0.1


@dataclass
class Graph:
    """Undirected weighted graph; edge ``t`` is ``(rows[t], cols[t], weights[t])`` with row < col."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=float)
        if not (len(self.rows) == len(self.cols) == len(self.weights)):
            raise ValueError("edge arrays differ in length")
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        if len(self.rows):
            if np.any(self.rows == self.cols):
                raise ValueError("self-loops are not allowed")
            if self.rows.min() < 0 or max(self.rows.max(), self.cols.max()) >= self.n:
                raise ValueError("edge endpoint out of range")
            if not np.all(np.isfinite(self.weights)):
                raise ValueError("edge weights must be finite")
            lo = np.minimum(self.rows, self.cols)
            hi = np.maximum(self.rows, self.cols)
            self.rows, self.cols = lo, hi

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[Tuple]) -> "Graph":
        rows, cols, ws = [], [], []
        for e in edges:
            rows.append(e[0])
            cols.append(e[1])
            ws.append(e[2] if len(e) > 2 else 1.0)
        return cls(n, rows, cols, ws)

    @property
    def num_edges(self) -> int:
        return len(self.rows)

    @property
    def edges(self):
        return zip(self.rows.tolist(), self.cols.tolist(), self.weights.tolist())

    def adjacency(self, dense: Optional[bool] = None):
        """Symmetric adjacency matrix; dense when the graph is dense enough."""
        if dense is None:
            dense = self.n <= 64 or 2 * self.num_edges > DENSE_ADJACENCY_DENSITY * self.n ** 2
        if dense:
            A = np.zeros((self.n, self.n))
            np.add.at(A, (self.rows, self.cols), self.weights)
            return A + A.T
        A = sp.coo_matrix((self.weights, (self.rows, self.cols)), shape=(self.n, self.n)).tocsr()
        return (A + A.T).tocsr()

    def total_weight(self) -> float:
        """``<A, 1 1^T>``, i.e. twice the sum of edge weights."""
        return 2.0 * float(self.weights.sum())

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self.rows, 1)
        np.add.at(deg, self.cols, 1)
        return deg


def erdos_renyi(n: int, rho: float = 0.7, seed: Optional[int] = None) -> Graph:
    """Unweighted G(n, rho), drawn row by row so memory stays proportional to |E|."""
    rng = np.random.default_rng(seed)
    rows, cols = [], []
    for i in range(n - 1):
        js = np.nonzero(rng.random(n - i - 1) < rho)[0] + i + 1
        rows.append(np.full(len(js), i, dtype=np.int64))
        cols.append(js)
    if rows:
        r, c = np.concatenate(rows), np.concatenate(cols)
    else:
        r = c = np.zeros(0, dtype=np.int64)
    return Graph(n, r, c, np.ones(len(r)))


def brute_force_maxcut(g: Graph) -> float:
    """Exhaustive maximum cut (fixing vertex 0 on one side)."""
    if g.n <= 1:
        return 0.0
    best = 0.0
    A = g.adjacency(dense=True)
    for bits in range(1 << (g.n - 1)):
        x = np.array([1.0] + [1.0 if (bits >> i) & 1 else -1.0 for i in range(g.n - 1)])
        best = max(best, (g.total_weight() - x @ A @ x) / 4.0)
    return best


def _vars(names: Sequence[str]) -> List[Polynomial]:
    n = len(names)
    return [Polynomial.variable(n, i) for i in range(n)]


def cut_from_bound(g: Graph, bound: float) -> float:
    """Reported cut bound ``(<A, 1 1^T> - bound) / 2`` from a bound on ``min x^T A x``.

    Under this normalization the reported value is twice the usual cut
    weight ``(<A, 1 1^T> - x^T A x) / 4``, so it remains an upper bound on
    the true maximum cut.
    """
    return (g.total_weight() - bound) / 2.0


def maxcut_spec(g: Graph) -> ProblemSpec:
    """Minimize ``x^T A x`` over ``{±1}^n`` with spherical family ``x / sqrt(n)``."""
    if g.n < 1:
        raise ValueError("graph must have at least one vertex")
    names = [f"x{i + 1}" for i in range(g.n)]
    X = _vars(names)
    gens = [x * x - 1 for x in X]
    p = Polynomial.zero(g.n)
    for i, j, w in g.edges:
        p = p + X[i] * X[j] * Fraction(2 * w)
    ideal = IdealPresentation(tuple(gens), trusted_groebner=True)
    return ProblemSpec(names, p, ideal, tuple(X), Fraction(1, g.n), "minimize",
                       transform=lambda b, g=g: cut_from_bound(g, b), transform_name="cut_upper_bound")


def maxcut_level1_closed_form(g: Graph):
    """``(M_1(p), M_1(1)) = (A, I/n)`` in the basis ``x``."""
    A = g.adjacency()
    M1 = sp.identity(g.n, format="csr") / g.n
    return A, M1


def maxcut_level2_basis(n: int) -> List[Tuple[int, ...]]:
    """Labels of the level-2 basis: ``()`` for 1, then ``(i, j)`` for ``x_i x_j`` with i < j."""
    return [()] + list(itertools.combinations(range(n), 2))


def _pair_index(n: int):
    # index of (i, j), i < j, in lexicographic order, offset by 1 for the constant
    def idx(i, j):
        if i > j:
            i, j = j, i
        return 1 + i * (2 * n - i - 1) // 2 + (j - i - 1)
    return idx


def maxcut_level2_closed_form(g: Graph):
    """Sparse level-2 Gram pair in the basis ``(1, x_i x_j for i < j)``.

    ``M_2(1)`` is diagonal with ``1/n`` at the constant and ``2/n^2`` elsewhere.
    ``M_2(p)`` links ``1`` and ``x_i x_j`` by ``2 A_ij / n`` and, for every
    vertex i outside an edge ``{k, l}``, links ``x_i x_k`` and ``x_i x_l`` by
    ``A_kl / n``.
    """
    n = g.n
    d = 1 + n * (n - 1) // 2
    idx = _pair_index(n)
    diag = np.full(d, 2.0 / n ** 2)
    diag[0] = 1.0 / n
    M1 = sp.diags(diag, format="csr")
    ri, ci, vals = [], [], []
    for k, l, w in g.edges:
        if w == 0:
            continue
        a = idx(k, l)
        ri += [0, a]
        ci += [a, 0]
        vals += [2.0 * w / n] * 2
        for i in range(n):
            if i == k or i == l:
                continue
            u, v = idx(i, k), idx(i, l)
            ri += [u, v]
            ci += [v, u]
            vals += [w / n] * 2
    Mp = sp.coo_matrix((vals, (ri, ci)), shape=(d, d)).tocsr()
    Mp.sum_duplicates()
    Mp.eliminate_zeros()
    return Mp, M1


def maxcut_level2_nnz(g: Graph) -> int:
    """Stored entries of the closed-form ``M_2(p)``: ``2|E|(n - 1)`` for nonzero weights."""
    m = int(np.count_nonzero(g.weights))
    return 2 * m * (g.n - 1)


# -- distance to a bounded variety ---------------------------------------------------


def distance_spec(generators: Sequence[Polynomial], R2, point: Sequence, names: Optional[Sequence[str]] = None,
                  order: MonomialOrder = MonomialOrder.GREVLEX) -> ProblemSpec:
    """Squared distance from ``point`` to ``V(generators)`` using a slack variable.

    The ideal gains ``R^2 - |x|^2 - y^2`` and the spherical family is
    ``{1, x_1, ..., x_n, y} / sqrt(R^2 + 1)``.  The reported transform is the
    distance lower bound ``sqrt(max(0, bound))``.  That the variety lies in
    the ball of radius R is the caller's responsibility.
    """
    R2 = Fraction(R2)
    if R2 + 1 <= 0:
        raise ValueError("R^2 + 1 must be positive")
    if not generators:
        raise ValueError("at least one generator is required")
    n = generators[0].nvars
    if len(point) != n:
        raise ValueError("point dimension does not match the variables")
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(n)]
    slack = "y"
    while slack in names:
        slack += "_"
    all_names = names + [slack]
    N = n + 1
    X = _vars(all_names)

    def lift(p: Polynomial) -> Polynomial:
        return Polynomial._raw(N, {m + (0,): c for m, c in p.items()})

    gens = [lift(g) for g in generators]
    ball = Polynomial.constant(N, R2) - sum((x * x for x in X), Polynomial.zero(N))
    gens.append(ball)
    point = [Fraction(v) for v in point]
    obj = sum(((X[i] - point[i]) ** 2 for i in range(n)), Polynomial.zero(N))
    h = (Polynomial.constant(N, 1),) + tuple(X)
    note = ("distance bounds assume the variety lies inside the ball of radius sqrt(R^2); "
            "if it does not, the reported values may exceed the true distance")
    return ProblemSpec(all_names, obj, IdealPresentation(tuple(gens), order=order), h, 1 / (R2 + 1),
                       "minimize", transform=lambda b: math.sqrt(max(0.0, b)),
                       transform_name="distance_lower_bound", notes=[note])


def quartic_curve(names=("x", "y")) -> Polynomial:
    """The plane quartic ``8(x^4 + y^4) - 10(x^2 + y^2) + 6x^2y^2 + 3`` (inside radius sqrt(1.5))."""
    return parse("8*(x^4 + y^4) - 10*(x^2 + y^2) + 6*x^2*y^2 + 3", list(names))


# -- tensor spectral norm ----------------------------------------------------------------


@dataclass
class Tensor3:
    dims: Tuple[int, int, int]
    values: np.ndarray

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError("order-3 tensor with positive dimensions expected")
        self.values = np.asarray(self.values, dtype=float).reshape(self.dims)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("tensor entries must be finite")

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.values.ravel()))


def random_tensor(dims: Sequence[int], r: Optional[int] = None, seed: Optional[int] = None) -> Tensor3:
    """Sum of ``r`` rank-one tensors of normalized uniform[-1,1] vectors, scaled by ``10/r``.

    ``r`` defaults to ``floor(min(dims)/2)`` (at least 1).
    """
    rng = np.random.default_rng(seed)
    dims = tuple(dims)
    r = r if r is not None else max(1, min(dims) // 2)
    T = np.zeros(dims)
    for _ in range(r):
        us = []
        for d in dims:
            u = rng.uniform(-1.0, 1.0, d)
            us.append(u / np.linalg.norm(u))
        T += np.einsum("i,j,k->ijk", *us)
    return Tensor3(dims, T * (10.0 / r))


def tensor_variable_names(dims: Sequence[int]) -> List[str]:
    return [f"X_{i}_{j}_{k}" for i, j, k in itertools.product(*(range(d) for d in dims))]


def rank_one_generators(dims: Sequence[int]) -> List[Polynomial]:
    """``|X|_F^2 - 1`` and the distinct 2x2 minors of the three matricizations."""
    n1, n2, n3 = dims
    N = n1 * n2 * n3
    X = [Polynomial.variable(N, t) for t in range(N)]

    def var(i, j, k):
        return X[(i * n2 + j) * n3 + k]

    gens = [sum((x * x for x in X), Polynomial.zero(N)) - 1]
    seen = set()
    for mode in range(3):
        others = [t for t in range(3) if t != mode]
        cols = list(itertools.product(range(dims[others[0]]), range(dims[others[1]])))

        def entry(r, c):
            ii = [0, 0, 0]
            ii[mode] = r
            ii[others[0]], ii[others[1]] = c
            return var(*ii)

        for r1, r2 in itertools.combinations(range(dims[mode]), 2):
            for c1, c2 in itertools.combinations(cols, 2):
                g = entry(r1, c1) * entry(r2, c2) - entry(r1, c2) * entry(r2, c1)
                if g and g not in seen and -g not in seen:
                    seen.add(g)
                    gens.append(g)
    return gens


def tensor_norm_spec(t: Tensor3) -> ProblemSpec:
    """Maximize ``<T, X>`` over unit-norm rank-one ``X``; family ``{X, 1} / sqrt(2)``, Method 2."""
    names = tensor_variable_names(t.dims)
    N = len(names)
    X = [Polynomial.variable(N, i) for i in range(N)]
    obj = Polynomial.zero(N)
    for i, v in enumerate(t.values.ravel()):
        if v:
            obj = obj + X[i] * Fraction(float(v))
    ideal = IdealPresentation(tuple(rank_one_generators(t.dims)))
    h = tuple(X) + (Polynomial.constant(N, 1),)
    return ProblemSpec(names, obj, ideal, h, Fraction(1, 2), "maximize", method="method2",
                       transform=lambda b: b, transform_name="norm_upper_bound")


def spectral_norm_oracle(t: Tensor3, starts: int = 50, iters: int = 500, seed: int = 0) -> float:
    """Multistart alternating (higher-order) power iteration for ``max <T, u⊗v⊗w>``."""
    rng = np.random.default_rng(seed)
    T = t.values
    best = 0.0
    for _ in range(starts):
        v = rng.standard_normal(T.shape[1])
        w = rng.standard_normal(T.shape[2])
        v /= np.linalg.norm(v)
        w /= np.linalg.norm(w)
        val = 0.0
        for _ in range(iters):
            u = np.einsum("ijk,j,k->i", T, v, w)
            u /= max(np.linalg.norm(u), 1e-300)
            v = np.einsum("ijk,i,k->j", T, u, w)
            v /= max(np.linalg.norm(v), 1e-300)
            w = np.einsum("ijk,i,j->k", T, u, v)
            nw = np.linalg.norm(w)
            w /= max(nw, 1e-300)
            if abs(nw - val) <= 1e-14 * max(1.0, nw):
                val = nw
                break
            val = nw
        best = max(best, float(val))
    return best


# -- file formats -------------------------------------------------------------------------


def read_graph(path: str) -> Graph:
    """Edge list (``i j [w]`` per line, 0-based, ``#`` comments) or JSON ``{n, edges}``."""
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        edges = [tuple(e) for e in doc.get("edges", [])]
        n = doc.get("n")
        if n is None:
            n = 1 + max((max(e[0], e[1]) for e in edges), default=-1)
        return Graph.from_edges(int(n), edges)
    edges = []
    n = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "n" and len(parts) == 2:
            n = int(parts[1])
            continue
        if len(parts) not in (2, 3):
            raise ValueError(f"{path}:{lineno}: expected 'i j [w]'")
        i, j = int(parts[0]), int(parts[1])
        w = float(parts[2]) if len(parts) == 3 else 1.0
        edges.append((i, j, w))
    if n is None:
        n = 1 + max((max(e[0], e[1]) for e in edges), default=-1)
    return Graph.from_edges(n, edges)


def read_tensor(path: str) -> Tensor3:
    """JSON ``{"dims": [n1, n2, n3], "values": [...row-major...]}``."""
    with open(path) as fh:
        doc = json.load(fh)
    dims = doc["dims"]
    values = np.asarray(doc["values"], dtype=float)
    if values.size != int(np.prod(dims)):
        raise ValueError("tensor value count does not match dims")
    return Tensor3(tuple(dims), values.reshape(dims))
