"""The iterative hierarchy: κ detection, initialization, lifting and bounds.

:func:`solve` is :func:`precompute` followed by :func:`solve_with_context`.
A :class:`PrecomputedContext` holds everything that depends only on the
ideal and the spherical family (bases, ``P``, the ``L`` chain and the Gram
matrices of 1 along the chain), so many objectives over the same variety
share that work.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import gram as gm
from ._exact import SparseQ
from .eig import NotPositiveDefinite, lambda_min_generalized
from .ideal import GroebnerContext, IdealPresentation, groebner_context
from .polyring import MonomialOrder, Polynomial, default_names, parse
from .subspace import (
    NotRepresentableError,
    SphericalSystem,
    SubspaceBasis,
    _make_basis,
    build_basis,
    build_L,
    build_P,
    verify_spherical,
)

MONOTONE_SLACK = 1e-8
CACHE_VERSION = "spectrax-context/1"
METHODS = ("auto", "method1", "method2")


class ContextMismatchError(ValueError):
    pass


@dataclass
class ProblemSpec:
    """A POP ``min/max p(x)`` over ``V(I)`` with a spherical family ``sqrt(scale) * h``."""

    variables: Tuple[str, ...]
    objective: Polynomial
    ideal: IdealPresentation
    spherical: Optional[Tuple[Polynomial, ...]] = None
    scale: Optional[Fraction] = None
    sense: str = "minimize"
    method: str = "auto"
    norm: Optional[str] = None
    transform: Optional[Callable[[float], float]] = None
    transform_name: Optional[str] = None
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.variables = tuple(self.variables)
        if self.sense not in ("minimize", "maximize"):
            raise ValueError("sense must be 'minimize' or 'maximize'")
        if self.objective.nvars != len(self.variables):
            raise ValueError("objective and variable list disagree")
        if self.ideal.nvars != len(self.variables):
            raise ValueError("ideal and variable list disagree")
        if self.spherical is not None:
            self.spherical = tuple(self.spherical)
            self.scale = Fraction(1) if self.scale is None else Fraction(self.scale)

    def internal_objective(self) -> Polynomial:
        return self.objective if self.sense == "minimize" else -self.objective


@dataclass
class LevelRecord:
    k: int
    d_k: int
    bound: Optional[float]
    internal_bound: Optional[float]
    eig_path: Optional[str]
    eig_residual: Optional[float]
    wall_ms: float
    converged: bool = True
    status: str = "ok"  # ok | skipped | failed
    message: str = ""
    transformed: Optional[float] = None


@dataclass
class BoundReport:
    levels: List[LevelRecord]
    kappa: int
    method: str
    monotone_ok: bool
    sense: str = "minimize"
    warnings: List[str] = field(default_factory=list)

    @property
    def bounds(self) -> List[float]:
        return [r.bound for r in self.levels if r.status == "ok"]

    def bound_at(self, k: int) -> Optional[float]:
        for r in self.levels:
            if r.k == k:
                return r.bound
        return None

    @property
    def best(self) -> Optional[float]:
        vals = self.bounds
        if not vals:
            return None
        return max(vals) if self.sense == "minimize" else min(vals)

    @property
    def partial(self) -> bool:
        return any(r.status == "failed" for r in self.levels)


def _ideal_key(ideal: IdealPresentation) -> str:
    names = default_names(ideal.nvars)
    gens = [g.to_string(names, ideal.order) for g in ideal.generators]
    return json.dumps({"order": ideal.order.value, "nvars": ideal.nvars, "generators": gens,
                       "trusted": ideal.trusted_groebner}, sort_keys=True)


def _spherical_key(h: Sequence[Polynomial], scale: Fraction, nvars: int) -> str:
    names = default_names(nvars)
    return json.dumps({"h": [p.to_string(names) for p in h], "scale": str(scale)})


def integrity_hash(ideal: IdealPresentation, h: Sequence[Polynomial], scale: Fraction) -> str:
    blob = _ideal_key(ideal) + "\n" + _spherical_key(h, scale, ideal.nvars)
    return hashlib.sha256(blob.encode()).hexdigest()


class PrecomputedContext:
    """Objective-independent data for one ideal and spherical family.

    Structures are created on first use and memoized under a lock; once
    created they are never modified, so the same objects are shared by every
    objective solved against this context.
    """

    def __init__(self, ideal: IdealPresentation, gb: GroebnerContext, system: SphericalSystem,
                 levels: int, norm: str = gm.FROBENIUS, exact_limit: int = gm.EXACT_LIFT_LIMIT):
        self.ideal = ideal
        self.gb = gb
        self.system = system
        self.levels = levels
        self.norm = norm
        self.exact_limit = exact_limit
        self.bases: Dict[int, SubspaceBasis] = {}
        self.L: Dict[int, SparseQ] = {}
        self.P: Dict[int, SparseQ] = {}
        self._m1: Dict[Tuple[int, str], Dict[int, Tuple]] = {}
        self._method_choice: Dict[int, str] = {}
        self._lock = threading.RLock()
        self.hash = integrity_hash(ideal, system.h, system.scale)

    # -- structures ------------------------------------------------------------

    def basis(self, k: int) -> SubspaceBasis:
        with self._lock:
            b = self.bases.get(k)
            if b is None:
                b = self.bases[k] = build_basis(self.system, k)
            return b

    def L_matrix(self, k1: int) -> SparseQ:
        """``L_{k1}`` with ``L z_{k1} ≡ h ⊗ z_{k1-1}``."""
        with self._lock:
            L = self.L.get(k1)
            if L is None:
                L = self.L[k1] = build_L(self.system, self.basis(k1 - 1), self.basis(k1))
            return L

    def P_matrix(self, kappa: int) -> SparseQ:
        with self._lock:
            P = self.P.get(kappa)
            if P is None:
                P = self.P[kappa] = build_P(self.system, kappa, self.basis(kappa))
            return P

    def kappa(self, p: Polynomial, k_max: Optional[int] = None) -> int:
        k_max = self.levels if k_max is None else k_max
        nf = self.gb.nf_terms(p.as_dict())
        for k in range(1, k_max + 1):
            if self.basis(2 * k).coords_terms(nf) is not None:
                return k
        hint = "" if self.system.contains_constant else (
            "; consider augment_with_constant, which appends a positive constant to the "
            "spherical family so the subspaces become nested")
        raise NotRepresentableError(
            f"objective is not in U_2k for any k <= {k_max} (context levels = {self.levels}){hint}")

    # -- Gram matrices of 1 -------------------------------------------------------

    def _m1_init(self, kappa: int, method: str) -> Tuple:
        one = Polynomial.constant(self.system.nvars, 1)
        exact = self.system.m ** kappa <= gm.EXACT_GRAM_LIMIT
        init = gm.method1_init if method == "method1" else gm.method2_init
        pair = init(one, self.system, kappa, self.basis(kappa), self.P_matrix(kappa),
                    self.basis(2 * kappa), self.norm, exact)
        return (pair.M_1, pair.exact_M_1)

    def m1(self, kappa: int, method: str, k: int) -> Tuple:
        """``(float, exact-or-None)`` Gram matrix of 1 at level ``k`` for a chain started at ``κ``."""
        with self._lock:
            chain = self._m1.setdefault((kappa, method), {})
            if kappa not in chain:
                chain[kappa] = self._m1_init(kappa, method)
            for j in range(max(chain) + 1, k + 1):
                f, e = chain[j - 1]
                L = self.L_matrix(j)
                if e is not None and L.shape[1] <= self.exact_limit:
                    from ._exact import block_congruence_exact

                    e2 = block_congruence_exact(L, e, self.system.scale)
                    chain[j] = (np.array(e2, dtype=float), e2)
                else:
                    chain[j] = (gm.block_congruence_float(L, f, float(self.system.scale)), None)
            return chain[k]

    def resolve_method(self, kappa: int, method: str) -> str:
        """``auto`` resolves to Method 1 if its Gram matrix for 1 is positive definite."""
        if method != "auto":
            return method
        with self._lock:
            choice = self._method_choice.get(kappa)
            if choice is None:
                try:
                    self.m1(kappa, "method1", kappa)
                    choice = "method1"
                except gm.NotPositiveDefiniteError:
                    choice = "method2"
                self._method_choice[kappa] = choice
            return choice

    def matches(self, spec: ProblemSpec) -> bool:
        if spec.spherical is None:
            return False
        return (integrity_hash(spec.ideal, spec.spherical, spec.scale) == self.hash)


def precompute(ideal: IdealPresentation, spherical: Sequence[Polynomial], scale=Fraction(1),
               levels: int = 3, verify_trusted: bool = True, kappas: Sequence[int] = (),
               norm: str = gm.FROBENIUS, exact_limit: int = gm.EXACT_LIFT_LIMIT,
               gb: Optional[GroebnerContext] = None) -> PrecomputedContext:
    """Build the Gröbner context, spherical system, bases ``U_1..U_levels`` and ``L`` chain.

    For each κ in ``kappas`` the Gram matrices of 1 are also lifted through
    all levels for both methods (Method 1 only where it is admissible).
    """
    gb = gb or groebner_context(ideal, verify_trusted=verify_trusted)
    system = verify_spherical(spherical, gb, Fraction(scale))
    ctx = PrecomputedContext(ideal, gb, system, levels, norm, exact_limit)
    for k in range(1, levels + 1):
        ctx.basis(k)
        if k > 1:
            ctx.L_matrix(k)
    for kappa in kappas:
        if kappa > levels:
            continue
        ctx.m1(kappa, "method2", levels)
        if ctx.resolve_method(kappa, "auto") == "method1":
            ctx.m1(kappa, "method1", levels)
    return ctx


def _eig_level(M_p, M_1, eig_opts) -> Tuple[float, str, float, bool]:
    res = lambda_min_generalized(M_p, M_1, want_vector=False, **(eig_opts or {}))
    return res.lambda_min, res.path, res.residual_norm, res.converged


def solve_with_context(spec: ProblemSpec, ctx: PrecomputedContext, levels: Optional[int] = None,
                       method: Optional[str] = None, budget_ms: Optional[float] = None,
                       eig_opts: Optional[dict] = None) -> BoundReport:
    """Run the hierarchy for ``spec`` reusing ``ctx``; bounds for k = κ..levels."""
    if not ctx.matches(spec):
        raise ContextMismatchError("problem's ideal or spherical family differs from the context")
    levels = ctx.levels if levels is None else levels
    if levels > ctx.levels:
        raise ValueError(f"context was precomputed up to level {ctx.levels}")
    method = method or spec.method or "auto"
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    p = spec.internal_objective()
    sys = ctx.system
    kappa = ctx.kappa(p, levels)
    chosen = ctx.resolve_method(kappa, method)
    sign = 1.0 if spec.sense == "minimize" else -1.0
    warnings = list(spec.notes)

    start = time.perf_counter()
    records: List[LevelRecord] = []
    pair = None
    for k in range(kappa, levels + 1):
        t0 = time.perf_counter()
        elapsed_ms = (t0 - start) * 1e3
        if budget_ms is not None and elapsed_ms >= budget_ms:
            records.append(LevelRecord(k, ctx.basis(k).dim, None, None, None, None, 0.0,
                                       converged=False, status="skipped",
                                       message="time budget exhausted"))
            continue
        try:
            if pair is None:
                exact = sys.m ** kappa <= gm.EXACT_GRAM_LIMIT
                init = gm.method1_init if chosen == "method1" else gm.method2_init
                pair = init(p, sys, kappa, ctx.basis(kappa), ctx.P_matrix(kappa),
                            ctx.basis(2 * kappa), ctx.norm, exact, M1=ctx.m1(kappa, chosen, kappa))
            else:
                pair = gm.lift(pair, sys, ctx.basis(k), ctx.L_matrix(k), ctx.exact_limit,
                               M1_next=ctx.m1(kappa, chosen, k))
            lam, path, resid, conv = _eig_level(pair.M_p, pair.M_1, eig_opts)
        except (NotPositiveDefinite, np.linalg.LinAlgError) as exc:
            records.append(LevelRecord(k, ctx.basis(k).dim, None, None, None, None,
                                       (time.perf_counter() - t0) * 1e3, converged=False,
                                       status="failed", message=str(exc)))
            continue
        user = sign * lam
        rec = LevelRecord(k, pair.dim, user, lam, path, resid, (time.perf_counter() - t0) * 1e3,
                          converged=conv)
        if not conv:
            rec.message = "eigensolver did not converge; value is the best estimate"
        if spec.transform is not None:
            rec.transformed = spec.transform(user)
        records.append(rec)

    ok = [r for r in records if r.status == "ok"]
    monotone = all(b.internal_bound >= a.internal_bound - MONOTONE_SLACK for a, b in zip(ok, ok[1:]))
    if not monotone:
        warnings.append("bounds are not monotone across levels beyond the numerical slack")
    return BoundReport(records, kappa, chosen, monotone, spec.sense, warnings)


def context_for(spec: ProblemSpec, levels: int, **kwargs) -> PrecomputedContext:
    if spec.spherical is None:
        raise ValueError("problem has no spherical family; use a builder or supply one")
    return precompute(spec.ideal, spec.spherical, spec.scale, levels, **kwargs)


def solve(spec: ProblemSpec, levels: int = 3, method: Optional[str] = None,
          budget_ms: Optional[float] = None, eig_opts: Optional[dict] = None,
          verify_trusted: bool = True, norm: Optional[str] = None,
          exact_limit: int = gm.EXACT_LIFT_LIMIT) -> BoundReport:
    """Bounds ``λ_min(M_k(p), M_k(1))`` for k = κ..levels, each level lifted from the last.

    ``norm`` (default: the problem's, else Frobenius) selects the norm used for
    the minimum-norm Gram matrices at level κ.
    """
    norm = norm or spec.norm or gm.FROBENIUS
    ctx = context_for(spec, levels, verify_trusted=verify_trusted, norm=norm, exact_limit=exact_limit)
    return solve_with_context(spec, ctx, levels, method, budget_ms, eig_opts)


# -- cache files ----------------------------------------------------------------


def _sparse_to_json(S: SparseQ):
    return {"shape": list(S.shape),
            "rows": [[[j, str(v)] for j, v in sorted(r.items())] for r in S.rows]}


def _sparse_from_json(obj) -> SparseQ:
    return SparseQ(tuple(obj["shape"]),
                   [{int(j): Fraction(v) for j, v in row} for row in obj["rows"]])


def save_context(ctx: PrecomputedContext, path: str) -> None:
    """Write the context's bases, ``P`` and ``L`` matrices and Gröbner basis as JSON."""
    names = default_names(ctx.system.nvars)
    with ctx._lock:
        doc = {
            "version": CACHE_VERSION,
            "hash": ctx.hash,
            "levels": ctx.levels,
            "norm": ctx.norm,
            "order": ctx.gb.order.value,
            "groebner": [g.to_string(names, ctx.gb.order) for g in ctx.gb.basis],
            "bases": {str(k): [e.to_string(names) for e in b.elements]
                      for k, b in sorted(ctx.bases.items())},
            "labels": {str(k): [list(l) if l is not None else None for l in b.labels]
                       for k, b in sorted(ctx.bases.items())},
            "L": {str(k): _sparse_to_json(L) for k, L in sorted(ctx.L.items())},
            "P": {str(k): _sparse_to_json(P) for k, P in sorted(ctx.P.items())},
        }
    body = json.dumps(doc, sort_keys=True)
    doc["checksum"] = hashlib.sha256(body.encode()).hexdigest()
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_context(path: str, ideal: IdealPresentation, spherical: Sequence[Polynomial],
                 scale=Fraction(1)) -> PrecomputedContext:
    """Rebuild a context from :func:`save_context` output, checking both hashes."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != CACHE_VERSION:
        raise ValueError("unsupported cache version")
    checksum = doc.pop("checksum", None)
    if checksum != hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest():
        raise ValueError("cache file is corrupted (checksum mismatch)")
    scale = Fraction(scale)
    if doc["hash"] != integrity_hash(ideal, spherical, scale):
        raise ContextMismatchError("cache was built for a different ideal or spherical family")
    names = default_names(ideal.nvars)
    order = MonomialOrder.parse(doc["order"])
    elements = [parse(s, names).as_dict() for s in doc["groebner"]]
    gb = GroebnerContext._from_terms(elements, ideal.nvars, order, "cached")
    system = verify_spherical(spherical, gb, scale)
    ctx = PrecomputedContext(ideal, gb, system, doc["levels"], doc["norm"])
    for k, elems in doc["bases"].items():
        nfs = [parse(s, names).as_dict() for s in elems]
        labels = [tuple(l) if l is not None else None for l in doc["labels"][k]]
        ctx.bases[int(k)] = _make_basis(int(k), nfs, labels, ideal.nvars, order)
    ctx.L = {int(k): _sparse_from_json(v) for k, v in doc["L"].items()}
    ctx.P = {int(k): _sparse_from_json(v) for k, v in doc["P"].items()}
    return ctx
