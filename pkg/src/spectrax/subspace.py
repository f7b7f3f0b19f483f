"""Quotient subspaces spanned by products of spherical polynomials.

A :class:`SphericalSystem` stores exact polynomials ``h`` and a rational
``scale`` with ``scale * sum(h_i^2) ≡ 1``; the actual spherical family is
``sqrt(scale) * h``.  This keeps normalizations such as ``x_i / sqrt(n)`` exact.
Every structure matrix below is built for the *unscaled* ``h``; the gram
module applies the powers of ``scale`` where they belong.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._exact import SparseEchelon, SparseQ, inverse_exact
from .ideal import GroebnerContext, Terms
from .polyring import DimensionMismatch, Monomial, Polynomial


class NotSphericalError(ValueError):
    def __init__(self, residual: Polynomial):
        super().__init__(f"sum of squares is not ≡ 1 modulo the ideal; residual normal form: {residual}")
        self.residual = residual


class NotRepresentableError(ValueError):
    pass


class StructureError(RuntimeError):
    """A structure matrix failed its defining identity (should not happen)."""


def _mul_terms(a: Terms, b: Terms) -> Terms:
    out: Terms = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = tuple(x + y for x, y in zip(ma, mb))
            v = out.get(m, 0) + ca * cb
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


@dataclass(eq=False)
class SphericalSystem:
    h: Tuple[Polynomial, ...]
    ctx: GroebnerContext
    scale: Fraction = Fraction(1)
    contains_constant: bool = False
    _products: Dict[Tuple[int, ...], Terms] = field(default_factory=dict, repr=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    @property
    def m(self) -> int:
        return len(self.h)

    @property
    def nvars(self) -> int:
        return self.ctx.nvars

    def product_nf(self, multiset: Sequence[int]) -> Terms:
        """Normal form of ``prod(h[i] for i in multiset)`` (cached by sorted multiset)."""
        key = tuple(sorted(multiset))
        with self._lock:
            hit = self._products.get(key)
            if hit is not None:
                return hit
            if not key:
                out = self.ctx.nf_terms({(0,) * self.nvars: Fraction(1)})
            else:
                rest = self.product_nf(key[1:])
                out = self.ctx.nf_terms(_mul_terms(self.h[key[0]].as_dict(), rest))
            self._products[key] = out
            return out

    def key(self) -> Tuple:
        """Structural identity, used to match problems against precomputed contexts."""
        return (self.ctx.fingerprint(), tuple(self.h), self.scale)


def verify_spherical(h: Sequence[Polynomial], ctx: GroebnerContext,
                     scale: Fraction = Fraction(1)) -> SphericalSystem:
    """Check ``scale * sum(h_i^2) ≡ 1`` exactly and build the system."""
    h = tuple(h)
    if not h:
        raise ValueError("need at least one spherical polynomial")
    for p in h:
        if p.nvars != ctx.nvars:
            raise DimensionMismatch("spherical polynomial and ideal disagree on the number of variables")
    scale = Fraction(scale)
    if scale <= 0:
        raise ValueError("square-scale must be positive")
    total = Polynomial.zero(ctx.nvars)
    for p in h:
        total = total + p * p
    residual = ctx.normal_form(total.scale(scale) - 1)
    if not residual.is_zero():
        raise NotSphericalError(residual)
    has_const = any(p.is_constant() and p.constant_term() > 0 for p in h)
    return SphericalSystem(h=h, ctx=ctx, scale=scale, contains_constant=has_const)


@dataclass(eq=False)
class SubspaceBasis:
    """Basis ``z_k`` of U_k, as normal forms, plus an exact coordinate solver."""

    level: int
    elements: Tuple[Polynomial, ...]
    monomial_index: Dict[Monomial, int]
    labels: Tuple[Optional[Tuple[int, ...]], ...]
    _echelon: SparseEchelon = field(repr=False, default=None)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def dim(self) -> int:
        return len(self.elements)

    def coords_terms(self, nf: Terms) -> Optional[List[Fraction]]:
        with self._lock:
            return self._echelon.coordinates(nf)

    def residual_terms(self, nf: Terms) -> Terms:
        with self._lock:
            return self._echelon.residual(nf)

    def coefficient_matrix(self) -> np.ndarray:
        """Exact (monomials x elements) matrix of element coefficients."""
        out = np.full((len(self.monomial_index), self.dim), Fraction(0), dtype=object)
        for j, e in enumerate(self.elements):
            for m, c in e.items():
                out[self.monomial_index[m], j] = c
        return out


def _make_basis(level: int, elements: List[Terms], labels, nvars: int, order) -> SubspaceBasis:
    ech = SparseEchelon(pivot_key=lambda m: order.key(m))
    for e in elements:
        if not ech.add(e):
            raise ValueError("basis elements are linearly dependent modulo the ideal")
    mono_index: Dict[Monomial, int] = {}
    for e in elements:
        for m in sorted(e, key=order.key, reverse=True):
            mono_index.setdefault(m, len(mono_index))
    polys = tuple(Polynomial._raw(nvars, dict(e)) for e in elements)
    return SubspaceBasis(level=level, elements=polys, monomial_index=mono_index,
                         labels=tuple(labels), _echelon=ech)


def build_basis(sys: SphericalSystem, k: int) -> SubspaceBasis:
    """Greedy basis of U_k from degree-k products, enumerated as multisets in lex order."""
    if k < 1:
        raise ValueError("level must be at least 1")
    order = sys.ctx.order
    ech = SparseEchelon(pivot_key=order.key)
    kept: List[Terms] = []
    labels = []
    for ms in itertools.combinations_with_replacement(range(sys.m), k):
        nf = sys.product_nf(ms)
        if nf and ech.add(nf):
            kept.append(nf)
            labels.append(ms)
    mono_index: Dict[Monomial, int] = {}
    for e in kept:
        for m in sorted(e, key=order.key, reverse=True):
            mono_index.setdefault(m, len(mono_index))
    polys = tuple(Polynomial._raw(sys.nvars, dict(e)) for e in kept)
    return SubspaceBasis(level=k, elements=polys, monomial_index=mono_index,
                         labels=tuple(labels), _echelon=ech)


def basis_from_elements(sys: SphericalSystem, k: int, elements: Sequence[Polynomial],
                        reference: Optional[SubspaceBasis] = None) -> SubspaceBasis:
    """Use caller-chosen representatives as the basis of U_k (checked exactly)."""
    reference = reference or build_basis(sys, k)
    nfs = [sys.ctx.nf_terms(e.as_dict()) for e in elements]
    if len(nfs) != reference.dim:
        raise ValueError(f"U_{k} has dimension {reference.dim}, got {len(nfs)} elements")
    for e in nfs:
        if reference.coords_terms(e) is None:
            raise ValueError(f"element {Polynomial._raw(sys.nvars, e)} is not in U_{k}")
    return _make_basis(k, nfs, [None] * len(nfs), sys.nvars, sys.ctx.order)


def rebase(sys: SphericalSystem, basis: SubspaceBasis, G: np.ndarray) -> SubspaceBasis:
    """New basis ``z' = G^{-1} z``, so that structure matrices transform as ``P' = P G``."""
    G = np.asarray(G, dtype=object)
    Ginv = inverse_exact(G)
    new = []
    for i in range(basis.dim):
        acc: Terms = {}
        for j, e in enumerate(basis.elements):
            c = Fraction(Ginv[i, j])
            if c:
                for m, v in e.items():
                    nv = acc.get(m, 0) + c * v
                    if nv:
                        acc[m] = nv
                    else:
                        acc.pop(m, None)
        new.append(acc)
    return _make_basis(basis.level, new, [None] * basis.dim, sys.nvars, sys.ctx.order)


def augment_with_constant(h: Sequence[Polynomial], scale=Fraction(1)) -> Tuple[Tuple[Polynomial, ...], Fraction]:
    """Append the constant 1 to a spherical family, keeping it spherical.

    With ``scale = a/b`` the family ``{a h_i} ∪ {1}`` has squares summing to
    ``ab + 1``, so its square-scale is ``1/(ab + 1)``.  Containing a constant
    makes ``U_k ⊆ U_{k+1}``, so every polynomial of degree at most k in the
    h's lies in ``U_k``.
    """
    h = tuple(h)
    if not h:
        raise ValueError("need at least one spherical polynomial")
    scale = Fraction(scale)
    a, b = scale.numerator, scale.denominator
    nvars = h[0].nvars
    new = tuple(p.scale(a) for p in h) + (Polynomial.constant(nvars, 1),)
    return new, Fraction(1, a * b + 1)


def coordinates(f: Polynomial, basis: SubspaceBasis, ctx: GroebnerContext) -> Optional[List[Fraction]]:
    """Exact coordinates of ``f + I`` in ``basis``; ``None`` if it is not a member."""
    return basis.coords_terms(ctx.nf_terms(f.as_dict()))


def find_kappa(sys: SphericalSystem, p: Polynomial, k_max: int = 10,
               bases: Optional[Dict[int, SubspaceBasis]] = None) -> int:
    """Smallest k <= k_max with p in U_{2k}."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    nf = sys.ctx.nf_terms(p.as_dict())
    for k in range(1, k_max + 1):
        b = bases.get(2 * k) if bases is not None else None
        if b is None:
            b = build_basis(sys, 2 * k)
            if bases is not None:
                bases[2 * k] = b
        if b.coords_terms(nf) is not None:
            return k
    hint = "" if sys.contains_constant else (
        "; consider augment_with_constant, which appends a positive constant to the "
        "spherical family so the subspaces become nested")
    raise NotRepresentableError(f"objective is not in U_2k for any k <= {k_max}{hint}")


def _coords_or_fault(sys: SphericalSystem, nf: Terms, basis: SubspaceBasis, what: str) -> List[Fraction]:
    c = basis.coords_terms(nf)
    if c is None:
        raise StructureError(f"{what} is not in U_{basis.level}")
    return c


def _row(coords: List[Fraction]) -> Dict[int, Fraction]:
    return {j: v for j, v in enumerate(coords) if v}


def build_P(sys: SphericalSystem, kappa: int, basis: SubspaceBasis) -> SparseQ:
    """Rows: coordinates of each entry of ``h^{⊗κ}`` (Kronecker order) in ``basis``."""
    if basis.level != kappa:
        raise ValueError("basis level does not match kappa")
    rows = []
    cache: Dict[Tuple[int, ...], Dict[int, Fraction]] = {}
    for tup in itertools.product(range(sys.m), repeat=kappa):
        key = tuple(sorted(tup))
        if key not in cache:
            cache[key] = _row(_coords_or_fault(sys, sys.product_nf(key), basis, f"product {key}"))
        rows.append(dict(cache[key]))
    return SparseQ((sys.m ** kappa, basis.dim), rows)


def build_L(sys: SphericalSystem, basis_k: SubspaceBasis, basis_k1: SubspaceBasis) -> SparseQ:
    """Rows ``(i, j)`` at ``i*d_k + j``: coordinates of ``h_i z_{k,j}`` in ``basis_k1``."""
    if basis_k1.level != basis_k.level + 1:
        raise ValueError("bases must be at consecutive levels")
    rows = []
    for hi in sys.h:
        hd = hi.as_dict()
        for zj in basis_k.elements:
            nf = sys.ctx.nf_terms(_mul_terms(hd, zj.as_dict()))
            rows.append(_row(_coords_or_fault(sys, nf, basis_k1, "h_i * z_j")))
    return SparseQ((sys.m * basis_k.dim, basis_k1.dim), rows)


def build_T(sys: SphericalSystem, basis_kappa: SubspaceBasis, basis_k: SubspaceBasis) -> SparseQ:
    """Rows for ``h^{⊗(k-κ)} ⊗ z_κ`` expressed in ``basis_k``."""
    r = basis_k.level - basis_kappa.level
    if r < 0:
        raise ValueError("target level below kappa")
    rows = []
    for tup in itertools.product(range(sys.m), repeat=r):
        prod = sys.product_nf(tup)
        for zj in basis_kappa.elements:
            nf = sys.ctx.nf_terms(_mul_terms(prod, zj.as_dict()))
            rows.append(_row(_coords_or_fault(sys, nf, basis_k, "h-product * z_j")))
    return SparseQ((sys.m ** r * basis_kappa.dim, basis_k.dim), rows)


def verify_structure(sys: SphericalSystem, S: SparseQ, lhs: Sequence[Terms], basis: SubspaceBasis) -> bool:
    """Exact check that ``S z ≡ lhs`` row by row."""
    if len(lhs) != S.shape[0]:
        return False
    for row, target in zip(S.rows, lhs):
        acc: Terms = {}
        for j, c in row.items():
            for m, v in basis.elements[j].items():
                nv = acc.get(m, 0) + c * v
                if nv:
                    acc[m] = nv
                else:
                    acc.pop(m, None)
        diff = dict(acc)
        for m, v in target.items():
            nv = diff.get(m, 0) - v
            if nv:
                diff[m] = nv
            else:
                diff.pop(m, None)
        if sys.ctx.nf_terms(diff):
            return False
    return True


def kron_products(sys: SphericalSystem, k: int) -> List[Terms]:
    """Normal forms of the entries of ``h^{⊗k}`` in Kronecker order."""
    return [sys.product_nf(t) for t in itertools.product(range(sys.m), repeat=k)]


def h_times_basis(sys: SphericalSystem, basis: SubspaceBasis, r: int = 1) -> List[Terms]:
    """Normal forms of ``h^{⊗r} ⊗ z`` in Kronecker order."""
    out = []
    for tup in itertools.product(range(sys.m), repeat=r):
        prod = sys.product_nf(tup)
        for z in basis.elements:
            out.append(sys.ctx.nf_terms(_mul_terms(prod, z.as_dict())))
    return out
