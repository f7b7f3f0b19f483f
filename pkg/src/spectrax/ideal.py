"""Ideal presentations, Buchberger's algorithm and normal forms.

Everything here is exact.  A :class:`GroebnerContext` holds a reduced
Gröbner basis and answers normal-form queries; monomial normal forms are
memoized, so reducing many products over the same ideal (the common case when
building quotient subspaces) only pays for each monomial once.
"""

from __future__ import annotations

import heapq
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .polyring import (
    GREVLEX,
    DimensionMismatch,
    Monomial,
    MonomialOrder,
    Polynomial,
    mono_div,
    mono_divides,
    mono_lcm,
    mono_mul,
)

DEFAULT_PAIR_LIMIT = 50_000

Terms = Dict[Monomial, Fraction]


class GroebnerLimitError(RuntimeError):
    """Buchberger exceeded its pair-reduction budget."""


class GroebnerVerificationError(ValueError):
    """A basis declared as trusted failed the S-polynomial check."""


@dataclass(frozen=True)
class IdealPresentation:
    generators: Tuple[Polynomial, ...]
    trusted_groebner: bool = False
    order: MonomialOrder = GREVLEX

    def __init__(self, generators: Iterable[Polynomial], trusted_groebner: bool = False,
                 order: MonomialOrder = GREVLEX):
        gens = tuple(g for g in generators)
        if not gens:
            raise ValueError("an ideal presentation needs at least one generator")
        nv = gens[0].nvars
        for g in gens:
            if g.nvars != nv:
                raise DimensionMismatch("generators have different numbers of variables")
            if g.is_zero():
                raise ValueError("generators must be nonzero")
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "trusted_groebner", bool(trusted_groebner))
        object.__setattr__(self, "order", MonomialOrder.parse(order))

    @property
    def nvars(self) -> int:
        return self.generators[0].nvars


# -- low-level term-dict helpers --------------------------------------------


def _leading(terms: Terms, order: MonomialOrder) -> Monomial:
    return max(terms, key=order.key)


def _monic(terms: Terms, order: MonomialOrder) -> Terms:
    lc = terms[_leading(terms, order)]
    if lc == 1:
        return dict(terms)
    inv = 1 / lc
    return {m: c * inv for m, c in terms.items()}


class _Divisor:
    """A monic basis element prepared for repeated use in division."""

    __slots__ = ("lm", "tail")

    def __init__(self, terms: Terms, order: MonomialOrder):
        self.lm = _leading(terms, order)
        lc = terms[self.lm]
        self.tail = [(m, c / lc) for m, c in terms.items() if m != self.lm]


def _find_divisor(m: Monomial, divisors: Sequence[_Divisor]) -> Optional[_Divisor]:
    for d in divisors:
        lm = d.lm
        for a, b in zip(m, lm):
            if b > a:
                break
        else:
            return d
    return None


def _reduce(terms: Terms, divisors: Sequence[_Divisor], order: MonomialOrder,
            full: bool = True) -> Terms:
    """Remainder of multivariate division of ``terms`` by monic ``divisors``.

    Works on a max-heap of live monomials, so each reduction step touches only
    the monomials it changes.
    """
    acc: Terms = dict(terms)
    heap = [(order.heap_key(m), m) for m in acc]
    heapq.heapify(heap)
    rem: Terms = {}
    hk = order.heap_key
    while heap:
        _, m = heapq.heappop(heap)
        c = acc.pop(m, None)
        if c is None or c == 0:
            continue
        d = _find_divisor(m, divisors)
        if d is None:
            rem[m] = c
            if not full:
                # top-reduced: the rest is already below the leading term
                for k, v in acc.items():
                    if v:
                        rem[k] = v
                break
            continue
        shift = mono_div(m, d.lm)
        for tm, tc in d.tail:
            nm = tuple(a + b for a, b in zip(tm, shift))
            old = acc.get(nm)
            if old is None:
                acc[nm] = -c * tc
                heapq.heappush(heap, (hk(nm), nm))
            else:
                acc[nm] = old - c * tc
    return rem


def _spoly(f: Terms, g: Terms, lf: Monomial, lg: Monomial) -> Terms:
    """S-polynomial of two monic term dicts."""
    lcm = mono_lcm(lf, lg)
    sf = mono_div(lcm, lf)
    sg = mono_div(lcm, lg)
    out: Terms = {}
    for m, c in f.items():
        out[mono_mul(m, sf)] = c
    for m, c in g.items():
        nm = mono_mul(m, sg)
        v = out.get(nm, 0) - c
        if v:
            out[nm] = v
        else:
            out.pop(nm, None)
    return out


def _coprime(a: Monomial, b: Monomial) -> bool:
    return all(x == 0 or y == 0 for x, y in zip(a, b))


# -- Buchberger ---------------------------------------------------------------


def buchberger(pres: IdealPresentation, pair_limit: int = DEFAULT_PAIR_LIMIT) -> "GroebnerContext":
    """Reduced Gröbner basis of ``pres`` (normal selection, Gebauer–Möller criteria)."""
    order = pres.order
    nv = pres.nvars

    basis: List[Terms] = []
    lms: List[Monomial] = []
    active: List[int] = []  # indices of elements not made redundant by a later one
    live_pairs: set = set()
    heap: list = []
    reductions = 0

    def divisors_for(indices):
        return [_Divisor(basis[i], order) for i in indices]

    def add_element(terms: Terms):
        nonlocal active
        terms = _monic(terms, order)
        h = len(basis)
        basis.append(terms)
        lh = _leading(terms, order)
        lms.append(lh)

        # Gebauer–Möller update
        cand = [(g, mono_lcm(lh, lms[g])) for g in active]
        kept = []
        for idx, (g, lcm_g) in enumerate(cand):
            if _coprime(lh, lms[g]):
                kept.append((g, lcm_g, True))
                continue
            redundant = False
            for j, (g2, lcm2) in enumerate(cand):
                if j == idx:
                    continue
                if mono_divides(lcm2, lcm_g) and (lcm2 != lcm_g or j < idx):
                    redundant = True
                    break
            if not redundant:
                kept.append((g, lcm_g, False))
        # chain criterion on existing pairs
        for pair in list(live_pairs):
            i, j = pair
            lij = mono_lcm(lms[i], lms[j])
            if (mono_divides(lh, lij) and mono_lcm(lms[i], lh) != lij
                    and mono_lcm(lms[j], lh) != lij):
                live_pairs.discard(pair)
        for g, lcm_g, coprime in kept:
            if coprime:
                continue  # product criterion
            pair = (g, h)
            live_pairs.add(pair)
            heapq.heappush(heap, (order.key(lcm_g), g, h))
        active = [g for g in active if not mono_divides(lh, lms[g])] + [h]

    # start from inter-reduced generators to keep the pair set small
    initial = [dict(g.as_dict()) for g in pres.generators]
    initial.sort(key=lambda t: order.key(_leading(t, order)))
    for terms in initial:
        divs = divisors_for(active)
        r = _reduce(terms, divs, order) if divs else terms
        if r:
            add_element(r)

    while live_pairs:
        _, i, j = heapq.heappop(heap)
        if (i, j) not in live_pairs:
            continue
        live_pairs.discard((i, j))
        reductions += 1
        if reductions > pair_limit:
            raise GroebnerLimitError(
                f"Buchberger exceeded {pair_limit} pair reductions "
                f"(basis size {len(active)}); supply a trusted Gröbner basis instead"
            )
        s = _spoly(basis[i], basis[j], lms[i], lms[j])
        if not s:
            continue
        r = _reduce(s, divisors_for(active), order)
        if r:
            add_element(r)

    final = _interreduce([basis[i] for i in active], order)
    return GroebnerContext._from_terms(final, nv, order, "computed", reductions=reductions)


def _interreduce(elements: List[Terms], order: MonomialOrder) -> List[Terms]:
    """Minimize and inter-reduce a Gröbner basis, returning monic elements sorted by LM."""
    elements = [_monic(e, order) for e in elements if e]
    # minimize: drop elements whose LM is divisible by another's LM
    elements.sort(key=lambda t: order.key(_leading(t, order)))
    minimal: List[Terms] = []
    seen: List[Monomial] = []
    for e in elements:
        lm = _leading(e, order)
        if any(mono_divides(s, lm) for s in seen):
            continue
        minimal.append(e)
        seen.append(lm)
    out = []
    for k, e in enumerate(minimal):
        others = [_Divisor(o, order) for i, o in enumerate(minimal) if i != k]
        lm = _leading(e, order)
        tail = {m: c for m, c in e.items() if m != lm}
        reduced = _reduce(tail, others, order) if tail else {}
        reduced[lm] = Fraction(1)
        out.append(reduced)
    out.sort(key=lambda t: order.key(_leading(t, order)), reverse=True)
    return out


def verify_groebner(elements: Sequence[Terms], order: MonomialOrder) -> Optional[Tuple[int, int]]:
    """Return an offending pair if some S-polynomial does not reduce to zero, else None."""
    divs = [_Divisor(e, order) for e in elements]
    lms = [d.lm for d in divs]
    monic = [_monic(e, order) for e in elements]
    for i in range(len(elements)):
        for j in range(i + 1, len(elements)):
            if _coprime(lms[i], lms[j]):
                continue
            s = _spoly(monic[i], monic[j], lms[i], lms[j])
            if s and _reduce(s, divs, order):
                return (i, j)
    return None


def from_trusted(pres: IdealPresentation, verify: bool = True) -> "GroebnerContext":
    """Accept the generators as a Gröbner basis, optionally checking every S-pair."""
    order = pres.order
    elements = [g.as_dict() for g in pres.generators]
    if verify:
        bad = verify_groebner(elements, order)
        if bad is not None:
            i, j = bad
            raise GroebnerVerificationError(
                f"generators {i} and {j} have an S-polynomial that does not reduce to zero; "
                "the presentation is not a Gröbner basis"
            )
    final = _interreduce(elements, order)
    return GroebnerContext._from_terms(final, pres.nvars, order, "trusted")


def groebner_context(pres: IdealPresentation, verify_trusted: bool = True,
                     pair_limit: int = DEFAULT_PAIR_LIMIT) -> "GroebnerContext":
    """Dispatch on ``pres.trusted_groebner``."""
    if pres.trusted_groebner:
        return from_trusted(pres, verify=verify_trusted)
    return buchberger(pres, pair_limit=pair_limit)


# -- the context ---------------------------------------------------------------


@dataclass(eq=False)
class GroebnerContext:
    basis: Tuple[Polynomial, ...]
    order: MonomialOrder
    source: str
    nvars: int
    reductions: int = 0
    _divisors: List[_Divisor] = field(default_factory=list, repr=False)
    _memo: Dict[Monomial, Terms] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def _from_terms(cls, elements: List[Terms], nvars: int, order: MonomialOrder, source: str,
                    reductions: int = 0) -> "GroebnerContext":
        basis = tuple(Polynomial._raw(nvars, dict(e)) for e in elements)
        ctx = cls(basis=basis, order=order, source=source, nvars=nvars, reductions=reductions)
        ctx._divisors = [_Divisor(e, order) for e in elements]
        return ctx

    @property
    def leading_monomials(self) -> List[Monomial]:
        return [d.lm for d in self._divisors]

    def is_unit_ideal(self) -> bool:
        return any(not any(d.lm) for d in self._divisors)

    def is_standard(self, m: Monomial) -> bool:
        return _find_divisor(m, self._divisors) is None

    def monomial_nf(self, m: Monomial) -> Terms:
        """Normal form of a single monomial (memoized; do not mutate the result)."""
        memo = self._memo
        hit = memo.get(m)
        if hit is not None:
            return hit
        # iterative post-order evaluation of the reduction recursion
        stack = [m]
        while stack:
            cur = stack[-1]
            if cur in memo:
                stack.pop()
                continue
            d = _find_divisor(cur, self._divisors)
            if d is None:
                memo[cur] = {cur: Fraction(1)}
                stack.pop()
                continue
            shift = mono_div(cur, d.lm)
            children = [(mono_mul(tm, shift), tc) for tm, tc in d.tail]
            pending = [cm for cm, _ in children if cm not in memo]
            if pending:
                stack.extend(pending)
                continue
            out: Terms = {}
            for cm, tc in children:
                for k, v in memo[cm].items():
                    nv = out.get(k, 0) - tc * v
                    if nv:
                        out[k] = nv
                    else:
                        out.pop(k, None)
            memo[cur] = out
            stack.pop()
        return memo[m]

    def nf_terms(self, terms: Dict[Monomial, Fraction]) -> Terms:
        out: Terms = {}
        with self._lock:
            for m, c in terms.items():
                for k, v in self.monomial_nf(m).items():
                    nv = out.get(k, 0) + c * v
                    if nv:
                        out[k] = nv
                    else:
                        out.pop(k, None)
        return out

    def normal_form(self, f: Polynomial) -> Polynomial:
        if f.nvars != self.nvars:
            raise DimensionMismatch(f"polynomial has {f.nvars} variables, ideal has {self.nvars}")
        return Polynomial._raw(self.nvars, self.nf_terms(f.as_dict()))

    def equivalent(self, f: Polynomial, g: Polynomial) -> bool:
        return self.normal_form(f - g).is_zero()

    def contains(self, f: Polynomial) -> bool:
        return self.normal_form(f).is_zero()

    def fingerprint(self) -> str:
        """Stable text identifying the basis and order (used for cache keys)."""
        from .polyring import default_names

        names = default_names(self.nvars)
        body = ";".join(g.to_string(names, self.order) for g in self.basis)
        return f"{self.order.value}|{self.nvars}|{body}"


def normal_form(f: Polynomial, ctx: GroebnerContext) -> Polynomial:
    return ctx.normal_form(f)


def equivalent(f: Polynomial, g: Polynomial, ctx: GroebnerContext) -> bool:
    return ctx.equivalent(f, g)
