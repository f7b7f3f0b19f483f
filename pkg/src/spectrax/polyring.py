"""Exact multivariate polynomials over the rationals.

Monomials are dense exponent tuples; a :class:`Polynomial` maps monomials to
nonzero :class:`fractions.Fraction` coefficients and is immutable once built.
Term order only matters for display, leading terms and division, so it is
passed explicitly wherever it is needed (graded reverse lex by default).
"""

from __future__ import annotations

import enum
import re
from fractions import Fraction
from numbers import Rational
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

Monomial = Tuple[int, ...]
Scalar = Union[int, Fraction]


class DimensionMismatch(ValueError):
    pass


class ParseError(ValueError):
    """Raised by :func:`parse`; ``position`` is the 0-based offset of the problem."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class MonomialOrder(enum.Enum):
    GREVLEX = "grevlex"
    LEX = "lex"
    GRLEX = "grlex"

    def key(self, m: Monomial):
        """Sort key; a larger key means a larger monomial."""
        if self is MonomialOrder.GREVLEX:
            return (sum(m), tuple(-e for e in reversed(m)))
        if self is MonomialOrder.LEX:
            return m
        return (sum(m), m)

    def heap_key(self, m: Monomial):
        """Negated key, so that ``heapq`` pops the largest monomial first."""
        if self is MonomialOrder.GREVLEX:
            return (-sum(m), m[::-1])
        if self is MonomialOrder.LEX:
            return tuple(-e for e in m)
        return (-sum(m), tuple(-e for e in m))

    @classmethod
    def parse(cls, name: Union[str, "MonomialOrder", None]) -> "MonomialOrder":
        if name is None:
            return cls.GREVLEX
        if isinstance(name, cls):
            return name
        aliases = {"degrevlex": "grevlex", "deglex": "grlex", "drl": "grevlex"}
        name = aliases.get(name.lower(), name.lower())
        return cls(name)


GREVLEX = MonomialOrder.GREVLEX


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def mono_div(a: Monomial, b: Monomial) -> Monomial:
    """a / b, assuming b divides a."""
    return tuple(x - y for x, y in zip(a, b))


def mono_divides(b: Monomial, a: Monomial) -> bool:
    return all(y <= x for x, y in zip(a, b))


def mono_lcm(a: Monomial, b: Monomial) -> Monomial:
    return tuple(max(x, y) for x, y in zip(a, b))


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, float):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"cannot use {type(c).__name__} as an exact coefficient")


class Polynomial:
    """Immutable polynomial in ``nvars`` indeterminates with rational coefficients."""

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Optional[Mapping[Monomial, Scalar]] = None):
        self.nvars = nvars
        clean: Dict[Monomial, Fraction] = {}
        if terms:
            for m, c in terms.items():
                m = tuple(int(e) for e in m)
                if len(m) != nvars or any(e < 0 for e in m):
                    raise ValueError(f"bad exponent vector {m} for {nvars} variables")
                c = _as_fraction(c)
                if c:
                    clean[m] = clean.get(m, 0) + c
                    if not clean[m]:
                        del clean[m]
        self._terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, nvars: int, terms: Dict[Monomial, Fraction]) -> "Polynomial":
        # trusted constructor: no zero coefficients, canonical keys
        p = cls.__new__(cls)
        p.nvars = nvars
        p._terms = terms
        p._hash = None
        return p

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls._raw(nvars, {})

    @classmethod
    def constant(cls, nvars: int, c: Scalar = 1) -> "Polynomial":
        c = _as_fraction(c)
        return cls._raw(nvars, {(0,) * nvars: c} if c else {})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Polynomial":
        m = [0] * nvars
        m[i] = 1
        return cls._raw(nvars, {tuple(m): Fraction(1)})

    @classmethod
    def monomial(cls, m: Monomial, c: Scalar = 1) -> "Polynomial":
        return cls(len(m), {m: c})

    # -- inspection -------------------------------------------------------

    def as_dict(self) -> Dict[Monomial, Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def monomials(self):
        return self._terms.keys()

    def coefficient(self, m: Monomial) -> Fraction:
        return self._terms.get(tuple(m), Fraction(0))

    def constant_term(self) -> Fraction:
        return self._terms.get((0,) * self.nvars, Fraction(0))

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(m) for m in self._terms)

    def __bool__(self):
        return bool(self._terms)

    def __len__(self):
        return len(self._terms)

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(m) for m in self._terms), default=-1)

    def terms(self, order: MonomialOrder = GREVLEX) -> List[Tuple[Fraction, Monomial]]:
        """(coefficient, monomial) pairs, strictly descending in ``order``."""
        return [(self._terms[m], m) for m in sorted(self._terms, key=order.key, reverse=True)]

    def leading_monomial(self, order: MonomialOrder = GREVLEX) -> Monomial:
        if not self._terms:
            raise ValueError("zero polynomial has no leading term")
        return max(self._terms, key=order.key)

    def leading_term(self, order: MonomialOrder = GREVLEX) -> Tuple[Fraction, Monomial]:
        m = self.leading_monomial(order)
        return self._terms[m], m

    def evaluate(self, point: Sequence):
        """Evaluate at ``point``; exact if the point is rational, float otherwise."""
        if len(point) != self.nvars:
            raise DimensionMismatch(f"point has {len(point)} coordinates, expected {self.nvars}")
        total = 0
        for m, c in self._terms.items():
            t = c
            for x, e in zip(point, m):
                if e:
                    t = t * x ** e
            total = total + t
        return total

    # -- arithmetic -------------------------------------------------------

    def _check(self, other: "Polynomial"):
        if other.nvars != self.nvars:
            raise DimensionMismatch(f"{self.nvars} vs {other.nvars} variables")

    def _coerce(self, other) -> Optional["Polynomial"]:
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction, Rational)):
            return Polynomial.constant(self.nvars, other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self._terms)
        for m, c in other._terms.items():
            v = out.get(m)
            if v is None:
                out[m] = c
            else:
                v += c
                if v:
                    out[m] = v
                else:
                    del out[m]
        return Polynomial._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def scale(self, c: Scalar) -> "Polynomial":
        c = _as_fraction(c)
        if not c:
            return Polynomial.zero(self.nvars)
        return Polynomial._raw(self.nvars, {m: v * c for m, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Rational)) and not isinstance(other, bool):
            return self.scale(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check(other)
        out: Dict[Monomial, Fraction] = {}
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                m = tuple(x + y for x, y in zip(ma, mb))
                out[m] = out.get(m, 0) + ca * cb
        return Polynomial._raw(self.nvars, {m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction, Rational)):
            return self.scale(Fraction(1) / _as_fraction(other))
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def mul_term(self, m: Monomial, c: Scalar = 1) -> "Polynomial":
        c = _as_fraction(c)
        if not c:
            return Polynomial.zero(self.nvars)
        return Polynomial._raw(self.nvars, {mono_mul(k, m): v * c for k, v in self._terms.items()})

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self._terms == other._terms
        if isinstance(other, (int, Fraction, Rational)):
            other = _as_fraction(other)
            if not other:
                return not self._terms
            return self._terms == {(0,) * self.nvars: other}
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    # -- display ----------------------------------------------------------

    def to_string(self, names: Optional[Sequence[str]] = None, order: MonomialOrder = GREVLEX) -> str:
        names = default_names(self.nvars) if names is None else list(names)
        if len(names) != self.nvars:
            raise DimensionMismatch(f"{len(names)} names for {self.nvars} variables")
        if not self._terms:
            return "0"
        parts = []
        for i, (c, m) in enumerate(self.terms(order)):
            sign = "-" if c < 0 else "+"
            a = -c if c < 0 else c
            factors = []
            for name, e in zip(names, m):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            if not factors:
                body = str(a)
            elif a == 1:
                body = "*".join(factors)
            else:
                body = "*".join([str(a)] + factors)
            if i == 0:
                parts.append(body if sign == "+" else "-" + body)
            else:
                parts.append(f" {sign} {body}")
        return "".join(parts)

    def __str__(self):
        return self.to_string()

    def __repr__(self):
        return f"Polynomial({self.to_string()!r}, nvars={self.nvars})"


def default_names(n: int) -> List[str]:
    return [f"x{i + 1}" for i in range(n)]


def add(a: Polynomial, b: Polynomial) -> Polynomial:
    a._check(b)
    return a + b


def mul(a: Polynomial, b: Polynomial) -> Polynomial:
    a._check(b)
    return a * b


def variables(n: int) -> List[Polynomial]:
    return [Polynomial.variable(n, i) for i in range(n)]


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?|\.\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^()−·]))"
)


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN.match(text, pos)
        if not match or match.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = match.lastgroup
        value = match.group(kind)
        start = match.start(kind)
        if value == "−":
            value = "-"
        elif value == "·":
            value = "*"
        elif value == "**":
            value = "^"
        tokens.append((kind, value, start))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.index = {name: k for k, name in enumerate(names)}
        self.n = len(names)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, v, pos = self.take()
        if v != value:
            raise ParseError(f"expected {value!r}, found {v or 'end of input'!r}", pos)

    def parse(self) -> Polynomial:
        result = self.expr()
        kind, v, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {v!r}", pos)
        return result

    def expr(self) -> Polynomial:
        result = self.term()
        while self.peek()[1] in ("+", "-"):
            _, op, _ = self.take()
            rhs = self.term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term(self) -> Polynomial:
        result = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, pos = self.take()
            rhs = self.unary()
            if op == "*":
                result = result * rhs
            else:
                if not rhs.is_constant() or rhs.is_zero():
                    raise ParseError("division only by a nonzero constant", pos)
                result = result.scale(1 / rhs.constant_term())
        return result

    def unary(self) -> Polynomial:
        if self.peek()[1] in ("+", "-"):
            _, op, _ = self.take()
            inner = self.unary()
            return -inner if op == "-" else inner
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, v, pos = self.take()
            if kind != "num" or not v.isdigit():
                raise ParseError("exponent must be a non-negative integer literal", pos)
            base = base ** int(v)
        return base

    def atom(self) -> Polynomial:
        kind, v, pos = self.take()
        if kind == "num":
            return Polynomial.constant(self.n, Fraction(v))
        if kind == "name":
            if v not in self.index:
                raise ParseError(f"unknown variable {v!r}", pos)
            return Polynomial.variable(self.n, self.index[v])
        if v == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ParseError(f"unexpected {v or 'end of input'!r}", pos)


def parse(text: str, names: Sequence[str]) -> Polynomial:
    """Parse ``text`` over the variables ``names`` (first name = largest variable).

    Accepts ``+ - * /`` (division by constants only), ``^`` or ``**`` with
    integer exponents, parentheses, and integer or decimal literals.
    """
    if len(set(names)) != len(names):
        raise ValueError("duplicate variable names")
    return _Parser(text, names).parse()


def parse_rational(text: Union[str, int, Fraction]) -> Fraction:
    """Parse a rational such as ``"3/2"``, ``"1.5"`` or ``"-4"``."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    return Fraction(str(text).strip())


def iter_multisets(m: int, k: int) -> Iterator[Tuple[int, ...]]:
    """Non-decreasing index tuples of length ``k`` over ``range(m)``, lexicographically."""
    from itertools import combinations_with_replacement

    return combinations_with_replacement(range(m), k)


def product(polys: Iterable[Polynomial], nvars: int) -> Polynomial:
    result = Polynomial.constant(nvars, 1)
    for p in polys:
        result = result * p
    return result
