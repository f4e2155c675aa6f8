"""Noncommutative polynomial differential operators on quaternion-valued functions.

Every operator is a finite sum of terms

    Psi  ->  q * x^a y^b z^c * (d^alpha Psi) * e

with ``q`` a ``QuatScalar`` acting from the left, a coordinate monomial, a
derivative multi-index and a basis unit ``e`` in {1, i, j, k} acting from the
right.  Terms are stored keyed by ``(mono, deriv, runit)`` so that two
expressions are equal iff their term maps are equal.
"""

from __future__ import annotations

import re
from fractions import Fraction
from itertools import product
from math import comb
from typing import Iterable, Iterator, Mapping

from .qalg import (
    SYMBOLS,
    UNIT_NAMES,
    QuatScalar,
    SymScalar,
    UnknownSymbolError,
    unit_product,
)

Triple = tuple[int, int, int]
Key = tuple[Triple, Triple, int]

COORDS = ("x", "y", "z")
DERIVS = ("Dx", "Dy", "Dz")
_ZERO3 = (0, 0, 0)


class ParseError(ValueError):
    """Syntax error in the operator mini-language."""

    def __init__(self, message: str, position: int, text: str = ""):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.text = text


class UnknownNameError(ParseError):
    pass


def _falling(n: int, k: int) -> int:
    out = 1
    for t in range(k):
        out *= n - t
    return out


class OperatorExpr:
    """Canonical sum of operator terms.  Immutable."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Key, QuatScalar] | None = None):
        clean = {}
        for key, q in (terms or {}).items():
            q = QuatScalar.coerce(q)
            if not q.is_zero():
                clean[key] = q
        self._terms = clean
        self._hash = None

    # constructors

    @classmethod
    def scalar(cls, q) -> "OperatorExpr":
        return cls({(_ZERO3, _ZERO3, 0): QuatScalar.coerce(q)})

    @classmethod
    def identity(cls) -> "OperatorExpr":
        return cls.scalar(1)

    @classmethod
    def coordinate(cls, axis: int) -> "OperatorExpr":
        mono = [0, 0, 0]
        mono[axis] = 1
        return cls({(tuple(mono), _ZERO3, 0): QuatScalar(1)})

    @classmethod
    def derivative(cls, axis: int, order: int = 1) -> "OperatorExpr":
        d = [0, 0, 0]
        d[axis] = order
        return cls({(_ZERO3, tuple(d), 0): QuatScalar(1)})

    @classmethod
    def right_unit(cls, unit: int) -> "OperatorExpr":
        return cls({(_ZERO3, _ZERO3, unit): QuatScalar(1)})

    @classmethod
    def term(cls, q, mono: Triple = _ZERO3, deriv: Triple = _ZERO3, runit: int = 0):
        return cls({(tuple(mono), tuple(deriv), runit): QuatScalar.coerce(q)})

    # access

    @property
    def terms(self) -> dict[Key, QuatScalar]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self) -> Iterator[Key]:
        return iter(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def max_order(self) -> int:
        return max((sum(d) for (_, d, _) in self._terms), default=0)

    def is_multiplication(self) -> bool:
        """True if the operator is left multiplication by a function."""
        return all(d == _ZERO3 and e == 0 for (_, d, e) in self._terms)

    def free_symbols(self) -> set[str]:
        out = set()
        for q in self._terms.values():
            out |= q.free_symbols()
        return out

    # linear structure

    def __add__(self, other):
        other = _coerce(other)
        out = dict(self._terms)
        for key, q in other._terms.items():
            v = out[key] + q if key in out else q
            if v.is_zero():
                out.pop(key, None)
            else:
                out[key] = v
        return _raw(out)

    __radd__ = __add__

    def __neg__(self):
        return _raw({k: -q for k, q in self._terms.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def scale(self, c) -> "OperatorExpr":
        """Multiply every coefficient on the left by ``c``."""
        c = QuatScalar.coerce(c)
        out = {}
        for k, q in self._terms.items():
            v = c * q
            if not v.is_zero():
                out[k] = v
        return _raw(out)

    def __mul__(self, other):
        return compose(self, _coerce(other))

    def __rmul__(self, other):
        return compose(_coerce(other), self)

    def __matmul__(self, other):
        return compose(self, other)

    # comparison

    def __eq__(self, other):
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __bool__(self):
        return bool(self._terms)

    def subs(self, mapping) -> "OperatorExpr":
        """Substitute symbols inside all coefficients."""
        out = {}
        for k, q in self._terms.items():
            v = q.subs(mapping)
            if not v.is_zero():
                out[k] = v
        return _raw(out)

    def __str__(self):
        return pretty(self)

    def __repr__(self):
        return f"OperatorExpr({pretty(self)!r})"


def _raw(terms) -> OperatorExpr:
    e = OperatorExpr.__new__(OperatorExpr)
    e._terms = terms
    e._hash = None
    return e


def _coerce(value) -> OperatorExpr:
    if isinstance(value, OperatorExpr):
        return value
    return OperatorExpr.scalar(value)


def normalize(expr: OperatorExpr) -> OperatorExpr:
    """Rebuild the canonical term map (drops zero terms)."""
    return OperatorExpr(expr.terms)


def compose(a: OperatorExpr, b: OperatorExpr) -> OperatorExpr:
    """The operator ``Psi -> a(b(Psi))``."""
    out: dict[Key, QuatScalar] = {}
    for (ma, da, ea), qa in a._terms.items():
        for (mb, db, eb), qb in b._terms.items():
            q = qa * qb
            if q.is_zero():
                continue
            # (Psi e_b) e_a = Psi (e_b e_a)
            sign, e = unit_product(eb, ea)
            if sign < 0:
                q = -q
            # Leibniz: d^da (mb * F) = sum_g C(da, g) (d^g mb) (d^(da-g) F)
            ranges = [range(min(da[n], mb[n]) + 1) for n in range(3)]
            for g in product(*ranges):
                c = 1
                for n in range(3):
                    c *= comb(da[n], g[n]) * _falling(mb[n], g[n])
                mono = (ma[0] + mb[0] - g[0], ma[1] + mb[1] - g[1], ma[2] + mb[2] - g[2])
                der = (da[0] - g[0] + db[0], da[1] - g[1] + db[1], da[2] - g[2] + db[2])
                key = (mono, der, e)
                v = q if c == 1 else q.scale(c)
                if key in out:
                    v = out[key] + v
                    if v.is_zero():
                        del out[key]
                        continue
                out[key] = v
    return _raw(out)


def compose_all(*exprs: OperatorExpr) -> OperatorExpr:
    out = exprs[0]
    for e in exprs[1:]:
        out = compose(out, e)
    return out


def commutator(a: OperatorExpr, b: OperatorExpr) -> OperatorExpr:
    return compose(a, b) - compose(b, a)


def anticommutator(a: OperatorExpr, b: OperatorExpr) -> OperatorExpr:
    return compose(a, b) + compose(b, a)


def equal(a: OperatorExpr, b: OperatorExpr) -> bool:
    return a == b


def apply_to_function(op: OperatorExpr, f: OperatorExpr) -> OperatorExpr:
    """Act with ``op`` on the function represented by the multiplication operator ``f``.

    The result is the multiplication operator by the function ``op(f)``:
    each term contributes ``q * m * (d^alpha f) * e``.
    """
    if not f.is_multiplication():
        raise ValueError("apply_to_function needs a multiplication operator as argument")
    out = OperatorExpr()
    for (ma, da, ea), qa in op.items():
        eq = QuatScalar.unit(ea)
        for (mf, _, _), qf in f.items():
            c = 1
            for n in range(3):
                if mf[n] < da[n]:
                    c = 0
                    break
                c *= _falling(mf[n], da[n])
            if not c:
                continue
            mono = tuple(ma[n] + mf[n] - da[n] for n in range(3))
            out = out + OperatorExpr.term((qa * qf * eq).scale(c), mono)
    return out


def sum_exprs(exprs: Iterable[OperatorExpr]) -> OperatorExpr:
    out = OperatorExpr()
    for e in exprs:
        out = out + e
    return out


# ---------------------------------------------------------------------------
# pretty printer


def _term_sort_key(key: Key):
    mono, deriv, runit = key
    return (sum(deriv), deriv, sum(mono), mono, runit)


def _render_term(key: Key, q: QuatScalar) -> str:
    mono, deriv, runit = key
    factors = [f"({q})"]
    for n in range(3):
        factors.extend([COORDS[n]] * mono[n])
    for n in range(3):
        factors.extend([DERIVS[n]] * deriv[n])
    body = "*".join(factors)
    if runit:
        return f"({body}|{UNIT_NAMES[runit]})"
    return body


def pretty(expr: OperatorExpr) -> str:
    """Deterministic rendering in the mini-language; ``"0"`` for the empty sum."""
    if expr.is_zero():
        return "0"
    keys = sorted(expr._terms, key=_term_sort_key)
    return " + ".join(_render_term(k, expr._terms[k]) for k in keys)


# ---------------------------------------------------------------------------
# parser
#
#   expr  := term (('+' | '-') term)*
#   term  := unary ('*' unary)*
#   unary := ('-' | '+') unary | atom
#   atom  := NUMBER | NAME | '(' expr ')' | '(' expr '|' UNIT ')'
#
# '*' is operator composition.  NUMBER is an integer or p/q.

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\s*/\s*\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*()|]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", n))
    return toks


def _name_value(name: str, pos: int, text: str) -> OperatorExpr:
    if name in COORDS:
        return OperatorExpr.coordinate(COORDS.index(name))
    if name in DERIVS:
        return OperatorExpr.derivative(DERIVS.index(name))
    if name in ("i", "j", "k"):
        return OperatorExpr.scalar(QuatScalar.unit(UNIT_NAMES.index(name)))
    if name in SYMBOLS:
        return OperatorExpr.scalar(SymScalar.symbol(name))
    raise UnknownNameError(f"unknown symbol {name!r}", pos, text)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> OperatorExpr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos, self.text)
        return e

    def expr(self) -> OperatorExpr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            t = self.term()
            e = e + t if op == "+" else e - t
        return e

    def term(self) -> OperatorExpr:
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            e = compose(e, self.unary())
        return e

    def unary(self) -> OperatorExpr:
        kind, val, pos = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            u = self.unary()
            return -u if val == "-" else u
        return self.atom()

    def atom(self) -> OperatorExpr:
        kind, val, pos = self.take()
        if kind == "num":
            p, _, q = val.replace(" ", "").partition("/")
            if q and int(q) == 0:
                raise ParseError("zero denominator", pos, self.text)
            return OperatorExpr.scalar(Fraction(int(p), int(q) if q else 1))
        if kind == "name":
            return _name_value(val, pos, self.text)
        if kind == "op" and val == "(":
            inner = self.expr()
            k2, v2, p2 = self.peek()
            if k2 == "op" and v2 == "|":
                self.take()
                ku, vu, pu = self.take()
                if vu not in UNIT_NAMES or ku == "end":
                    raise ParseError(f"right unit must be one of 1, i, j, k, found {vu!r}", pu, self.text)
                self.expect(")")
                return compose(OperatorExpr.right_unit(UNIT_NAMES.index(vu)), inner)
            self.expect(")")
            return inner
        if kind == "end":
            raise ParseError("unexpected end of input", pos, self.text)
        raise ParseError(f"unexpected {val!r}", pos, self.text)


def parse_expr(text: str) -> OperatorExpr:
    """Parse the operator mini-language into a canonical expression."""
    return _Parser(text).parse()


P = parse_expr
