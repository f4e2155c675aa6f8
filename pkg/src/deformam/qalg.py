"""Exact scalars and quaternions.

``SymScalar`` is a sparse multivariate polynomial with rational coefficients
over a fixed, closed set of real symbols.  ``QuatScalar`` is a quaternion whose
four components are ``SymScalar`` values.  Both are immutable.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Mapping, Union

#: Declared real symbols.  The order fixes the exponent-vector layout.
SYMBOLS: tuple[str, ...] = ("hbar", "eps", "eps1", "eps2", "eps3", "dx", "dy", "dz")
_INDEX = {name: n for n, name in enumerate(SYMBOLS)}
_NSYM = len(SYMBOLS)
_ZERO_EXP = (0,) * _NSYM

Number = Union[int, Fraction]


class UnknownSymbolError(KeyError):
    """Raised for a symbol outside ``SYMBOLS`` or missing from an assignment."""

    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unknown or unassigned symbol {self.name!r}"


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    raise TypeError(f"exact rational expected, got {type(value).__name__}")


class SymScalar:
    """Polynomial in the declared symbols with exact rational coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[tuple[int, ...], Number] | None = None):
        clean = {}
        for exp, c in (terms or {}).items():
            c = _frac(c)
            if c:
                if len(exp) != _NSYM:
                    raise ValueError("exponent vector has wrong length")
                clean[tuple(exp)] = c
        self._terms = clean
        self._hash = None

    @classmethod
    def const(cls, value: Number) -> "SymScalar":
        return cls({_ZERO_EXP: value})

    @classmethod
    def symbol(cls, name: str) -> "SymScalar":
        try:
            n = _INDEX[name]
        except KeyError:
            raise UnknownSymbolError(name) from None
        exp = [0] * _NSYM
        exp[n] = 1
        return cls({tuple(exp): 1})

    @classmethod
    def coerce(cls, value) -> "SymScalar":
        if isinstance(value, SymScalar):
            return value
        return cls.const(value)

    @property
    def terms(self) -> dict[tuple[int, ...], Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(exp == _ZERO_EXP for exp in self._terms)

    def constant_value(self) -> Fraction:
        """The constant term (zero if absent)."""
        return self._terms.get(_ZERO_EXP, Fraction(0))

    def free_symbols(self) -> set[str]:
        out = set()
        for exp in self._terms:
            out.update(SYMBOLS[n] for n, e in enumerate(exp) if e)
        return out

    # arithmetic

    def __add__(self, other):
        if not isinstance(other, SymScalar):
            try:
                other = SymScalar.const(other)
            except TypeError:
                return NotImplemented
        out = dict(self._terms)
        for exp, c in other._terms.items():
            v = out.get(exp, 0) + c
            if v:
                out[exp] = v
            else:
                out.pop(exp, None)
        return _raw(out)

    __radd__ = __add__

    def __neg__(self):
        return _raw({e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-SymScalar.coerce(other))

    def __rsub__(self, other):
        return SymScalar.coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, SymScalar):
            try:
                c = _frac(other)
            except TypeError:
                return NotImplemented
            if not c:
                return ZERO
            return _raw({e: v * c for e, v in self._terms.items()})
        if not self._terms or not other._terms:
            return ZERO
        out: dict = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                v = out.get(e, 0) + c1 * c2
                if v:
                    out[e] = v
                else:
                    del out[e]
        return _raw(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("non-negative integer power expected")
        out = ONE
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, SymScalar):
            try:
                other = SymScalar.const(other)
            except TypeError:
                return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __bool__(self):
        return bool(self._terms)

    # substitution / evaluation

    def subs(self, mapping: Mapping[str, object]) -> "SymScalar":
        """Replace symbols by exact numbers or other ``SymScalar`` values."""
        repl = {}
        for name, val in mapping.items():
            if name not in _INDEX:
                raise UnknownSymbolError(name)
            repl[_INDEX[name]] = SymScalar.coerce(val)
        if not repl:
            return self
        out = ZERO
        for exp, c in self._terms.items():
            kept = list(exp)
            factor = SymScalar.const(c)
            for n, val in repl.items():
                if exp[n]:
                    factor = factor * val ** exp[n]
                    kept[n] = 0
            out = out + factor * _raw({tuple(kept): 1})
        return out

    def evaluate(self, assignment: Mapping[str, float]) -> float:
        """Evaluate numerically.  Every symbol present must be assigned."""
        total = 0.0
        for exp, c in self._terms.items():
            v = float(c)
            for n, e in enumerate(exp):
                if e:
                    name = SYMBOLS[n]
                    if name not in assignment:
                        raise UnknownSymbolError(name)
                    v *= assignment[name] ** e
            total += v
        return total

    # rendering

    def sorted_items(self):
        return sorted(self._terms.items(), key=lambda t: (sum(t[0]), [-e for e in t[0]]))

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for exp, c in self.sorted_items():
            parts.append(_render_monomial(c, exp, unit=None))
        return _join_signed(parts)

    def __repr__(self):
        return f"SymScalar({self})"


def _raw(terms) -> SymScalar:
    s = SymScalar.__new__(SymScalar)
    s._terms = terms
    s._hash = None
    return s


def _symbol_factors(exp) -> list[str]:
    out = []
    for n, e in enumerate(exp):
        out.extend([SYMBOLS[n]] * e)
    return out


def _render_monomial(c: Fraction, exp, unit: str | None) -> str:
    """Render ``c * unit * symbols`` with the sign as a leading ``-``."""
    sign = "-" if c < 0 else ""
    a = abs(c)
    factors = ([unit] if unit else []) + _symbol_factors(exp)
    if a != 1 or not factors:
        num = str(a.numerator) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"
        factors.insert(0, num)
    return sign + "*".join(factors)


def _join_signed(parts: list[str]) -> str:
    out = parts[0]
    for p in parts[1:]:
        out += " - " + p[1:] if p.startswith("-") else " + " + p
    return out


ZERO = SymScalar()
ONE = SymScalar.const(1)


def sym(name: str) -> SymScalar:
    return SymScalar.symbol(name)


def sym_eval(s: SymScalar, assignment: Mapping[str, float]) -> float:
    return s.evaluate(assignment)


UNIT_NAMES = ("1", "i", "j", "k")


class QuatScalar:
    """Quaternion ``w + x i + y j + z k`` with ``SymScalar`` components.

    Multiplication uses the Hamilton table, ``i*j = k``.
    """

    __slots__ = ("w", "x", "y", "z", "_hash")

    def __init__(self, w=0, x=0, y=0, z=0):
        self.w = SymScalar.coerce(w)
        self.x = SymScalar.coerce(x)
        self.y = SymScalar.coerce(y)
        self.z = SymScalar.coerce(z)
        self._hash = None

    @classmethod
    def coerce(cls, value) -> "QuatScalar":
        if isinstance(value, QuatScalar):
            return value
        return cls(value)

    @classmethod
    def unit(cls, n: int) -> "QuatScalar":
        comps = [0, 0, 0, 0]
        comps[n] = 1
        return cls(*comps)

    @property
    def components(self) -> tuple[SymScalar, SymScalar, SymScalar, SymScalar]:
        return (self.w, self.x, self.y, self.z)

    def is_zero(self) -> bool:
        return not (self.w or self.x or self.y or self.z)

    def is_real(self) -> bool:
        return not (self.x or self.y or self.z)

    def is_complex(self) -> bool:
        return not (self.y or self.z)

    def __add__(self, other):
        o = QuatScalar.coerce(other)
        return QuatScalar(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)

    __radd__ = __add__

    def __neg__(self):
        return QuatScalar(-self.w, -self.x, -self.y, -self.z)

    def __sub__(self, other):
        return self + (-QuatScalar.coerce(other))

    def __rsub__(self, other):
        return QuatScalar.coerce(other) - self

    def scale(self, c) -> "QuatScalar":
        """Multiply by a central (real) scalar."""
        return QuatScalar(self.w * c, self.x * c, self.y * c, self.z * c)

    def __mul__(self, other):
        if isinstance(other, (SymScalar, int, Fraction)):
            return self.scale(other)
        if not isinstance(other, QuatScalar):
            return NotImplemented
        a1, b1, c1, d1 = self.components
        a2, b2, c2, d2 = other.components
        return QuatScalar(
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        )

    def __rmul__(self, other):
        if isinstance(other, (SymScalar, int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def conj(self) -> "QuatScalar":
        return QuatScalar(self.w, -self.x, -self.y, -self.z)

    def subs(self, mapping) -> "QuatScalar":
        return QuatScalar(*(c.subs(mapping) for c in self.components))

    def evaluate(self, assignment) -> tuple[float, float, float, float]:
        return tuple(c.evaluate(assignment) for c in self.components)

    def free_symbols(self) -> set[str]:
        out = set()
        for c in self.components:
            out |= c.free_symbols()
        return out

    def __eq__(self, other):
        if not isinstance(other, QuatScalar):
            try:
                other = QuatScalar.coerce(other)
            except TypeError:
                return NotImplemented
        return self.components == other.components

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.components)
        return self._hash

    def __bool__(self):
        return not self.is_zero()

    def __str__(self):
        parts = []
        for unit, comp in zip((None, "i", "j", "k"), self.components):
            for exp, c in comp.sorted_items():
                parts.append(_render_monomial(c, exp, unit))
        if not parts:
            return "0"
        return _join_signed(parts)

    def __repr__(self):
        return f"QuatScalar({self})"


def qmul(a: QuatScalar, b: QuatScalar) -> QuatScalar:
    return a * b


def qconj(a: QuatScalar) -> QuatScalar:
    return a.conj()


Q_ONE = QuatScalar.unit(0)
Q_I = QuatScalar.unit(1)
Q_J = QuatScalar.unit(2)
Q_K = QuatScalar.unit(3)

# product of basis units: _UNIT_TABLE[a][b] = (sign, unit) with e_a * e_b = sign * e_unit
_UNIT_TABLE = (
    ((1, 0), (1, 1), (1, 2), (1, 3)),
    ((1, 1), (-1, 0), (1, 3), (-1, 2)),
    ((1, 2), (-1, 3), (-1, 0), (1, 1)),
    ((1, 3), (1, 2), (-1, 1), (-1, 0)),
)


def unit_product(a: int, b: int) -> tuple[int, int]:
    """``e_a * e_b`` as ``(sign, index)``."""
    return _UNIT_TABLE[a][b]
