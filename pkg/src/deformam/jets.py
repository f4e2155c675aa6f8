"""Truncated multivariate Taylor arithmetic, vectorized over sample points.

A ``Jet`` holds the Taylor coefficients of a function around each point up to
total order ``order``.  Elementary functions are applied by composing their
univariate Taylor series, so partial derivatives come out exact up to rounding.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np


def _binom(p: float, n: int) -> float:
    """Generalized binomial coefficient, finite for negative integer ``p``."""
    out = 1.0
    for t in range(n):
        out *= (p - t) / (t + 1)
    return out


@lru_cache(maxsize=None)
def multi_indices(nvars: int, order: int) -> tuple[tuple[int, ...], ...]:
    out = [()]
    for _ in range(nvars):
        out = [t + (k,) for t in out for k in range(order + 1)]
    out = [t for t in out if sum(t) <= order]
    return tuple(sorted(out, key=lambda t: (sum(t), tuple(-v for v in t))))


@lru_cache(maxsize=None)
def _tables(nvars: int, order: int):
    idx = multi_indices(nvars, order)
    pos = {t: n for n, t in enumerate(idx)}
    a, b, c = [], [], []
    for i, s in enumerate(idx):
        for j, t in enumerate(idx):
            u = tuple(p + q for p, q in zip(s, t))
            if sum(u) <= order:
                a.append(i)
                b.append(j)
                c.append(pos[u])
    fact = np.array([np.prod([factorial(v) for v in t]) for t in idx], dtype=float)
    return pos, np.array(a), np.array(b), np.array(c), fact


class Jet:
    __slots__ = ("coef", "nvars", "order")

    def __init__(self, coef: np.ndarray, nvars: int, order: int):
        self.coef = coef
        self.nvars = nvars
        self.order = order

    @classmethod
    def constant(cls, values, nvars: int, order: int) -> "Jet":
        values = np.asarray(values, dtype=complex)
        coef = np.zeros((len(multi_indices(nvars, order)),) + values.shape, dtype=complex)
        coef[0] = values
        return cls(coef, nvars, order)

    @classmethod
    def variable(cls, values, axis: int, nvars: int, order: int) -> "Jet":
        j = cls.constant(values, nvars, order)
        if order >= 1:
            unit = tuple(1 if n == axis else 0 for n in range(nvars))
            j.coef[_tables(nvars, order)[0][unit]] = 1.0
        return j

    @property
    def value(self) -> np.ndarray:
        return self.coef[0]

    def derivative(self, alpha) -> np.ndarray:
        """Partial derivative ``d^alpha`` at the expansion points."""
        alpha = tuple(alpha)
        if sum(alpha) > self.order:
            raise ValueError(f"derivative order {sum(alpha)} exceeds jet order {self.order}")
        pos, *_, fact = _tables(self.nvars, self.order)
        n = pos[alpha]
        return self.coef[n] * fact[n]

    def _like(self, coef) -> "Jet":
        return Jet(coef, self.nvars, self.order)

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(np.broadcast_to(np.asarray(other, dtype=complex), self.value.shape), self.nvars, self.order)

    def __add__(self, other):
        return self._like(self.coef + self._lift(other).coef)

    __radd__ = __add__

    def __sub__(self, other):
        return self._like(self.coef - self._lift(other).coef)

    def __rsub__(self, other):
        return self._like(self._lift(other).coef - self.coef)

    def __neg__(self):
        return self._like(-self.coef)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self._like(self.coef * np.asarray(other))
        _, a, b, c, _ = _tables(self.nvars, self.order)
        out = np.zeros_like(self.coef, dtype=complex)
        np.add.at(out, c, self.coef[a] * other.coef[b])
        return self._like(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self._like(self.coef / np.asarray(other))
        return self * other ** -1

    def __rtruediv__(self, other):
        return self._lift(other) * self ** -1

    def _series(self, coeffs) -> "Jet":
        """``sum_n coeffs[n] * h^n`` with ``h = self - value`` (nilpotent)."""
        h = self._like(self.coef.copy())
        h.coef[0] = 0
        out = Jet.constant(coeffs[-1], self.nvars, self.order)
        for cn in reversed(coeffs[:-1]):
            out = out * h
            out.coef[0] = out.coef[0] + cn
        return out

    def __pow__(self, p):
        a0 = self.value
        coeffs = [_binom(p, n) * a0 ** (p - n) for n in range(self.order + 1)]
        return self._series(coeffs)

    def exp(self) -> "Jet":
        e0 = np.exp(self.value)
        return self._series([e0 / factorial(n) for n in range(self.order + 1)])

    def log(self) -> "Jet":
        a0 = self.value
        coeffs = [np.log(a0)] + [(-1) ** (n + 1) / (n * a0**n) for n in range(1, self.order + 1)]
        return self._series(coeffs)

    def sqrt(self) -> "Jet":
        return self ** 0.5

    def real(self) -> "Jet":
        return self._like(self.coef.real.astype(complex))

    def imag(self) -> "Jet":
        return self._like(self.coef.imag.astype(complex))
