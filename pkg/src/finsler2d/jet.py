"""Truncated Taylor jets in the four tangent-bundle coordinates.

A :class:`Jet` stores every Taylor coefficient of total degree ``<= degree``
of a scalar about ``base = (x1, x2, y1, y2)``.  Coefficients are kept densely
in graded order: all monomials of degree 0, then degree 1, and so on.  Because
the ordering is graded, truncating a jet to a lower degree is a slice of its
coefficient vector.

``degree`` is the number of derivatives still available.  Taking a partial
lowers it by one; combining two jets keeps the smaller one.  Exhaustion is an
error, never a silent truncation.
"""

from __future__ import annotations

import functools
import math
from math import comb
from numbers import Real

import numpy as np

from .errors import DegreeExhausted, DegreeMismatch, DomainError

NVARS = 4
COORDINATE_NAMES = ("x1", "x2", "y1", "y2")


def ncoef(degree: int) -> int:
    return comb(degree + NVARS, NVARS)


@functools.lru_cache(maxsize=None)
def monomials(degree: int) -> tuple[tuple[int, ...], ...]:
    """Exponent tuples of every monomial of total degree <= ``degree``."""
    out = []
    for n in range(degree + 1):
        out.extend(_compositions(n, NVARS))
    return tuple(out)


def _compositions(n, k):
    if k == 1:
        return [(n,)]
    res = []
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, k - 1):
            res.append((first,) + rest)
    return res


@functools.lru_cache(maxsize=None)
def _index_map(degree: int) -> dict:
    return {m: i for i, m in enumerate(monomials(degree))}


def monomial_index(exponents) -> int:
    exponents = tuple(exponents)
    return _index_map(sum(exponents))[exponents]


@functools.lru_cache(maxsize=None)
def _mul_table(degree: int):
    mons = monomials(degree)
    index = _index_map(degree)
    ia, ib, ik = [], [], []
    for i, a in enumerate(mons):
        da = sum(a)
        for j in range(ncoef(degree - da)):
            b = mons[j]
            ia.append(i)
            ib.append(j)
            ik.append(index[tuple(p + q for p, q in zip(a, b))])
    return (np.array(ia, dtype=np.intp), np.array(ib, dtype=np.intp),
            np.array(ik, dtype=np.intp))


@functools.lru_cache(maxsize=None)
def _partial_table(degree: int, var: int):
    # maps a degree-`degree` jet onto the degree-1 lower jet of d/dvar
    index = _index_map(degree)
    src, factor = [], []
    for m in monomials(degree - 1):
        shifted = list(m)
        shifted[var] += 1
        src.append(index[tuple(shifted)])
        factor.append(m[var] + 1)
    return np.array(src, dtype=np.intp), np.array(factor, dtype=float)


@functools.lru_cache(maxsize=None)
def _factorials(degree: int) -> np.ndarray:
    return np.array([math.prod(math.factorial(e) for e in m) for m in monomials(degree)],
                    dtype=float)


class Jet:
    """Immutable truncated Taylor expansion of a scalar about ``base``."""

    __slots__ = ("base", "degree", "coeffs")
    __array_priority__ = 100

    def __init__(self, base, degree: int, coeffs):
        if degree < 0:
            raise DegreeExhausted("jet degree must be non-negative")
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (ncoef(degree),):
            raise ValueError(f"expected {ncoef(degree)} coefficients, got {coeffs.shape}")
        self.base = tuple(float(v) for v in base)
        self.degree = degree
        self.coeffs = coeffs

    @classmethod
    def constant(cls, value: float, base, degree: int) -> Jet:
        c = np.zeros(ncoef(degree))
        c[0] = value
        return _make(tuple(base), degree, c)

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def __repr__(self):
        return f"Jet(value={self.value!r}, degree={self.degree}, base={self.base})"

    def __float__(self):
        return self.value

    def truncate(self, degree: int) -> Jet:
        if degree > self.degree:
            raise DegreeExhausted(f"cannot raise jet degree {self.degree} to {degree}")
        if degree == self.degree:
            return self
        return _make(self.base, degree, self.coeffs[: ncoef(degree)])

    def coefficient(self, exponents) -> float:
        """Taylor coefficient of the monomial with the given exponents."""
        exponents = tuple(exponents)
        if sum(exponents) > self.degree:
            raise DegreeExhausted(f"monomial {exponents} exceeds jet degree {self.degree}")
        return float(self.coeffs[monomial_index(exponents)])

    def derivative(self, exponents) -> float:
        """Mixed partial derivative value at the base point."""
        exponents = tuple(exponents)
        return self.coefficient(exponents) * math.prod(math.factorial(e) for e in exponents)

    def derivatives(self) -> np.ndarray:
        """All partial derivatives up to ``degree``, in graded order."""
        return self.coeffs * _factorials(self.degree)

    # -- arithmetic -----------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.base is not self.base and other.base != self.base:
                raise DegreeMismatch(f"base points differ: {self.base} vs {other.base}")
            return other
        if isinstance(other, (Real, np.floating)):
            return None
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if o is None:
            c = self.coeffs.copy()
            c[0] += other
            return _make(self.base, self.degree, c)
        d = min(self.degree, o.degree)
        n = ncoef(d)
        return _make(self.base, d, self.coeffs[:n] + o.coeffs[:n])

    __radd__ = __add__

    def __neg__(self):
        return _make(self.base, self.degree, -self.coeffs)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if o is None:
            return self + (-other)
        d = min(self.degree, o.degree)
        n = ncoef(d)
        return _make(self.base, d, self.coeffs[:n] - o.coeffs[:n])

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if o is None:
            return _make(self.base, self.degree, self.coeffs * other)
        d = min(self.degree, o.degree)
        n = ncoef(d)
        if d == 0:
            return _make(self.base, 0, self.coeffs[:1] * o.coeffs[:1])
        ia, ib, ik = _mul_table(d)
        prod = np.bincount(ik, weights=self.coeffs[:n][ia] * o.coeffs[:n][ib], minlength=n)
        return _make(self.base, d, prod)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if o is None:
            if other == 0:
                raise DomainError("division of a jet by zero")
            return _make(self.base, self.degree, self.coeffs / other)
        return self * reciprocal(o)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(log(self) * p)
        return power(self, p)

    def __rpow__(self, base):
        if base <= 0:
            raise DomainError(f"non-positive base {base} raised to a jet power")
        return exp(self * math.log(base))


def _make(base, degree, coeffs):
    # trusted internal constructor: no validation or copying
    j = object.__new__(Jet)
    j.base = base
    j.degree = degree
    j.coeffs = coeffs
    return j


# -- construction -------------------------------------------------------------


def lift_coordinate(index: int, point, degree: int) -> Jet:
    """Jet of the coordinate function ``x1, x2, y1, y2`` (``index`` 1..4)."""
    if not 1 <= index <= NVARS:
        raise ValueError(f"coordinate index must be in 1..{NVARS}, got {index}")
    if degree < 0:
        raise ValueError("degree must be non-negative")
    c = np.zeros(ncoef(degree))
    c[0] = point[index - 1]
    if degree >= 1:
        c[index] = 1.0  # linear monomials follow the constant in graded order
    return Jet(point, degree, c)


def coordinates(point, degree: int) -> tuple[Jet, Jet, Jet, Jet]:
    return tuple(lift_coordinate(i, point, degree) for i in range(1, NVARS + 1))


def partial(a: Jet, index: int) -> Jet:
    """Partial derivative along coordinate ``index`` (1..4)."""
    if a.degree < 1:
        raise DegreeExhausted("partial derivative of a degree-0 jet")
    src, factor = _partial_table(a.degree, index - 1)
    return _make(a.base, a.degree - 1, a.coeffs[src] * factor)


def dx(a: Jet, i: int) -> Jet:
    """Derivative along the position coordinate ``x^i`` (i = 1, 2)."""
    return partial(a, i)


def dy(a: Jet, i: int) -> Jet:
    """Derivative along the fibre coordinate ``y^i`` (i = 1, 2)."""
    return partial(a, i + 2)


# -- elementary functions -----------------------------------------------------


def _compose(a: Jet, series) -> Jet:
    """sum_n series[n] * (a - a0)^n, truncated at ``a.degree``."""
    d = a.degree
    u = a.coeffs.copy()
    u[0] = 0.0
    u = _make(a.base, d, u)
    r = Jet.constant(series[d], a.base, d)
    for n in range(d - 1, -1, -1):
        r = r * u
        r.coeffs[0] += series[n]
    return r


def reciprocal(a: Jet) -> Jet:
    c = a.value
    if c == 0.0:
        raise DomainError("division by a jet with zero constant term")
    return _compose(a, [(-1.0) ** n / c ** (n + 1) for n in range(a.degree + 1)])


def sqrt(a):
    if not isinstance(a, Jet):
        if a < 0:
            raise DomainError(f"sqrt of negative number {a}")
        return math.sqrt(a)
    c = a.value
    if c <= 0.0:
        raise DomainError(f"sqrt of jet with non-positive constant term {c}")
    return _compose(a, [math.sqrt(c) * _binom(0.5, n) / c ** n for n in range(a.degree + 1)])


def exp(a):
    if not isinstance(a, Jet):
        return math.exp(a)
    e = math.exp(a.value)
    return _compose(a, [e / math.factorial(n) for n in range(a.degree + 1)])


def log(a):
    if not isinstance(a, Jet):
        if a <= 0:
            raise DomainError(f"ln of non-positive number {a}")
        return math.log(a)
    c = a.value
    if c <= 0.0:
        raise DomainError(f"ln of jet with non-positive constant term {c}")
    series = [math.log(c)] + [(-1.0) ** (n + 1) / (n * c ** n) for n in range(1, a.degree + 1)]
    return _compose(a, series)


ln = log


def sin(a):
    if not isinstance(a, Jet):
        return math.sin(a)
    c = a.value
    return _compose(a, [math.sin(c + n * math.pi / 2) / math.factorial(n)
                        for n in range(a.degree + 1)])


def cos(a):
    if not isinstance(a, Jet):
        return math.cos(a)
    c = a.value
    return _compose(a, [math.cos(c + n * math.pi / 2) / math.factorial(n)
                        for n in range(a.degree + 1)])


def fabs(a):
    if not isinstance(a, Jet):
        return abs(a)
    if a.value == 0.0:
        raise DomainError("abs is not differentiable at a zero constant term")
    return a if a.value > 0 else -a


def power(a, p):
    """``a ** p`` for a real constant exponent."""
    if not isinstance(a, Jet):
        return a ** p
    if float(p).is_integer():
        n = int(p)
        if n < 0:
            return reciprocal(_int_power(a, -n))
        return _int_power(a, n)
    c = a.value
    if c <= 0.0:
        raise DomainError(f"non-integer power {p} of jet with non-positive constant term {c}")
    return _compose(a, [c ** p * _binom(p, n) / c ** n for n in range(a.degree + 1)])


def _int_power(a: Jet, n: int) -> Jet:
    result = Jet.constant(1.0, a.base, a.degree)
    base = a
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def _binom(p: float, n: int) -> float:
    out = 1.0
    for k in range(n):
        out *= (p - k) / (k + 1)
    return out


_FUNCS = {
    "sqrt": sqrt,
    "exp": exp,
    "ln": log,
    "sin": sin,
    "cos": cos,
}


def jet_arith(a: Jet, b: Jet, op: str) -> Jet:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown arithmetic op {op!r}")


def jet_func(a: Jet, f: str, exponent: float | None = None) -> Jet:
    if f == "pow_const":
        if exponent is None:
            raise ValueError("pow_const needs an exponent")
        return power(a, exponent)
    try:
        return _FUNCS[f](a)
    except KeyError:
        raise ValueError(f"unknown jet function {f!r}") from None
