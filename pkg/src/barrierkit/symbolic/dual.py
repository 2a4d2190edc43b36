"""Forward-mode automatic differentiation with vector-seeded dual numbers.

A :class:`Dual` carries a primal value and a tuple of partial derivatives,
one per seeded input. Every call to :func:`gradient` draws a fresh tag, so
duals can be nested (the primal and partials of an outer dual may themselves
be duals of an older tag). That is what makes ``gradient(lambda z:
gradient(h, z) @ f(z), x)`` return exact second-order quantities without
perturbation confusion.

Natively coded functions must use the primitives in this module (``sin``,
``cos``, ...) instead of :mod:`math`/:mod:`numpy` ufuncs; arithmetic
operators work as usual. The float versions of the primitives follow IEEE
semantics: domain errors give NaN, overflow gives ``inf``, no exceptions.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

_tags = itertools.count(1)


class Dual:
    """Number ``value + sum_i deriv[i] * eps_i`` with tag ``tag``."""

    __slots__ = ("value", "deriv", "tag")
    # make numpy defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, value, deriv, tag=0):
        self.value = value
        self.deriv = tuple(deriv)
        self.tag = tag

    def __repr__(self):
        return f"Dual({self.value!r}, {list(self.deriv)!r}, tag={self.tag})"

    def __float__(self):
        return float(self.value)

    @property
    def derivatives(self):
        return self.deriv

    # which operand is the outer (newest) dual decides how a pair combines
    def _outer(self, other):
        return isinstance(other, Dual) and other.tag > self.tag

    def _same(self, other):
        return isinstance(other, Dual) and other.tag == self.tag

    def __neg__(self):
        return Dual(-self.value, [-d for d in self.deriv], self.tag)

    def __pos__(self):
        return self

    def __add__(self, other):
        if self._same(other):
            return Dual(self.value + other.value,
                        [a + b for a, b in zip(self.deriv, other.deriv)], self.tag)
        if self._outer(other):
            return other.__radd__(self)
        return Dual(self.value + other, self.deriv, self.tag)

    def __radd__(self, other):
        return Dual(other + self.value, self.deriv, self.tag)

    def __sub__(self, other):
        if self._same(other):
            return Dual(self.value - other.value,
                        [a - b for a, b in zip(self.deriv, other.deriv)], self.tag)
        if self._outer(other):
            return other.__rsub__(self)
        return Dual(self.value - other, self.deriv, self.tag)

    def __rsub__(self, other):
        return Dual(other - self.value, [-d for d in self.deriv], self.tag)

    def __mul__(self, other):
        if self._same(other):
            a, b = self.value, other.value
            return Dual(a * b, [a * db + b * da for da, db in zip(self.deriv, other.deriv)],
                        self.tag)
        if self._outer(other):
            return other.__rmul__(self)
        return Dual(self.value * other, [d * other for d in self.deriv], self.tag)

    def __rmul__(self, other):
        return Dual(other * self.value, [other * d for d in self.deriv], self.tag)

    def __truediv__(self, other):
        if self._same(other):
            q = div(self.value, other.value)
            return Dual(q, [div(da - q * db, other.value)
                            for da, db in zip(self.deriv, other.deriv)], self.tag)
        if self._outer(other):
            return other.__rtruediv__(self)
        return Dual(div(self.value, other), [div(d, other) for d in self.deriv], self.tag)

    def __rtruediv__(self, other):
        q = div(other, self.value)
        return Dual(q, [div(-q * d, self.value) for d in self.deriv], self.tag)

    def __pow__(self, other):
        if self._same(other):
            return exp(other * log(self)) if _has_slope(other) else self ** other.value
        if self._outer(other):
            return other.__rpow__(self)
        a = self.value
        p = power(a, other)
        slope = other * power(a, other - 1)
        return Dual(p, [slope * d for d in self.deriv], self.tag)

    def __rpow__(self, other):
        # other ** self with other constant w.r.t. this tag
        p = power(other, self.value)
        slope = p * log(other)
        return Dual(p, [slope * d for d in self.deriv], self.tag)

    def __abs__(self):
        return fabs(self)

    # comparisons act on the primal value
    def __lt__(self, other):
        return float(self) < float(other)

    def __le__(self, other):
        return float(self) <= float(other)

    def __gt__(self, other):
        return float(self) > float(other)

    def __ge__(self, other):
        return float(self) >= float(other)

    def __eq__(self, other):
        return isinstance(other, (Dual, int, float, np.floating)) and float(self) == float(other)

    __hash__ = None


def _has_slope(d):
    return any(x != 0 for x in d.deriv)


def primal(v):
    """Strip every dual layer and return the plain float."""
    while isinstance(v, Dual):
        v = v.value
    return float(v)


# ---------------------------------------------------------------- primitives


def div(a, b):
    if isinstance(a, Dual) or isinstance(b, Dual):
        return a / b
    try:
        return a / b
    except ZeroDivisionError:
        if a != a or a == 0:
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def power(a, b):
    if isinstance(a, Dual) or isinstance(b, Dual):
        return a ** b
    try:
        return math.pow(a, b)
    except OverflowError:
        return math.inf
    except ValueError:
        if a == 0 and b < 0:
            return math.inf
        return math.nan


def _lift(x, f, df):
    # f, df act on the next-inner value; df returns the local slope
    v = x.value
    slope = df(v)
    return Dual(f(v), [slope * d for d in x.deriv], x.tag)


def sin(x):
    if isinstance(x, Dual):
        return _lift(x, sin, cos)
    try:
        return math.sin(x)
    except ValueError:
        return math.nan


def cos(x):
    if isinstance(x, Dual):
        return _lift(x, cos, lambda v: -sin(v))
    try:
        return math.cos(x)
    except ValueError:
        return math.nan


def tan(x):
    if isinstance(x, Dual):
        return _lift(x, tan, lambda v: 1.0 + tan(v) * tan(v))
    try:
        return math.tan(x)
    except ValueError:
        return math.nan


def exp(x):
    if isinstance(x, Dual):
        return _lift(x, exp, exp)
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def log(x):
    if isinstance(x, Dual):
        return _lift(x, log, lambda v: div(1.0, v))
    if x > 0:
        return math.log(x)
    if x == 0:
        return -math.inf
    return math.nan


def sqrt(x):
    if isinstance(x, Dual):
        return _lift(x, sqrt, lambda v: div(0.5, sqrt(v)))
    if x >= 0:
        return math.sqrt(x)
    return math.nan


def sign(x):
    """Right-continuous sign: ``sign(0) == 1``."""
    if isinstance(x, Dual):
        return Dual(sign(x.value), [0.0] * len(x.deriv), x.tag)
    if x != x:
        return math.nan
    return 1.0 if x >= 0 else -1.0


def fabs(x):
    # right-hand derivative at 0
    if isinstance(x, Dual):
        return _lift(x, fabs, sign)
    return math.fabs(x)


def tanh(x):
    if isinstance(x, Dual):
        return _lift(x, tanh, lambda v: 1.0 - tanh(v) * tanh(v))
    return math.tanh(x)


def atan2(y, x):
    if isinstance(y, Dual) or isinstance(x, Dual):
        r2 = x * x + y * y
        return _atan2_dual(y, x, r2)
    return math.atan2(y, x)


def _atan2_dual(y, x, r2):
    # d atan2 = (x dy - y dx) / r^2, assembled through the operator overloads
    tag = max(getattr(y, "tag", 0), getattr(x, "tag", 0))
    yv = y.value if isinstance(y, Dual) and y.tag == tag else y
    xv = x.value if isinstance(x, Dual) and x.tag == tag else x
    n = len((y if isinstance(y, Dual) and y.tag == tag else x).deriv)
    dy = y.deriv if isinstance(y, Dual) and y.tag == tag else (0.0,) * n
    dx = x.deriv if isinstance(x, Dual) and x.tag == tag else (0.0,) * n
    r2v = xv * xv + yv * yv
    return Dual(atan2(yv, xv), [div(xv * a - yv * b, r2v) for a, b in zip(dy, dx)], tag)


# ---------------------------------------------------------------- drivers


def _seed(x, tag):
    n = len(x)
    out = []
    for i in range(n):
        e = [0.0] * n
        e[i] = 1.0
        xi = x[i]
        out.append(Dual(xi if isinstance(xi, Dual) else float(xi), e, tag))
    return out


def _extract(y, tag, n):
    if isinstance(y, Dual) and y.tag == tag:
        return list(y.deriv)
    if isinstance(y, Dual) and y.tag > tag:
        raise ValueError("function leaked a dual from an inner differentiation")
    return [0.0] * n


def _as_array(values):
    if any(isinstance(v, Dual) for v in values):
        arr = np.empty(len(values), dtype=object)
        arr[:] = values
        return arr
    return np.array(values, dtype=float)


def _value_of(y, tag):
    return y.value if isinstance(y, Dual) and y.tag == tag else y


def value_and_gradient(fn, x):
    """Return ``(fn(x), grad fn(x))`` from one forward pass."""
    tag = next(_tags)
    y = fn(_seed(x, tag))
    return _value_of(y, tag), _as_array(_extract(y, tag, len(x)))


def gradient(fn, x):
    """Gradient of a scalar function ``fn`` at ``x`` by forward mode.

    ``x`` may hold floats or duals from an enclosing differentiation; in the
    latter case the result is an object array of duals.
    """
    return value_and_gradient(fn, x)[1]


def jacobian(fn, x):
    """Jacobian of a vector-valued ``fn``; rows index outputs."""
    tag = next(_tags)
    ys = fn(_seed(x, tag))
    n = len(x)
    rows = [_extract(y, tag, n) for y in ys]
    if any(isinstance(v, Dual) for r in rows for v in r):
        out = np.empty((len(rows), n), dtype=object)
        for i, r in enumerate(rows):
            out[i, :] = r
        return out
    return np.array(rows, dtype=float).reshape(len(rows), n)


def hessian(fn, x):
    return jacobian(lambda z: list(gradient(fn, z)), x)
