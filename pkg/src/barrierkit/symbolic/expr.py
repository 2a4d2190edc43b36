"""Expression trees for the formula DSL.

Nodes are frozen dataclasses, so two trees compare equal exactly when they
are structurally identical and can be used as cache keys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Sequence

from ..errors import IndexOutOfRange, NonDifferentiable, UnboundParameter
from . import dual as dm

UNARY_OPS = ("neg", "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "sign")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()

    def __str__(self):
        from .printer import to_source

        return to_source(self)


@dataclass(frozen=True)
class Constant(Expr):
    value: float


@dataclass(frozen=True)
class StateRef(Expr):
    index: int


@dataclass(frozen=True)
class Parameter(Expr):
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    child: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Min(Expr):
    children: tuple


@dataclass(frozen=True)
class Max(Expr):
    children: tuple


@dataclass(frozen=True)
class Select(Expr):
    """``values[j]`` where ``j`` is the first arg-min (or arg-max) of ``keys``.

    Produced by subgradient-mode differentiation of :class:`Min`/:class:`Max`.
    """

    kind: str
    keys: tuple
    values: tuple


ZERO = Constant(0.0)
ONE = Constant(1.0)


# ------------------------------------------------------------------ traversal


def children(e: Expr) -> tuple:
    if isinstance(e, Unary):
        return (e.child,)
    if isinstance(e, Binary):
        return (e.left, e.right)
    if isinstance(e, (Min, Max)):
        return e.children
    if isinstance(e, Select):
        return e.keys + e.values
    return ()


def walk(e: Expr):
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def state_indices(e: Expr) -> set:
    return {n.index for n in walk(e) if isinstance(n, StateRef)}


def parameters(e: Expr) -> set:
    return {n.name for n in walk(e) if isinstance(n, Parameter)}


def depends_on(e: Expr, index: int) -> bool:
    return any(isinstance(n, StateRef) and n.index == index for n in walk(e))


def check_state_dim(e: Expr, n: int) -> Expr:
    """Bind ``e`` to an ``n``-dimensional state; raises IndexOutOfRange."""
    for i in sorted(state_indices(e)):
        if i >= n:
            raise IndexOutOfRange(f"x[{i}] is out of range for state dimension {n}")
    return e


# ----------------------------------------------------------------- evaluation

_UNARY_FUNCS = {
    "sin": dm.sin,
    "cos": dm.cos,
    "tan": dm.tan,
    "exp": dm.exp,
    "log": dm.log,
    "sqrt": dm.sqrt,
    "abs": dm.fabs,
    "sign": dm.sign,
}


def _pick(kind, keys, vals):
    best = 0
    for j in range(1, len(keys)):
        if (keys[j] < keys[best]) if kind == "min" else (keys[j] > keys[best]):
            best = j
    return vals[best]


def _build(e: Expr) -> Callable:
    # each node becomes a closure f(x, params); generic over floats and duals
    if isinstance(e, Constant):
        v = e.value
        return lambda x, p: v
    if isinstance(e, StateRef):
        i = e.index
        return lambda x, p: x[i]
    if isinstance(e, Parameter):
        name = e.name

        def param(x, p):
            try:
                return p[name]
            except (KeyError, TypeError):
                raise UnboundParameter(name) from None

        return param
    if isinstance(e, Unary):
        c = _build(e.child)
        if e.op == "neg":
            return lambda x, p: -c(x, p)
        fn = _UNARY_FUNCS[e.op]
        return lambda x, p: fn(c(x, p))
    if isinstance(e, Binary):
        a, b = _build(e.left), _build(e.right)
        op = e.op
        if op == "add":
            return lambda x, p: a(x, p) + b(x, p)
        if op == "sub":
            return lambda x, p: a(x, p) - b(x, p)
        if op == "mul":
            return lambda x, p: a(x, p) * b(x, p)
        if op == "div":
            return lambda x, p: dm.div(a(x, p), b(x, p))
        return lambda x, p: dm.power(a(x, p), b(x, p))
    if isinstance(e, (Min, Max)):
        cs = [_build(c) for c in e.children]
        kind = "min" if isinstance(e, Min) else "max"

        def minmax(x, p):
            vals = [c(x, p) for c in cs]
            if any(dm.primal(v) != dm.primal(v) for v in vals):
                return math.nan
            return _pick(kind, vals, vals)

        return minmax
    if isinstance(e, Select):
        ks = [_build(c) for c in e.keys]
        vs = [_build(c) for c in e.values]
        kind = e.kind
        return lambda x, p: _pick(kind, [k(x, p) for k in ks], [v(x, p) for v in vs])
    raise TypeError(f"not an expression node: {e!r}")


@lru_cache(maxsize=4096)
def compile_expr(e: Expr) -> Callable:
    """Return ``f(x, params)`` evaluating ``e``; accepts floats or duals."""
    return _build(e)


def evaluate(e: Expr, x: Sequence, params: Mapping[str, float] | None = None) -> float:
    """IEEE double evaluation of ``e`` at state ``x``.

    NaN and infinities propagate rather than raising; use
    :func:`evaluate_checked` to get the finiteness flag alongside.
    """
    return float(compile_expr(e)(x, params or {}))


def evaluate_checked(e: Expr, x: Sequence, params: Mapping[str, float] | None = None):
    v = evaluate(e, x, params)
    return v, math.isfinite(v)


def bind(e: Expr, params: Mapping[str, float] | None = None) -> Callable:
    """Curry parameters into a plain ``f(x)``."""
    f = compile_expr(e)
    p = dict(params or {})
    missing = parameters(e) - set(p)
    if missing:
        raise UnboundParameter(sorted(missing)[0])
    return lambda x: f(x, p)


# ------------------------------------------------------- simplifying builders


def _c(e):
    return e.value if isinstance(e, Constant) else None


def add(a, b):
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Constant(ca + cb)
    if ca == 0:
        return b
    if cb == 0:
        return a
    return Binary("add", a, b)


def sub(a, b):
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Constant(ca - cb)
    if cb == 0:
        return a
    if ca == 0:
        return neg(b)
    return Binary("sub", a, b)


def mul(a, b):
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Constant(ca * cb)
    if ca == 0 or cb == 0:
        return ZERO
    if ca == 1:
        return b
    if cb == 1:
        return a
    if ca == -1:
        return neg(b)
    if cb == -1:
        return neg(a)
    return Binary("mul", a, b)


def div(a, b):
    ca, cb = _c(a), _c(b)
    if ca == 0 and cb != 0:
        return ZERO
    if cb == 1:
        return a
    if ca is not None and cb is not None and cb != 0:
        return Constant(ca / cb)
    return Binary("div", a, b)


def neg(a):
    ca = _c(a)
    if ca is not None:
        return Constant(-ca)
    if isinstance(a, Unary) and a.op == "neg":
        return a.child
    return Unary("neg", a)


def pow_(a, b):
    cb = _c(b)
    if cb == 0:
        return ONE
    if cb == 1:
        return a
    ca = _c(a)
    if ca is not None and cb is not None:
        return Constant(dm.power(ca, cb))
    return Binary("pow", a, b)


def fn(op, a):
    return Unary(op, a)


# ------------------------------------------------------------ differentiation


def diff(e: Expr, wrt: int, subgradient: bool = False) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to ``x[wrt]``.

    ``Min``/``Max`` nodes that depend on ``x[wrt]`` raise NonDifferentiable
    unless ``subgradient`` is set, in which case the derivative of the active
    child is selected at evaluation time (first child wins ties).
    """
    return _Differ(wrt, subgradient)(e)


class _Differ:
    def __init__(self, wrt, subgradient):
        self.wrt = wrt
        self.subgradient = subgradient
        self.cache = {}

    def __call__(self, e):
        try:
            return self.cache[e]
        except KeyError:
            d = self.cache[e] = self._d(e)
            return d

    def _d(self, e):
        if isinstance(e, (Constant, Parameter)):
            return ZERO
        if isinstance(e, StateRef):
            return ONE if e.index == self.wrt else ZERO
        if not depends_on(e, self.wrt):
            return ZERO
        if isinstance(e, Unary):
            u, du = e.child, self(e.child)
            op = e.op
            if op == "neg":
                return neg(du)
            if op == "sin":
                return mul(fn("cos", u), du)
            if op == "cos":
                return neg(mul(fn("sin", u), du))
            if op == "tan":
                return mul(add(ONE, pow_(fn("tan", u), Constant(2.0))), du)
            if op == "exp":
                return mul(e, du)
            if op == "log":
                return div(du, u)
            if op == "sqrt":
                return div(du, mul(Constant(2.0), e))
            if op == "abs":
                return mul(fn("sign", u), du)
            if op == "sign":
                return ZERO
            raise ValueError(f"unknown unary op {op!r}")
        if isinstance(e, Binary):
            a, b = e.left, e.right
            da, db = self(a), self(b)
            op = e.op
            if op == "add":
                return add(da, db)
            if op == "sub":
                return sub(da, db)
            if op == "mul":
                return add(mul(da, b), mul(a, db))
            if op == "div":
                if _c(db) == 0:
                    return div(da, b)
                return div(sub(mul(da, b), mul(a, db)), pow_(b, Constant(2.0)))
            # pow
            if _c(db) == 0:
                return mul(mul(b, pow_(a, sub(b, ONE))), da)
            if _c(da) == 0:
                return mul(mul(e, fn("log", a)), db)
            return mul(e, add(mul(db, fn("log", a)), div(mul(b, da), a)))
        if isinstance(e, (Min, Max)):
            if not self.subgradient:
                kind = "min" if isinstance(e, Min) else "max"
                raise NonDifferentiable(
                    f"{kind}() depends on x[{self.wrt}]; enable subgradient mode"
                )
            kind = "min" if isinstance(e, Min) else "max"
            return Select(kind, e.children, tuple(self(c) for c in e.children))
        if isinstance(e, Select):
            return Select(e.kind, e.keys, tuple(self(v) for v in e.values))
        raise TypeError(f"not an expression node: {e!r}")


def symbolic_gradient(e: Expr, n: int, subgradient: bool = False) -> list:
    return [diff(e, i, subgradient) for i in range(n)]


def lie_derivative(e: Expr, field: Sequence[Expr], subgradient: bool = False) -> Expr:
    """``grad(e) . field`` as an expression."""
    out = ZERO
    for i, fi in enumerate(field):
        if _c(fi) == 0 or not depends_on(e, i):
            continue
        out = add(out, mul(diff(e, i, subgradient), fi))
    return out
