"""Pretty-printer emitting DSL source with minimal parentheses.

``parse(to_source(e)) == e`` for every tree the parser produces.
"""

from __future__ import annotations

from .expr import Binary, Constant, Expr, Max, Min, Parameter, Select, StateRef, Unary

# precedence levels
_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5

_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


def _number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _fmt(e: Expr):
    """Return (text, precedence)."""
    if isinstance(e, Constant):
        v = e.value
        if v != v or v in (float("inf"), float("-inf")):
            raise ValueError(f"cannot print non-finite constant {v!r}")
        if v < 0 or (v == 0 and str(v).startswith("-")):
            return f"(-{_number(-v)})", _ATOM
        return _number(v), _ATOM
    if isinstance(e, StateRef):
        return f"x[{e.index}]", _ATOM
    if isinstance(e, Parameter):
        return e.name, _ATOM
    if isinstance(e, Unary):
        if e.op == "neg":
            return "-" + _wrap(e.child, _NEG), _NEG
        return f"{e.op}({to_source(e.child)})", _ATOM
    if isinstance(e, Binary):
        op = e.op
        if op in ("add", "sub"):
            left, right = _wrap(e.left, _ADD), _wrap(e.right, _MUL)
            return f"{left} {_SYMBOL[op]} {right}", _ADD
        if op in ("mul", "div"):
            left, right = _wrap(e.left, _MUL), _wrap(e.right, _NEG)
            return f"{left} {_SYMBOL[op]} {right}", _MUL
        return f"{_wrap(e.left, _ATOM)}^{_wrap(e.right, _NEG)}", _POW
    if isinstance(e, (Min, Max)):
        name = "min" if isinstance(e, Min) else "max"
        return f"{name}({', '.join(to_source(c) for c in e.children)})", _ATOM
    if isinstance(e, Select):
        args = ", ".join(to_source(c) for c in e.keys + e.values)
        return f"pick{e.kind}({args})", _ATOM
    raise TypeError(f"not an expression node: {e!r}")


def _wrap(e, min_prec):
    text, prec = _fmt(e)
    return f"({text})" if prec < min_prec else text


def to_source(e: Expr) -> str:
    return _fmt(e)[0]
