"""Recursive-descent parser for the formula DSL (grammar in docs/dsl.md)."""

from __future__ import annotations

import math
import re

from ..errors import ExpressionSyntaxError, IndexOutOfRange, UnknownFunction
from .expr import Binary, Constant, Expr, Max, Min, Parameter, Select, StateRef, Unary

FUNCTIONS = {"sin", "cos", "tan", "exp", "log", "sqrt", "abs", "sign"}
VARIADIC = {"min", "max"}
SELECTORS = {"pickmin": "min", "pickmax": "max"}
CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),\[\]])
    """,
    re.VERBOSE,
)


def tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExpressionSyntaxError("unexpected character", pos, source[pos])
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            if text == "**":
                text = "^"
            tokens.append((kind, text, pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source, state_dim):
        self.tokens = tokenize(source)
        self.i = 0
        self.state_dim = state_dim

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text):
        kind, got, pos = self.tok
        if got != text or kind == "end":
            raise ExpressionSyntaxError(f"expected {text!r}", pos, got or "<end>")
        return self.advance()

    def parse(self):
        e = self.expr()
        kind, text, pos = self.tok
        if kind != "end":
            raise ExpressionSyntaxError("unexpected token", pos, text)
        return e

    def expr(self):
        e = self.term()
        while self.tok[1] in ("+", "-") and self.tok[0] == "op":
            op = "add" if self.advance()[1] == "+" else "sub"
            e = Binary(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.tok[1] in ("*", "/") and self.tok[0] == "op":
            op = "mul" if self.advance()[1] == "*" else "div"
            e = Binary(op, e, self.unary())
        return e

    def unary(self):
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.advance()
            return Unary("neg", self.unary())
        if self.tok[0] == "op" and self.tok[1] == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.advance()
            # right-associative; exponent may carry its own sign
            return Binary("pow", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.tok
        if kind == "num":
            self.advance()
            return Constant(float(text))
        if kind == "op" and text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            self.advance()
            nxt = self.tok
            if text == "x" and nxt[1] == "[":
                return self.state_ref(pos)
            if nxt[1] == "(" and nxt[0] == "op":
                return self.call(text, pos)
            if text == "x":
                raise ExpressionSyntaxError("state must be indexed as x[i]", pos, text)
            if text in CONSTANTS:
                return Constant(CONSTANTS[text])
            return Parameter(text)
        raise ExpressionSyntaxError("unexpected token", pos, text or "<end>")

    def state_ref(self, pos):
        self.expect("[")
        kind, text, ipos = self.tok
        if kind != "num" or not text.isdigit():
            raise ExpressionSyntaxError("state index must be a non-negative integer", ipos, text)
        self.advance()
        self.expect("]")
        idx = int(text)
        if self.state_dim is not None and idx >= self.state_dim:
            raise IndexOutOfRange(
                f"x[{idx}] at position {pos} is out of range for state dimension {self.state_dim}"
            )
        return StateRef(idx)

    def call(self, name, pos):
        if name not in FUNCTIONS and name not in VARIADIC and name not in SELECTORS:
            raise UnknownFunction(f"unknown function {name!r} at position {pos}")
        self.expect("(")
        args = [self.expr()]
        while self.tok[1] == "," and self.tok[0] == "op":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        if name in FUNCTIONS:
            if len(args) != 1:
                raise ExpressionSyntaxError(f"{name}() takes exactly one argument", pos, name)
            return Unary(name, args[0])
        if name in VARIADIC:
            return (Min if name == "min" else Max)(tuple(args))
        if len(args) % 2:
            raise ExpressionSyntaxError(f"{name}() takes an even number of arguments", pos, name)
        half = len(args) // 2
        return Select(SELECTORS[name], tuple(args[:half]), tuple(args[half:]))


def parse(source: str, state_dim: int | None = None) -> Expr:
    """Parse a DSL formula such as ``"x[2] * cos(x[3])"``.

    With ``state_dim`` given, every ``x[i]`` is range-checked.
    """
    if not isinstance(source, str):
        raise TypeError(f"expected a string, got {type(source).__name__}")
    return _Parser(source, state_dim).parse()
