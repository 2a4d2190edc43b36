"""Formula DSL (parse, evaluate, differentiate) and forward-mode AD."""

from .dual import Dual, gradient, hessian, jacobian, value_and_gradient
from .expr import (
    Binary,
    Constant,
    Expr,
    Max,
    Min,
    Parameter,
    Select,
    StateRef,
    Unary,
    bind,
    check_state_dim,
    compile_expr,
    diff,
    evaluate,
    evaluate_checked,
    lie_derivative,
    symbolic_gradient,
)
from .parser import parse
from .printer import to_source

__all__ = [
    "Binary",
    "Constant",
    "Dual",
    "Expr",
    "Max",
    "Min",
    "Parameter",
    "Select",
    "StateRef",
    "Unary",
    "bind",
    "check_state_dim",
    "compile_expr",
    "diff",
    "evaluate",
    "evaluate_checked",
    "gradient",
    "hessian",
    "jacobian",
    "lie_derivative",
    "parse",
    "symbolic_gradient",
    "to_source",
    "value_and_gradient",
]
