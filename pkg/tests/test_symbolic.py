import math
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barrierkit.errors import (
    ExpressionSyntaxError,
    IndexOutOfRange,
    NonDifferentiable,
    UnboundParameter,
    UnknownFunction,
)
from barrierkit.symbolic import (
    Binary,
    Constant,
    StateRef,
    Unary,
    bind,
    diff,
    evaluate,
    evaluate_checked,
    gradient,
    parse,
    symbolic_gradient,
    to_source,
)
from oracles import CORPUS, fd_gradient, rel_close

# --------------------------------------------------------------------- parse


def test_parse_listing_formula_structure():
    assert parse("x[2] * cos(x[3])", 4) == Binary("mul", StateRef(2), Unary("cos", StateRef(3)))


def test_parse_identity_and_sum_examples():
    assert evaluate(parse("x[0]", 1), [7.5]) == 7.5
    assert evaluate(parse("x[0] + 2*sin(x[1])", 2), [1.0, 0.0]) == 1.0


@pytest.mark.parametrize("source, expected", [
    ("1 + 2 * 3", 7.0),
    ("(1 + 2) * 3", 9.0),
    ("2 ^ 3 ^ 2", 512.0),
    ("2 ** 3 ** 2", 512.0),
    ("-2 ^ 2", -4.0),
    ("(-2) ^ 2", 4.0),
    ("8 / 4 / 2", 1.0),
    ("8 - 4 - 2", 2.0),
    ("2 * -3", -6.0),
    ("1 - -1", 2.0),
])
def test_precedence_and_associativity(source, expected):
    assert evaluate(parse(source), []) == expected


def test_pi_constant():
    assert evaluate(parse("pi"), []) == math.pi


@pytest.mark.parametrize("source", ["x[0] +* 2", "x[0", "sin(x[0]", "1 2", "", "x", "x[1.5]",
                                    "min()", "3 $ 4"])
def test_syntax_errors_carry_position(source):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse(source, 4)
    assert info.value.position >= 0


def test_syntax_error_names_offending_token():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse("x[0] +* 2", 4)
    assert info.value.position == 6 and info.value.token == "*"


def test_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        parse("x[9] + 1", 4)


def test_unknown_function():
    with pytest.raises(UnknownFunction):
        parse("erf(x[0])", 1)


# ---------------------------------------------------------------- round trip


@pytest.mark.parametrize("source", CORPUS)
def test_round_trip(source):
    e = parse(source, 4)
    printed = to_source(e)
    assert parse(printed, 4) == e
    assert to_source(parse(printed, 4)) == printed


_leaf = st.one_of(
    st.integers(0, 3).map(lambda i: f"x[{i}]"),
    st.sampled_from(["a", "b", "k"]),
    st.floats(0.0, 100.0, allow_nan=False).map(repr),
)


def _combine(children):
    binop = st.tuples(children, st.sampled_from(["+", "-", "*", "/", "^"]), children).map(
        lambda t: f"({t[0]}) {t[1]} ({t[2]})" if t[1] == "^" else f"{t[0]} {t[1]} {t[2]}")
    unary = st.tuples(st.sampled_from(["sin", "cos", "exp", "abs", "-"]), children).map(
        lambda t: f"-({t[1]})" if t[0] == "-" else f"{t[0]}({t[1]})")
    paren = children.map(lambda c: f"({c})")
    return st.one_of(binop, unary, paren)


@settings(max_examples=300, deadline=None)
@given(st.recursive(_leaf, _combine, max_leaves=12))
def test_round_trip_property(source):
    e = parse(source, 4)
    assert parse(to_source(e), 4) == e


# ---------------------------------------------------------------- evaluation


def test_evaluation_examples():
    assert evaluate(parse("x[0]*x[0]"), [3.0]) == 9.0
    assert evaluate(parse("min(x[0], x[1])"), [2.0, 5.0]) == 2.0
    assert evaluate(parse("v*cos(th)"), [], {"v": 1.0, "th": 0.0}) == 1.0


def test_unbound_parameter():
    with pytest.raises(UnboundParameter) as info:
        evaluate(parse("v * 2"), [])
    assert info.value.name == "v"


def test_nan_is_flagged_not_raised():
    value, finite = evaluate_checked(parse("log(x[0])"), [-1.0])
    assert math.isnan(value) and not finite
    value, finite = evaluate_checked(parse("1 / x[0]"), [0.0])
    assert math.isinf(value) and not finite
    assert evaluate_checked(parse("x[0]"), [2.0]) == (2.0, True)


def test_evaluation_is_deterministic():
    e = parse("exp(sin(x[0])) * sqrt(1 + x[1]^2) / (3 + cos(x[2]))", 3)
    x = [0.3, -1.7, 2.2]
    vals = {evaluate(e, x) for _ in range(20)}
    assert len(vals) == 1


# ---------------------------------------------------------- differentiation


def test_diff_examples():
    d = diff(parse("x[0] + 2*sin(x[1])", 2), 1)
    assert evaluate(d, [0.0, 0.0]) == 2.0
    assert diff(parse("x[0]", 1), 0) == Constant(1.0)
    assert evaluate(diff(parse("x[2]*cos(x[3])", 4), 3), [0.0, 0.0, 1.0, 0.0]) == 0.0


def test_diff_min_max_requires_subgradient_mode():
    e = parse("min(x[0], x[1])", 2)
    with pytest.raises(NonDifferentiable):
        diff(e, 0)
    d = diff(e, 0, subgradient=True)
    assert evaluate(d, [1.0, 2.0]) == 1.0
    assert evaluate(d, [3.0, 2.0]) == 0.0
    # tie goes to the first child
    assert evaluate(d, [2.0, 2.0]) == 1.0
    # a min that does not involve the variable is just a constant
    assert evaluate(diff(parse("x[2] + min(x[0], x[1])", 3), 2), [0, 0, 0]) == 1.0


def test_abs_right_hand_derivative_at_zero():
    assert evaluate(diff(parse("abs(x[0])", 1), 0), [0.0]) == 1.0
    assert gradient(lambda x: abs(x[0]), [0.0])[0] == 1.0


SMOOTH = [s for s in CORPUS if "min" not in s and "max" not in s and "abs" not in s
          and "sign" not in s]
PARAMS = {"a": 0.7, "b": -1.3, "c": 2.1, "d": 0.4, "k": 1.5, "k_v": 1.2, "v_max": 0.8,
          "xg": 3.0, "yg": 2.0, "cx": 1.0, "cy": 2.0, "r": 0.5, "v": 1.1, "th": 0.3,
          "mu": 1.0, "x_min": -1.0, "x_max": 4.0, "y_min": -2.0, "y_max": 2.0}


def _states(rng, count, e_src):
    out = []
    while len(out) < count:
        x = rng.uniform(0.2, 2.0, 4) * rng.choice([-1.0, 1.0], 4)
        if "log" in e_src or "sqrt" in e_src or "^0.5" in e_src or "** 0.5" in e_src:
            x = np.abs(x)
        out.append(x)
    return out


@pytest.mark.parametrize("source", SMOOTH)
def test_symbolic_matches_dual_and_finite_differences(source):
    rng = np.random.default_rng(zlib.crc32(source.encode()))
    e = parse(source, 4)
    f = bind(e, PARAMS)
    grads = [bind(g, PARAMS) for g in symbolic_gradient(e, 4)]
    for x in _states(rng, 100, source):
        sym = np.array([float(g(x)) for g in grads])
        ad = gradient(f, x)
        if not np.all(np.isfinite(sym)):
            continue
        assert rel_close(sym, ad, 1e-10), (source, x, sym, ad)
        assert rel_close(sym, fd_gradient(f, x), 1e-5), (source, x)


def test_gradient_examples():
    assert gradient(lambda x: x[0] ** 2, [3.0]).tolist() == [6.0]
    assert np.all(gradient(lambda x: 5.0, [1.0, 2.0]) == 0.0)
    from barrierkit.symbolic import dual as dm

    h_r1 = lambda x: x[2] * dm.cos(x[3]) + x[0] - (-1.0)  # noqa: E731
    assert np.allclose(gradient(h_r1, [0.0, 0.0, 1.0, 0.0]), [1.0, 0.0, 1.0, 0.0], atol=0)


def test_pickmin_parses_and_round_trips():
    e = parse("pickmin(x[0], x[1], 10, 20)", 2)
    assert evaluate(e, [1.0, 2.0]) == 10.0
    assert evaluate(e, [3.0, 2.0]) == 20.0
    assert parse(to_source(e), 2) == e
