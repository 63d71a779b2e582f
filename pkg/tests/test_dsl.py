import math

import numpy as np
import pytest

from lagflow import dsl
from lagflow.dsl import (
    Binary,
    Const,
    EvaluationError,
    ParseError,
    add,
    call,
    const,
    differentiate,
    div,
    evaluate,
    mul,
    parse,
    powc,
    sub,
    to_string,
    var,
)


def test_parse_sum_of_squares():
    spec = parse("y1^2 + y2^2", 2, 2)
    body = spec.body
    assert isinstance(body, Binary) and body.op == "add"
    assert evaluate(body, (0, 0), (3.0, 4.0)) == 25.0
    assert to_string(body) == "y1^2 + y2^2"


def test_parse_precedence():
    spec = parse("2*(y1^2*y2) - sin(x2)*y1", 2, 2)
    x, y = (0.1, 0.7), (1.3, -0.4)
    expected = 2 * (y[0] ** 2 * y[1]) - math.sin(x[1]) * y[0]
    assert evaluate(spec.body, x, y) == pytest.approx(expected, rel=1e-15)
    # ^ binds tighter than * which binds tighter than -
    e = parse("2*y1^3 - 1", 2, 2).body
    assert evaluate(e, (0, 0), (2.0, 0.0)) == 15.0


def test_pow_right_associative():
    e = parse("y1^2^3", 2, 2).body  # y1^(2^3)
    assert evaluate(e, (), (2.0, 0.0)) == 256.0


def test_unknown_identifier_offset():
    with pytest.raises(ParseError) as exc:
        parse("m0*(y1^2 + exp(2*x1)*y2^2)", 2, 2)
    assert exc.value.offset == 0
    assert "m0" in str(exc.value)


def test_variable_index_out_of_range():
    with pytest.raises(ParseError) as exc:
        parse("y1 + y3", 2, 2)
    assert "out of range" in str(exc.value)
    assert exc.value.offset == 5


def test_syntax_error_offset():
    with pytest.raises(ParseError) as exc:
        parse("y1 + ", 2, 2)
    assert exc.value.offset == 6 - 1  # eof token sits at end of source


def test_nonconstant_exponent_rejected():
    with pytest.raises(ParseError) as exc:
        parse("y1^x1", 2, 2)
    assert "constant" in str(exc.value)
    # constant arithmetic in the exponent is fine
    e = parse("y1^(1+1)", 2, 2).body
    assert evaluate(e, (), (3.0, 0.0)) == 9.0


def test_parse_preconditions():
    with pytest.raises(ValueError):
        parse("", 2, 2)
    with pytest.raises(ValueError):
        parse("y1", 1, 1)
    with pytest.raises(ValueError):
        parse("y1", 3, 2)


def test_differentiate_power_rule():
    spec = parse("y1^2 + y2^2", 2, 2)
    d = differentiate(spec.body, "y", 1)
    assert to_string(d) == "2*y1"


def test_differentiate_chain_rule():
    e = parse("exp(2*x1)*y2^2", 2, 2).body
    d = differentiate(e, "x", 1)
    for x1 in (0.0, 0.3, -1.1):
        got = evaluate(d, (x1, 0.0), (0.0, 0.7))
        assert got == pytest.approx(2 * math.exp(2 * x1) * 0.49, rel=1e-14)


def test_repeated_differentiation():
    e = powc(var("y", 1), 4.0)
    d2 = differentiate(differentiate(e, "y", 1), "y", 1)
    assert evaluate(d2, (), (1.0,)) == 12.0
    # fourth order is required downstream
    d4 = differentiate(differentiate(d2, "y", 1), "y", 1)
    assert evaluate(d4, (), (5.0,)) == 24.0


def test_evaluate_basics():
    assert evaluate(mul(const(2), var("y", 1)), (), (3.0,)) == 6.0
    assert evaluate(call("exp", mul(const(2), var("x", 1))), (0.0,), ()) == 1.0


def test_evaluate_domain_errors():
    e = div(const(1), sub(var("y", 1), const(1)))
    with pytest.raises(EvaluationError) as exc:
        evaluate(e, (), (1.0,))
    assert "division by zero" in str(exc.value)
    assert "y1 - 1" in str(exc.value)
    with pytest.raises(EvaluationError):
        evaluate(call("log", var("x", 1)), (-1.0,), ())
    with pytest.raises(EvaluationError):
        evaluate(call("sqrt", var("x", 1)), (-1.0,), ())


def _random_expr(rng, depth):
    if depth == 0:
        r = rng.integers(3)
        if r == 0:
            return const(round(float(rng.uniform(-2, 2)), 3))
        return var("x" if r == 1 else "y", int(rng.integers(1, 3)))
    r = rng.integers(6)
    if r == 0:
        return add(_random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if r == 1:
        return sub(_random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if r == 2:
        return mul(_random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if r == 3:
        name = ("sin", "cos", "tanh", "exp")[rng.integers(4)]
        return call(name, mul(const(0.5), _random_expr(rng, depth - 1)))
    if r == 4:
        return powc(_random_expr(rng, depth - 1), float(rng.integers(2, 4)))
    return div(
        _random_expr(rng, depth - 1),
        add(const(2.5), call("cos", _random_expr(rng, depth - 1))),
    )


def test_derivative_matches_finite_difference():
    rng = np.random.default_rng(42)
    h = 1e-5
    checked = 0
    while checked < 100:
        e = _random_expr(rng, 3)
        x = tuple(rng.uniform(-1, 1, 2))
        y = tuple(rng.uniform(-1, 1, 2))
        kind = "x" if rng.integers(2) else "y"
        idx = int(rng.integers(1, 3))
        d = differentiate(e, kind, idx)
        exact = evaluate(d, x, y)

        def at(delta):
            xs, ys = list(x), list(y)
            (xs if kind == "x" else ys)[idx - 1] += delta
            return evaluate(e, tuple(xs), tuple(ys))

        fd = (at(h) - at(-h)) / (2 * h)
        scale = max(1.0, abs(exact))
        assert abs(fd - exact) / scale < 1e-6
        checked += 1


def test_differentiate_is_linear():
    rng = np.random.default_rng(7)
    for _ in range(30):
        e1 = _random_expr(rng, 3)
        e2 = _random_expr(rng, 3)
        a = float(rng.uniform(-2, 2))
        combo = add(mul(const(a), e1), e2)
        d_combo = differentiate(combo, "y", 1)
        d_split = add(
            mul(const(a), differentiate(e1, "y", 1)), differentiate(e2, "y", 1)
        )
        x = tuple(rng.uniform(-1, 1, 2))
        y = tuple(rng.uniform(-1, 1, 2))
        lhs = evaluate(d_combo, x, y)
        rhs = evaluate(d_split, x, y)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_mixed_partials_commute():
    rng = np.random.default_rng(19)
    for _ in range(30):
        e = _random_expr(rng, 3)
        dxy = differentiate(differentiate(e, "x", 1), "y", 2)
        dyx = differentiate(differentiate(e, "y", 2), "x", 1)
        x = tuple(rng.uniform(-1, 1, 2))
        y = tuple(rng.uniform(-1, 1, 2))
        a = evaluate(dxy, x, y)
        b = evaluate(dyx, x, y)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_roundtrip_print_parse():
    rng = np.random.default_rng(99)
    for _ in range(50):
        e = _random_expr(rng, 3)
        back = dsl.parse_scalar(to_string(e), 2, 2)
        x = tuple(rng.uniform(-1, 1, 2))
        y = tuple(rng.uniform(-1, 1, 2))
        a = evaluate(e, x, y)
        b = evaluate(back, x, y)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_interning_shares_nodes():
    a = mul(var("y", 1), var("x", 2))
    b = mul(var("y", 1), var("x", 2))
    assert a is b
