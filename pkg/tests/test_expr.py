import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ephs.expr import (
    INDETERMINATE,
    Add,
    Const,
    Div,
    DomainError,
    Exp,
    Log,
    Mul,
    Neg,
    ParseError,
    Pow,
    Sub,
    UnboundSymbol,
    Var,
    compile_grad,
    compile_many,
    evaluate,
    grad,
    infer_parity,
    parse,
)

SYMBOLS = ("x", "y", "z")


def random_expr(rng: np.random.Generator, depth: int):
    """Smooth random expression; denominators and log arguments stay >= 1."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.3:
            return Const(float(np.round(rng.uniform(-2, 2), 3)))
        return Var(SYMBOLS[rng.integers(3)])
    a, b = random_expr(rng, depth - 1), random_expr(rng, depth - 1)
    k = rng.integers(8)
    if k == 0:
        return Add(a, b)
    if k == 1:
        return Sub(a, b)
    if k == 2:
        return Mul(a, b)
    if k == 3:
        return Div(a, Add(Const(1.0), Pow(b, 2)))
    if k == 4:
        return Pow(a, int(rng.integers(0, 4)))
    if k == 5:
        return Exp(Div(a, Add(Const(1.0), Pow(a, 2))))
    if k == 6:
        return Log(Add(Const(1.0), Pow(a, 2)))
    return Neg(a)


def central_difference(expr, point, h=1e-6):
    out = []
    for s in SYMBOLS:
        up, down = dict(point), dict(point)
        up[s] += h
        down[s] -= h
        out.append((expr.eval(up) - expr.eval(down)) / (2 * h))
    return np.array(out)


def test_eval_examples():
    assert parse("b^2/(2*L_s)").eval({"b": 2.0, "L_s": 1.0}) == 2.0
    # hand arithmetic: 9 / 300
    assert parse("v^2/theta").eval({"v": 3.0, "theta": 300.0}) == pytest.approx(0.03, rel=1e-15)
    with pytest.raises(DomainError):
        parse("1/theta").eval({"theta": 0.0})
    with pytest.raises(DomainError):
        parse("log(x)").eval({"x": -1.0})
    with pytest.raises(UnboundSymbol):
        parse("a + b").eval({"a": 1.0})


def test_grad_examples():
    assert grad(parse("b_s.x^2/(2*L_s)"), ["b_s.x"], {"b_s.x": 2.0, "L_s": 1.0})[0] == 2.0
    # gas exergy: dH/ds = dE/ds - theta0 where E = s^2 here
    h = parse("s^2 - theta0*s")
    assert grad(h, ["s"], {"s": 3.0, "theta0": 298.15})[0] == pytest.approx(6.0 - 298.15)
    assert list(grad(Const(4.0), ["x", "y"], {"x": 1.0, "y": 2.0})) == [0.0, 0.0]


def test_grad_matches_finite_differences_on_random_expressions():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 100:
        e = random_expr(rng, 4)
        point = {s: float(rng.uniform(-1.5, 1.5)) for s in SYMBOLS}
        g = grad(e, SYMBOLS, point)
        fd = central_difference(e, point)
        assert np.all(np.abs(g - fd) <= 1e-6 * (1 + np.abs(g))), (str(e), point, g, fd)
        checked += 1


def test_compiled_code_agrees_with_tree_evaluation():
    rng = np.random.default_rng(11)
    for _ in range(100):
        e = random_expr(rng, 4)
        point = [float(v) for v in rng.uniform(-1.5, 1.5, 3)]
        bindings = dict(zip(SYMBOLS, point))
        (value,) = compile_many([e], SYMBOLS)(point)
        v, d = compile_grad(e, SYMBOLS, SYMBOLS)(point)
        assert value == pytest.approx(e.eval(bindings), rel=1e-13, abs=1e-13)
        assert v == pytest.approx(value, rel=1e-13, abs=1e-13)
        assert np.allclose(d, grad(e, SYMBOLS, bindings), rtol=1e-12, atol=1e-12)


def test_parity_examples():
    p = {"v": -1, "theta": 1}
    assert infer_parity(parse("-v"), p) == -1
    assert infer_parity(Neg(Var("v")), {"v": -1}) == -1
    assert infer_parity(parse("v^2/theta"), p) == 1
    assert infer_parity(parse("v + theta"), p) is INDETERMINATE
    assert infer_parity(Const(-3.0), {}) == 1
    assert infer_parity(parse("exp(theta)"), p) == 1
    assert infer_parity(parse("exp(v)"), p) is INDETERMINATE


parities = st.sampled_from([1, -1])


@given(parities, parities, parities)
def test_parity_is_multiplicative(px, py, pz):
    table = {"x": px, "y": py, "z": pz}
    rng = np.random.default_rng(px + 2 * py + 4 * pz + 8)
    for _ in range(20):
        a, b = random_expr(rng, 2), random_expr(rng, 2)
        pa, pb = infer_parity(a, table), infer_parity(b, table)
        if pa is not INDETERMINATE and pb is not INDETERMINATE:
            assert infer_parity(Mul(a, b), table) == pa * pb
            assert infer_parity(Div(a, b), table) == pa * pb


def test_parse_round_trip_and_errors():
    for text in ["a + b*c", "-(x - y)^3", "exp(q.x/c) - 1", "1e-3*p.e", "x[1]*2"]:
        e = parse(text)
        assert parse(str(e)) == e
    with pytest.raises(ParseError) as err:
        parse("a + * b")
    assert err.value.pos == 4
    with pytest.raises(ParseError):
        parse("x^1.5")


def test_evaluate_is_deterministic():
    e = parse("exp(x)*log(2 + y)")
    b = {"x": 0.3, "y": 0.7}
    assert evaluate(e, b) == evaluate(e, b) == math.exp(0.3) * math.log(2.7)
