"""Third-order jets against finite differences and composition rules."""

import math

import numpy as np
import pytest

from schwarzscope import Jet3, parse_map
from schwarzscope.expressions import eval_jet, parse_expr


def _fd3(f, x, h=1e-4):
    return (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h)) / (2 * h ** 3)


def test_polynomial_jets_exact():
    m = parse_map("x^3 + 2*x^2 + x + 1", (0.0, 2.0))
    j = m.eval_jet(0.7)
    assert j.v0 == pytest.approx(0.7 ** 3 + 2 * 0.49 + 1.7)
    assert j.v1 == pytest.approx(3 * 0.49 + 4 * 0.7 + 1)
    assert j.v2 == pytest.approx(6 * 0.7 + 4)
    assert j.v3 == pytest.approx(6.0)


def test_transcendental_jets_match_fd():
    for src, x in (("tan(x)", 0.6), ("exp(x)", 0.3), ("log(x)", 0.8),
                   ("sin(x)*cos(x)", 1.1), ("sqrt(x)", 0.5),
                   ("exp(0.4*log(1 - x^4))", 0.6)):
        ast = parse_expr(src)
        jet = eval_jet(ast, Jet3.variable(x), {})
        f = lambda t: eval_jet(ast, Jet3.variable(t), {}).v0
        h = 1e-5
        assert jet.v1 == pytest.approx((f(x + h) - f(x - h)) / (2 * h),
                                       rel=1e-7, abs=1e-8)
        assert jet.v2 == pytest.approx((f(x + h) - 2 * f(x) + f(x - h)) / h ** 2,
                                       rel=1e-4, abs=1e-4)
        assert jet.v3 == pytest.approx(_fd3(f, x), rel=1e-4, abs=1e-3)


def test_division_and_power_jets():
    ast = parse_expr("(x^2 + 1)/(2 - x)")
    x = 0.4
    jet = eval_jet(ast, Jet3.variable(x), {})
    f = lambda t: (t * t + 1) / (2 - t)
    h = 1e-5
    assert jet.v0 == pytest.approx(f(x))
    assert jet.v1 == pytest.approx((f(x + h) - f(x - h)) / (2 * h), rel=1e-8)


def test_chain_rule_through_substitution():
    ## jet of f(g(x)) must equal the jet algebra applied to g's jet
    f = parse_expr("sin(x)")
    gx = eval_jet(parse_expr("x^2 + 1/2"), Jet3.variable(0.3), {})
    comp = eval_jet(f, gx, {})
    u = 0.3 ** 2 + 0.5
    assert comp.v0 == pytest.approx(math.sin(u))
    assert comp.v1 == pytest.approx(math.cos(u) * 0.6)
    assert comp.v2 == pytest.approx(-math.sin(u) * 0.36 + math.cos(u) * 2.0)


def test_constant_and_variable_jets():
    c = Jet3.constant(5.0)
    assert c.as_tuple() == (5.0, 0.0, 0.0, 0.0)
    v = Jet3.variable(2.0)
    assert v.as_tuple() == (2.0, 1.0, 0.0, 0.0)
