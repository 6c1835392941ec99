"""Interval arithmetic: containment under every primitive operation."""

import math

import numpy as np
import pytest

from schwarzscope import Interval, PoleError


def _rand_interval(rng, lo=-2.0, hi=2.0, min_w=1e-9):
    a = float(rng.uniform(lo, hi))
    b = a + float(rng.uniform(min_w, 0.5))
    return Interval(a, b)


def _points(rng, iv, n=5):
    return [float(x) for x in rng.uniform(iv.lo, iv.hi, size=n)]


def test_binary_ops_contain_pointwise(rng):
    for _ in range(250):
        u = _rand_interval(rng)
        v = _rand_interval(rng)
        sums = u + v
        diffs = u - v
        prods = u * v
        for x in _points(rng, u, 3):
            for y in _points(rng, v, 3):
                assert sums.lo <= x + y <= sums.hi
                assert diffs.lo <= x - y <= diffs.hi
                assert prods.lo <= x * y <= prods.hi


def test_division_containment_and_pole(rng):
    for _ in range(200):
        u = _rand_interval(rng)
        v = _rand_interval(rng, lo=0.5, hi=3.0)
        q = u / v
        for x in _points(rng, u, 3):
            for y in _points(rng, v, 3):
                assert q.lo <= x / y <= q.hi
    with pytest.raises(PoleError):
        Interval(1.0, 2.0) / Interval(-0.5, 0.5)


def test_unary_functions_contain_pointwise(rng):
    for _ in range(200):
        ## keep below pi/2 so tan stays pole-free
        u = _rand_interval(rng, lo=0.05, hi=1.0)
        for name in ("sqrt", "exp", "log", "sin", "cos", "tan"):
            enc = getattr(u, name)()
            for x in _points(rng, u):
                val = getattr(math, name)(x)
                assert enc.lo <= val <= enc.hi, (name, x, enc)


def test_integer_powers(rng):
    for _ in range(200):
        u = _rand_interval(rng)
        for n in (2, 3, 4):
            enc = u.pow_int(n)
            for x in _points(rng, u):
                assert enc.lo <= x ** n <= enc.hi
    ## even power of a sign-straddling interval bottoms out at zero
    sq = Interval(-1.0, 2.0).pow_int(2)
    assert sq.lo == 0.0 and sq.hi >= 4.0


def test_trig_across_extrema():
    ## sin over [0, pi] must reach its max 1 despite neither endpoint doing so
    enc = Interval(0.0, math.pi).sin()
    assert enc.hi >= 1.0
    assert enc.lo <= 0.0
    enc = Interval(-0.1, 2 * math.pi + 0.1).cos()
    assert enc.hi >= 1.0 and enc.lo <= -1.0


def test_tan_pole_raises():
    with pytest.raises(PoleError):
        Interval(1.5, 1.7).tan()


def test_log_nonpositive_raises():
    with pytest.raises(PoleError):
        Interval(-1.0, 0.5).log()
    with pytest.raises(PoleError):
        Interval(-2.0, -1.0).sqrt()


def test_hull_intersect_split():
    u = Interval(0.0, 1.0)
    v = Interval(0.5, 2.0)
    assert u.hull(v) == Interval(0.0, 2.0)
    assert u.intersects(v)
    w = u.intersect(v)
    assert w.lo == 0.5 and w.hi == 1.0
    a, b = u.split()
    assert a.hi == b.lo and a.lo == 0.0 and b.hi == 1.0


def test_outward_rounding_strictness():
    ## enclosures never shrink below the exact value even when the float
    ## operation rounds toward it
    third = Interval(1.0, 1.0) / Interval(3.0, 3.0)
    assert third.lo <= 1.0 / 3.0 <= third.hi
    assert third.lo < third.hi  # outward rounding widened the point
