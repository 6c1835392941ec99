"""Third-order jet (truncated Taylor) arithmetic.

A Jet3 carries (f, f', f'', f''') at a point and propagates them through
arithmetic and the elementary functions, which is exactly what the
Schwarzian derivative needs.  Components may be floats or numpy arrays of
equal shape; the formulas are plain arithmetic, so both work unchanged.

Composition with a scalar function g uses the order-3 Faa di Bruno rules:

    r0 = g(u0)
    r1 = g1 u1
    r2 = g1 u2 + g2 u1^2
    r3 = g1 u3 + 3 g2 u1 u2 + g3 u1^3
"""

import math


def _sin(x):
    return math.sin(x) if isinstance(x, float) else _np().sin(x)


def _cos(x):
    return math.cos(x) if isinstance(x, float) else _np().cos(x)


def _np():
    import numpy
    return numpy


class Jet3:
    __slots__ = ("v0", "v1", "v2", "v3")

    def __init__(self, v0, v1=0.0, v2=0.0, v3=0.0):
        self.v0 = v0
        self.v1 = v1
        self.v2 = v2
        self.v3 = v3

    @staticmethod
    def variable(x):
        """The identity jet at x: d/dx of x is 1."""
        return Jet3(x, 1.0, 0.0, 0.0)

    @staticmethod
    def constant(c):
        return Jet3(c, 0.0, 0.0, 0.0)

    def as_tuple(self):
        return (self.v0, self.v1, self.v2, self.v3)

    def __repr__(self):
        return "Jet3(%r, %r, %r, %r)" % self.as_tuple()

    # ---- ring operations ---------------------------------------------------

    @staticmethod
    def _coerce(x):
        if isinstance(x, Jet3):
            return x
        return Jet3.constant(x)

    def __neg__(self):
        return Jet3(-self.v0, -self.v1, -self.v2, -self.v3)

    def __add__(self, o):
        o = self._coerce(o)
        return Jet3(self.v0 + o.v0, self.v1 + o.v1,
                    self.v2 + o.v2, self.v3 + o.v3)

    __radd__ = __add__

    def __sub__(self, o):
        o = self._coerce(o)
        return Jet3(self.v0 - o.v0, self.v1 - o.v1,
                    self.v2 - o.v2, self.v3 - o.v3)

    def __rsub__(self, o):
        return self._coerce(o) - self

    def __mul__(self, o):
        o = self._coerce(o)
        a0, a1, a2, a3 = self.v0, self.v1, self.v2, self.v3
        b0, b1, b2, b3 = o.v0, o.v1, o.v2, o.v3
        return Jet3(a0 * b0,
                    a1 * b0 + a0 * b1,
                    a2 * b0 + 2.0 * a1 * b1 + a0 * b2,
                    a3 * b0 + 3.0 * a2 * b1 + 3.0 * a1 * b2 + a0 * b3)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = self._coerce(o)
        u = o.v0
        # reciprocal jet of o, then multiply
        inv = Jet3._compose(o, 1.0 / u, -1.0 / u ** 2, 2.0 / u ** 3, -6.0 / u ** 4)
        return self * inv

    def __rtruediv__(self, o):
        return self._coerce(o) / self

    def pow_int(self, n):
        if n != int(n) or n < 0:
            raise ValueError("pow_int needs a non-negative integer, got %r" % (n,))
        n = int(n)
        if n == 0:
            return Jet3.constant(self.v0 * 0.0 + 1.0)
        out = self
        for _ in range(n - 1):
            out = out * self
        return out

    # ---- composition with scalar functions ----------------------------------

    @staticmethod
    def _compose(u, g0, g1, g2, g3):
        u1, u2, u3 = u.v1, u.v2, u.v3
        return Jet3(g0,
                    g1 * u1,
                    g1 * u2 + g2 * u1 * u1,
                    g1 * u3 + 3.0 * g2 * u1 * u2 + g3 * u1 * u1 * u1)

    def sqrt(self):
        s = self.v0 ** 0.5
        return Jet3._compose(self, s, 0.5 / s, -0.25 / (s * self.v0),
                             0.375 / (s * self.v0 * self.v0))

    def exp(self):
        e = _np().exp(self.v0) if not isinstance(self.v0, float) else math.exp(self.v0)
        return Jet3._compose(self, e, e, e, e)

    def log(self):
        u = self.v0
        lg = _np().log(u) if not isinstance(u, float) else math.log(u)
        return Jet3._compose(self, lg, 1.0 / u, -1.0 / u ** 2, 2.0 / u ** 3)

    def sin(self):
        s, c = _sin(self.v0), _cos(self.v0)
        return Jet3._compose(self, s, c, -s, -c)

    def cos(self):
        s, c = _sin(self.v0), _cos(self.v0)
        return Jet3._compose(self, c, -s, -c, s)

    def tan(self):
        t = _np().tan(self.v0) if not isinstance(self.v0, float) else math.tan(self.v0)
        sec2 = 1.0 + t * t
        # d/dx tan = sec^2, then differentiate sec^2 = 1 + tan^2 twice more
        g2 = 2.0 * t * sec2
        g3 = 2.0 * sec2 * sec2 + 4.0 * t * t * sec2
        return Jet3._compose(self, t, sec2, g2, g3)
