"""Outward-rounded interval arithmetic.

Just enough of an interval library for sound range enclosures of the
expression trees in this package.  Endpoint arithmetic is done in double
precision and then pushed outward with math.nextafter: one ulp for the
correctly-rounded IEEE operations (+ - * /), two ulps for libm calls
(exp, log, sqrt, sin, cos, tan, pow), which are not guaranteed correctly
rounded but are comfortably within one ulp on every libm we target.

Poles are treated as evaluation errors, not infinities: dividing by an
interval containing zero, taking log of an interval reaching 0, or passing
an interval across a tan pole raises PoleError.  Callers that subdivide
(see expressions.eval_interval) catch nothing -- a genuine pole inside a
cell is supposed to surface.
"""

import math

from .errors import PoleError

_HALF_PI = math.pi / 2.0
_TWO_PI = 2.0 * math.pi

# Beyond this magnitude the argument-reduction slack in _contains_angle is
# no longer trivially dominated by the padding, so sin/cos fall back to
# [-1, 1] and tan refuses.
_ANGLE_LIMIT = 1.0e6


def _down(x):
    return math.nextafter(x, -math.inf)


def _up(x):
    return math.nextafter(x, math.inf)


def _down2(x):
    return _down(_down(x))


def _up2(x):
    return _up(_up(x))


def _contains_angle(lo, hi, theta, period):
    """Does [lo, hi] contain theta + k*period for some integer k?

    Conservative: the interval is padded before testing, so a near miss
    counts as containment.  The padding dwarfs the accumulated rounding
    error of float pi as long as |lo|, |hi| <= _ANGLE_LIMIT.
    """
    pad = 1.0e-9 + 1.0e-12 * max(abs(lo), abs(hi))
    k0 = math.floor((lo - pad - theta) / period)
    k1 = math.floor((hi + pad - theta) / period)
    return k1 > k0


class Interval:
    """Closed interval [lo, hi] with outward-rounded arithmetic."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        if hi is None:
            hi = lo
        lo = float(lo)
        hi = float(hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise ValueError("bad interval endpoints [%r, %r]" % (lo, hi))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    def __repr__(self):
        return "Interval(%r, %r)" % (self.lo, self.hi)

    def __eq__(self, other):
        return (isinstance(other, Interval)
                and self.lo == other.lo and self.hi == other.hi)

    def __hash__(self):
        return hash((self.lo, self.hi))

    # ---- set-like queries ------------------------------------------------

    def width(self):
        return self.hi - self.lo

    def mid(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, x):
        return self.lo <= x <= self.hi

    def intersects(self, other):
        return self.lo <= other.hi and other.lo <= self.hi

    def intersect(self, other):
        """Intersection, or None if disjoint."""
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)

    def hull(self, other):
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def split(self):
        m = self.mid()
        return Interval(self.lo, m), Interval(m, self.hi)

    # ---- arithmetic ------------------------------------------------------

    @staticmethod
    def _coerce(x):
        if isinstance(x, Interval):
            return x
        return Interval(float(x))

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __add__(self, other):
        other = self._coerce(other)
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return Interval(_down(self.lo - other.hi), _up(self.hi - other.lo))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        cands = (self.lo * other.lo, self.lo * other.hi,
                 self.hi * other.lo, self.hi * other.hi)
        return Interval(_down(min(cands)), _up(max(cands)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.lo <= 0.0 <= other.hi:
            raise PoleError("division by an interval containing 0: %r" % (other,))
        cands = (self.lo / other.lo, self.lo / other.hi,
                 self.hi / other.lo, self.hi / other.hi)
        return Interval(_down(min(cands)), _up(max(cands)))

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def pow_int(self, n):
        if n != int(n) or n < 0:
            raise ValueError("pow_int needs a non-negative integer, got %r" % (n,))
        n = int(n)
        if n == 0:
            return Interval(1.0)
        if n == 1:
            return self
        a = math.pow(self.lo, n)
        b = math.pow(self.hi, n)
        if n % 2 == 1 or self.lo >= 0.0:
            lo, hi = a, b
        elif self.hi <= 0.0:
            lo, hi = b, a
        else:
            # even power of a sign-straddling interval
            lo, hi = 0.0, max(a, b)
        out_lo = 0.0 if lo == 0.0 else _down2(lo)
        return Interval(out_lo, _up2(hi))

    # ---- elementary functions --------------------------------------------

    def sqrt(self):
        if self.hi < 0.0:
            raise PoleError("sqrt of a negative interval: %r" % (self,))
        # A slightly negative lower bound is overapproximation noise; the
        # true range of sqrt is still contained in [0, sqrt(hi)].
        lo = 0.0 if self.lo <= 0.0 else _down2(math.sqrt(self.lo))
        return Interval(lo, _up2(math.sqrt(self.hi)))

    def exp(self):
        return Interval(_down2(math.exp(self.lo)), _up2(math.exp(self.hi)))

    def log(self):
        if self.lo <= 0.0:
            raise PoleError("log of an interval reaching 0: %r" % (self,))
        return Interval(_down2(math.log(self.lo)), _up2(math.log(self.hi)))

    def sin(self):
        if max(abs(self.lo), abs(self.hi)) > _ANGLE_LIMIT:
            return Interval(-1.0, 1.0)
        a = math.sin(self.lo)
        b = math.sin(self.hi)
        lo = _down2(min(a, b))
        hi = _up2(max(a, b))
        if _contains_angle(self.lo, self.hi, _HALF_PI, _TWO_PI):
            hi = 1.0
        if _contains_angle(self.lo, self.hi, -_HALF_PI, _TWO_PI):
            lo = -1.0
        return Interval(max(lo, -1.0), min(hi, 1.0))

    def cos(self):
        if max(abs(self.lo), abs(self.hi)) > _ANGLE_LIMIT:
            return Interval(-1.0, 1.0)
        a = math.cos(self.lo)
        b = math.cos(self.hi)
        lo = _down2(min(a, b))
        hi = _up2(max(a, b))
        if _contains_angle(self.lo, self.hi, 0.0, _TWO_PI):
            hi = 1.0
        if _contains_angle(self.lo, self.hi, math.pi, _TWO_PI):
            lo = -1.0
        return Interval(max(lo, -1.0), min(hi, 1.0))

    def tan(self):
        if max(abs(self.lo), abs(self.hi)) > _ANGLE_LIMIT:
            raise PoleError("tan argument too large to exclude poles: %r" % (self,))
        if _contains_angle(self.lo, self.hi, _HALF_PI, math.pi):
            raise PoleError("tan pole inside %r" % (self,))
        return Interval(_down2(math.tan(self.lo)), _up2(math.tan(self.hi)))
