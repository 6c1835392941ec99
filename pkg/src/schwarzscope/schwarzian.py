"""Schwarzian derivative values, iterate convexity scans, cross ratios.

Two views of "f^k has negative Schwarzian" live here.  The formula view
evaluates S(f)(x) = f'''/f' - (3/2)(f''/f')^2 through jets, with the
iterate value assembled by the cocycle identity

    S(f^k)(x) = sum_{i<k} ((f^i)'(x))^2 * S(f)(f^i(x)).

The geometric view scans |(f^k)'|^(-1/2) for strict convexity on the open
intervals free of critical points of f^k, which is equivalent to S(f^k) < 0
there but only needs two derivatives of f.  For maps that are merely C^2
at piece joints the scan is the primary criterion; the formula applies on
piece interiors regardless.

A convexity *failure* is only reported when the offending second difference
sits on a span that interval arithmetic confirms is free of critical points
of f^k; otherwise the scan is inconclusive there.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GuardError, MapError
from .expressions import MapExpr, Piece, subst, to_text
from .intervals import Interval
from .orbits import critical_points_of_iterate

_GUARD_FRAC = 1e-7     # |f'| threshold, as a fraction of the domain width
_MARGIN_FRAC = 1e-12   # strictness margin for second differences


@dataclass(frozen=True)
class SchwarzValue:
    x: float
    k: int
    value: float
    orbit_clear: bool   # no orbit point hit the derivative guard


@dataclass
class ConvexityReport:
    k: int
    verdict: str                # "pass" | "fail" | "inconclusive"
    witnesses: list
    scanned_intervals: list
    margin: float
    guard: float


def _jet_schwarzian(jet):
    return jet.v3 / jet.v1 - 1.5 * (jet.v2 / jet.v1) ** 2


def schwarzian_at(m, x, guard_frac=_GUARD_FRAC):
    """S(f)(x) via a third-order jet.  Raises GuardError within the
    derivative guard of a critical point, where the value is meaningless
    (S blows up like -(3/2)(x-c)^-2)."""
    lo, hi = m.domain
    jet = m.eval_jet(x)
    if abs(jet.v1) <= guard_frac * (hi - lo):
        raise GuardError("|f'(%r)|=%.3g inside the critical-point guard"
                         % (x, abs(jet.v1)))
    return _jet_schwarzian(jet)


def schwarzian_iterate(m, x, k, guard_frac=_GUARD_FRAC):
    """S(f^k)(x) assembled along the orbit by the cocycle identity.

    If some orbit point lands inside the derivative guard the value is
    still returned (the sum may be dominated by a near-singular term) but
    orbit_clear is False.  An exact zero derivative raises GuardError.
    """
    lo, hi = m.domain
    guard = guard_frac * (hi - lo)
    y = float(x)
    dacc = 1.0
    total = 0.0
    clear = True
    for _ in range(k):
        jet = m.eval_jet(y)
        if jet.v1 == 0.0:
            raise GuardError("orbit hit an exact critical point at %r" % (y,))
        if abs(jet.v1) <= guard:
            clear = False
        total += dacc * dacc * _jet_schwarzian(jet)
        dacc *= jet.v1
        y = jet.v0
    return SchwarzValue(x=float(x), k=k, value=total, orbit_clear=clear)


def iterate_symbolic(m, k):
    """MapExpr of f^k by symbolic substitution.  Single-piece maps only:
    composing piecewise maps symbolically would need image tracking."""
    if len(m.pieces) != 1:
        raise MapError("symbolic iteration needs a single-piece map")
    ast = m.pieces[0].ast
    out = ast
    for _ in range(k - 1):
        out = subst(out, ast)
    lo, hi = m.domain
    return MapExpr((lo, hi), [Piece(lo, hi, out, to_text(out))], m.params)


def iterate_derivative_array(m, xs, k):
    """(f^k)'(xs) by the chain rule, vectorized."""
    y = np.asarray(xs, dtype=float).copy()
    dacc = np.ones_like(y)
    for _ in range(k):
        dacc *= m.eval_array(y, 1)
        y = m.eval_array(y)
    return dacc


def _iterate_deriv_enclosure(m, span, k, depth=6):
    """Sound enclosure of (f^k)' over a span: product of f' enclosures along
    the interval orbit, clipped to the domain (valid for self-maps)."""
    lo, hi = m.domain
    box = Interval(max(span[0], lo), min(span[1], hi))
    prod = Interval(1.0)
    dom = Interval(lo, hi)
    for _ in range(k):
        prod = prod * m.eval_interval(box, 1, depth=depth)
        img = m.eval_interval(box, 0, depth=depth)
        clipped = img.intersect(dom)
        if clipped is None:
            raise MapError("orbit enclosure left the domain")
        box = clipped
    return prod


def convexity_profile(m, k, grid=4096, guard_frac=_GUARD_FRAC):
    """The scanned spans of a convexity check, with the profile
    g = |(f^k)'|^(-1/2) sampled on each.  Returns [(a, b, xs, g), ...]."""
    lo, hi = m.domain
    guard = guard_frac * (hi - lo)
    crit_k = critical_points_of_iterate(m, k)
    cuts = [lo] + sorted(crit_k) + [hi]
    spans = []
    for i in range(len(cuts) - 1):
        a, b = cuts[i], cuts[i + 1]
        if i > 0:
            a += guard
        if i < len(cuts) - 2:
            b -= guard
        if b - a > 4 * guard:
            spans.append((a, b))
    out = []
    for a, b in spans:
        xs = np.linspace(a, b, grid)
        with np.errstate(all="ignore"):
            g = np.abs(iterate_derivative_array(m, xs, k)) ** -0.5
        out.append((a, b, xs, g))
    return out


def convexity_scan(m, k, grid=4096, guard_frac=_GUARD_FRAC,
                   margin_frac=_MARGIN_FRAC, depth=6):
    """Strict-convexity scan of |(f^k)'|^(-1/2) between critical points
    of f^k.

    Second differences of the sampled profile must clear a strictness
    margin of margin_frac * median|g| on every span.  A non-positive
    second difference is a genuine failure witness only after interval
    arithmetic verifies the span (or a window around the witness) is free
    of critical points of f^k; otherwise that span is inconclusive.
    """
    lo, hi = m.domain
    guard = guard_frac * (hi - lo)
    profile = convexity_profile(m, k, grid, guard_frac)
    witnesses = []
    scanned = []
    margin_used = 0.0
    any_inconclusive = False

    for a, b, xs, g in profile:
        scanned.append((a, b))
        if not np.all(np.isfinite(g)):
            any_inconclusive = True
            continue
        d2 = g[2:] - 2.0 * g[1:-1] + g[:-2]
        margin = margin_frac * float(np.median(np.abs(g)))
        margin_used = max(margin_used, margin)
        worst = int(np.argmin(d2))
        if d2[worst] > margin:
            continue
        if d2[worst] <= 0.0:
            # candidate failure: confirm no critical point of f^k nearby
            verified = False
            try:
                enc = _iterate_deriv_enclosure(m, (a, b), k, depth)
                if not enc.contains(0.0):
                    verified = True
                else:
                    window = (xs[max(worst - 1, 0)],
                              xs[min(worst + 3, len(xs) - 1)])
                    enc = _iterate_deriv_enclosure(m, window, k, depth + 2)
                    verified = not enc.contains(0.0)
            except MapError:
                verified = False
            witnesses.append({
                "x": float(xs[worst + 1]),
                "second_difference": float(d2[worst]),
                "span": (a, b),
                "critical_free_verified": verified,
            })
            if not verified:
                any_inconclusive = True
        else:
            # positive but under the margin: not strict enough to pass
            any_inconclusive = True

    if any(w["critical_free_verified"] for w in witnesses):
        verdict = "fail"
    elif any_inconclusive or witnesses:
        verdict = "inconclusive"
    else:
        verdict = "pass"
    return ConvexityReport(k=k, verdict=verdict, witnesses=witnesses,
                           scanned_intervals=scanned, margin=margin_used,
                           guard=guard)


# ---------------------------------------------------------------------------
# Cross ratios
# ---------------------------------------------------------------------------

def cross_ratio(U, V):
    """CR(U, V) = |U||V| / (|L||R|) for U strictly inside V, where L and R
    are the left and right components of V minus U."""
    u1, u2 = U
    v1, v2 = V
    if not (v1 < u1 < u2 < v2):
        raise MapError("need v1 < u1 < u2 < v2, got U=%r V=%r" % (U, V))
    return ((u2 - u1) * (v2 - v1)) / ((u1 - v1) * (v2 - u2))


def cross_ratio_expansion(m, U, V, depth=6):
    """(CR before, CR after) for the images under f, with a monotonicity
    check of f on V via a sound derivative enclosure."""
    v1, v2 = V
    enc = m.eval_interval((v1, v2), 1, depth=depth)
    if enc.contains(0.0):
        raise MapError("f is not verifiably monotone on V=%r" % (V,))
    before = cross_ratio(U, V)
    fu = sorted((m(U[0]), m(U[1])))
    fv = sorted((m(V[0]), m(V[1])))
    after = cross_ratio(tuple(fu), tuple(fv))
    return before, after
