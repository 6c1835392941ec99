"""Critical points, critical intervals, periodic orbits, Singer-type census.

Everything here is plain floating-point dynamics: dense grids, bisection,
orbit iteration.  The census cross-checks the structural consequences of an
eventual negative Schwarzian (every attracting orbit drags a critical point
or a boundary point into its basin; no interior neutral orbits), so any
violation it reports is evidence *against* that property for the map at
hand -- see the certification modules for the sound direction.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import FitError, MapError

_DEF_GRID = 4096
_ROOT_TOL = 1e-12
_NEUTRAL_BAND = 1e-6


@dataclass(frozen=True)
class CriticalPoint:
    x: float
    order: Optional[int] = None       # l: |f'(x)| ~ L |x - c|^(l-1) near c
    scale: Optional[float] = None     # the nonflatness constant L
    fit_residual: Optional[float] = None


@dataclass(frozen=True)
class PeriodicOrbit:
    points: tuple
    period: int
    multiplier: float
    classification: str               # "attracting" | "repelling" | "neutral"

    def distance_to(self, x):
        return min(abs(x - p) for p in self.points)


@dataclass
class CriticalIntervalResult:
    lo: float
    hi: float
    converged: bool
    steps: int
    invariant: bool


@dataclass
class CensusReport:
    criticals: list
    orbits: list
    attracting_count: int
    interior_neutral_count: int
    boundary_neutral_count: int
    bound: int
    basin_evidence: list
    lemma_endpoint_checks: list
    violations: list
    flags: list


def _bisect_root(fn, a, b, fa, fb, tol):
    """Standard bisection; fa, fb must have opposite signs."""
    for _ in range(200):
        if b - a <= tol:
            break
        mid = 0.5 * (a + b)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fa < 0) != (fm < 0):
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def find_critical_points(m, grid=_DEF_GRID, tol=_ROOT_TOL):
    """Interior zeros of f', located by sign changes on a dense grid plus
    bisection.  Kinks of piecewise maps (sign change of f' with no zero)
    are filtered out by checking |f'| right next to the candidate.

    A segment where f' vanishes identically (a constant piece) contains no
    sign change and contributes nothing here; maps with flat segments fall
    outside the finite-critical-set setting that the order fit and the
    census bound rely on.
    """
    lo, hi = m.domain
    xs = np.linspace(lo, hi, grid + 1)
    d = m.eval_array(xs, 1)
    dscale = float(np.nanmax(np.abs(d))) or 1.0
    dm = m.derivative(1)

    cands = []
    for i in range(len(xs) - 1):
        a, b = d[i], d[i + 1]
        if a == 0.0:
            ## An exact zero sample counts only when isolated.  A zero with
            ## a zero neighbour sits on a flat run, and a flat run is not a
            ## sign change.
            if lo < xs[i] < hi and d[i - 1] != 0.0 and b != 0.0:
                cands.append(xs[i])
            continue
        if b == 0.0 or not np.isfinite(a) or not np.isfinite(b):
            continue
        if (a < 0) != (b < 0):
            cands.append(_bisect_root(dm, xs[i], xs[i + 1], a, b, tol))

    width = hi - lo
    out = []
    for c in sorted(cands):
        c = float(c)
        if out and c - out[-1] < 1e-10 * width:
            continue
        h = 1e-9 * width
        near = min(abs(dm(min(c + h, hi))), abs(dm(max(c - h, lo))))
        if near > 1e-5 * dscale:
            continue          # derivative jumps through zero: a kink, not a zero
        out.append(c)
    return [CriticalPoint(x=c) for c in out]


def critical_order(m, c, j_lo=8, j_hi=24):
    """Order l and nonflatness scale L of a critical point from a dyadic
    ladder: fit log|f'(c +/- 2^-j)| against log 2^-j, slope = l - 1,
    intercept = log L.  A flat point (all derivatives vanish) produces a
    strongly curved ladder and raises FitError.
    """
    lo, hi = m.domain
    dm = m.derivative(1)
    hs, vals = [], []
    for j in range(j_lo, j_hi + 1):
        h = 2.0 ** (-j)
        for x in (c - h, c + h):
            if lo <= x <= hi:
                v = abs(dm(x))
                if v > 0.0 and np.isfinite(v):
                    hs.append(h)
                    vals.append(v)
    if len(hs) < 6:
        raise FitError("too few usable ladder points around c=%r" % (c,))
    logs_h = np.log(np.asarray(hs))
    logs_v = np.log(np.asarray(vals))
    ## The fit is asymptotic, so when the coarse rungs sit outside the
    ## power law's reach (a large third derivative shows up as residual at
    ## h = 2^-8) drop them and refit from the fine end.  A genuinely flat
    ## point never settles: its ladder is curved at every scale.
    while True:
        A = np.column_stack([logs_h, np.ones_like(logs_h)])
        coef, *_ = np.linalg.lstsq(A, logs_v, rcond=None)
        resid = float(np.max(np.abs(A @ coef - logs_v)))
        if resid <= 0.05:
            break
        keep = logs_h < np.max(logs_h) - 1e-12
        if np.count_nonzero(keep) < 6:
            break
        logs_h, logs_v = logs_h[keep], logs_v[keep]
    slope, intercept = float(coef[0]), float(coef[1])
    if resid > 0.05:
        raise FitError("power-law fit did not converge at c=%r "
                       "(residual %.3g); flat critical point suspected"
                       % (c, resid))
    ell = int(round(slope)) + 1
    if abs(slope - (ell - 1)) > 0.1 or ell < 2:
        raise FitError("non-integer local order %.4f at c=%r" % (slope + 1, c))
    return CriticalPoint(x=c, order=ell, scale=float(np.exp(intercept)),
                         fit_residual=resid)


def orbit_array(m, x0, n):
    """Orbit x0, f(x0), ..., f^n(x0) as a numpy array of length n+1."""
    out = np.empty(n + 1)
    x = float(x0)
    out[0] = x
    for i in range(1, n + 1):
        x = m(x)
        out[i] = x
    return out


def critical_interval(m, horizon=20000):
    """Smallest observed invariant interval containing the forward images
    of the critical points.

    Runs every critical orbit for `horizon` steps, tracking the running
    min/max of the points from f(c) on.  Converged when the hull is
    unchanged over the last quarter of the horizon; `invariant` is a sound
    enclosure check f([a,b]) within [a,b] up to natural-extension slack.
    Maps with no critical points fall back to the full domain.
    """
    lo, hi = m.domain
    crits = find_critical_points(m)
    if not crits:
        return CriticalIntervalResult(lo, hi, False, 0, True)
    a, b = np.inf, -np.inf
    last_change = 0
    for cp in crits:
        x = cp.x
        for n in range(1, horizon + 1):
            x = m(x)
            if x < a:
                a, last_change = x, max(last_change, n)
            if x > b:
                b, last_change = x, max(last_change, n)
    converged = last_change <= horizon - horizon // 4
    depth = 10
    enc = m.eval_interval((a, b), 0, depth=depth)
    xs = np.linspace(a, b, 1025)
    lip = float(np.max(np.abs(m.eval_array(xs, 1))))
    slack = 2.0 * (b - a) / 2 ** depth * max(lip, 1.0) + 1e-9 * (hi - lo)
    invariant = enc.lo >= a - slack and enc.hi <= b + slack
    return CriticalIntervalResult(a, b, converged, horizon, invariant)


def _iterate_fn(m, p):
    def fp(x):
        for _ in range(p):
            x = m(x)
        return x
    return fp


def find_periodic_orbits(m, p_max=8, grid_base=12, neutral_band=_NEUTRAL_BAND):
    """All periodic orbits of period <= p_max found by root isolation of
    f^p(x) - x on a grid of 2^(grid_base + p) points per period.

    Orbits are reported once, at their minimal period, with the orbit
    multiplier (f^p)'(x) = prod f'(x_i) and a classification using a
    neutrality band |multiplier| in [1 - band, 1 + band].
    """
    if p_max > 12:
        raise MapError("p_max capped at 12 (grid cost is 2^(12+p))")
    lo, hi = m.domain
    width = hi - lo
    dm = m.derivative(1)
    orbits = []

    for p in range(1, p_max + 1):
        n_grid = 2 ** (grid_base + p)
        xs = np.linspace(lo, hi, n_grid + 1)
        ys = xs.copy()
        for _ in range(p):
            ys = m.eval_array(ys)
        diff = ys - xs
        sgn = np.sign(diff)
        fp = _iterate_fn(m, p)

        roots = []
        zero_idx = np.flatnonzero(diff == 0.0)
        roots.extend(xs[zero_idx])
        flips = np.flatnonzero((sgn[:-1] * sgn[1:]) < 0)
        if len(flips) > 20000:
            raise MapError("period-%d root isolation exceeded resolution" % p)
        for i in flips:
            g = lambda x: fp(x) - x
            roots.append(_bisect_root(g, xs[i], xs[i + 1],
                                      diff[i], diff[i + 1], 1e-14 * width))

        roots = sorted(float(r) for r in roots)
        kept = []
        for r in roots:
            if kept and r - kept[-1] < 1e-9 * width:
                continue
            kept.append(r)

        for x0 in kept:
            pts = [x0]
            xk = x0
            minimal = True
            for q in range(1, p):
                xk = m(xk)
                pts.append(xk)
                if p % q == 0 and abs(_iterate_fn(m, q)(x0) - x0) < 1e-8 * width:
                    minimal = False
                    break
            if not minimal:
                continue
            if any(o.period == p and o.distance_to(x0) < 1e-7 * width
                   for o in orbits):
                continue
            mult = 1.0
            for pt in pts:
                mult *= dm(pt)
            am = abs(mult)
            if am < 1.0 - neutral_band:
                cls = "attracting"
            elif am > 1.0 + neutral_band:
                cls = "repelling"
            else:
                cls = "neutral"
            orbits.append(PeriodicOrbit(tuple(pts), p, mult, cls))
    return orbits


def preimages(m, y, grid=_DEF_GRID, crits=None):
    """All solutions of f(x) = y, by bisection on the monotone spans cut
    out by critical points and piece boundaries."""
    lo, hi = m.domain
    if crits is None:
        crits = [cp.x for cp in find_critical_points(m, grid)]
    cuts = sorted({lo, hi} | set(crits) | {p.hi for p in m.pieces[:-1]})
    out = []
    for a, b in zip(cuts, cuts[1:]):
        fa, fb = m(a) - y, m(b) - y
        if fa == 0.0:
            out.append(a)
            continue
        if fb == 0.0:
            if b == hi:
                out.append(b)
            continue
        if (fa < 0) != (fb < 0):
            out.append(_bisect_root(lambda x: m(x) - y, a, b, fa, fb,
                                    1e-14 * (hi - lo)))
    dedup = []
    for r in sorted(out):
        if not dedup or r - dedup[-1] > 1e-10 * (hi - lo):
            dedup.append(r)
    return dedup


def critical_points_of_iterate(m, k, grid=_DEF_GRID):
    """C(f^k) = union over i < k of f^-i(C(f)), as sorted floats."""
    base = [cp.x for cp in find_critical_points(m, grid)]
    all_pts = set(base)
    level = list(base)
    for _ in range(k - 1):
        nxt = []
        for y in level:
            nxt.extend(preimages(m, y, grid, crits=base))
        level = nxt
        all_pts.update(level)
    lo, hi = m.domain
    dedup = []
    for r in sorted(all_pts):
        if not dedup or r - dedup[-1] > 1e-10 * (hi - lo):
            dedup.append(r)
    return dedup


def singer_census(m, p_max=8, steps=100000, burn_in=1000, match_tol=None,
                  orbit_horizon=10000):
    """Count attracting and interior-neutral periodic orbits against the
    bound |C(f)| + 2, with basin evidence for each attracting orbit.

    Seeds (critical points and the two domain endpoints) are iterated up to
    `steps` times; after `burn_in` steps a seed is credited to the first
    attracting orbit it approaches within match_tol.  An attracting orbit
    with no credited seed is a violation, as is any interior neutral orbit
    and a count above the bound.  Neutral orbits touching the boundary are
    flagged informationally, not counted as violations.
    """
    lo, hi = m.domain
    width = hi - lo
    if match_tol is None:
        match_tol = 1e-6 * width
    crits = find_critical_points(m)
    orbits = find_periodic_orbits(m, p_max)

    attracting = [o for o in orbits if o.classification == "attracting"]
    neutral = [o for o in orbits if o.classification == "neutral"]
    boundary_neutral = [o for o in neutral
                        if any(min(abs(p - lo), abs(p - hi)) < match_tol
                               for p in o.points)]
    interior_neutral = [o for o in neutral if o not in boundary_neutral]

    bound = len(crits) + 2
    count = len(attracting) + len(interior_neutral)

    seeds = [("critical", cp.x) for cp in crits]
    seeds += [("boundary", lo), ("boundary", hi)]

    att_pts = [np.asarray(o.points) for o in attracting]
    evidence = []
    credited = set()
    for kind, x0 in seeds:
        x = x0
        hit = None
        for n in range(1, steps + 1):
            x = m(x)
            if n <= burn_in:
                continue
            for oi, pts in enumerate(att_pts):
                if np.min(np.abs(pts - x)) < match_tol:
                    hit = oi
                    break
            if hit is not None:
                break
        if hit is not None:
            evidence.append({"orbit": hit, "seed_kind": kind, "seed": x0,
                             "steps": n})
            credited.add(hit)

    violations = []
    flags = []
    if not crits:
        ## The audited consequences presuppose a nonempty critical set;
        ## with none found the bound degenerates to 2 and the census is
        ## only a formality.
        flags.append({"kind": "empty_critical_set"})
    for oi, o in enumerate(attracting):
        if oi not in credited:
            violations.append({
                "kind": "attracting_orbit_without_basin_evidence",
                "orbit": [float(p) for p in o.points], "period": o.period})
    for o in interior_neutral:
        violations.append({"kind": "interior_neutral_orbit",
                           "orbit": [float(p) for p in o.points],
                           "period": o.period})
    for o in boundary_neutral:
        flags.append({"kind": "boundary_neutral_orbit",
                      "orbit": [float(p) for p in o.points],
                      "period": o.period})
    if count > bound:
        violations.append({"kind": "count_exceeds_bound",
                           "count": count, "bound": bound})

    # endpoint structure of the critical interval
    lemma_checks = []
    ci = critical_interval(m)
    if crits and ci.converged:
        crit_orbits = [orbit_array(m, cp.x, orbit_horizon) for cp in crits]
        per12 = [o for o in orbits
                 if o.period <= 2 and o.classification in ("attracting", "neutral")]
        for endpoint in (ci.lo, ci.hi):
            how = None
            if any(o.distance_to(endpoint) < match_tol for o in per12):
                how = "attracting_or_neutral_point_of_period_le_2"
            if how is None:
                for co in crit_orbits:
                    if np.min(np.abs(co - endpoint)) < match_tol:
                        how = "on_critical_orbit"
                        break
            if how is None:
                for co in crit_orbits:
                    tail = co[-50:]
                    if np.max(np.abs(tail - endpoint)) < 10 * match_tol:
                        how = "limit_of_critical_orbit"
                        break
            lemma_checks.append({"endpoint": endpoint,
                                 "satisfied": how is not None, "how": how})
            if how is None:
                flags.append({"kind": "critical_interval_endpoint_unexplained",
                              "endpoint": endpoint})

    return CensusReport(
        criticals=crits, orbits=orbits,
        attracting_count=len(attracting),
        interior_neutral_count=len(interior_neutral),
        boundary_neutral_count=len(boundary_neutral),
        bound=bound, basin_evidence=evidence,
        lemma_endpoint_checks=lemma_checks,
        violations=violations, flags=flags)
