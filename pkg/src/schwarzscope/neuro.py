"""Synthetic first-return family: a steep interval fold with a flat-ish
second branch, its bifurcation landmarks, and parameter hunting for orbits
that land on the repelling fixed point.

The family on [0, 1] is, with u = x/d and fixed shape constants,

    branch 1 (0 <= x < d):   F(x) = eps + s*d*u*(1 - u^4)^0.4 / (1 - delta*u^4)
    branch 2 (d <= x <= 1):  F(x) = v,   v = min(w, 0.95*F(c))

so branch 1 rises with slope s = 0.98 at 0, has a single interior critical
point c of order 2 with closed form, and its slope blows down like
-(const)/(1 - delta) * (1 - u^4)^(-0.6) toward the discontinuity at d.
The piece past d is constant, pinned strictly below the critical value.

Landmark parameters: delta_0 (fixed point meets the critical point),
delta_n (fixed-point multiplier passes -1), delta_b (critical value reaches
the discontinuity).  Between delta_0 and delta_b the critical orbit stays
left of d, so everything below is independent of the second branch.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MapError
from .expressions import MapExpr, parse_expr, simplify, subst, to_text
from .orbits import critical_order

_EPS = 0.01        # vertical offset; keeps 0 off the fixed-point set
_ETA = 0.02        # 1 - slope at the left edge
_GAMMA = 0.4       # fold exponent; order-2 critical point, steep edge
_DELTA_RANGE = (0.05, 0.72)
_BRANCH1_SRC = ("eps + s*d*(x/d)*exp(g*log(1 - (x/d)^4))"
                "/(1 - delta*(x/d)^4)")
_SCAN_STEPS = 1000
_RESID_TOL = 1e-10


@dataclass
class FamilyFeatures:
    delta: float
    c: float
    alpha: float
    critical_value: float        # c1 = F(c)
    c2: float
    regime: str                  # "diffeo" | "unimodal"
    critical_interval: tuple     # [c, c1] or [c2, c1]


@dataclass
class Landmarks:
    delta0: float
    delta_n: float
    delta_b: float
    residuals: dict
    brackets: dict
    delta_n_roots: list = field(default_factory=list)


@dataclass
class MisiurewiczPoint:
    delta_star: float
    m: int
    residual: float              # |c^m - alpha|
    alpha: float
    multiplier: float            # F'(alpha) at delta_star
    shadow_error: float          # max dist to alpha over 20 further steps
    bracket: tuple

    ok = True


@dataclass
class Refusal:
    reason: str
    details: dict = field(default_factory=dict)

    ok = False


class ReturnMapFamily:
    """Closed-form realization of the return-map family; `d` fixes the
    discontinuity, `w` the nominal level of the constant branch."""

    def __init__(self, d, w):
        if not (0.0 < w < d < 1.0):
            raise MapError("need 0 < w < d < 1, got w=%r d=%r" % (w, d))
        self.d = float(d)
        self.w = float(w)
        self.delta_range = _DELTA_RANGE
        self.branch1_src = _BRANCH1_SRC
        self.generator = ("eps + (1-eta)*d*u*(1-u^4)^g/(1-delta*u^4), u=x/d,"
                          " on [0,d); const min(w, 0.95*F(c)) on [d,1]")
        self._landmarks = None

    # -- closed-form scalar helpers (branch 1 only) -------------------------

    def _check_delta(self, delta):
        lo, hi = self.delta_range
        if not (lo <= delta <= hi):
            raise MapError("delta=%r outside family range [%r, %r]"
                           % (delta, lo, hi))
        return float(delta)

    def value(self, x, delta):
        """F_delta(x) on the first branch (0 <= x < d)."""
        u = x / self.d
        z = u ** 4
        return (_EPS + (1.0 - _ETA) * self.d * u
                * (1.0 - z) ** _GAMMA / (1.0 - delta * z))

    def deriv(self, x, delta):
        """F'_delta(x) on the first branch; the numerator quadratic
        N(z) = 1 - (2.6 - 3 delta) z - 1.4 delta z^2 carries the sign."""
        z = (x / self.d) ** 4
        nz = 1.0 - (2.6 - 3.0 * delta) * z - 1.4 * delta * z * z
        return ((1.0 - _ETA) * (1.0 - z) ** (_GAMMA - 1.0) * nz
                / (1.0 - delta * z) ** 2)

    def critical_point(self, delta):
        """Unique zero of F' in (0, d): the positive root of the numerator
        quadratic in z = (x/d)^4."""
        q = 2.6 - 3.0 * delta
        z = (-q + math.sqrt(q * q + 5.6 * delta)) / (2.8 * delta)
        return self.d * z ** 0.25

    def critical_value(self, delta):
        return self.value(self.critical_point(delta), delta)

    def branch2_level(self, delta):
        return min(self.w, 0.95 * self.critical_value(delta))

    def fixed_point(self, delta, grid=128):
        """The fixed point alpha on the continuous branch (0, d): locate the
        sign change of F(x) - x on a coarse grid, then bisect."""
        a, b = 1e-12, self.d * (1.0 - 1e-12)
        xs = np.linspace(a, b, grid + 1)
        gs = np.array([self.value(x, delta) - x for x in xs])
        idx = np.nonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) < 0)[0]
        if len(idx) == 0:
            raise MapError("no fixed point of the first branch at delta=%r "
                           "(family property violated)" % delta)
        lo, hi = xs[idx[0]], xs[idx[0] + 1]
        glo = gs[idx[0]]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = self.value(mid, delta) - mid
            if glo * gm <= 0:
                hi = mid
            else:
                lo, glo = mid, gm
        return 0.5 * (lo + hi)

    def orbit_of_c(self, delta, n):
        """c, c^1, ..., c^n; raises if the orbit crosses the discontinuity
        (past delta_b the prefix may leave the first branch)."""
        pts = [self.critical_point(delta)]
        for _ in range(n):
            x = pts[-1]
            if x >= self.d:
                raise MapError("critical orbit crosses the discontinuity at "
                               "delta=%r" % delta)
            pts.append(self.value(x, delta))
        return pts

    # -- MapExpr construction ------------------------------------------------

    def params_for(self, delta):
        return {"eps": _EPS, "s": 1.0 - _ETA, "d": self.d,
                "delta": float(delta), "g": _GAMMA}

    def map_for(self, delta):
        """Full two-branch map as a MapExpr on [0, 1]."""
        delta = self._check_delta(delta)
        params = self.params_for(delta)
        params["v"] = self.branch2_level(delta)
        return MapExpr((0.0, 1.0),
                       [(0.0, self.d, self.branch1_src),
                        (self.d, 1.0, "v")], params)

    def restricted_map(self, delta):
        """First branch restricted to the critical interval (the invariant
        core all the asymptotics live on)."""
        feats = family_features(self, delta)
        a, b = feats.critical_interval
        if not b > a:
            raise MapError("degenerate critical interval at delta=%r"
                           % delta)
        return MapExpr((a, b), [(a, b, self.branch1_src)],
                       self.params_for(delta))


def synth_family(d, w):
    """Build the family and probe the defining properties at a few
    parameters before handing it out."""
    fam = ReturnMapFamily(d, w)
    lo, hi = fam.delta_range
    for delta in np.linspace(lo, hi, 7):
        problems = _probe_properties(fam, float(delta))
        if problems:
            raise MapError("family properties fail at delta=%r: %s"
                           % (float(delta), "; ".join(problems)))
    return fam


def _probe_properties(fam, delta, grid=512):
    """Cheap per-delta checks of the family's defining properties; returns
    a list of violation descriptions (empty when clean)."""
    problems = []
    d = fam.d
    c = fam.critical_point(delta)
    if not (0.0 < c < d):
        problems.append("critical point %r outside (0, d)" % c)
    fc = fam.critical_value(delta)
    ## slope pattern: positive left of c, negative right of c
    if not (fam.deriv(0.5 * c, delta) > 0.0
            and fam.deriv(c + 0.5 * (d - c), delta) < 0.0):
        problems.append("slope sign pattern around the critical point wrong")
    s0 = fam.deriv(1e-12, delta)
    if not (0.0 < s0 < 1.0):
        problems.append("slope at 0 is %r, not in (0, 1)" % s0)
    if not fam.deriv(d - 1e-6, delta) < -1e3:
        problems.append("slope near d- fails the -1e3 steepness audit")
    v = fam.branch2_level(delta)
    if not (0.0 < v < fc):
        problems.append("second branch level %r not in (0, F(c)=%r)"
                        % (v, fc))
    ## jump at the discontinuity
    if abs(fam.value(d * (1.0 - 1e-12), delta) - v) < 1e-6:
        problems.append("no discontinuity at d")
    ## unique fixed point on (0, d)
    xs = np.linspace(1e-12, d * (1.0 - 1e-12), grid + 1)
    gs = np.array([fam.value(x, delta) - x for x in xs])
    changes = int(np.count_nonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) < 0))
    if changes != 1:
        problems.append("fixed-point sign changes = %d, want 1" % changes)
    return problems


def property_audit(fam, samples=100):
    """Machine audit of the family's defining properties over a parameter
    sweep, plus the landmark ordering; returns a report dict."""
    lo, hi = fam.delta_range
    failures = []
    order2 = []
    for i, delta in enumerate(np.linspace(lo, hi, samples)):
        delta = float(delta)
        for p in _probe_properties(fam, delta):
            failures.append((delta, p))
        if i % max(1, samples // 10) == 0:
            ## order-2 critical point by ladder fit on the full map
            m = fam.map_for(delta)
            cp = critical_order(m, fam.critical_point(delta))
            order2.append((delta, cp.order))
            if cp.order != 2:
                failures.append((delta, "critical order %d != 2" % cp.order))
    lm = find_landmarks(fam)
    ordered = lm.delta0 < lm.delta_n < lm.delta_b
    if not ordered:
        failures.append((None, "landmark ordering broken"))
    return {"samples": samples, "failures": failures,
            "passed": not failures, "order_fits": order2,
            "landmarks": lm}


def family_features(fam, delta):
    delta = fam._check_delta(delta)
    c = fam.critical_point(delta)
    alpha = fam.fixed_point(delta)
    c1 = fam.critical_value(delta)
    c2 = fam.value(c1, delta) if c1 < fam.d else float("nan")
    if c <= c2:
        regime, interval = "diffeo", (c, c1)
    else:
        regime, interval = "unimodal", (c2, c1)
    return FamilyFeatures(delta=delta, c=c, alpha=alpha, critical_value=c1,
                          c2=c2, regime=regime, critical_interval=interval)


def _bisect_param(g, lo, hi, glo, it=200):
    for _ in range(it):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if glo * gm <= 0:
            hi = mid
        else:
            lo, glo = mid, gm
    return 0.5 * (lo + hi)


def _scan_roots(g, lo, hi, steps):
    xs = np.linspace(lo, hi, steps + 1)
    gs = np.array([g(float(x)) for x in xs])
    roots = []
    for i in np.nonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) < 0)[0]:
        roots.append((_bisect_param(g, float(xs[i]), float(xs[i + 1]),
                                    float(gs[i])),
                      (float(xs[i]), float(xs[i + 1]))))
    return roots


def find_landmarks(fam, steps=_SCAN_STEPS):
    """delta_0 (alpha meets c), delta_n (multiplier of alpha passes -1,
    smallest root; extras recorded), delta_b (critical value reaches d)."""
    if fam._landmarks is not None and steps == _SCAN_STEPS:
        return fam._landmarks
    lo, hi = fam.delta_range

    def g0(delta):
        return fam.fixed_point(delta) - fam.critical_point(delta)

    def gb(delta):
        return fam.critical_value(delta) - fam.d

    def gn(delta):
        return fam.deriv(fam.fixed_point(delta), delta) + 1.0

    roots0 = _scan_roots(g0, lo, hi, steps)
    rootsb = _scan_roots(gb, lo, hi, steps)
    if not roots0:
        raise MapError("no sign change for delta_0 in range")
    if not rootsb:
        raise MapError("no sign change for delta_b in range")
    d0, br0 = roots0[0]
    db, brb = rootsb[0]
    rootsn = _scan_roots(gn, d0, db, steps)
    if not rootsn:
        raise MapError("no sign change for delta_n in (delta_0, delta_b)")
    dn, brn = rootsn[0]
    residuals = {"delta0": abs(g0(d0)), "delta_n": abs(gn(dn)),
                 "delta_b": abs(gb(db))}
    for name, r in residuals.items():
        if r > _RESID_TOL:
            raise MapError("landmark %s residual %r exceeds %r"
                           % (name, r, _RESID_TOL))
    lm = Landmarks(delta0=d0, delta_n=dn, delta_b=db, residuals=residuals,
                   brackets={"delta0": br0, "delta_n": brn, "delta_b": brb},
                   delta_n_roots=[r for r, _ in rootsn])
    if steps == _SCAN_STEPS:
        fam._landmarks = lm
    return lm


def _cm_minus_alpha(fam, delta, m):
    pts = fam.orbit_of_c(delta, m)
    return pts[-1] - fam.fixed_point(delta)


def _default_bracket(fam, m, steps=_SCAN_STEPS):
    """Scan (delta_0, delta_b) for the first sign change of c^m - alpha,
    then widen the right endpoint until the endpoint hypotheses have room:
    just past the crossing c^m still sits above c, and c^(m+1) overshoots
    alpha, so a grid-cell-tight bracket would always be refused."""
    lm = find_landmarks(fam)
    span = lm.delta_b - lm.delta0
    xs = np.linspace(lm.delta0 + 1e-3 * span, lm.delta_b - 1e-3 * span,
                     steps + 1)

    vals = []
    for x in xs:
        try:
            pts = fam.orbit_of_c(float(x), m + 1)
        except MapError:
            vals.append(None)
            continue
        vals.append((pts, fam.fixed_point(float(x))))

    for i in range(len(xs) - 1):
        a, b = vals[i], vals[i + 1]
        if a is None or b is None:
            continue
        ga, gb = a[0][m] - a[1], b[0][m] - b[1]
        if ga == 0.0 or ga * gb > 0.0:
            continue
        d1 = float(xs[i])
        for j in range(i + 1, len(xs)):
            w = vals[j]
            if w is None:
                break
            pts, alpha = w
            if (pts[m] - alpha) * ga > 0.0:
                break                 # walked past a second crossing
            if pts[m] <= pts[0] and pts[3] < alpha and pts[m + 1] < alpha:
                return (d1, float(xs[j]))
        ## widening failed here; later crossings may still have room
    return None


def find_misiurewicz(fam, m, bracket=None):
    """Bisect c^m(delta) - alpha(delta) inside `bracket`, after checking
    the bracketing hypotheses at the endpoints:

        (i)  c(d1) <= c^m(d1)
        (ii) c^m(d2) <= c(d2),  c^3(d2) < alpha(d2),  c^(m+1)(d2) < alpha(d2)

    Returns a MisiurewiczPoint, or a Refusal naming the failed inequality.
    Midpoints whose critical orbit crosses the discontinuity lose the sign
    change, which is also a refusal.

    With no bracket given, one is derived by scanning (delta_0, delta_b)
    in 1000 steps and widening the right endpoint until the hypotheses
    have room; the derived bracket then passes the same checks as an
    explicit one.
    """
    if m < 3:
        raise MapError("Misiurewicz search needs m >= 3")
    if bracket is None:
        bracket = _default_bracket(fam, m)
        if bracket is None:
            return Refusal("no admissible bracket found by scanning "
                           "(delta_0, delta_b) in %d steps" % _SCAN_STEPS,
                           {"m": m})
    d1, d2 = float(bracket[0]), float(bracket[1])
    if not d1 < d2:
        raise MapError("empty bracket %r" % (bracket,))
    lm = find_landmarks(fam)
    if not (lm.delta0 < d1 and d2 < lm.delta_b):
        return Refusal("bracket [%r, %r] not inside (delta_0, delta_b) = "
                       "(%r, %r)" % (d1, d2, lm.delta0, lm.delta_b),
                       {"landmarks": lm})

    try:
        o1 = fam.orbit_of_c(d1, m)
        o2 = fam.orbit_of_c(d2, m + 1)
    except MapError as exc:
        return Refusal("critical orbit crosses the discontinuity at a "
                       "bracket endpoint: %s" % exc, {})
    a1 = fam.fixed_point(d1)
    a2 = fam.fixed_point(d2)
    c1_, c2_ = o1[0], o2[0]
    checks = [
        ("c(d1) <= c^m(d1)", c1_ <= o1[m]),
        ("c^m(d2) <= c(d2)", o2[m] <= c2_),
        ("c^3(d2) < alpha(d2)", o2[3] < a2),
        ("c^(m+1)(d2) < alpha(d2)", o2[m + 1] < a2),
    ]
    for name, ok in checks:
        if not ok:
            return Refusal("endpoint hypothesis %s fails" % name,
                           {"d1": d1, "d2": d2, "alpha_d2": a2})

    def g(delta):
        return _cm_minus_alpha(fam, delta, m)

    g1, g2 = o1[m] - a1, o2[m] - a2
    if g1 * g2 > 0:
        return Refusal("c^m - alpha has no sign change over the bracket "
                       "(g(d1)=%r, g(d2)=%r)" % (g1, g2), {})
    lo, hi, glo = d1, d2, g1
    try:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if glo * gm <= 0:
                hi = mid
            else:
                lo, glo = mid, gm
    except MapError as exc:
        return Refusal("bisection lost the sign change to a discontinuity "
                       "crossing: %s" % exc, {"at": (lo, hi)})
    ds = 0.5 * (lo + hi)
    alpha = fam.fixed_point(ds)
    resid = abs(_cm_minus_alpha(fam, ds, m))
    pts = fam.orbit_of_c(ds, m + 20)
    shadow = max(abs(p - alpha) for p in pts[m:])
    return MisiurewiczPoint(delta_star=ds, m=m, residual=resid, alpha=alpha,
                            multiplier=fam.deriv(alpha, ds),
                            shadow_error=shadow, bracket=(d1, d2))


def rescale_conjugate(fam, delta):
    """The restricted map conjugated onto [0, 1] by the affine chart
    h(x) = (b - a) x + a of its critical interval: H = h^-1 o F o h,
    returned as a MapExpr with params aa = a and bma = b - a."""
    feats = family_features(fam, delta)
    a, b = feats.critical_interval
    if not b > a:
        raise MapError("degenerate critical interval at delta=%r" % delta)
    f_ast = parse_expr(fam.branch1_src)
    h_ast = parse_expr("bma*x + aa")
    H_ast = simplify(("div", ("sub", subst(f_ast, h_ast), ("param", "aa")),
                      ("param", "bma")))
    params = fam.params_for(delta)
    params.update({"aa": a, "bma": b - a})
    return MapExpr((0.0, 1.0), [(0.0, 1.0, to_text(H_ast))], params)


def conjugation_identity_check(fam, delta, k=2, n_points=50, seed=0):
    """Spot-check S(H^k)(x) = (b-a)^2 * S(F~^k)(h(x)) at random clear-orbit
    points (the affine chart contributes the square of its slope; the sign,
    which is what the rescaling argument uses, is untouched).  Returns the
    max relative deviation."""
    from .schwarzian import schwarzian_iterate
    from .errors import GuardError

    feats = family_features(fam, delta)
    a, b = feats.critical_interval
    H = rescale_conjugate(fam, delta)
    F = fam.restricted_map(delta)
    scale = (b - a) ** 2
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = 0.0
    done = 0
    tries = 0
    while done < n_points and tries < 40 * n_points:
        tries += 1
        x = float(rng.uniform(1e-6, 1.0 - 1e-6))
        try:
            left = schwarzian_iterate(H, x, k).value
            right = scale * schwarzian_iterate(F, a + (b - a) * x, k).value
        except GuardError:
            continue
        rel = abs(left - right) / max(1.0, abs(left), abs(right))
        worst = max(worst, rel)
        done += 1
    if done < n_points:
        raise MapError("could not find %d clear-orbit sample points"
                       % n_points)
    return {"k": k, "points": done, "max_rel_err": worst, "scale": scale}


def check_theorem6(fam, delta_star, m, k_max=2):
    """Evidence report for the mixing conclusion at a Misiurewicz parameter:
    (a) delta_star above delta_n; (b) derivative growth along the critical
    orbit fits a geometric law with rate ln|F'(alpha)|; (c) summability
    verdicts at the theorem exponents; (d) a certificate attempt on the
    restricted map up to k_max (skipped when k_max = 0).
    """
    from . import measure as ms
    from .certify import partition_certificate

    lm = find_landmarks(fam)
    feats = family_features(fam, delta_star)
    alpha = feats.alpha
    mult = fam.deriv(alpha, delta_star)
    report = {"delta_star": delta_star, "m": m,
              "landmarks": {"delta0": lm.delta0, "delta_n": lm.delta_n,
                            "delta_b": lm.delta_b}}

    report["condition_iv"] = {"ok": delta_star > lm.delta_n,
                              "delta_n": lm.delta_n,
                              "margin": delta_star - lm.delta_n}

    pts = fam.orbit_of_c(delta_star, m + 20)
    shadow = float(max(abs(p - alpha) for p in pts[m:]))
    orbit_ok = bool(shadow < 1e-6)
    report["orbit_contains_alpha"] = {"ok": orbit_ok, "shadow_error": shadow,
                                      "residual": float(abs(pts[m] - alpha))}

    ftil = fam.restricted_map(delta_star)
    seq = ms.dn_sequence(ftil, feats.c, N=60)
    gf = ms.growth_fit(seq)
    target = math.log(abs(mult))
    rel = abs(gf.rate - target) / abs(target)
    report["growth"] = {"kind": gf.kind, "beta": gf.rate, "target": target,
                        "rel_err": rel,
                        "ok": gf.kind == "exponential" and rel <= 0.03}

    report["summability"] = {
        "thm2": ms.summability_check(seq, ell=2, mode="thm2").verdict,
        "thm3": ms.summability_check(seq, ell_max=2, mode="thm3").verdict,
    }

    if k_max >= 1:
        ## depth 6 keeps interval rigor while the fold's heavyweight
        ## derivative expressions stay affordable; the bounds have orders
        ## of magnitude of slack (S tops out around -1e3 here).
        cert = partition_certificate(ftil, k_max=k_max, refine=True, depth=6)
        if cert.ok:
            report["condition_iii"] = {"status": "certified",
                                       "order": cert.order_bound}
        else:
            report["condition_iii"] = {"status": "refused",
                                       "reason": cert.reason}
    else:
        report["condition_iii"] = {"status": "unknown"}

    iii = report["condition_iii"]["status"]
    hyps = orbit_ok and report["condition_iv"]["ok"]
    if not hyps or iii == "refused":
        report["theorem_A"] = "unmet"
    elif iii == "certified":
        report["theorem_A"] = "met"
    else:
        report["theorem_A"] = "unknown"
    c3_smooth = ftil.smoothness_class() >= 3
    report["smooth_C3"] = c3_smooth
    report["theorem_B"] = (report["theorem_A"] if c3_smooth else "unmet")
    return report


def sweep(fam, steps=1000):
    """Feature rows over the parameter range: delta, c, alpha, F(c),
    regime per row, in delta order."""
    lo, hi = fam.delta_range
    rows = []
    for delta in np.linspace(lo, hi, steps):
        feats = family_features(fam, float(delta))
        rows.append({"delta": feats.delta, "c": feats.c,
                     "alpha": feats.alpha,
                     "critical_value": feats.critical_value,
                     "regime": feats.regime})
    return rows
