"""Certificates of an eventual negative Schwarzian derivative.

Two certification routes, one refutation-free contract: a returned
Certificate means the stated order bound has been *proved* for the map
(up to floating-point soundness of the interval arithmetic in "interval"
rigor, or honestly flagged heuristics in "sampled" rigor).  Anything the
routines cannot prove comes back as a Refusal carrying the blocking
evidence; nothing raises just because a map fails to certify.

Partition route.  Over a cell partition {I_i} of the domain, with
    T(i) = sup of S(f) on I_i (critical balls excised),
    m(i) = inf of |f'|^2 on I_i  (0 if I_i meets a critical point),
    M(i) = sup of |f'|^2 on I_i,
every admissible cell sequence (x_0 .. x_{k-1}) of the transition graph
gets the weighted sum

    sum_j R_j,   R_j = prod_{i<j} m(x_i) * T(x_j)   if T(x_j) <= 0
                 R_j = prod_{i<j} M(x_i) * T(x_j)   otherwise,

an upper bound for S(f^k) along real orbits.  All sums negative at some
k <= k_max certifies order <= k.  The DFS enumerates sequences in
lexicographic cell order and prunes only subtrees whose sound upper bound
can neither reach zero nor improve the current worst sum, so the reported
worst sequence is exactly what full enumeration would give.

Moebius route.  Pieces that are Moebius (or affine) maps have S = 0
identically; if S < 0 is verified off their union M and every point of M
escapes M within e iterates, the map has negative Schwarzian at order
e + 1.  Escape is established by an interval orbit chain and cross-checked
on a fine grid.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MapError, PieceError, PoleError
from .expressions import (MapExpr, eval_interval_ast, schwarzian_ast, simplify)
from .intervals import Interval
from .orbits import find_critical_points

_EXCISION_FRAC = 1e-4
_SAMPLED_INFLATION = 1.05
_SAMPLES_PER_CELL = 512
_BIG = 1e300


@dataclass
class CellBounds:
    T: list          # per-cell sup of S(f), excised
    m: list          # per-cell inf of |f'|^2 (0 at critical cells)
    M: list          # per-cell sup of |f'|^2
    excision_radius: list
    rigor: str
    pole_cells: list = field(default_factory=list)


@dataclass
class Certificate:
    kind: str                    # "partition" | "mobius"
    order_bound: int
    rigor: str
    partition: list
    matrix: list
    bounds: dict
    worst_sequence: list
    worst_sum: float
    excision_radius: list
    meta: dict = field(default_factory=dict)

    ok = True

    def to_dict(self):
        return {
            "kind": self.kind,
            "order_bound": self.order_bound,
            "rigor": self.rigor,
            "partition": [float(e) for e in self.partition],
            "matrix": [[int(v) for v in row] for row in self.matrix],
            "bounds": {k: [max(float(v), -_BIG) for v in vs]
                       for k, vs in self.bounds.items()},
            "worst_sequence": [int(i) for i in self.worst_sequence],
            "worst_sum": max(float(self.worst_sum), -_BIG),
            "excision_radius": [float(r) for r in self.excision_radius],
            "meta": self.meta,
        }


@dataclass
class Refusal:
    kind: str                    # always "refusal"
    method: str                  # "partition" | "mobius"
    reason: str
    k_max: int
    evidence: dict
    partition: list = field(default_factory=list)

    ok = False

    def to_dict(self):
        return {
            "kind": self.kind,
            "method": self.method,
            "reason": self.reason,
            "k_max": self.k_max,
            "evidence": self.evidence,
            "partition": [float(e) for e in self.partition],
        }


@dataclass
class VerifyResult:
    valid: bool
    reasons: list


def certificate_from_dict(d):
    if d.get("kind") == "refusal":
        return Refusal(kind="refusal", method=d["method"], reason=d["reason"],
                       k_max=d["k_max"], evidence=d.get("evidence", {}),
                       partition=d.get("partition", []))
    return Certificate(
        kind=d["kind"], order_bound=d["order_bound"], rigor=d["rigor"],
        partition=d["partition"], matrix=d["matrix"], bounds=d["bounds"],
        worst_sequence=d.get("worst_sequence", []),
        worst_sum=d.get("worst_sum", 0.0),
        excision_radius=d.get("excision_radius", []),
        meta=d.get("meta", {}))


# ---------------------------------------------------------------------------
# Partitions and transition matrices
# ---------------------------------------------------------------------------

def uniform_partition(m, n_cells=16):
    lo, hi = m.domain
    return list(np.linspace(lo, hi, n_cells + 1))


def validate_partition(endpoints, domain):
    eps = [float(e) for e in endpoints]
    if len(eps) < 2 or any(b <= a for a, b in zip(eps, eps[1:])):
        raise PieceError("partition endpoints must strictly increase")
    if eps[0] != domain[0] or eps[-1] != domain[1]:
        raise PieceError("partition must span the domain exactly")
    return eps


def _cell_image(m, a, b, depth):
    return m.eval_interval((a, b), 0, depth=depth)


def build_transition_matrix(m, endpoints, depth=8, images=None):
    """a[i][j] = True iff the sound image enclosure of cell i meets cell j.

    Overapproximation makes extra entries possible (and harmless for the
    certificate direction); missing a true transition would be unsound, so
    cells that merely touch at an endpoint do count."""
    eps = validate_partition(endpoints, m.domain)
    n = len(eps) - 1
    out = np.zeros((n, n), dtype=bool)
    for i in range(n):
        img = images[i] if images is not None else _cell_image(m, eps[i], eps[i + 1], depth)
        for j in range(n):
            out[i, j] = img.intersects(Interval(eps[j], eps[j + 1]))
    return out


# ---------------------------------------------------------------------------
# Cell bounds
# ---------------------------------------------------------------------------

def _range_adaptive(ast, params, a, b, n_sub, extra=4):
    """Hull of the natural extension over [a, b] split into n_sub uniform
    subcells, recursively splitting any subcell whose evaluation hits a
    pole.  Returns (hull, clean); clean=False means some minimal subcell
    still had a pole, in which case the hull only covers the clean part.
    """
    edges = np.linspace(a, b, n_sub + 1)
    hull = None
    clean = True
    stack = [(edges[i], edges[i + 1], extra) for i in range(n_sub - 1, -1, -1)]
    while stack:
        lo, hi, budget = stack.pop()
        try:
            enc = eval_interval_ast(ast, Interval(lo, hi), params)
        except PoleError:
            if budget > 0 and hi - lo > 1e-15 * max(1.0, abs(a), abs(b)):
                mid = 0.5 * (lo + hi)
                stack.append((mid, hi, budget - 1))
                stack.append((lo, mid, budget - 1))
            else:
                clean = False
            continue
        hull = enc if hull is None else hull.hull(enc)
    if hull is None:
        # no subcell evaluated cleanly; callers must ignore the hull
        return Interval(0.0), False
    return hull, clean


def _piece_segments(m, a, b):
    """Split [a, b] at piece boundaries; yields (lo, hi, piece_index)."""
    for i, p in enumerate(m.pieces):
        lo, hi = max(a, p.lo), min(b, p.hi)
        if lo < hi:
            yield lo, hi, i


def _schwarz_ast(m, i):
    key = ("schwarz", i)
    cache = m.__dict__.setdefault("_certify_cache", {})
    if key not in cache:
        cache[key] = simplify(schwarzian_ast(m.pieces[i].ast))
    return cache[key]


def _quotient_sup(m, pi, lo, hi):
    """Upper bound for S(f) on [lo, hi] via (f'''*f' - 1.5*f''^2) / f'^2.

    The rewritten numerator has no division, so its enclosure stays finite
    where f' passes near zero; there it is dominated by -1.5*f''^2 and is
    negative outright.  With D = f'^2 >= 0, a negative numerator top gives
    the sound bound N.hi / D.hi, and a sign-definite denominator gives
    N.hi / D.lo.  Returns None when neither case applies.
    """
    iv = Interval(lo, hi)
    try:
        e1 = eval_interval_ast(m._piece_ast(pi, 1), iv, m.params)
        e2 = eval_interval_ast(m._piece_ast(pi, 2), iv, m.params)
        e3 = eval_interval_ast(m._piece_ast(pi, 3), iv, m.params)
    except PoleError:
        return None
    num = e3 * e1 - e2.pow_int(2) * 1.5
    den = e1.pow_int(2)
    if num.hi < 0.0 and den.hi > 0.0:
        return num.hi / den.hi
    if den.lo > 0.0:
        return num.hi / den.lo
    return None


def _order_ge_evidence(m, k):
    """Verified convexity-failure witness at order k-1, or None.

    Only a witness whose span was confirmed critical-point free counts;
    an inconclusive scan attaches nothing.
    """
    from .schwarzian import convexity_scan
    try:
        rep = convexity_scan(m, k - 1)
    except (MapError, PoleError):
        return None
    if rep.verdict != "fail":
        return None
    w = next(w for w in rep.witnesses if w["critical_free_verified"])
    return {"k": k - 1, "witness_x": w["x"],
            "second_difference": w["second_difference"],
            "span": [float(w["span"][0]), float(w["span"][1])]}


def _schwarz_sup(m, pi, a, b, n_sub, extra=4):
    """Sound sup bound for S(f) over [a, b] inside piece pi.

    Same subdivision discipline as _range_adaptive on the direct Schwarzian
    expression; a subcell that still poles out at the minimal scale gets one
    last chance through the quotient form before the cell is declared
    unclean.  That rescues neighbourhoods of critical points where the f'
    enclosure is too loose to exclude zero at any bisection depth.
    """
    edges = np.linspace(a, b, n_sub + 1)
    s_ast = _schwarz_ast(m, pi)
    sup = -math.inf
    clean = True
    stack = [(edges[i], edges[i + 1], extra) for i in range(n_sub - 1, -1, -1)]
    while stack:
        lo, hi, budget = stack.pop()
        try:
            enc = eval_interval_ast(s_ast, Interval(lo, hi), m.params)
        except PoleError:
            if budget > 0 and hi - lo > 1e-15 * max(1.0, abs(a), abs(b)):
                mid = 0.5 * (lo + hi)
                stack.append((mid, hi, budget - 1))
                stack.append((lo, mid, budget - 1))
            else:
                q = _quotient_sup(m, pi, lo, hi)
                if q is None:
                    clean = False
                else:
                    sup = max(sup, q)
            continue
        sup = max(sup, enc.hi)
    return sup, clean


def _cell_bound(m, a, b, rigor, depth, excision_frac, crits, samples):
    """(T, m, M, excision_radius, clean) for one cell [a, b]."""
    local = [c for c in crits if a <= c <= b]
    r = excision_frac * (b - a)
    radius = r if local else 0.0

    if rigor == "sampled":
        xs = np.linspace(a, b, samples + 1)
        with np.errstate(all="ignore"):
            f1 = m.eval_array(xs, 1)
            f2 = m.eval_array(xs, 2)
            f3 = m.eval_array(xs, 3)
            s = f3 / f1 - 1.5 * (f2 / f1) ** 2
        keep = np.isfinite(s)
        for c in local:
            keep &= np.abs(xs - c) > r
        svals = s[keep]
        if svals.size == 0:
            T = -math.inf
        else:
            ## Inflate the empirical sup by 5% of its own magnitude.  A
            ## range-based cushion looks natural but is poisoned next to
            ## critical points, where the -1.5/eps^2 tail makes the range
            ## astronomically wide and would flip a clearly negative top
            ## positive.
            top = float(np.max(svals))
            T = top + 0.05 * abs(top)
        d2 = f1[np.isfinite(f1)] ** 2
        has_crit = bool(local) or bool(
            np.any(np.sign(f1[:-1]) * np.sign(f1[1:]) < 0))
        lo_d2 = 0.0 if has_crit else float(np.min(d2)) / _SAMPLED_INFLATION
        return T, lo_d2, float(np.max(d2)) * _SAMPLED_INFLATION, radius, True

    # interval rigor
    sup_T = -math.inf
    clean_cell = True
    cuts = [a]
    for c in sorted(local):
        cuts.extend((max(a, c - r), min(b, c + r)))
    cuts.append(b)
    for si in range(0, len(cuts) - 1, 2):
        seg_a, seg_b = cuts[si], cuts[si + 1]
        if seg_b - seg_a <= 0:
            continue
        for pa, pb, pi in _piece_segments(m, seg_a, seg_b):
            n_sub = max(8, int(2 ** depth * (pb - pa) / (b - a)))
            sup, clean = _schwarz_sup(m, pi, pa, pb, n_sub)
            if not clean:
                clean_cell = False
                sup_T = math.inf
            else:
                sup_T = max(sup_T, sup)

    lo_d2, hi_d2 = math.inf, -math.inf
    for pa, pb, pi in _piece_segments(m, a, b):
        n_sub = max(8, int(2 ** depth * (pb - pa) / (b - a)))
        d_ast = m._piece_ast(pi, 1)
        hull, clean = _range_adaptive(d_ast, m.params, pa, pb, n_sub)
        if not clean:
            raise PoleError("f' enclosure failed on cell [%r, %r]" % (a, b))
        sq = hull.pow_int(2)
        if hull.contains(0.0):
            lo_d2 = 0.0
        else:
            lo_d2 = min(lo_d2, sq.lo)
        hi_d2 = max(hi_d2, sq.hi)
    return sup_T, max(0.0, lo_d2), hi_d2, radius, clean_cell


def compute_cell_bounds(m, endpoints, rigor="interval", depth=8,
                        excision_frac=_EXCISION_FRAC, crits=None,
                        samples=_SAMPLES_PER_CELL, cache=None):
    """T / m / M vectors for the partition cells.

    interval rigor: outward-rounded enclosures, subdivision 2**depth per
    cell, with balls of radius excision_frac * |cell| around critical
    points excised from the T computation only (S is unbounded there; the
    excision radius is recorded in the certificate).  m comes out 0 at
    critical cells automatically because the f' enclosure straddles 0.

    sampled rigor: dense pointwise samples with the documented heuristic
    inflation (5% of range on T, factor 1.05 on the |f'|^2 bounds); fast
    and honest about not being a proof.

    An optional cache dict keyed by (a, b) lets the refinement loop reuse
    bounds for cells it did not touch.
    """
    eps = validate_partition(endpoints, m.domain)
    n = len(eps) - 1
    if crits is None:
        crits = [cp.x for cp in find_critical_points(m)]
    T, mv, Mv, radii, pole_cells = [], [], [], [], []
    for ci in range(n):
        key = (eps[ci], eps[ci + 1])
        if cache is not None and key in cache:
            t, lo_d2, hi_d2, radius, clean = cache[key]
        else:
            t, lo_d2, hi_d2, radius, clean = _cell_bound(
                m, eps[ci], eps[ci + 1], rigor, depth, excision_frac,
                crits, samples)
            if cache is not None:
                cache[key] = (t, lo_d2, hi_d2, radius, clean)
        T.append(t)
        mv.append(lo_d2)
        Mv.append(hi_d2)
        radii.append(radius)
        if not clean:
            pole_cells.append(ci)
    return CellBounds(T=T, m=mv, M=Mv, excision_radius=radii, rigor=rigor,
                      pole_cells=pole_cells)


# ---------------------------------------------------------------------------
# Admissible-sequence enumeration
# ---------------------------------------------------------------------------

def check_order(bounds, matrix, k, prune=True):
    """Evaluate all admissible length-k cell sequences.

    Returns (all_negative, worst_sum, worst_sequence, worst_terms): the
    maximal weighted sum over sequences, found by lexicographic DFS.  The
    prune rule uses the sound subtree bound on the remaining terms

        ub = s + Tpos * PM * (1 + Mmax + ... + Mmax^(r-1))

    and cuts a subtree only when ub can neither reach 0 nor beat the
    current worst, so the result is identical with pruning off.
    """
    T = [float(t) for t in bounds.T]
    mv = [float(v) for v in bounds.m]
    Mv = [float(v) for v in bounds.M]
    n = len(T)
    mat = np.asarray(matrix, dtype=bool)
    Tpos = max(0.0, max(T))
    Mmax = max(Mv) if Mv else 0.0

    # geometric series table for the remaining-steps bound
    geo = [0.0] * (k + 1)
    for r in range(1, k + 1):
        geo[r] = 1.0 + Mmax * geo[r - 1]

    best = -math.inf
    best_seq = None

    seq = [0] * k

    def rec(depth, s, Pm, PM):
        nonlocal best, best_seq
        if depth == k:
            if s > best:
                best = s
                best_seq = list(seq)
            return
        if prune and best > -math.inf:
            ub = s + Tpos * PM * geo[k - depth]
            if ub < best and (ub < 0.0 or best >= 0.0):
                return
        prev = seq[depth - 1] if depth > 0 else None
        for c in range(n):
            if prev is not None and not mat[prev, c]:
                continue
            t = T[c]
            term = (Pm if t <= 0.0 else PM) * t
            seq[depth] = c
            rec(depth + 1, s + term, Pm * mv[c], PM * Mv[c])

    rec(0, 0.0, 1.0, 1.0)

    terms = []
    if best_seq is not None:
        Pm = PM = 1.0
        for c in best_seq:
            t = T[c]
            terms.append((Pm if t <= 0.0 else PM) * t)
            Pm *= mv[c]
            PM *= Mv[c]
    return (best < 0.0, best, best_seq or [], terms)


# ---------------------------------------------------------------------------
# Partition certificate (with optional refinement)
# ---------------------------------------------------------------------------

def partition_certificate(m, partition=None, k_max=4, rigor="interval",
                          depth=8, refine=False, max_cells=64,
                          excision_frac=_EXCISION_FRAC):
    """Proposition-2 style certificate over a cell partition.

    Tries k = 1..k_max ascending on the given partition (default: uniform
    16 cells).  With refine=True the orders are attempted one at a time:
    a refusal at the current order bisects the cell carrying the largest
    positive term of its blocking sequence and retries, moving on to the
    next order once the blocking sum stops improving.  The cell budget
    (max_cells) is shared across orders.

    Maps that are not C^3 across piece joints (jets disagree at third
    order) cannot support the interval-rigor chain-rule argument as
    stated; the certificate is downgraded to sampled rigor and annotated,
    and callers are expected to cross-check with a convexity scan.
    """
    eps = validate_partition(partition if partition is not None
                             else uniform_partition(m), m.domain)
    crits = [cp.x for cp in find_critical_points(m)]

    meta = {}
    effective_rigor = rigor
    if len(m.pieces) > 1 and m.smoothness_class() < 3:
        meta["c3_joint"] = False
        if rigor == "interval":
            effective_rigor = "sampled"
            meta["downgraded"] = ("map is not C^3 across piece joints; "
                                  "interval rigor unavailable, using sampled "
                                  "bounds -- cross-check with a convexity scan")

    refinement_steps = []
    bound_cache = {}
    image_cache = {}

    def _tables():
        images = []
        for a, b in zip(eps, eps[1:]):
            if (a, b) not in image_cache:
                image_cache[(a, b)] = _cell_image(m, a, b, depth)
            images.append(image_cache[(a, b)])
        matrix = build_transition_matrix(m, eps, depth, images=images)
        bounds = compute_cell_bounds(m, eps, effective_rigor, depth,
                                     excision_frac, crits=crits,
                                     cache=bound_cache)
        return matrix, bounds

    matrix, bounds = _tables()
    last = (math.inf, [], [])
    stalled = False
    for k in range(1, k_max + 1):
        ## One order at a time: bisections chase the order currently under
        ## test and only its own blocking sum is watched for progress.
        ## Driving refinement by the largest order starves the smaller
        ## ones -- a k that would certify after a few bisections never
        ## gets them, and raising k_max could turn a success into a
        ## refusal.
        prev_worst = math.inf
        stall = 0
        while True:
            ok, worst, wseq, wterms = check_order(bounds, matrix, k)
            last = (worst, wseq, wterms)
            if ok:
                for kk in range(1, k):
                    ## Bisections aimed at an earlier order may have made a
                    ## smaller one certifiable on the final partition;
                    ## report the tightest bound that holds there.
                    ok2, w2, ws2, _ = check_order(bounds, matrix, kk)
                    if ok2:
                        k, worst, wseq = kk, w2, ws2
                        break
                extra = dict(meta, refinement_steps=refinement_steps,
                             k_max=k_max)
                if k >= 2:
                    ## The certificate only states order <= k.  A verified
                    ## convexity failure at k-1 (witness on an interval
                    ## shown free of critical points of f^(k-1)) is the
                    ## complementary half: order >= k.  Attach it when the
                    ## scan delivers one; its absence claims nothing.
                    ev = _order_ge_evidence(m, k)
                    if ev is not None:
                        extra["order_ge_evidence"] = ev
                return Certificate(
                    kind="partition", order_bound=k, rigor=effective_rigor,
                    partition=list(eps),
                    matrix=[[bool(v) for v in row] for row in matrix],
                    bounds={"T": bounds.T, "m": bounds.m, "M": bounds.M},
                    worst_sequence=wseq, worst_sum=worst,
                    excision_radius=bounds.excision_radius,
                    meta=extra)
            if refine and k == 1 and wseq:
                # pointwise positive S in the blocking cell survives every
                # bisection: T >= S(x) > 0 on whichever subcell holds x
                a, b = eps[wseq[0]], eps[wseq[0] + 1]
                xs = np.linspace(a, b, 257)
                with np.errstate(all="ignore"):
                    f1 = m.eval_array(xs, 1)
                    s = (m.eval_array(xs, 3) / f1
                         - 1.5 * (m.eval_array(xs, 2) / f1) ** 2)
                s = s[np.isfinite(s)]
                if s.size and float(np.max(s)) > 0.0:
                    if k_max == 1:
                        return Refusal(
                            kind="refusal", method="partition",
                            reason="S(f) is positive at a point of cell "
                                   "[%r, %r]; no refinement can certify "
                                   "order 1" % (a, b),
                            k_max=k_max,
                            evidence={"cell": [a, b],
                                      "pointwise_sup_S": float(np.max(s)),
                                      "worst_sequence": wseq,
                                      "worst_sum": worst,
                                      "refinement_steps": refinement_steps},
                            partition=list(eps))
                    # order 1 is out pointwise; spend no cells on it
                    break
            # refinement that stops making real progress on the blocking
            # sum is not going to certify; give it three strikes
            stall = stall + 1 if worst >= prev_worst * (1.0 - 0.01) - 1e-12 else 0
            prev_worst = min(prev_worst, worst)
            if not refine:
                break
            if len(eps) - 1 >= max_cells or stall >= 3:
                stalled = stall >= 3
                break
            # bisect the cell with the largest positive blocking term
            pos = [(t, j) for j, t in enumerate(wterms) if t > 0.0]
            if not pos:
                # blocking sum is nonnegative with no positive term: refine
                # the largest-T cell in the sequence instead
                j = max(range(len(wseq)), key=lambda j: bounds.T[wseq[j]])
            else:
                j = max(pos)[1]
            ci = wseq[j]
            mid = 0.5 * (eps[ci] + eps[ci + 1])
            refinement_steps.append(mid)
            eps = eps[:ci + 1] + [mid] + eps[ci + 1:]
            matrix, bounds = _tables()
    worst, wseq, wterms = last
    reason = "no k <= %d with all admissible sums negative" % k_max
    if refine and stalled:
        reason += " (refinement stalled)"
    elif refine:
        reason += " (cell budget exhausted)"
    return Refusal(
        kind="refusal", method="partition", reason=reason,
        k_max=k_max,
        evidence={"worst_sequence": wseq, "worst_sum": worst,
                  "worst_terms": wterms,
                  "T": bounds.T, "m": bounds.m, "M": bounds.M,
                  "refinement_steps": refinement_steps,
                  "cells": len(eps) - 1},
        partition=list(eps))


# ---------------------------------------------------------------------------
# Moebius certificate
# ---------------------------------------------------------------------------

def _poly_add(p, q):
    n = max(len(p), len(q))
    return [(p[i] if i < len(p) else 0.0) + (q[i] if i < len(q) else 0.0)
            for i in range(n)]


def _poly_scale(p, s):
    return [s * c for c in p]


def _poly_mul(p, q):
    out = [0.0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _poly_trim(p):
    while len(p) > 1 and p[-1] == 0.0:
        p = p[:-1]
    return p


def as_rational(ast, params):
    """(numerator, denominator) coefficient lists (ascending powers) if the
    AST is a rational function of x, else None."""
    kind = ast[0]
    if kind == "num":
        return [ast[1]], [1.0]
    if kind == "param":
        return [float(params[ast[1]])], [1.0]
    if kind == "var":
        return [0.0, 1.0], [1.0]
    if kind == "neg":
        r = as_rational(ast[1], params)
        if r is None:
            return None
        return _poly_scale(r[0], -1.0), r[1]
    if kind == "pow":
        r = as_rational(ast[1], params)
        if r is None:
            return None
        num, den = [1.0], [1.0]
        for _ in range(ast[2]):
            num, den = _poly_mul(num, r[0]), _poly_mul(den, r[1])
        return _poly_trim(num), _poly_trim(den)
    if kind == "call":
        return None
    a = as_rational(ast[1], params)
    b = as_rational(ast[2], params)
    if a is None or b is None:
        return None
    if kind == "add":
        return (_poly_trim(_poly_add(_poly_mul(a[0], b[1]),
                                     _poly_mul(b[0], a[1]))),
                _poly_trim(_poly_mul(a[1], b[1])))
    if kind == "sub":
        return (_poly_trim(_poly_add(_poly_mul(a[0], b[1]),
                                     _poly_scale(_poly_mul(b[0], a[1]), -1.0))),
                _poly_trim(_poly_mul(a[1], b[1])))
    if kind == "mul":
        return (_poly_trim(_poly_mul(a[0], b[0])),
                _poly_trim(_poly_mul(a[1], b[1])))
    if kind == "div":
        return (_poly_trim(_poly_mul(a[0], b[1])),
                _poly_trim(_poly_mul(a[1], b[0])))
    return None


def piece_is_mobius(m, i):
    """Syntactic check: piece i is a nonconstant Moebius (or affine) map."""
    r = as_rational(m.pieces[i].ast, m.params)
    if r is None:
        return False
    num, den = r
    if len(num) > 2 or len(den) > 2:
        return False
    a = num[1] if len(num) > 1 else 0.0
    b = num[0]
    c = den[1] if len(den) > 1 else 0.0
    d = den[0]
    return a * d - b * c != 0.0


def mobius_certificate(m, k_max=4, depth=8, grid=4096,
                       excision_frac=_EXCISION_FRAC):
    """Proposition-1 style certificate: S = 0 on the union M of Moebius
    pieces, S verified negative elsewhere, and an escape bound e for M
    (every point leaves M within e iterates, interval-verified).  Then the
    order bound is e + 1.
    """
    lo, hi = m.domain
    crits = [cp.x for cp in find_critical_points(m)]
    mob = [i for i in range(len(m.pieces)) if piece_is_mobius(m, i)]
    components = []
    for i in mob:
        p = m.pieces[i]
        if components and components[-1][1] == p.lo:
            components[-1] = (components[-1][0], p.hi)
        else:
            components.append((p.lo, p.hi))

    # S < 0 off M, with critical balls excised
    off_sup = []
    for i in range(len(m.pieces)):
        if i in mob:
            continue
        p = m.pieces[i]
        local = [c for c in crits if p.lo <= c <= p.hi]
        r = excision_frac * (p.hi - p.lo)
        cuts = [p.lo]
        for c in sorted(local):
            cuts.extend((max(p.lo, c - r), min(p.hi, c + r)))
        cuts.append(p.hi)
        sup = -math.inf
        for si in range(0, len(cuts) - 1, 2):
            if cuts[si + 1] - cuts[si] <= 0:
                continue
            n_sub = max(8, int(2 ** depth * (cuts[si + 1] - cuts[si])
                               / (p.hi - p.lo)))
            hull, clean = _range_adaptive(_schwarz_ast(m, i), m.params,
                                          cuts[si], cuts[si + 1], n_sub)
            sup = math.inf if not clean else max(sup, hull.hi)
        off_sup.append({"piece": i, "sup_S": sup,
                        "excision_radius": r if local else 0.0})
        if not sup < 0.0:
            return Refusal(
                kind="refusal", method="mobius",
                reason="S(f) not verified negative off the Moebius pieces",
                k_max=k_max,
                evidence={"piece": i, "sup_S": sup,
                          "components": components})

    # escape chain: E_0 = M, E_t = f(E_{t-1}) intersect M.  The escape
    # bound e is the first t with E_t empty (so the order bound is e + 1).
    dom = Interval(lo, hi)
    chain = [Interval(a, b) for a, b in components]
    escape = 0
    trace = [[(iv.lo, iv.hi) for iv in chain]]
    while chain:
        if escape >= k_max - 1:
            return Refusal(
                kind="refusal", method="mobius",
                reason="points of the Moebius region persist beyond "
                       "k_max - 1 iterates (escape not established)",
                k_max=k_max,
                evidence={"components": components,
                          "still_inside": [(iv.lo, iv.hi) for iv in chain],
                          "steps": escape})
        nxt = []
        for iv in chain:
            img = m.eval_interval(iv, 0, depth=depth).intersect(dom)
            if img is None:
                continue
            for a, b in components:
                cap = img.intersect(Interval(a, b))
                if cap is not None:
                    nxt.append(cap)
        chain = nxt
        escape += 1
        trace.append([(iv.lo, iv.hi) for iv in chain])
    e = escape if components else 0
    # grid cross-check: max pointwise escape time must not exceed e
    grid_e = 0
    for a, b in components:
        for x in np.linspace(a, b, max(8, grid // max(1, len(components)))):
            y = float(x)
            t = 0
            while t <= e + 1:
                y = m(y)
                t += 1
                if not any(ca <= y <= cb for ca, cb in components):
                    break
            grid_e = max(grid_e, t)
    if grid_e > e:
        raise MapError("escape grid found a point slower (%d) than the "
                       "interval bound (%d); enclosure unsound" % (grid_e, e))
    order = e + 1
    return Certificate(
        kind="mobius", order_bound=order, rigor="interval",
        partition=[lo, hi], matrix=[], bounds={"off_M_sup_S":
                                               [d["sup_S"] for d in off_sup]},
        worst_sequence=[], worst_sum=max((d["sup_S"] for d in off_sup),
                                         default=-math.inf),
        excision_radius=[d["excision_radius"] for d in off_sup],
        meta={"components": [[a, b] for a, b in components],
              "escape_steps": e, "grid_escape_steps": grid_e,
              "escape_trace": trace, "k_max": k_max})


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def verify_certificate(m, cert, depth=10, samples=2048):
    """Independent replay of a certificate's claims.

    Partition kind: the claimed transition matrix must contain every
    transition seen by a sharper recomputation; the claimed T/m/M must be
    consistent with dense sampling (a claimed sup may not sit below an
    observed value, and so on); and the admissibility sums re-run with the
    claimed data at the claimed order must all be negative.

    Moebius kind: piece classification is recomputed structurally, the
    escape chain replayed, and S < 0 off M re-verified at higher depth.
    """
    if isinstance(cert, dict):
        cert = certificate_from_dict(cert)
    reasons = []
    if isinstance(cert, Refusal):
        return VerifyResult(False, ["refusals are not certificates"])

    if cert.kind == "partition":
        eps = validate_partition(cert.partition, m.domain)
        n = len(eps) - 1
        fresh = build_transition_matrix(m, eps, depth=depth)
        claimed = np.asarray(cert.matrix, dtype=bool)
        if claimed.shape != (n, n):
            return VerifyResult(False, ["matrix shape mismatch"])
        # sampled true transitions must be present in the claim
        for i in range(n):
            xs = np.linspace(eps[i], eps[i + 1], 64)
            ys = m.eval_array(xs)
            for j in range(n):
                hit = np.any((ys >= eps[j]) & (ys <= eps[j + 1]))
                if hit and not claimed[i, j]:
                    reasons.append("matrix misses transition %d->%d" % (i, j))
        T = cert.bounds["T"]
        mv = cert.bounds["m"]
        Mv = cert.bounds["M"]
        crits = [cp.x for cp in find_critical_points(m)]
        for i in range(n):
            a, b = eps[i], eps[i + 1]
            xs = np.linspace(a, b, samples + 1)
            radius = (cert.excision_radius[i]
                      if i < len(cert.excision_radius) else 0.0)
            keep = np.ones_like(xs, dtype=bool)
            for c in crits:
                if a <= c <= b:
                    keep &= np.abs(xs - c) > radius
            with np.errstate(all="ignore"):
                f1 = m.eval_array(xs, 1)
                s = (m.eval_array(xs, 3) / f1
                     - 1.5 * (m.eval_array(xs, 2) / f1) ** 2)
            svals = s[keep & np.isfinite(s)]
            slack = 1e-9 * max(1.0, abs(float(T[i])) if math.isfinite(T[i]) else 1.0)
            if svals.size and float(np.max(svals)) > T[i] + slack:
                reasons.append("claimed T[%d]=%r below observed S=%r"
                               % (i, T[i], float(np.max(svals))))
            d2 = f1[np.isfinite(f1)] ** 2
            if d2.size:
                if float(np.min(d2)) < mv[i] - 1e-9 * max(1.0, mv[i]):
                    reasons.append("claimed m[%d] above observed |f'|^2" % i)
                if float(np.max(d2)) > Mv[i] * (1 + 1e-9) + 1e-12:
                    reasons.append("claimed M[%d] below observed |f'|^2" % i)
        bounds = CellBounds(T=T, m=mv, M=Mv,
                            excision_radius=cert.excision_radius,
                            rigor=cert.rigor)
        ok, worst, wseq, _ = check_order(bounds, claimed, cert.order_bound)
        if not ok:
            reasons.append("claimed bounds admit a nonnegative sum %r along %r"
                           % (worst, wseq))
        return VerifyResult(not reasons, reasons)

    if cert.kind == "mobius":
        mob = [i for i in range(len(m.pieces)) if piece_is_mobius(m, i)]
        components = []
        for i in mob:
            p = m.pieces[i]
            if components and components[-1][1] == p.lo:
                components[-1] = (components[-1][0], p.hi)
            else:
                components.append((p.lo, p.hi))
        claimed_comp = [tuple(c) for c in cert.meta.get("components", [])]
        if [tuple(c) for c in components] != claimed_comp:
            reasons.append("Moebius components %r do not match claim %r"
                           % (components, claimed_comp))
        fresh = mobius_certificate(m, k_max=max(cert.order_bound,
                                                cert.meta.get("k_max", 4)),
                                   depth=depth)
        if isinstance(fresh, Refusal):
            reasons.append("replay refused: %s" % fresh.reason)
        elif fresh.order_bound > cert.order_bound:
            reasons.append("replayed order bound %d exceeds claimed %d"
                           % (fresh.order_bound, cert.order_bound))
        return VerifyResult(not reasons, reasons)

    return VerifyResult(False, ["unknown certificate kind %r" % cert.kind])
