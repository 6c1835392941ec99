"""Derivative growth along critical orbits, summability tests, invariant
densities, and correlation decay.

The growth sequence is D_n(c) = |(f^n)'(f(c))|, accumulated in log space
so geometric growth never overflows.  Summability verdicts are never
pronounced from partial sums alone: a growth classification (exponential /
polynomial / subpolynomial) must support the claimed tail behaviour, and
anything the fit cannot classify stays "undetermined".

Invariant densities are Ulam approximations on the critical interval:
row-stochastic transfer matrices from 64 samples per bin, power iteration,
and an explicit degeneracy check (two independent starting vectors must
land on the same fixed density -- the identity map fails this, on purpose).
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import DensityError, FitError, MapError
from .expressions import compile_array, parse_expr
from .orbits import critical_interval, find_critical_points

_GUARD_FRAC = 1e-7
_DEFAULT_SEED = 1729


@dataclass
class DnSequence:
    c: float
    values: np.ndarray        # D_1..D_N (inf where the log overflows)
    log_values: np.ndarray    # ln D_1..ln D_N, always finite
    hit_critical: Optional[int] = None   # step that entered the guard zone

    def __len__(self):
        return len(self.log_values)


@dataclass
class GrowthFit:
    kind: str            # exponential | polynomial | subpolynomial | undetermined
    rate: float          # beta for exponential (log D ~ beta n), alpha polynomial
    residual: float      # rms residual of the winning fit, in log space
    beta: float
    alpha: float
    beta_residual: float
    alpha_residual: float


@dataclass
class SummabilityReport:
    mode: str            # "thm2" | "thm3"
    exponent: float      # the s in sum D_n^(-s)
    n_terms: int
    partial_sum: float
    partial_sums: np.ndarray
    growth: Optional[GrowthFit]
    verdict: str         # convergent | divergent | undetermined
    tail_estimate: Optional[float]
    limit_estimate: Optional[float]
    notes: list = field(default_factory=list)


@dataclass
class DensityEstimate:
    edges: np.ndarray
    weights: np.ndarray
    method: str
    invariance_residual: float
    meta: dict = field(default_factory=dict)

    def midpoints(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def density_values(self):
        return self.weights / np.diff(self.edges)


def l1_distance(d1, d2):
    if len(d1.edges) != len(d2.edges) or not np.allclose(d1.edges, d2.edges,
                                                         rtol=0, atol=1e-12):
        raise DensityError("density estimates live on different bin grids")
    return float(np.sum(np.abs(d1.weights - d2.weights)))


# ---------------------------------------------------------------------------
# Derivative growth along the critical orbit
# ---------------------------------------------------------------------------

def dn_sequence(m, c=None, N=1000, guard_frac=_GUARD_FRAC):
    """D_n(c) = |(f^n)'(f(c))| for n = 1..N, along the orbit of f(c).

    If some orbit point lands within the derivative guard of a critical
    point the sequence is truncated there (hit_critical records the step):
    beyond it the product is numerically meaningless.
    """
    if N > 10000:
        raise MapError("N capped at 10000")
    lo, hi = m.domain
    crits = [cp.x for cp in find_critical_points(m)]
    if c is None:
        if len(crits) != 1:
            raise MapError("map has %d critical points; pass c explicitly"
                           % len(crits))
        c = crits[0]
    else:
        c = float(c)
        if not crits or min(abs(c - cx) for cx in crits) > 1e-6 * (hi - lo):
            raise MapError("c=%r is not a critical point of the map" % (c,))

    dm = m.derivative(1)
    guard = guard_frac * (hi - lo)
    logs = np.empty(N)
    y = m(c)
    hit = None
    n_eff = N
    for n in range(1, N + 1):
        d = dm(y)
        if abs(d) <= guard:
            hit = n
            n_eff = n - 1
            break
        logs[n - 1] = math.log(abs(d)) + (logs[n - 2] if n > 1 else 0.0)
        y = m(y)
    logs = logs[:n_eff]
    with np.errstate(over="ignore"):
        values = np.exp(logs)
    return DnSequence(c=float(c), values=values, log_values=logs,
                      hit_critical=hit)


def growth_fit(seq, min_terms=20):
    """Classify D_n growth from log D_n: linear in n (exponential with rate
    beta), linear in log n (polynomial with exponent alpha), or neither."""
    logs = seq.log_values if isinstance(seq, DnSequence) else np.asarray(seq)
    N = len(logs)
    if N < min_terms:
        raise FitError("growth fit needs at least %d terms, got %d"
                       % (min_terms, N))
    ns = np.arange(1, N + 1, dtype=float)

    def _fit(xcol):
        A = np.column_stack([xcol, np.ones_like(xcol)])
        coef, *_ = np.linalg.lstsq(A, logs, rcond=None)
        resid = float(np.sqrt(np.mean((A @ coef - logs) ** 2)))
        return float(coef[0]), resid

    beta, r_beta = _fit(ns)
    alpha, r_alpha = _fit(np.log(ns))

    scale = max(1.0, float(np.std(logs)))
    if min(r_beta, r_alpha) > 0.5 * scale and min(r_beta, r_alpha) > 2.0:
        kind, rate, resid = "undetermined", 0.0, min(r_beta, r_alpha)
    elif r_beta <= r_alpha:
        if abs(beta) > 1e-3:
            kind, rate, resid = "exponential", beta, r_beta
        else:
            kind, rate, resid = "subpolynomial", beta, r_beta
    else:
        if abs(alpha) > 0.1:
            kind, rate, resid = "polynomial", alpha, r_alpha
        else:
            kind, rate, resid = "subpolynomial", alpha, r_alpha
    return GrowthFit(kind=kind, rate=rate, residual=resid, beta=beta,
                     alpha=alpha, beta_residual=r_beta, alpha_residual=r_alpha)


def summability_check(seq, ell=None, mode="thm2", ell_max=None):
    """Verdict on sum_n D_n^(-s), s = 1/(2*ell - 1) (mode "thm2", with ell
    the order of the critical point) or s = 1/ell_max (mode "thm3").

    The verdict couples the partial sums with the growth classification:
    exponential growth with positive rate gives a geometric tail estimate
    and "convergent"; polynomial growth needs s * alpha > 1; bounded or
    shrinking D_n diverge; a truncated or unclassifiable sequence is
    "undetermined".  Raw partial sums alone never justify "convergent".
    """
    if mode == "thm2":
        if ell is None:
            raise MapError("mode 'thm2' needs the critical order ell")
        if ell < 2:
            raise MapError("critical order must be >= 2")
        s = 1.0 / (2.0 * ell - 1.0)
    elif mode == "thm3":
        if ell_max is None:
            raise MapError("mode 'thm3' needs ell_max")
        s = 1.0 / float(ell_max)
    else:
        raise MapError("mode must be 'thm2' or 'thm3'")

    logs = seq.log_values
    terms = np.exp(-s * logs)
    partials = np.cumsum(terms)
    notes = []
    tail = None
    limit = None

    if seq.hit_critical is not None:
        notes.append("sequence truncated at step %d (critical-orbit guard)"
                     % seq.hit_critical)

    try:
        gf = growth_fit(seq)
    except FitError as exc:
        gf = None
        notes.append(str(exc))

    if gf is None or seq.hit_critical is not None:
        verdict = "undetermined"
    elif gf.kind == "exponential" and gf.rate > 0.0:
        r = math.exp(-s * gf.rate)
        tail = float(terms[-1]) * r / (1.0 - r)
        limit = float(partials[-1]) + tail
        verdict = "convergent"
    elif gf.kind == "exponential":
        verdict = "divergent"
        notes.append("D_n does not grow (rate %.3g <= 0); terms do not vanish"
                     % gf.rate)
    elif gf.kind == "polynomial":
        if s * gf.rate > 1.0:
            verdict = "convergent"
            notes.append("polynomial growth with s*alpha = %.3f > 1"
                         % (s * gf.rate))
        else:
            verdict = "divergent"
            notes.append("polynomial growth with s*alpha = %.3f <= 1"
                         % (s * gf.rate))
    elif gf.kind == "subpolynomial":
        verdict = "divergent"
        notes.append("D_n is essentially bounded; terms do not vanish")
    else:
        verdict = "undetermined"

    return SummabilityReport(mode=mode, exponent=s, n_terms=len(logs),
                             partial_sum=float(partials[-1]) if len(partials)
                             else 0.0,
                             partial_sums=partials, growth=gf,
                             verdict=verdict, tail_estimate=tail,
                             limit_estimate=limit, notes=notes)


# ---------------------------------------------------------------------------
# Ulam densities
# ---------------------------------------------------------------------------

def transfer_matrix(m, edges, samples_per_bin=64, iterations=1):
    """Row-stochastic Ulam matrix on the given bin edges.

    Each source bin is cut into `samples_per_bin` slabs; the slab endpoints
    are mapped through f^iterations and the slab's mass is spread over the
    destination bins in proportion to its image interval's overlap with
    each bin (exact for affine branches, so transition fractions are not
    quantized to multiples of 1/samples_per_bin).  Images escaping the bin
    range by more than a tolerance mean the range is not invariant.
    """
    edges = np.asarray(edges, dtype=float)
    nbins = len(edges) - 1
    a, b = edges[0], edges[-1]
    xs = np.linspace(a, b, nbins * samples_per_bin + 1)
    ys = xs
    for _ in range(iterations):
        ys = m.eval_array(np.clip(ys, *m.domain))
    tol = 1e-9 * (b - a)
    if np.min(ys) < a - tol or np.max(ys) > b + tol:
        raise DensityError("bin range [%r, %r] is not invariant (image "
                           "reaches [%r, %r])" % (a, b, float(np.min(ys)),
                                                  float(np.max(ys))))
    ys = np.clip(ys, a, b)
    lo = np.minimum(ys[:-1], ys[1:])
    hi = np.maximum(ys[:-1], ys[1:])
    span = np.maximum(hi - lo, 0.0)
    rows = np.repeat(np.arange(nbins), samples_per_bin)
    mass = 1.0 / samples_per_bin
    lo_bin = np.clip(np.searchsorted(edges, lo, side="right") - 1,
                     0, nbins - 1)
    hi_bin = np.clip(np.searchsorted(edges, hi, side="right") - 1,
                     0, nbins - 1)

    ent_r, ent_c, ent_v = [], [], []
    degen = span <= 0.0
    if np.any(degen):
        ent_r.append(rows[degen])
        ent_c.append(lo_bin[degen])
        ent_v.append(np.full(int(degen.sum()), mass))
    live = ~degen
    max_span = int(np.max(hi_bin[live] - lo_bin[live])) if np.any(live) else 0
    for s in range(max_span + 1):
        sel = live & (lo_bin + s <= hi_bin)
        if not np.any(sel):
            break
        d = lo_bin[sel] + s
        overlap = (np.minimum(hi[sel], edges[d + 1])
                   - np.maximum(lo[sel], edges[d]))
        frac = np.clip(overlap, 0.0, None) / span[sel]
        ent_r.append(rows[sel])
        ent_c.append(d)
        ent_v.append(mass * frac)
    P = sp.coo_matrix((np.concatenate(ent_v),
                       (np.concatenate(ent_r), np.concatenate(ent_c))),
                      shape=(nbins, nbins)).tocsr()
    return P


def _power_iterate(P, v0, max_iter, tol=1e-14):
    v = v0 / v0.sum()
    for _ in range(max_iter):
        w = v @ P
        w = np.asarray(w).ravel()
        w_sum = w.sum()
        if w_sum <= 0:
            raise DensityError("transfer operator annihilated the density")
        w /= w_sum
        if np.abs(w - v).sum() < tol:
            v = w
            break
        v = w
    resid = float(np.abs(np.asarray(v @ P).ravel() - v).sum())
    return v, resid


def ulam_density(m, bins=1024, refinement=1000, domain=None, iterations=1,
                 samples_per_bin=64):
    """Invariant density of f (or f^iterations) by Ulam's method.

    Bins live on the critical interval when it converges, else the full
    domain.  Power iteration runs from two independent starting vectors;
    if they settle on visibly different fixed densities the leading
    eigenspace is degenerate (an identity-like map) and that is an error,
    not an answer.
    """
    if bins < 64:
        raise DensityError("need at least 64 bins")
    if refinement < 1000:
        raise DensityError("power-iteration budget must be >= 1000")
    if domain is None:
        ci = critical_interval(m)
        if ci.converged and ci.invariant and ci.hi > ci.lo:
            domain = (ci.lo, ci.hi)
        else:
            domain = m.domain
    edges = np.linspace(domain[0], domain[1], bins + 1)
    P = transfer_matrix(m, edges, samples_per_bin, iterations)

    v1, r1 = _power_iterate(P, np.ones(bins), refinement)
    ramp = np.linspace(0.5, 1.5, bins)
    v2, r2 = _power_iterate(P, ramp, refinement)
    if np.abs(v1 - v2).sum() > 1e-6:
        raise DensityError(
            "power iteration from independent starts disagrees by L1 %.3g: "
            "leading eigenspace is degenerate (map close to identity?)"
            % float(np.abs(v1 - v2).sum()))
    resid = max(r1, r2)
    if resid > 1e-3:
        raise DensityError("power iteration failed to converge "
                           "(residual %.3g)" % resid)
    return DensityEstimate(edges=edges, weights=v1, method="ulam",
                           invariance_residual=resid,
                           meta={"bins": bins, "iterations": iterations,
                                 "samples_per_bin": samples_per_bin})


def orbit_histogram(m, edges, steps=10_000_000, burn_in=1000, n_orbits=1000,
                    seed=_DEFAULT_SEED):
    """Empirical histogram of long orbits on the given edges.  Runs
    n_orbits parallel orbits from seeded uniform starts; `steps` counts the
    retained samples (burn-in excluded)."""
    edges = np.asarray(edges, dtype=float)
    nbins = len(edges) - 1
    a, b = edges[0], edges[-1]
    rng = np.random.Generator(np.random.PCG64(seed))
    xs = rng.uniform(a, b, n_orbits)
    lo, hi = m.domain
    for _ in range(burn_in):
        xs = m.eval_array(np.clip(xs, lo, hi))
    counts = np.zeros(nbins, dtype=np.int64)
    n_steps = int(steps) // n_orbits
    for _ in range(n_steps):
        xs = m.eval_array(np.clip(xs, lo, hi))
        idx = np.searchsorted(edges, np.clip(xs, a, b), side="right") - 1
        np.clip(idx, 0, nbins - 1, out=idx)
        counts += np.bincount(idx, minlength=nbins)
    weights = counts / counts.sum()
    P = transfer_matrix(m, edges)
    resid = float(np.abs(np.asarray(weights @ P).ravel() - weights).sum())
    return DensityEstimate(edges=edges, weights=weights,
                           method="orbit-histogram",
                           invariance_residual=resid,
                           meta={"steps": int(n_steps) * n_orbits,
                                 "n_orbits": n_orbits, "seed": seed})


def average_measure(density_k, m, k, samples_per_bin=64):
    """The f-invariant density (1/k) * sum_{i<k} mu_k o f^-i built from an
    f^k-invariant density mu_k, discretized as the average of the first k
    transfer-matrix pushforwards.

    Preconditions: density_k must actually be close to f^k-invariant
    (residual < 1e-3 under the Ulam matrix of f^k on its own grid).  The
    result's invariance_residual is measured under the Ulam matrix of f.
    """
    edges = density_k.edges
    lo, hi = m.domain
    if edges[0] < lo - 1e-9 or edges[-1] > hi + 1e-9:
        raise DensityError("density grid exceeds the map domain")
    Pk = transfer_matrix(m, edges, samples_per_bin, iterations=k)
    v = density_k.weights
    rk = float(np.abs(np.asarray(v @ Pk).ravel() - v).sum())
    if rk >= 1e-3:
        raise DensityError("input density is not f^k-invariant enough "
                           "(residual %.3g >= 1e-3)" % rk)
    P = transfer_matrix(m, edges, samples_per_bin, iterations=1)
    acc = v.copy()
    push = v.copy()
    for _ in range(k - 1):
        push = np.asarray(push @ P).ravel()
        acc += push
    acc /= k
    acc /= acc.sum()
    resid = float(np.abs(np.asarray(acc @ P).ravel() - acc).sum())
    return DensityEstimate(edges=edges, weights=acc, method="iterate-average",
                           invariance_residual=resid,
                           meta={"k": k, "input_residual_fk": rk})


# ---------------------------------------------------------------------------
# Correlation decay
# ---------------------------------------------------------------------------

def _observable(obs, params):
    if callable(obs):
        raw = obs
    else:
        raw = compile_array(parse_expr(obs), params)

    def fn(xs):
        out = np.asarray(raw(xs), dtype=float)
        if out.shape != np.shape(xs):
            out = np.full(np.shape(xs), float(out))
        return out
    return fn


def _op_correlations(P, mids, w, phi_f, psi_f, n_max):
    phis, psis = phi_f(mids), psi_f(mids)
    mu_phi = float(np.dot(phis, w))
    mu_psi = float(np.dot(psis, w))
    nu = psis * w
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        out[n] = abs(float(np.dot(phis, nu)) - mu_phi * mu_psi)
        nu = np.asarray(nu @ P).ravel()
    return out


@dataclass
class CorrelationReport:
    ns: np.ndarray
    operator_values: np.ndarray
    birkhoff_values: np.ndarray
    error_bars: np.ndarray
    flagged: list
    rate: Optional[float]
    c0: float


def correlation_decay(m, phi, psi, density, n_max=20, orbit_steps=1_000_000,
                      seed=_DEFAULT_SEED):
    """C_n = |int phi(f^n) psi dmu - int phi dmu int psi dmu| two ways:
    pushing psi*mu through transfer-matrix powers, and Birkhoff averages
    along a long seeded orbit.

    The operator values carry an irreducible discretization bias, so the
    error bar per n combines the Birkhoff batch-mean standard error with a
    two-level grid-refinement estimate of that bias (op recomputed on the
    half and quarter grids when the bin count divides by 4).  Disagreement
    beyond 3x the combined bar flags the entry and casts doubt on the
    density, the mixing, or both.
    """
    phi_f = _observable(phi, m.params)
    psi_f = _observable(psi, m.params)
    edges = density.edges
    mids = density.midpoints()
    w = density.weights
    nbins = len(edges) - 1
    P = transfer_matrix(m, edges)
    resid = float(np.abs(np.asarray(w @ P).ravel() - w).sum())
    if resid >= 1e-3:
        raise DensityError("density is not invariant enough for correlation "
                           "estimates (residual %.3g >= 1e-3)" % resid)

    ns = np.arange(0, n_max + 1)
    op = _op_correlations(P, mids, w, phi_f, psi_f, n_max)

    # operator bias bars from the same series on the half and quarter grids
    disc = np.zeros(len(ns))
    if nbins % 4 == 0:
        prev = op
        for step in (2, 4):
            e_c = edges[::step]
            P_c = transfer_matrix(m, e_c)
            w_c, _ = _power_iterate(P_c, np.ones(len(e_c) - 1), 2000)
            cur = _op_correlations(P_c, 0.5 * (e_c[:-1] + e_c[1:]), w_c,
                                   phi_f, psi_f, n_max)
            disc += np.abs(prev - cur)
            prev = cur

    # Birkhoff side, one long seeded orbit
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.uniform(edges[0], edges[-1])
    for _ in range(1000):
        x = m(x)
    T = int(orbit_steps)
    orbit = np.empty(T)
    for t in range(T):
        orbit[t] = x
        x = m(x)
    phi_o = phi_f(orbit)
    psi_o = psi_f(orbit)
    bar_phi = float(np.mean(phi_o))
    bar_psi = float(np.mean(psi_o))
    birk = np.empty(len(ns))
    se = np.empty(len(ns))
    nb = 20
    for i, n in enumerate(ns):
        prod = phi_o[n:] * psi_o[:T - n] if n > 0 else phi_o * psi_o
        birk[i] = abs(float(np.mean(prod)) - bar_phi * bar_psi)
        bm = np.array([np.mean(bb) for bb in np.array_split(prod, nb)])
        se[i] = float(np.std(bm) / math.sqrt(nb))

    bars = 3.0 * (se + disc + 1e-12)
    flagged = [int(n) for i, n in enumerate(ns)
               if abs(op[i] - birk[i]) > bars[i]]

    # decay rate from operator values that rise above their own bars
    rate = None
    good = (ns >= 1) & (op > np.maximum(bars, 1e-13))
    if np.count_nonzero(good) >= 3:
        A = np.column_stack([ns[good].astype(float),
                             np.ones(np.count_nonzero(good))])
        coef, *_ = np.linalg.lstsq(A, np.log(op[good]), rcond=None)
        rate = float(-coef[0])

    return CorrelationReport(ns=ns, operator_values=op, birkhoff_values=birk,
                             error_bars=bars, flagged=flagged, rate=rate,
                             c0=float(op[0]))


# ---------------------------------------------------------------------------
# Iterate identity for D_n
# ---------------------------------------------------------------------------

def iterate_dn_identity_check(m, k, c_tilde, n_max=8, guard_frac=_GUARD_FRAC):
    """Consistency of the growth sequences of f and f^k along the orbit of
    a critical point c~ of f^k.

    Hypothesis: the orbit c~, f(c~), ..., f^(k-1)(c~) meets C(f) exactly
    once, at step m0, with c = f^m0(c~).  Then with
    C = prod_{i=m0+1}^{k-1} |f'(f^i(c~))|,

        D_{(n+1)k - m0 - 1}(c)  =  C * D_n[f^k](c~)      for n >= 1,

    where D_n[f^k] is the growth sequence of the iterate map, and C does
    not depend on n.  Reports the relative deviation for n = 1..n_max.
    Raises if the orbit re-enters C(f) (no unique m0: the identity's
    hypothesis fails) or never meets it (c~ is not critical for f^k).
    """
    lo, hi = m.domain
    width = hi - lo
    crits = [cp.x for cp in find_critical_points(m)]
    if not crits:
        raise MapError("map has no critical points")
    dm = m.derivative(1)
    guard = guard_frac * width

    ctil = float(c_tilde)
    hits = []
    y = ctil
    for i in range(k):
        if min(abs(y - cx) for cx in crits) < 1e-7 * width:
            hits.append(i)
        y = m(y)
    if not hits:
        raise MapError("the first %d orbit points of c~=%r avoid C(f); c~ "
                       "is not a critical point of the %d-th iterate"
                       % (k, ctil, k))
    if len(hits) > 1:
        raise MapError("orbit of c~=%r re-enters C(f) (hits at steps %s): "
                       "no unique m, the identity's hypothesis fails"
                       % (ctil, hits))
    m0 = hits[0]
    c = ctil
    for _ in range(m0):
        c = m(c)
    # snap to the exact critical point so dn_sequence accepts it
    c = min(crits, key=lambda cx: abs(cx - c))

    need = (n_max + 1) * k
    seq_f = dn_sequence(m, c, N=need, guard_frac=guard_frac)

    # orbit_logs[t-1] = ln|f'(f^t(c~))|, truncated at the guard.  Step m0
    # is the hypothesis hit itself: it is excluded from every product, so
    # it gets a placeholder instead of tripping the guard.
    y = ctil
    orbit_logs = []
    for t in range(1, need + k + 1):
        y = m(y)
        d = abs(dm(y))
        if t == m0:
            orbit_logs.append(0.0)
            continue
        if d <= guard:
            break
        orbit_logs.append(math.log(d))

    # constant C = prod_{i=m0+1}^{k-1} |f'(f^i(c~))|
    if len(orbit_logs) < k - 1:
        raise MapError("orbit of c~ re-enters the critical guard before "
                       "step %d; the constant C is undefined" % (k - 1))
    logC = float(sum(orbit_logs[m0:k - 1]))

    rows = []
    for n in range(1, n_max + 1):
        lhs_idx = (n + 1) * k - m0 - 1
        if lhs_idx > len(seq_f):
            break
        lhs_log = seq_f.log_values[lhs_idx - 1]
        hi_t = k + n * k - 1
        if hi_t > len(orbit_logs):
            break
        rhs_log = logC + sum(orbit_logs[k - 1:hi_t])
        rel = abs(math.expm1(rhs_log - lhs_log))
        rows.append({"n": n, "lhs_log": lhs_log, "rhs_log": rhs_log,
                     "rel_err": rel})
    if not rows:
        raise MapError("orbit too short for any comparison")
    return {"c_tilde": ctil, "m0": m0, "c": c, "log_C": logC, "rows": rows,
            "max_rel_err": max(r["rel_err"] for r in rows)}
