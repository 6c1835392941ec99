"""Derivative growth sequences, summability verdicts, Ulam densities,
correlation decay, and the iterate-consistency identity for D_n.

The a = 4 logistic map anchors most tests: its critical orbit is
1/2 -> 1 -> 0 -> 0 -> ... with |f'| = 4 at both 1 and 0, so D_n = 4^n
exactly, and its invariant density has the closed form
1 / (pi sqrt(x (1 - x))), integrable in closed form per bin.
"""

import math

import numpy as np
import pytest

from schwarzscope import (
    DensityEstimate,
    average_measure,
    correlation_decay,
    dn_sequence,
    growth_fit,
    iterate_dn_identity_check,
    l1_distance,
    orbit_histogram,
    parse_map,
    summability_check,
    transfer_matrix,
    ulam_density,
)
from schwarzscope.errors import DensityError, MapError


def _lg(a):
    return parse_map("a*x*(1 - x)", (0.0, 1.0), params={"a": a})


def _arcsine_on(edges):
    ## Exact per-bin mass of 1/(pi sqrt(x(1-x))): the antiderivative is
    ## (2/pi) asin(sqrt(x)).
    w = (2.0 / math.pi) * (np.arcsin(np.sqrt(edges[1:]))
                           - np.arcsin(np.sqrt(edges[:-1])))
    return DensityEstimate(edges=edges, weights=w, method="exact",
                           invariance_residual=0.0)


## ----------------------------------------------------------- D_n sequences


def test_dn_is_exactly_four_to_the_n(logistic):
    seq = dn_sequence(logistic, N=50)
    assert seq.c == 0.5
    assert seq.hit_critical is None
    expect = np.arange(1, 51) * math.log(4.0)
    assert np.max(np.abs(seq.log_values - expect)) < 1e-12


def test_dn_matches_direct_derivative_product():
    m = _lg(3.2)
    seq = dn_sequence(m, N=50)
    dm = m.derivative(1)
    y = m(seq.c)
    prod = 1.0
    direct = []
    for _ in range(50):
        prod *= abs(dm(y))
        direct.append(prod)
        y = m(y)
    rel = np.abs(np.exp(seq.log_values) / np.asarray(direct) - 1.0)
    assert np.max(rel) < 1e-12


def test_dn_guard_truncates_on_critical_return():
    ## At a = 1 + sqrt(5) the critical orbit is the superstable 2-cycle
    ## 1/2 -> a/4 -> 1/2, so the derivative product dies at step 2.
    m = _lg(1.0 + math.sqrt(5.0))
    seq = dn_sequence(m, N=100)
    assert seq.hit_critical == 2
    assert len(seq) == 1


def test_dn_rejects_non_critical_start(logistic):
    with pytest.raises(MapError):
        dn_sequence(logistic, c=0.3)


## ------------------------------------------------------------- growth fits


def test_growth_fit_exponential(logistic):
    gf = growth_fit(dn_sequence(logistic, N=50))
    assert gf.kind == "exponential"
    assert abs(gf.rate - math.log(4.0)) < 1e-10
    assert gf.residual < 1e-10


def test_growth_fit_decaying_exponential():
    ## The a = 3.2 critical orbit falls into the attracting 2-cycle with
    ## multiplier 0.16, so log D_n drifts at ln(0.16)/2 per step.
    gf = growth_fit(dn_sequence(_lg(3.2), N=200))
    assert gf.kind == "exponential"
    assert abs(gf.rate - math.log(0.16) / 2.0) < 2e-3


def test_growth_fit_polynomial_and_flat():
    gf = growth_fit(3.0 * np.log(np.arange(1, 101, dtype=float)))
    assert gf.kind == "polynomial"
    assert abs(gf.rate - 3.0) < 1e-10

    flat = growth_fit(np.full(100, 2.0))
    assert flat.kind == "subpolynomial"


## ------------------------------------------------------------- summability


def test_summability_convergent_with_limit(logistic):
    seq = dn_sequence(logistic, N=50)
    rep = summability_check(seq, ell=2, mode="thm2")
    assert rep.exponent == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert rep.verdict == "convergent"
    ## Geometric closed form: sum 4^(-n/3) = 1 / (4^(1/3) - 1).
    assert rep.partial_sum == pytest.approx(1.702414383762014, abs=1e-12)
    assert rep.limit_estimate == pytest.approx(
        1.0 / (4.0 ** (1.0 / 3.0) - 1.0), abs=1e-9)
    assert rep.tail_estimate is not None and rep.tail_estimate > 0.0


def test_summability_alternate_exponent(logistic):
    rep = summability_check(dn_sequence(logistic, N=50), mode="thm3",
                            ell_max=2)
    assert rep.exponent == 0.5
    assert rep.verdict == "convergent"
    ## sum 4^(-n/2) = sum 2^-n = 1 exactly.
    assert rep.limit_estimate == pytest.approx(1.0, abs=1e-9)


def test_summability_divergent_when_dn_decays():
    rep = summability_check(dn_sequence(_lg(3.2), N=200), ell=2, mode="thm2")
    assert rep.verdict == "divergent"


def test_summability_undetermined_after_guard():
    rep = summability_check(dn_sequence(_lg(1.0 + math.sqrt(5.0)), N=100),
                            ell=2, mode="thm2")
    assert rep.verdict == "undetermined"
    assert any("truncated" in n for n in rep.notes)


def test_summability_argument_validation(logistic):
    seq = dn_sequence(logistic, N=50)
    with pytest.raises(MapError):
        summability_check(seq, mode="thm2")           # ell missing
    with pytest.raises(MapError):
        summability_check(seq, ell=1, mode="thm2")    # order below 2
    with pytest.raises(MapError):
        summability_check(seq, mode="thm3")           # ell_max missing


## ----------------------------------------------------------- Ulam densities


def test_transfer_matrix_is_row_stochastic(logistic):
    P = transfer_matrix(logistic, np.linspace(0.0, 1.0, 257))
    rows = np.asarray(P.sum(axis=1)).ravel()
    assert np.max(np.abs(rows - 1.0)) < 1e-12


def test_ulam_density_matches_arcsine_law(logistic):
    d = ulam_density(logistic, bins=1024)
    assert d.invariance_residual < 1e-10
    assert abs(float(d.weights.sum()) - 1.0) < 1e-12
    assert l1_distance(d, _arcsine_on(d.edges)) < 0.05


def test_tent_map_density_is_exactly_uniform():
    ## Affine branches make the Ulam overlaps exact, and Lebesgue is the
    ## true invariant measure.
    tent = parse_map("1 - 2*sqrt((x - 1/2)^2)", (0.0, 1.0))
    d = ulam_density(tent, bins=256)
    assert np.max(np.abs(d.weights - 1.0 / 256.0)) < 1e-13


def test_identity_map_degeneracy_is_an_error():
    ## Every density is invariant for x -> x; power iteration from two
    ## starts keeps both, and that must be reported, not returned.
    with pytest.raises(DensityError):
        ulam_density(parse_map("x", (0.0, 1.0)), bins=128)


def test_l1_distance_requires_matching_grids(logistic):
    d1 = ulam_density(logistic, bins=128)
    d2 = ulam_density(logistic, bins=256)
    with pytest.raises(DensityError):
        l1_distance(d1, d2)


def test_orbit_histogram_agrees_with_exact_density(logistic):
    edges = np.linspace(0.0, 1.0, 257)
    h = orbit_histogram(logistic, edges, steps=400_000, burn_in=200,
                        n_orbits=400)
    assert l1_distance(h, _arcsine_on(edges)) < 0.05


def test_orbit_histogram_is_seed_deterministic(logistic):
    edges = np.linspace(0.0, 1.0, 65)
    h1 = orbit_histogram(logistic, edges, steps=50_000, n_orbits=100, seed=7)
    h2 = orbit_histogram(logistic, edges, steps=50_000, n_orbits=100, seed=7)
    assert np.array_equal(h1.weights, h2.weights)


## --------------------------------------------------------- iterate average


def test_average_measure_k1_is_identity(logistic):
    d = ulam_density(logistic, bins=256)
    avg = average_measure(d, logistic, 1)
    assert np.max(np.abs(avg.weights - d.weights)) < 1e-14


def test_average_measure_from_second_iterate(logistic):
    ## An f^2-invariant density averaged over one pushforward must be
    ## close to the f-invariant one; the leftover is grid bias.
    d1 = ulam_density(logistic, bins=256)
    d2 = ulam_density(logistic, bins=256, iterations=2)
    avg = average_measure(d2, logistic, 2)
    assert avg.invariance_residual < 0.05
    assert l1_distance(avg, d1) < 0.05
    assert avg.meta["k"] == 2


def test_average_measure_precondition(logistic):
    flat = DensityEstimate(edges=np.linspace(0.0, 1.0, 257),
                           weights=np.full(256, 1.0 / 256.0),
                           method="flat", invariance_residual=1.0)
    with pytest.raises(DensityError):
        average_measure(flat, logistic, 2)


## -------------------------------------------------------- correlation decay


def test_correlation_of_coordinate_observable(logistic):
    ## For a = 4 the coordinate observable is white noise: C_0 = 1/8
    ## (the arcsine variance) and C_n = 0 for n >= 1.  The operator values
    ## carry grid bias, so agreement is judged against the combined bars.
    d = ulam_density(logistic, bins=256)
    rep = correlation_decay(logistic, "x", "x", d, n_max=6,
                            orbit_steps=200_000)
    assert rep.c0 == pytest.approx(0.125, abs=0.01)
    assert rep.flagged == []
    assert np.max(rep.birkhoff_values[1:]) < 5e-3
    assert np.all(rep.error_bars > 0.0)


def test_correlation_constant_observable_vanishes(logistic):
    d = ulam_density(logistic, bins=256)
    rep = correlation_decay(logistic, "1", "x", d, n_max=4,
                            orbit_steps=50_000)
    assert np.max(rep.operator_values) == 0.0
    assert rep.flagged == []


def test_correlation_requires_invariant_density(logistic):
    flat = DensityEstimate(edges=np.linspace(0.0, 1.0, 257),
                           weights=np.full(256, 1.0 / 256.0),
                           method="flat", invariance_residual=1.0)
    with pytest.raises(DensityError):
        correlation_decay(logistic, "x", "x", flat, n_max=3,
                          orbit_steps=10_000)


## ------------------------------------------------- iterate identity for D_n


def test_iterate_identity_at_critical_point(logistic):
    ## c~ = c, k = 2: the orbit hits C(f) at step 0 and the constant is
    ## |f'(f(c))| = |f'(1)| = 4.
    r = iterate_dn_identity_check(logistic, 2, 0.5, n_max=6)
    assert r["m0"] == 0
    assert math.exp(r["log_C"]) == pytest.approx(4.0, abs=1e-12)
    assert r["max_rel_err"] < 1e-10


def test_iterate_identity_at_preimage(logistic):
    ## c~ = f^-1(c): the hit moves to step 1 and the constant collapses to
    ## the empty product.
    ct = (1.0 - 1.0 / math.sqrt(2.0)) / 2.0
    r = iterate_dn_identity_check(logistic, 2, ct, n_max=6)
    assert r["m0"] == 1
    assert r["log_C"] == 0.0
    assert r["max_rel_err"] < 1e-10
    assert len(r["rows"]) == 6


def test_iterate_identity_nontrivial_constant():
    ## a = 3.2, k = 3: C = |f'(0.8)| * |f'(0.512)| = 1.92 * 0.0768.
    r = iterate_dn_identity_check(_lg(3.2), 3, 0.5, n_max=8)
    assert r["m0"] == 0
    assert math.exp(r["log_C"]) == pytest.approx(1.92 * 0.0768, rel=1e-12)
    assert r["max_rel_err"] < 1e-10


def test_iterate_identity_k1_is_trivially_exact(logistic):
    r = iterate_dn_identity_check(logistic, 1, 0.5, n_max=6)
    assert r["m0"] == 0
    assert r["log_C"] == 0.0
    assert r["max_rel_err"] == 0.0


def test_iterate_identity_rejects_non_critical(logistic):
    with pytest.raises(MapError):
        iterate_dn_identity_check(logistic, 2, 0.3)


def test_iterate_identity_rejects_critical_reentry():
    ## At a = 1 + sqrt(5) the critical point is 2-periodic, so the orbit
    ## of c~ = c meets C(f) twice within k = 3 steps and no unique hit
    ## index exists.
    m = _lg(1.0 + math.sqrt(5.0))
    with pytest.raises(MapError):
        iterate_dn_identity_check(m, 3, 0.5)
