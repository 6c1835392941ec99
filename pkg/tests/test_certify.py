"""Certificates: partition and Moebius methods, bounds, enumeration, and
independent verification."""

import itertools
import math

import numpy as np
import pytest

from schwarzscope import (Certificate, PieceError, Refusal, build_transition_matrix,
                          certificate_from_dict, compute_cell_bounds,
                          convexity_scan, load_map, mobius_certificate,
                          parse_map, partition_certificate, uniform_partition,
                          validate_partition, verify_certificate)
from schwarzscope.certify import check_order


# ---------------------------------------------------------------------------
# Frozen certificates on the bundled examples
# ---------------------------------------------------------------------------

def test_tan_literal_partition_refuses_at_k2(tan_map, tan_partition):
    res = partition_certificate(tan_map, partition=tan_partition, k_max=2,
                                refine=False)
    assert not res.ok
    assert res.evidence["worst_sequence"] == [0, 1]
    assert res.evidence["worst_sum"] == pytest.approx(92.104730, abs=1e-4)
    ## the outermost cells genuinely carry positive Schwarzian
    assert res.evidence["T"][0] == pytest.approx(3.529053, abs=1e-4)
    assert res.evidence["T"][4] < -40.0


def test_tan_refined_partition_certifies_order2(tan_map, tan_partition):
    cert = partition_certificate(tan_map, partition=tan_partition, k_max=2,
                                 refine=True)
    assert cert.ok
    assert cert.order_bound == 2
    assert cert.rigor == "interval"
    assert len(cert.partition) - 1 == 17
    assert cert.worst_sum == pytest.approx(-0.174569, abs=1e-4)
    assert max(cert.bounds["T"]) < 10.0
    assert all(mv >= 0.0 for mv in cert.bounds["m"])


def test_tan_certificate_carries_order_ge_evidence(tan_map, tan_partition):
    cert = partition_certificate(tan_map, partition=tan_partition, k_max=2,
                                 refine=True)
    ev = cert.meta.get("order_ge_evidence")
    assert ev is not None
    assert ev["k"] == 1
    assert ev["second_difference"] <= 0.0
    a, b = ev["span"]
    assert a <= ev["witness_x"] <= b


def test_tan_order1_refusal_is_pointwise(tan_map, tan_partition):
    res = partition_certificate(tan_map, partition=tan_partition, k_max=1,
                                refine=True)
    assert not res.ok
    assert "positive at a point" in res.reason
    assert res.evidence["pointwise_sup_S"] > 0.0


def test_mobius_certificate_piecewise_cubic(cubic_map):
    cert = mobius_certificate(cubic_map, k_max=4)
    assert cert.ok
    assert cert.order_bound == 3
    assert cert.meta["escape_steps"] == 2
    assert cert.meta["components"] == [[0.0, 0.5]]

    res = mobius_certificate(cubic_map, k_max=2)
    assert not res.ok
    assert "escape" in res.reason


def test_mobius_degenerate_empty_region(logistic):
    cert = mobius_certificate(logistic, k_max=3)
    assert cert.ok
    assert cert.order_bound == 1
    assert cert.meta["components"] == []


def test_c3_joint_downgrades_partition_rigor(cubic_map):
    cert = partition_certificate(cubic_map, k_max=3, refine=True)
    assert cert.ok
    assert cert.rigor == "sampled"
    assert "downgraded" in cert.meta
    ## the non-rigorous certificate cross-checks against the scan
    assert convexity_scan(cubic_map, cert.order_bound).verdict == "pass"


# ---------------------------------------------------------------------------
# Cell bounds
# ---------------------------------------------------------------------------

def test_interval_bounds_contain_sampled_truth(logistic):
    eps = [0.0, 0.2, 0.5, 0.8, 1.0]
    cb = compute_cell_bounds(logistic, eps, rigor="interval")
    xs = np.linspace(0.0, 1.0, 20001)[1:-1]
    xs = xs[np.abs(xs - 0.5) > 1e-12]
    f1 = logistic.eval_array(xs, 1)
    s = -96.0 / (4.0 - 8.0 * xs) ** 2
    for i, (a, b) in enumerate(zip(eps, eps[1:])):
        inside = (xs >= a) & (xs <= b)
        svals = s[inside]
        r = cb.excision_radius[i]
        if r > 0.0:
            svals = svals[np.abs(xs[inside] - 0.5) > r]
        assert cb.T[i] >= np.max(svals) - 1e-9
        d2 = f1[inside] ** 2
        assert cb.m[i] <= np.min(d2) + 1e-9
        assert cb.M[i] >= np.max(d2) - 1e-9


def test_sampled_bounds_inflate_but_keep_sign(logistic):
    eps = [0.0, 0.2, 1.0]
    cb = compute_cell_bounds(logistic, eps, rigor="sampled")
    xs = np.linspace(0.0, 0.2, 2001)[1:]
    top = float(np.max(-96.0 / (4.0 - 8.0 * xs) ** 2))
    assert cb.T[0] >= top            # inflation moves the bound up
    assert cb.T[0] < 0.0             # without crossing zero
    assert cb.m[0] < cb.M[0]
    assert cb.rigor == "sampled"


def test_quotient_form_rescues_singular_critical_cell(neuro_map):
    """The fold's derivative enclosure cannot exclude zero near the critical
    point at any bisection depth; the quotient form still produces a finite
    negative sup for S on the critical cell."""
    from schwarzscope.neuro import ReturnMapFamily
    fam = ReturnMapFamily(0.8, 0.55)
    ftil = fam.restricted_map(0.599480459427786)
    cert = partition_certificate(ftil, k_max=1, rigor="interval",
                                 refine=True, depth=6)
    assert cert.ok
    assert cert.order_bound == 1
    assert max(cert.bounds["T"]) < -1000.0


def test_excision_radius_recorded(logistic):
    eps = [0.0, 0.4, 0.6, 1.0]
    cb = compute_cell_bounds(logistic, eps, rigor="interval")
    assert cb.excision_radius[0] == 0.0
    assert cb.excision_radius[1] == pytest.approx(1e-4 * 0.2)


def test_partition_validation_errors(logistic):
    with pytest.raises(PieceError):
        validate_partition([0.0, 0.5, 0.4, 1.0], logistic.domain)
    with pytest.raises(PieceError):
        validate_partition([0.1, 0.5, 1.0], logistic.domain)
    eps = uniform_partition(logistic)
    assert eps[0] == 0.0 and eps[-1] == 1.0 and len(eps) == 17


# ---------------------------------------------------------------------------
# Enumeration properties
# ---------------------------------------------------------------------------

class _FakeBounds:
    def __init__(self, T, m, M):
        self.T, self.m, self.M = T, m, M


def _brute_force(bounds, matrix, k):
    """Reference enumeration in lexicographic order with strict updates."""
    n = len(bounds.T)
    best, best_seq = -math.inf, None
    for seq in itertools.product(range(n), repeat=k):
        if any(not matrix[seq[i]][seq[i + 1]] for i in range(k - 1)):
            continue
        s, Pm, PM = 0.0, 1.0, 1.0
        for c in seq:
            t = bounds.T[c]
            s += (Pm if t <= 0.0 else PM) * t
            Pm *= bounds.m[c]
            PM *= bounds.M[c]
        if s > best:
            best, best_seq = s, list(seq)
    return best < 0.0, best, best_seq


def _random_instance(rng, n, spread=2.0):
    T = [float(v) for v in rng.uniform(-spread, spread, size=n)]
    m = [float(v) for v in rng.uniform(0.0, 1.5, size=n)]
    M = [mi + float(v) for mi, v in zip(m, rng.uniform(0.1, 1.5, size=n))]
    mat = rng.random((n, n)) < 0.7
    ## keep at least one admissible continuation per cell
    for i in range(n):
        if not mat[i].any():
            mat[i, int(rng.integers(n))] = True
    return _FakeBounds(T, m, M), mat


def test_enumeration_completeness_bruteforce(rng):
    """DFS agrees with the n^k filter for n <= 5 cells, k <= 4."""
    for _ in range(40):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, 5))
        bounds, mat = _random_instance(rng, n)
        ok, worst, wseq, _ = check_order(bounds, mat, k)
        bok, bworst, bseq = _brute_force(bounds, mat, k)
        assert ok == bok
        assert worst == pytest.approx(bworst, rel=1e-12, abs=1e-12)
        assert wseq == bseq


def test_prune_safety(rng):
    """Verdict and worst sum are identical with pruning on and off."""
    for _ in range(40):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, 5))
        bounds, mat = _random_instance(rng, n)
        on = check_order(bounds, mat, k, prune=True)
        off = check_order(bounds, mat, k, prune=False)
        assert on[0] == off[0]
        assert on[1] == pytest.approx(off[1], rel=1e-12, abs=1e-12)
        assert on[2] == off[2]


def test_overapproximation_monotonicity(rng):
    """Spurious transition-matrix entries can only add sequences; a refusal
    never turns into a certificate."""
    flipped = 0
    while flipped < 25:
        n = int(rng.integers(2, 6))
        k = int(rng.integers(2, 5))
        bounds, mat = _random_instance(rng, n)
        ok, _, _, _ = check_order(bounds, mat, k)
        if ok:
            continue
        noisy = mat.copy()
        extra = rng.random((n, n)) < 0.3
        noisy |= extra
        ok2, worst2, _, _ = check_order(bounds, noisy, k)
        assert not ok2
        flipped += 1


def test_transition_matrix_overapproximates(logistic, rng):
    eps = [0.0, 0.25, 0.5, 0.75, 1.0]
    mat = build_transition_matrix(logistic, eps)
    for _ in range(500):
        x = float(rng.uniform(0.0, 1.0))
        i = min(int(x * 4), 3)
        j = min(int(logistic(x) * 4), 3)
        assert mat[i][j]


# ---------------------------------------------------------------------------
# Soundness cross-check and verification
# ---------------------------------------------------------------------------

def test_interval_success_implies_convexity_pass(tan_map, tan_partition, rng):
    """Certified order k in interval mode is a sufficient condition for the
    profile |(f^k)'|^(-1/2) to scan strictly convex, here exercised on the
    bundled tangent map and randomized parameter perturbations."""
    cert = partition_certificate(tan_map, partition=tan_partition, k_max=2,
                                 refine=True)
    assert cert.ok and convexity_scan(tan_map, cert.order_bound).verdict == "pass"
    checked = 0
    while checked < 20:
        a = 1.7 + float(rng.uniform(-0.04, 0.04))
        m = parse_map("1 - a*tan(pi*x^2/4)", (-1.0, 1.0),
                      params={"a": a, "pi": math.pi})
        cert = partition_certificate(m, partition=tan_partition, k_max=2,
                                     refine=True, depth=4, max_cells=40)
        if not cert.ok or cert.rigor != "interval":
            continue
        assert convexity_scan(m, cert.order_bound).verdict == "pass"
        checked += 1


def test_verify_certificate_replay(tan_map, tan_partition):
    cert = partition_certificate(tan_map, partition=tan_partition, k_max=2,
                                 refine=True)
    res = verify_certificate(tan_map, cert)
    assert res.valid, res.reasons
    ## serialization round trip verifies identically
    res2 = verify_certificate(tan_map, cert.to_dict())
    assert res2.valid


def test_verify_rejects_tampering(tan_map, tan_partition):
    cert = partition_certificate(tan_map, partition=tan_partition, k_max=2,
                                 refine=True).to_dict()
    ## claim a tighter sup than the map supports
    doctored = dict(cert, bounds=dict(cert["bounds"]))
    doctored["bounds"]["T"] = [min(t, -5.0) for t in cert["bounds"]["T"]]
    res = verify_certificate(tan_map, doctored)
    assert not res.valid
    assert res.reasons


def test_verify_rejects_missing_transition(cubic_map, tan_map, tan_partition):
    cert = partition_certificate(tan_map, partition=tan_partition, k_max=2,
                                 refine=True).to_dict()
    doctored = dict(cert, matrix=[[False] * len(row) for row in cert["matrix"]])
    res = verify_certificate(tan_map, doctored)
    assert not res.valid


def test_mobius_verify_replay(cubic_map):
    cert = mobius_certificate(cubic_map, k_max=4)
    res = verify_certificate(cubic_map, cert)
    assert res.valid, res.reasons


def test_certificate_json_roundtrip(cubic_map):
    cert = mobius_certificate(cubic_map, k_max=4)
    again = certificate_from_dict(cert.to_dict())
    assert isinstance(again, Certificate)
    assert again.order_bound == cert.order_bound
    assert again.kind == cert.kind
