"""Command-line front end.

One executable wires the whole toolkit together: map parsing and
inspection, Schwarzian evaluation, convexity scans, negative-Schwarzian
certificates and their independent verification, periodic-orbit censuses,
derivative-growth and invariant-density estimation, and the synthetic
return-map family.  Structured results go to JSON (sorted keys, no
timestamps, so reruns with the same inputs and seed are byte-identical),
series data to CSV.

Exit codes: 0 success, 1 input error, 2 certification or search refusal,
3 census violation.  Every failure also writes a structured JSON error
record next to the regular outputs.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .errors import MapError
from .expressions import load_map, parse_map
from .orbits import (critical_interval, find_critical_points,
                     find_periodic_orbits, singer_census)
from .schwarzian import convexity_profile, convexity_scan, schwarzian_iterate
from .certify import (mobius_certificate, partition_certificate,
                      verify_certificate)
from . import measure as ms
from . import neuro

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_REFUSAL = 2
EXIT_VIOLATION = 3

_DEFAULT_SEED = 1729


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------

def _jsonify(obj):
    """Recursively coerce to plain JSON types (numpy scalars included)."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonify(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _emit(args, name, obj):
    path = os.path.join(args.out, name + ".json")
    _write_json(path, obj)
    print(json.dumps(_jsonify(obj), sort_keys=True))
    return path


def _fail(args, command, exc, code=EXIT_INPUT):
    rec = {"error": type(exc).__name__, "message": str(exc),
           "command": command}
    try:
        _write_json(os.path.join(args.out, command + "_error.json"), rec)
    except OSError:
        pass
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)
    return code


def _load_map_arg(args):
    return load_map(args.map)


def _load_partition(path):
    with open(path) as fh:
        d = json.load(fh)
    try:
        eps = [float(e) for e in d["endpoints"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError("partition file needs an 'endpoints' array: %s" % exc)
    return eps


def _seed(args):
    env = os.environ.get("SCHWARZSCOPE_SEED")
    return int(env) if env is not None else args.seed


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_parse(args):
    m = _load_map_arg(args)
    crits = find_critical_points(m)
    out = {
        "domain": list(m.domain),
        "pieces": [{"on": [p.lo, p.hi], "expr": p.src} for p in m.pieces],
        "params": dict(m.params),
        "smoothness_class": m.smoothness_class(),
        "self_map": m.is_self_map(),
        "critical_points": [{"x": c.x, "order": c.order, "scale": c.scale}
                            for c in crits],
    }
    _emit(args, "parse_summary", out)
    return EXIT_OK


def _cmd_schwarzian(args):
    m = _load_map_arg(args)
    sv = schwarzian_iterate(m, args.x, args.k)
    out = {"x": sv.x, "k": sv.k, "value": sv.value,
           "orbit_clear": sv.orbit_clear}
    _emit(args, "schwarzian_summary", out)
    return EXIT_OK


def _cmd_convexity(args):
    m = _load_map_arg(args)
    rep = convexity_scan(m, args.k, grid=args.grid)
    out = {"k": rep.k, "verdict": rep.verdict, "margin": rep.margin,
           "guard": rep.guard,
           "scanned_intervals": [list(ab) for ab in rep.scanned_intervals],
           "witnesses": rep.witnesses}
    _emit(args, "convexity_summary", out)
    return EXIT_OK


def _cmd_certify(args):
    m = _load_map_arg(args)
    if args.method == "mobius":
        res = mobius_certificate(m, k_max=args.kmax, depth=args.depth)
    else:
        partition = _load_partition(args.partition) if args.partition else None
        res = partition_certificate(m, partition=partition, k_max=args.kmax,
                                    rigor=args.rigor, depth=args.depth,
                                    refine=args.refine)
    _emit(args, "certify_result", res.to_dict())
    return EXIT_OK if res.ok else EXIT_REFUSAL


def _cmd_verify(args):
    m = _load_map_arg(args)
    with open(args.certificate) as fh:
        cert = json.load(fh)
    res = verify_certificate(m, cert)
    _emit(args, "verify_result", {"valid": res.valid, "reasons": res.reasons})
    return EXIT_OK if res.valid else EXIT_REFUSAL


def _cmd_orbits(args):
    m = _load_map_arg(args)
    orbits = find_periodic_orbits(m, p_max=args.pmax)
    out = {"orbits": [{"points": list(o.points), "period": o.period,
                       "multiplier": o.multiplier,
                       "classification": o.classification}
                      for o in orbits]}
    _emit(args, "orbits_summary", out)
    return EXIT_OK


def _cmd_census(args):
    m = _load_map_arg(args)
    rep = singer_census(m, p_max=args.pmax, steps=args.steps)
    out = {
        "criticals": [c.x for c in rep.criticals],
        "orbits": [{"points": list(o.points), "period": o.period,
                    "multiplier": o.multiplier,
                    "classification": o.classification}
                   for o in rep.orbits],
        "attracting_count": rep.attracting_count,
        "interior_neutral_count": rep.interior_neutral_count,
        "boundary_neutral_count": rep.boundary_neutral_count,
        "bound": rep.bound,
        "basin_evidence": rep.basin_evidence,
        "lemma_endpoint_checks": rep.lemma_endpoint_checks,
        "violations": rep.violations,
        "flags": rep.flags,
    }
    _emit(args, "census_summary", out)
    return EXIT_VIOLATION if rep.violations else EXIT_OK


def _cmd_measure_dn(args):
    m = _load_map_arg(args)
    seq = ms.dn_sequence(m, c=args.c, N=args.N)
    gf = ms.growth_fit(seq)
    rep = ms.summability_check(seq, ell=args.ell, mode="thm2")
    _write_csv(os.path.join(args.out, "measure_dn.csv"),
               ["n", "D_n", "log_D_n"],
               [(n + 1, seq.values[n], seq.log_values[n])
                for n in range(len(seq.values))])
    out = {"c": seq.c, "terms": len(seq.values),
           "hit_critical": seq.hit_critical,
           "growth": {"kind": gf.kind, "rate": gf.rate,
                      "residual": gf.residual},
           "summability": {"mode": rep.mode, "exponent": rep.exponent,
                           "verdict": rep.verdict,
                           "partial_sum": rep.partial_sum,
                           "limit_estimate": rep.limit_estimate}}
    _emit(args, "measure_dn_summary", out)
    return EXIT_OK


def _cmd_measure_acip(args):
    m = _load_map_arg(args)
    est = ms.ulam_density(m, bins=args.bins, refinement=args.refinement)
    mids = est.midpoints()
    dens = est.density_values()
    _write_csv(os.path.join(args.out, "measure_acip.csv"),
               ["bin_lo", "bin_hi", "weight", "density"],
               [(est.edges[i], est.edges[i + 1], est.weights[i], dens[i])
                for i in range(len(est.weights))])
    out = {"bins": len(est.weights), "method": est.method,
           "invariance_residual": est.invariance_residual,
           "support": [est.edges[0], est.edges[-1]],
           "meta": est.meta, "density_mid": dens[len(dens) // 2],
           "midpoint_example": mids[len(mids) // 2]}
    _emit(args, "measure_acip_summary", out)
    return EXIT_OK


def _cmd_measure_corr(args):
    m = _load_map_arg(args)
    est = ms.ulam_density(m, bins=args.bins, refinement=args.refinement)
    rep = ms.correlation_decay(m, args.phi, args.psi, est, n_max=args.N,
                               orbit_steps=args.orbit_steps,
                               seed=_seed(args))
    _write_csv(os.path.join(args.out, "measure_corr.csv"),
               ["n", "operator", "birkhoff", "error_bar", "flagged"],
               [(rep.ns[i], rep.operator_values[i], rep.birkhoff_values[i],
                 rep.error_bars[i], int(i in rep.flagged))
                for i in range(len(rep.ns))])
    out = {"phi": args.phi, "psi": args.psi, "c0": rep.c0, "rate": rep.rate,
           "flagged": list(rep.flagged), "n_max": args.N,
           "seed": _seed(args),
           "density_residual": est.invariance_residual}
    _emit(args, "measure_corr_summary", out)
    return EXIT_OK


def _neuro_family(args):
    return neuro.ReturnMapFamily(args.d, args.w)


def _cmd_neuro_sweep(args):
    fam = _neuro_family(args)
    rows = neuro.sweep(fam, steps=args.steps)
    _write_csv(os.path.join(args.out, "neuro_sweep.csv"),
               ["delta", "c", "alpha", "critical_value", "regime"],
               [(r["delta"], r["c"], r["alpha"], r["critical_value"],
                 r["regime"]) for r in rows])
    out = {"d": args.d, "w": args.w, "steps": args.steps,
           "first": rows[0], "last": rows[-1]}
    _emit(args, "neuro_sweep_summary", out)
    return EXIT_OK


def _cmd_neuro_landmarks(args):
    fam = _neuro_family(args)
    lm = neuro.find_landmarks(fam)
    out = {"delta0": lm.delta0, "delta_n": lm.delta_n, "delta_b": lm.delta_b,
           "residuals": lm.residuals, "brackets": lm.brackets,
           "delta_n_roots": lm.delta_n_roots}
    _emit(args, "neuro_landmarks_summary", out)
    return EXIT_OK


def _cmd_neuro_misiurewicz(args):
    fam = _neuro_family(args)
    bracket = tuple(args.bracket) if args.bracket else None
    res = neuro.find_misiurewicz(fam, m=args.m, bracket=bracket)
    if not res.ok:
        _emit(args, "neuro_misiurewicz_result",
              {"ok": False, "reason": res.reason, "details": res.details})
        return EXIT_REFUSAL
    out = {"ok": True, "delta_star": res.delta_star, "m": res.m,
           "residual": res.residual, "alpha": res.alpha,
           "multiplier": res.multiplier, "shadow_error": res.shadow_error,
           "bracket": list(res.bracket)}
    _emit(args, "neuro_misiurewicz_result", out)
    return EXIT_OK


def _cmd_neuro_check(args):
    fam = _neuro_family(args)
    if args.delta_star is not None:
        delta_star = args.delta_star
    else:
        res = neuro.find_misiurewicz(fam, m=args.m)
        if not res.ok:
            _emit(args, "neuro_check_summary",
                  {"ok": False, "reason": res.reason, "details": res.details})
            return EXIT_REFUSAL
        delta_star = res.delta_star
    rep = neuro.check_theorem6(fam, delta_star, m=args.m, k_max=args.kmax)
    _emit(args, "neuro_check_summary", rep)
    return EXIT_OK


def _cmd_plot_data(args):
    m = _load_map_arg(args)
    profile = convexity_profile(m, args.k, grid=args.grid)
    rows = []
    for idx, (a, b, xs, g) in enumerate(profile):
        for x, gv in zip(xs, g):
            rows.append((idx, float(x), float(gv)))
    _write_csv(os.path.join(args.out, "plot_data.csv"),
               ["span", "x", "g"], rows)
    out = {"k": args.k, "spans": [[float(a), float(b)]
                                  for a, b, _, _ in profile],
           "points": len(rows)}
    _emit(args, "plot_data_summary", out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=_DEFAULT_SEED,
                   help="seed for stochastic estimators "
                        "(SCHWARZSCOPE_SEED overrides)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker cap; verdicts never depend on it")


def build_parser():
    top = argparse.ArgumentParser(
        prog="schwarzscope",
        description="certificates, censuses, and measures for interval maps "
                    "with an eventual negative Schwarzian derivative")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="inspect a map file")
    p.add_argument("--map", required=True)
    _add_common(p)
    p.set_defaults(fn=_cmd_parse)

    p = sub.add_parser("schwarzian", help="S(f^k) at a point")
    p.add_argument("--map", required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--k", type=int, default=1)
    _add_common(p)
    p.set_defaults(fn=_cmd_schwarzian)

    p = sub.add_parser("convexity", help="strict-convexity scan of "
                                         "|(f^k)'|^(-1/2)")
    p.add_argument("--map", required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--grid", type=int, default=4096)
    _add_common(p)
    p.set_defaults(fn=_cmd_convexity)

    p = sub.add_parser("certify", help="negative-Schwarzian certificate")
    p.add_argument("--map", required=True)
    p.add_argument("--partition", default=None,
                   help="JSON file with partition endpoints")
    p.add_argument("--kmax", type=int, default=4)
    p.add_argument("--rigor", choices=["interval", "sampled"],
                   default="interval")
    p.add_argument("--method", choices=["partition", "mobius"],
                   default="partition")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--refine", action="store_true")
    _add_common(p)
    p.set_defaults(fn=_cmd_certify)

    p = sub.add_parser("verify", help="independently replay a certificate")
    p.add_argument("--map", required=True)
    p.add_argument("--certificate", required=True)
    _add_common(p)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("orbits", help="periodic orbits up to a period")
    p.add_argument("--map", required=True)
    p.add_argument("--pmax", type=int, default=8)
    _add_common(p)
    p.set_defaults(fn=_cmd_orbits)

    p = sub.add_parser("census", help="attracting/neutral orbit census "
                                      "against the critical-point bound")
    p.add_argument("--map", required=True)
    p.add_argument("--pmax", type=int, default=8)
    p.add_argument("--steps", type=int, default=100000)
    _add_common(p)
    p.set_defaults(fn=_cmd_census)

    p = sub.add_parser("measure", help="growth, density, and correlation "
                                       "estimators")
    msub = p.add_subparsers(dest="measure_command", required=True)

    q = msub.add_parser("dn", help="derivative growth along the critical "
                                   "value orbit")
    q.add_argument("--map", required=True)
    q.add_argument("--c", type=float, default=None)
    q.add_argument("--N", type=int, default=1000)
    q.add_argument("--ell", type=int, default=2)
    _add_common(q)
    q.set_defaults(fn=_cmd_measure_dn)

    q = msub.add_parser("acip", help="invariant density via the transfer "
                                     "operator")
    q.add_argument("--map", required=True)
    q.add_argument("--bins", type=int, default=1024)
    q.add_argument("--refinement", type=int, default=1000)
    _add_common(q)
    q.set_defaults(fn=_cmd_measure_acip)

    q = msub.add_parser("corr", help="correlation decay for a pair of "
                                     "observables")
    q.add_argument("--map", required=True)
    q.add_argument("--phi", required=True)
    q.add_argument("--psi", required=True)
    q.add_argument("--N", type=int, default=20)
    q.add_argument("--bins", type=int, default=1024)
    q.add_argument("--refinement", type=int, default=1000)
    q.add_argument("--orbit-steps", type=int, default=1000000)
    _add_common(q)
    q.set_defaults(fn=_cmd_measure_corr)

    p = sub.add_parser("neuro", help="synthetic return-map family")
    nsub = p.add_subparsers(dest="neuro_command", required=True)

    q = nsub.add_parser("sweep", help="feature table over the kneading "
                                      "parameter")
    q.add_argument("--d", type=float, default=0.8)
    q.add_argument("--w", type=float, default=0.55)
    q.add_argument("--steps", type=int, default=1000)
    _add_common(q)
    q.set_defaults(fn=_cmd_neuro_sweep)

    q = nsub.add_parser("landmarks", help="parameter landmarks")
    q.add_argument("--d", type=float, default=0.8)
    q.add_argument("--w", type=float, default=0.55)
    _add_common(q)
    q.set_defaults(fn=_cmd_neuro_landmarks)

    q = nsub.add_parser("misiurewicz", help="kneading parameter where the "
                                            "critical orbit lands on the "
                                            "repelling fixed point")
    q.add_argument("--d", type=float, default=0.8)
    q.add_argument("--w", type=float, default=0.55)
    q.add_argument("--m", type=int, default=3)
    q.add_argument("--bracket", type=float, nargs=2, default=None)
    _add_common(q)
    q.set_defaults(fn=_cmd_neuro_misiurewicz)

    q = nsub.add_parser("check", help="hypothesis checklist at a "
                                      "Misiurewicz parameter")
    q.add_argument("--d", type=float, default=0.8)
    q.add_argument("--w", type=float, default=0.55)
    q.add_argument("--m", type=int, default=3)
    q.add_argument("--kmax", type=int, default=2)
    q.add_argument("--delta-star", type=float, default=None)
    _add_common(q)
    q.set_defaults(fn=_cmd_neuro_check)

    p = sub.add_parser("plot-data", help="convexity profile series for "
                                         "plotting")
    p.add_argument("--map", required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--grid", type=int, default=1024)
    _add_common(p)
    p.set_defaults(fn=_cmd_plot_data)

    return top


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        return _fail(args, args.command, ValueError("--threads must be >= 1"))
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.fn(args)
    except (MapError, OSError, ValueError) as exc:
        return _fail(args, args.command, exc)


if __name__ == "__main__":
    sys.exit(main())
