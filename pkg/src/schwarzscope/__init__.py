"""Tools for certifying eventual negative Schwarzian derivatives of
piecewise-smooth interval maps, and for the dynamics that follow from one:
Singer-type censuses of attracting orbits, derivative-growth summability,
invariant densities, and a synthetic one-parameter family of neural-style
return maps to exercise all of it."""

from .errors import (DensityError, DomainError, FitError, GuardError,
                     MapError, ParseError, PieceError, PoleError)
from .expressions import (MapExpr, load_map, map_from_dict, parse_expr,
                          parse_map)
from .intervals import Interval
from .jets import Jet3
from .schwarzian import (ConvexityReport, SchwarzValue, convexity_profile,
                         convexity_scan, cross_ratio, cross_ratio_expansion,
                         iterate_symbolic, schwarzian_at, schwarzian_iterate)
from .certify import (CellBounds, Certificate, Refusal, VerifyResult,
                      build_transition_matrix, certificate_from_dict,
                      compute_cell_bounds, mobius_certificate,
                      partition_certificate, piece_is_mobius,
                      uniform_partition, validate_partition,
                      verify_certificate)
from .orbits import (CensusReport, CriticalIntervalResult, CriticalPoint,
                     PeriodicOrbit, critical_interval, critical_order,
                     critical_points_of_iterate, find_critical_points,
                     find_periodic_orbits, orbit_array, preimages,
                     singer_census)
from .measure import (CorrelationReport, DensityEstimate, DnSequence,
                      GrowthFit, SummabilityReport, average_measure,
                      correlation_decay, dn_sequence, growth_fit,
                      iterate_dn_identity_check, l1_distance,
                      orbit_histogram, summability_check, transfer_matrix,
                      ulam_density)
## neuro.Refusal would shadow certify.Refusal; reach it via the submodule.
from .neuro import (FamilyFeatures, Landmarks, MisiurewiczPoint,
                    ReturnMapFamily, check_theorem6,
                    conjugation_identity_check, family_features,
                    find_landmarks, find_misiurewicz, property_audit,
                    rescale_conjugate, sweep, synth_family)

__version__ = "0.1.0"

__all__ = [
    "CellBounds", "CensusReport", "Certificate", "ConvexityReport",
    "CorrelationReport", "CriticalIntervalResult", "CriticalPoint",
    "DensityError", "DensityEstimate", "DnSequence", "DomainError",
    "FamilyFeatures", "FitError", "GrowthFit", "GuardError", "Interval",
    "Jet3", "Landmarks", "MapError", "MapExpr", "MisiurewiczPoint",
    "ParseError", "PeriodicOrbit", "PieceError", "PoleError", "Refusal",
    "ReturnMapFamily", "SchwarzValue", "SummabilityReport", "VerifyResult",
    "average_measure", "build_transition_matrix", "certificate_from_dict",
    "check_theorem6", "compute_cell_bounds", "conjugation_identity_check",
    "convexity_profile", "convexity_scan", "correlation_decay",
    "critical_interval", "critical_order", "critical_points_of_iterate",
    "cross_ratio", "cross_ratio_expansion", "dn_sequence", "family_features",
    "find_critical_points", "find_landmarks", "find_misiurewicz",
    "find_periodic_orbits", "growth_fit", "iterate_dn_identity_check",
    "iterate_symbolic", "l1_distance", "load_map", "map_from_dict",
    "mobius_certificate", "orbit_array", "orbit_histogram", "parse_expr",
    "parse_map", "partition_certificate", "piece_is_mobius", "preimages",
    "property_audit", "rescale_conjugate", "schwarzian_at",
    "schwarzian_iterate", "singer_census", "summability_check", "sweep",
    "synth_family", "transfer_matrix", "ulam_density", "uniform_partition",
    "validate_partition", "verify_certificate",
]
