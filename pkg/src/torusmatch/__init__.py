"""Matchings between two point processes on a discretized torus.

Given two independent n-point configurations on the d-dimensional torus
[0, L)^d with a G^d site grid, the package builds equal-capacity
allocations of sites to points, turns the cell-intersection graph into an
exact fractional perfect matching, rounds it to a perfect matching by
integer cycle cancellation, and measures the distance tail of the result
against baseline matchings.  A hyperfiniteness witness (separated point
set, Voronoi partition, removal sets) and ensemble tail statistics round
out the experiment pipeline behind the `torusmatch` CLI.
"""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DomainError, IntegrityError,
                     InternalInvariantError, TorusMatchError,
                     WitnessFailureError)
from .geometry import (TorusSpec, pairwise_torus_distance, set_diameter,
                       site_centers, site_coordinates, site_index_to_tuple,
                       site_of_point, site_tuple_to_index, torus_distance)
from .points import (RNG_RULE, ConfigPair, PointConfig, RootedView,
                     SeedProvenance, palm_average_frame, rng_stream,
                     sample_conditioned_pair, sample_poisson_config)
from .allocation import (SCHEMES, AllocationField, CellStats, blocking_pairs,
                         cell_stats, dyadic_hierarchical_allocation,
                         stable_allocation)
from .matching import (POLICIES, ConnectivityReport, FractionalMatching,
                       IntersectionGraph, PerfectMatching, as_fractional,
                       build_intersection_graph, round_to_perfect,
                       support_connectivity_report)
from .baselines import (BASELINES, greedy_nearest, optimal_assignment,
                        stable_matching)
from .witness import (PartitionWitness, ProximityGraph, WitnessParams,
                      WitnessReport, build_proximity_graph,
                      compute_removal_sets, derive_degree_cutoff,
                      derive_scale_params, greedy_proper_coloring,
                      prune_high_degree, run_witness, select_separated_set,
                      verify_witness, voronoi_partition)
from .tails import (FIT_WINDOW, MIN_FIT_POINTS, BoundCheckReport,
                    BoundCheckRow, FitResult, TailEstimate,
                    cell_diameter_tail, fit_stretched_exponent,
                    mass_transport_check, matching_distance_tail,
                    nearest_point_tail, survival_from_samples,
                    two_sided_bound_check)
from .config import (ConfigIssue, ExperimentConfig, config_sha256,
                     load_config, parse_config, serialize_config,
                     validate_config)
from .pipeline import RunResult, run_pipeline

__all__ = [
    "__version__",
    "TorusMatchError", "DomainError", "ConfigurationError", "IntegrityError",
    "WitnessFailureError", "InternalInvariantError",
    "TorusSpec", "site_tuple_to_index", "site_index_to_tuple",
    "site_coordinates", "site_of_point", "site_centers", "torus_distance",
    "pairwise_torus_distance", "set_diameter",
    "RNG_RULE", "SeedProvenance", "PointConfig", "ConfigPair", "RootedView",
    "rng_stream", "sample_poisson_config", "sample_conditioned_pair",
    "palm_average_frame",
    "SCHEMES", "AllocationField", "CellStats", "stable_allocation",
    "dyadic_hierarchical_allocation", "cell_stats", "blocking_pairs",
    "POLICIES", "IntersectionGraph", "FractionalMatching", "PerfectMatching",
    "ConnectivityReport", "build_intersection_graph", "as_fractional",
    "round_to_perfect", "support_connectivity_report",
    "BASELINES", "stable_matching", "optimal_assignment", "greedy_nearest",
    "WitnessParams", "ProximityGraph", "PartitionWitness", "WitnessReport",
    "build_proximity_graph", "prune_high_degree", "greedy_proper_coloring",
    "select_separated_set", "voronoi_partition", "compute_removal_sets",
    "verify_witness", "derive_scale_params", "derive_degree_cutoff",
    "run_witness",
    "FIT_WINDOW", "MIN_FIT_POINTS", "TailEstimate", "FitResult",
    "BoundCheckRow", "BoundCheckReport", "survival_from_samples",
    "matching_distance_tail", "cell_diameter_tail", "nearest_point_tail",
    "fit_stretched_exponent", "mass_transport_check", "two_sided_bound_check",
    "ExperimentConfig", "ConfigIssue", "parse_config", "serialize_config",
    "load_config", "validate_config", "config_sha256",
    "RunResult", "run_pipeline",
]
