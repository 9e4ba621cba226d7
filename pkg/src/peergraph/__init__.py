"""Weighted directed bipartite AS-IXP peering graph analysis."""

__version__ = "0.1.0"

from .analysis import (
    ClassificationReport,
    CountryAssignment,
    StabilityReport,
    beta_stability_sweep,
    classification_metrics,
    classify_countries,
    eums_coverage,
    info_ratio_summary,
    top_hypergiants,
    traffic_receivers,
)
from .clustering import (
    ClusterProfile,
    Partition,
    cluster_profiles,
    louvain_bipartite,
    modularity,
    symmetrize,
)
from .graph import (
    BetaParams,
    BreakpointFit,
    IxpBalance,
    NodeMetrics,
    PeeringGraph,
    PowerLawFit,
    build_graph,
    degree_distribution,
    fit_breakpoint,
    fit_power_law,
    ixp_balance,
    largest_component_fraction,
    node_metrics,
)
from .ingest import (
    GroundTruth,
    IxpRecord,
    MembershipRecord,
    NetworkRecord,
    RawSnapshot,
    TrafficClass,
    capacity_timeseries,
    load_ground_truth,
    parse_snapshot,
    validate_snapshot,
)
from .spectral import (
    ChangeMatrix,
    GoogleMatrix,
    PageRankVector,
    RankTable,
    ReducedGoogleMatrix,
    censor_diagonal,
    google_matrix,
    pagerank,
    rank_table,
    reduced_google_matrix,
    relative_change,
)
