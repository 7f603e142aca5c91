"""Map-aware search result construction and simulated map-ranking experiments."""

from ._validation import DomainError, EmptyInputError, MapRankError, SurfaceCoverageError
from .attention import (
    AttentionSurface,
    ClickLog,
    ClickRecord,
    SurfaceEstimator,
    ctr_by_rank_curve,
    estimate_surface,
    rank_distance_curve,
    rank_distance_transform,
    relative_attention,
    synthetic_radial_surface,
)
from .core import (
    DisplayItem,
    DisplaySet,
    Listing,
    ListPositional,
    MapContinuous,
    MapTiered,
    MapUniform,
    RankedResult,
    attention_weights,
    booking_probability,
    expected_booking,
    ndcg,
    rank_by_logit,
)
from .placement import MapCenterOptimizer, PlacementConfig, objective, optimize_center
from .selection import (
    AdaptiveRank,
    BookabilityFilter,
    FilterConfig,
    MedianTop3,
    TierAssigner,
    Topmost,
    anchor_logit,
    assign_tiers,
    bookability_filter,
)
from .sim import (
    ExperimentReport,
    InventoryConfig,
    SessionOutcome,
    UserModel,
    generate_inventory,
    run_experiment,
    simulate_click_log,
    simulate_session,
    surface_click_log,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveRank",
    "AttentionSurface",
    "BookabilityFilter",
    "ClickLog",
    "ClickRecord",
    "DisplayItem",
    "DisplaySet",
    "DomainError",
    "EmptyInputError",
    "ExperimentReport",
    "FilterConfig",
    "InventoryConfig",
    "ListPositional",
    "Listing",
    "MapCenterOptimizer",
    "MapContinuous",
    "MapRankError",
    "MapTiered",
    "MapUniform",
    "MedianTop3",
    "PlacementConfig",
    "RankedResult",
    "SessionOutcome",
    "SurfaceCoverageError",
    "SurfaceEstimator",
    "TierAssigner",
    "Topmost",
    "UserModel",
    "anchor_logit",
    "assign_tiers",
    "attention_weights",
    "bookability_filter",
    "booking_probability",
    "ctr_by_rank_curve",
    "estimate_surface",
    "expected_booking",
    "generate_inventory",
    "ndcg",
    "objective",
    "optimize_center",
    "rank_by_logit",
    "rank_distance_curve",
    "rank_distance_transform",
    "relative_attention",
    "run_experiment",
    "simulate_click_log",
    "simulate_session",
    "surface_click_log",
    "synthetic_radial_surface",
]
