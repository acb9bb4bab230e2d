"""Revealed-preference bounds on the cross-country cost of living.

The package tests whether pooled country consumption data admit a single
rationalising set of tastes, computes sharp multilateral bounds on the
cost of living by linear programming, appraises standard price-index
formulas against those bounds, constructs a generalised star-system
index from them, and aggregates the result into world output and
inequality statistics.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .aggregates import LorenzCurve, WorldOutput, gini, gini_from_curve, lorenz, world_output
from .appraisal import (
    AppraisalReport,
    PairViolation,
    Segment,
    appraise,
    comparison_table,
    taste_correct,
)
from .bounds import (
    BoundKind,
    BoundMatrix,
    ExpenditureBounds,
    bound_improvement_stats,
    bound_matrix,
    expenditure_bounds,
    expenditure_lower_bound,
    expenditure_upper_bound,
)
from .dataset import (
    CountryObservation,
    PooledDataset,
    RawICPTable,
    convert,
    exclusion_report,
    ingest_icp,
    load_direct,
    write_direct,
)
from .errors import (
    ConfigurationError,
    ConsistencyError,
    DomainError,
    EmptyDatasetError,
    NumericalError,
    ParseError,
    PPBoundsError,
    StructuralError,
    ValidationError,
)
from .gss import (
    GSSResult,
    OutsideExtension,
    gss_full,
    gss_homothetic,
    gss_hub,
    gss_outside,
    gss_with_bounds,
)
from .indices import (
    IndexMatrix,
    Method,
    all_indices,
    ccd,
    fisher,
    geary_khamis,
    geks,
    market_rates,
    tornqvist,
)
from .lpcore import LinearProgram, LPResult, SolveStatus, solve
from .rpgraph import (
    ConsistencyReport,
    RPGraph,
    ReachabilityRelation,
    ViolationCycle,
    build_graph,
    check_garp,
    check_harp,
    greedy_homothetic_reference_set,
    max_reference_set,
    money_pump_index,
    reachability,
    revealed_sets,
)
