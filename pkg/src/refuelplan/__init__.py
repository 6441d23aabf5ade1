"""Refueling and maintenance planning for nuclear fleets with MILP-based heuristics."""
from .domain import (
    NOT_SCHEDULED,
    CostBreakdown,
    CycleSpec,
    DispatchPlan,
    GapStats,
    OutageSchedule,
    ProblemInstance,
    ResourceConstraint,
    Solution,
    StretchProfile,
    T1Unit,
    T2Unit,
    aggregate_stats,
    financial_cost,
    gap,
    simulate_fuel,
    stability_cost,
    validate,
)
from .instance_io import GeneratorConfig, generate, parse_instance, write_instance

__all__ = [
    "NOT_SCHEDULED", "CostBreakdown", "CycleSpec", "DispatchPlan", "GapStats", "OutageSchedule",
    "ProblemInstance", "ResourceConstraint", "Solution", "StretchProfile", "T1Unit", "T2Unit",
    "aggregate_stats", "financial_cost", "gap", "simulate_fuel", "stability_cost", "validate",
    "GeneratorConfig", "generate", "parse_instance", "write_instance",
]
