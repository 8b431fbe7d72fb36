"""GMROI maximization under a bucket-level in-stock floor.

Simulate per-SKU scenario tables, smooth them monotonically, and solve the
fractional selection problem with Dinkelbach's method using exact,
Lagrangian or separable subproblem solvers.
"""

from .core import (
    Aggregates,
    Bucket,
    GmroiError,
    InfeasibleBucket,
    Regime,
    RegimeReport,
    ScenarioMetrics,
    Selection,
    SkuScenarios,
    ValidationError,
    ZeroInventory,
    aggregate,
    classify_regime,
    make_bucket,
    meets_floor,
    tar_err,
)
from .dinkelbach import DinkelbachConfig, SolveReport, certify, solve_fractional
from .solvers import (
    LagrangianConfig,
    brute_force_fractional,
    enumerate_solve,
    solve_exact,
    solve_lagrangian,
    solve_unconstrained,
)

__version__ = "0.1.0"

__all__ = [
    "Aggregates",
    "Bucket",
    "DinkelbachConfig",
    "GmroiError",
    "InfeasibleBucket",
    "LagrangianConfig",
    "Regime",
    "RegimeReport",
    "ScenarioMetrics",
    "Selection",
    "SkuScenarios",
    "SolveReport",
    "ValidationError",
    "ZeroInventory",
    "aggregate",
    "brute_force_fractional",
    "certify",
    "classify_regime",
    "enumerate_solve",
    "make_bucket",
    "meets_floor",
    "solve_exact",
    "solve_fractional",
    "solve_lagrangian",
    "solve_unconstrained",
    "tar_err",
]
