"""Dinkelbach iteration for maximizing GMROI under the service floor."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Any

from .core import (
    Aggregates,
    Bucket,
    GmroiError,
    InfeasibleBucket,
    Regime,
    RegimeReport,
    Selection,
    aggregate,
    classify_regime,
    meets_floor,
)
from .solvers import (
    BRUTE_FORCE_LIMIT,
    DualTracePoint,
    SubproblemSolver,
    TooLarge,
    achievable_ratios,
    make_solver,
)

MAX_ITERATIONS = 50


class MaxIterationsExceeded(GmroiError):
    category = "MaxIterationsExceeded"


class InvalidWarmStart(GmroiError, ValueError):
    category = "InvalidWarmStart"


class CertificationFailed(GmroiError):
    category = "CertificationFailed"

    def __init__(self, clause: str, detail: str) -> None:
        super().__init__(f"{clause}: {detail}")
        self.clause = clause


@dataclass(frozen=True)
class DinkelbachConfig:
    """``epsilon=None`` means ``1e-9 * max(1, M(x_0))``."""

    epsilon: float | None = None
    max_iterations: int = MAX_ITERATIONS
    initial_lambda: float = 0.0

    def __post_init__(self) -> None:
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class IterationTrace:
    lam: float
    subproblem_value: float
    selection: Selection
    aggregates: Aggregates
    subproblem_wall_time: float
    mu: float | None = None
    dual_trace: tuple[DualTracePoint, ...] = ()


@dataclass
class SolveReport:
    optimal_ratio: float
    selection: Selection
    iterations: list[IterationTrace]
    solver_name: str
    total_wall_time: float
    regime: RegimeReport
    feasible: bool
    epsilon: float
    aggregates: Aggregates | None = None

    @property
    def num_iterations(self) -> int:
        """Subproblem solves performed (the reported iteration count)."""
        return len(self.iterations)

    @property
    def lambda_updates(self) -> int:
        return len(self.iterations) - 1

    def to_dict(self, include_selections: bool = True) -> dict[str, Any]:
        regime = asdict(self.regime)
        regime["regime"] = self.regime.regime.value
        out: dict[str, Any] = {
            "solver": self.solver_name,
            "optimal_ratio": self.optimal_ratio,
            "feasible": self.feasible,
            "epsilon": self.epsilon,
            "total_wall_time": self.total_wall_time,
            "regime": regime,
            "aggregates": asdict(self.aggregates) if self.aggregates else None,
            "iterations": [],
        }
        if include_selections:
            out["selection"] = list(self.selection.chosen)
        for it in self.iterations:
            row = {
                "lambda": it.lam,
                "subproblem_value": it.subproblem_value,
                "aggregates": asdict(it.aggregates),
                "subproblem_wall_time": it.subproblem_wall_time,
                "mu": it.mu,
            }
            if include_selections:
                row["selection"] = list(it.selection.chosen)
            out["iterations"].append(row)
        return out


def solve_fractional(
    bucket: Bucket,
    cfg: DinkelbachConfig | None = None,
    solver: SubproblemSolver | str = "exact",
) -> SolveReport:
    """Maximize ``M(x)/I(x)`` subject to the floor by Dinkelbach's method.

    Each pass solves ``W(lam_k)`` and stops once ``W(lam_k) < epsilon``;
    otherwise ``lam_{k+1} = M(x_k)/I(x_k)``. The reported ratio is the GMROI
    of the final selection, so it matches the selection exactly.
    """
    cfg = cfg or DinkelbachConfig()
    if isinstance(solver, str):
        solver = make_solver(solver)
    regime = classify_regime(bucket)
    if regime.regime is Regime.INFEASIBLE:
        raise InfeasibleBucket(
            f"floor {float(bucket.service_floor):.6g} above max achievable ISP "
            f"{regime.max_achievable_isp:.6g}"
        )

    start = time.perf_counter()
    lam = cfg.initial_lambda
    eps = cfg.epsilon
    trace: list[IterationTrace] = []
    while True:
        if len(trace) >= cfg.max_iterations:
            raise MaxIterationsExceeded(
                f"no convergence within {cfg.max_iterations} iterations (lambda={lam!r})"
            )
        t0 = time.perf_counter()
        res = solver.solve(bucket, lam)
        dt = time.perf_counter() - t0
        agg = aggregate(bucket, res.selection)
        trace.append(
            IterationTrace(lam, res.value, res.selection, agg, dt, res.mu, tuple(res.dual_trace))
        )
        if eps is None:
            eps = 1e-9 * max(1.0, agg.total_margin)
        if len(trace) == 1 and cfg.initial_lambda != 0 and res.value < 0:
            raise InvalidWarmStart(
                f"W({cfg.initial_lambda}) = {res.value} < 0: warm start exceeds the optimum"
            )
        if res.value < eps:
            break
        lam = agg.gmroi

    final = trace[-1]
    return SolveReport(
        optimal_ratio=final.aggregates.gmroi,
        selection=final.selection,
        iterations=trace,
        solver_name=solver.name,
        total_wall_time=time.perf_counter() - start,
        regime=regime,
        feasible=meets_floor(bucket, final.selection),
        epsilon=eps,
        aggregates=final.aggregates,
    )


@dataclass(frozen=True)
class CertificationResult:
    lambda_increasing: bool
    iterations_within_bound: bool | None
    ratio_count: int | None
    feasible: bool
    final_value: float
    details: dict[str, Any] = field(default_factory=dict)


def certify(
    report: SolveReport,
    bucket: Bucket,
    solver: SubproblemSolver | str | None = None,
    enumerate_limit: int = BRUTE_FORCE_LIMIT,
) -> CertificationResult:
    """Check a report against the convergence guarantees.

    (a) the lambda trace is strictly increasing; (b) the number of lambda
    updates is at most the number of distinct feasible ratios, when those can
    be enumerated; (c) the final selection meets the floor; (d) ``W`` at the
    reported ratio, re-solved with ``solver`` (default: the report's own),
    is below epsilon.
    """
    lams = [it.lam for it in report.iterations]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise CertificationFailed("monotonicity", f"lambda trace not strictly increasing: {lams}")

    ratio_count = None
    within = None
    if bucket.selection_count <= enumerate_limit:
        try:
            ratio_count = len(achievable_ratios(bucket, enumerate_limit))
        except TooLarge:
            ratio_count = None
        if ratio_count is not None:
            within = report.lambda_updates <= ratio_count
            if not within:
                raise CertificationFailed(
                    "termination",
                    f"{report.lambda_updates} lambda updates exceed {ratio_count} achievable ratios",
                )

    if not meets_floor(bucket, report.selection):
        raise CertificationFailed("feasibility", "final selection violates the service floor")

    if solver is None:
        solver = report.solver_name
    if isinstance(solver, str):
        solver = make_solver(solver)
    value = solver.solve(bucket, report.optimal_ratio).value
    if not value < report.epsilon:
        raise CertificationFailed(
            "stopping", f"W(lambda*) = {value} is not below epsilon {report.epsilon}"
        )
    return CertificationResult(True, within, ratio_count, True, value)
