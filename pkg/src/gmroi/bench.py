"""Solver comparison and constraint-tightness sweep harness."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .core import (
    Bucket,
    GmroiError,
    InfeasibleBucket,
    Regime,
    as_fraction,
    classify_regime,
    tar_err,
)
from .dinkelbach import DinkelbachConfig, SolveReport, solve_fractional
from .io import ingest_scenarios
from .isotonic import preprocess_bucket
from .sim import BucketRecipe, SimConfig, generate_bucket, load_config
from .solvers import DP_STATE_CAP, make_solver

EXACT_THRESHOLD = 1e-14
EXACT_MARKER = "EXACT"


class BucketSource(str, enum.Enum):
    SIMULATE = "simulate"
    CSV = "csv"


class FloorRule(str, enum.Enum):
    EXPLICIT = "explicit"
    MIDPOINT = "midpoint"
    BELOW = "below"


@dataclass(frozen=True)
class ExperimentSpec:
    source: str | Path | Bucket
    solvers: tuple[str, ...] = ("exact", "lagrangian")
    floor_rule: FloorRule = FloorRule.MIDPOINT
    floor_value: float | None = None
    sweep_points: int | None = None
    seed: int | None = None
    output_dir: Path | None = None
    isotonic: bool = True
    mu_tolerance: float | None = None
    dp_state_cap: int = DP_STATE_CAP
    warmup: bool = True
    record_timing: bool = True
    dinkelbach: DinkelbachConfig = field(default_factory=DinkelbachConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "solvers", tuple(self.solvers))
        object.__setattr__(self, "floor_rule", FloorRule(self.floor_rule))
        if not self.solvers:
            raise ValueError("at least one solver is required")
        for s in self.solvers:
            make_solver(s)
        if self.floor_rule is FloorRule.EXPLICIT:
            if self.floor_value is None or not 0 <= self.floor_value <= 1:
                raise ValueError("explicit floor rule needs a floor value in [0, 1]")

    @property
    def source_kind(self) -> BucketSource | None:
        if isinstance(self.source, Bucket):
            return None
        return BucketSource.CSV if str(self.source).lower().endswith(".csv") else BucketSource.SIMULATE


def load_bucket(spec: ExperimentSpec) -> Bucket:
    if isinstance(spec.source, Bucket):
        bucket = spec.source
    elif spec.source_kind is BucketSource.CSV:
        bucket = ingest_scenarios(spec.source)
    else:
        cfg = load_config(spec.source, seed=spec.seed)
        if isinstance(cfg, BucketRecipe):
            bucket = replace(cfg, isotonic=False).build()
        else:
            assert isinstance(cfg, SimConfig)
            bucket = generate_bucket([cfg])
    return preprocess_bucket(bucket) if spec.isotonic else bucket


def resolve_floor(bucket: Bucket, rule: FloorRule, value: float | None = None) -> Fraction:
    """Service floor for a rule.

    ``midpoint`` sits halfway between the lowest and highest achievable
    average ISP; ``below`` is one ISP unit under the lowest (clamped at 0).
    """
    rep = classify_regime(bucket)
    if rule is FloorRule.EXPLICIT:
        if value is None:
            raise ValueError("explicit rule needs a value")
        return as_fraction(value)
    if rule is FloorRule.MIDPOINT:
        return Fraction(rep.min_units + rep.max_units, 2 * rep.unit_total)
    return max(Fraction(0), Fraction(rep.min_units - 1, rep.unit_total))


def instance_label(bucket: Bucket) -> str:
    regime = classify_regime(bucket).regime
    prefix = "U" if regime is Regime.UNCONSTRAINED else "C"
    return f"{prefix}{bucket.n:05d}-{bucket.total_scenarios:07d}"


@dataclass
class SolverOutcome:
    iterations: int | None = None
    wall_time: float | None = None
    gmroi: float | None = None
    realized_isp: float | None = None
    feasible: bool | None = None
    tar_err: float | None = None
    error: str | None = None
    report: SolveReport | None = field(default=None, repr=False)

    @property
    def tar_err_label(self) -> str:
        if self.tar_err is None:
            return ""
        return EXACT_MARKER if self.tar_err <= EXACT_THRESHOLD else f"{self.tar_err:.1e}"


@dataclass
class ComparisonRow:
    instance_label: str
    service_floor: Fraction
    regime: Regime
    outcomes: dict[str, SolverOutcome]


def _solve(bucket: Bucket, name: str, spec: ExperimentSpec) -> SolverOutcome:
    solver = make_solver(name, mu_tolerance=spec.mu_tolerance, dp_state_cap=spec.dp_state_cap)
    try:
        rep = solve_fractional(bucket, spec.dinkelbach, solver)
    except GmroiError as exc:
        return SolverOutcome(error=exc.category)
    agg = rep.aggregates
    return SolverOutcome(
        iterations=rep.num_iterations,
        wall_time=rep.total_wall_time,
        gmroi=rep.optimal_ratio,
        realized_isp=agg.avg_isp if agg else None,
        feasible=rep.feasible,
        report=rep,
    )


def _warmup(bucket: Bucket, spec: ExperimentSpec, names: Sequence[str]) -> None:
    relaxed = bucket.with_floor(0)
    for name in names:
        _solve(relaxed, name, spec)


def compare_bucket(bucket: Bucket, spec: ExperimentSpec) -> ComparisonRow:
    if classify_regime(bucket).regime is Regime.INFEASIBLE:
        raise InfeasibleBucket("service floor exceeds the maximum achievable ISP")
    names = list(dict.fromkeys(("exact", *spec.solvers)))
    if spec.warmup:
        _warmup(bucket, spec, names)
    outcomes = {name: _solve(bucket, name, spec) for name in names}
    ref = outcomes["exact"].gmroi
    if ref is not None:
        for out in outcomes.values():
            if out.gmroi is not None:
                out.tar_err = tar_err(ref, out.gmroi)
    if "exact" not in spec.solvers:
        outcomes["exact"].report = None
    return ComparisonRow(
        instance_label(bucket), bucket.service_floor, classify_regime(bucket).regime, outcomes
    )


def run_compare(spec: ExperimentSpec, bucket: Bucket | None = None) -> list[ComparisonRow]:
    """Solve one bucket with every requested solver on identical input.

    TAR_ERR is measured against the exact solver, which is always run.
    """
    if bucket is None:
        bucket = load_bucket(spec)
    floor = resolve_floor(bucket, spec.floor_rule, spec.floor_value)
    rows = [compare_bucket(bucket.with_floor(floor), spec)]
    if spec.output_dir is not None:
        out = Path(spec.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare.csv").write_text(comparison_csv(rows, spec.solvers, spec.record_timing), encoding="utf-8")
    return rows


def comparison_csv(rows: Sequence[ComparisonRow], solvers: Sequence[str], timing: bool = True) -> str:
    names = list(dict.fromkeys(("exact", *solvers)))
    header = ["instance", "service_floor", "regime"]
    for s in names:
        header += [f"{s}_iter"] + ([f"{s}_t"] if timing else []) + [
            f"{s}_gmroi",
            f"{s}_isp",
            f"{s}_feasible",
            f"{s}_tar_err",
            f"{s}_error",
        ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        line: list[object] = [row.instance_label, repr(float(row.service_floor)), row.regime.value]
        for s in names:
            o = row.outcomes[s]
            line.append("" if o.iterations is None else o.iterations)
            if timing:
                line.append("" if o.wall_time is None else f"{o.wall_time:.6f}")
            line += [
                "" if o.gmroi is None else repr(o.gmroi),
                "" if o.realized_isp is None else repr(o.realized_isp),
                "" if o.feasible is None else int(o.feasible),
                o.tar_err_label,
                o.error or "",
            ]
        w.writerow(line)
    return buf.getvalue()


@dataclass
class SweepPoint:
    wall_time: float | None
    relative_gmroi: float | None
    iterations: int | None
    gmroi: float | None
    feasible: bool | None
    error: str | None = None


@dataclass
class SweepRow:
    normalized_tightness: float
    service_floor: Fraction
    points: dict[str, SweepPoint]


def sweep_floors(bucket: Bucket, count: int) -> list[Fraction]:
    """``count`` floors evenly spaced from the lowest achievable ISP up to
    one ISP unit below the highest."""
    if count < 2:
        raise ValueError("a sweep needs at least 2 points")
    rep = classify_regime(bucket)
    lo = rep.min_fraction
    hi = Fraction(rep.max_units - 1, rep.unit_total)
    return [max(Fraction(0), lo + (hi - lo) * k / (count - 1)) for k in range(count)]


def normalized_tightness(bucket: Bucket, floor: Fraction) -> float:
    rep = classify_regime(bucket)
    span = rep.max_fraction - rep.min_fraction
    if span <= 0:
        return 0.0
    return float(min(Fraction(1), max(Fraction(0), (floor - rep.min_fraction) / span)))


def run_sweep(spec: ExperimentSpec, bucket: Bucket | None = None) -> list[SweepRow]:
    """Solve across floors spanning the achievable range.

    Relative GMROI divides by the optimum with the floor removed.
    """
    if spec.sweep_points is None or spec.sweep_points < 2:
        raise ValueError("sweep_points must be >= 2")
    if bucket is None:
        bucket = load_bucket(spec)
    names = list(spec.solvers)
    if spec.warmup:
        _warmup(bucket, spec, names)
    baseline = solve_fractional(bucket.with_floor(0), spec.dinkelbach, "unconstrained").optimal_ratio

    rows = []
    for floor in sweep_floors(bucket, spec.sweep_points):
        b = bucket.with_floor(floor)
        points = {}
        for name in names:
            out = _solve(b, name, spec)
            rel = None if out.gmroi is None or baseline == 0 else out.gmroi / baseline
            points[name] = SweepPoint(out.wall_time, rel, out.iterations, out.gmroi, out.feasible, out.error)
        rows.append(SweepRow(normalized_tightness(bucket, floor), floor, points))
    if spec.output_dir is not None:
        out_dir = Path(spec.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep.csv").write_text(sweep_csv(rows, names, spec.record_timing), encoding="utf-8")
    return rows


def sweep_csv(rows: Sequence[SweepRow], solvers: Sequence[str], timing: bool = True) -> str:
    header = ["normalized_tightness", "service_floor"]
    for s in solvers:
        header += ([f"{s}_t"] if timing else []) + [f"{s}_relative_gmroi", f"{s}_iter", f"{s}_error"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        line: list[object] = [repr(row.normalized_tightness), repr(float(row.service_floor))]
        for s in solvers:
            p = row.points[s]
            if timing:
                line.append("" if p.wall_time is None else f"{p.wall_time:.6f}")
            line += [
                "" if p.relative_gmroi is None else repr(p.relative_gmroi),
                "" if p.iterations is None else p.iterations,
                p.error or "",
            ]
        w.writerow(line)
    return buf.getvalue()
