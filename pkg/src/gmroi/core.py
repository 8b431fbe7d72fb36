"""Bucket data model, aggregate functionals and regime classification.

A bucket holds ``n`` SKUs, each with an ordered list of simulated scenarios.
A selection picks exactly one scenario per SKU. The functionals are

* total margin     ``M(x) = sum_i M_{i,x_i}``
* total inventory  ``I(x) = sum_i I_{i,x_i}``
* average ISP      ``S(x) = (1/n) sum_i S_{i,x_i}``

and GMROI is ``M(x) / I(x)``. ISP values carry an exact rational form so the
service constraint ``S(x) >= C_S`` can be decided in integer arithmetic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Sequence

import numpy as np

#: Denominator used when an ISP arrives as a bare float.
RATIONALIZE_DENOMINATOR = 10**6


class GmroiError(Exception):
    """Base class for all errors raised by this package."""

    category = "Error"


class ValidationError(GmroiError, ValueError):
    category = "ValidationError"


class ZeroInventory(GmroiError, ArithmeticError):
    """Total inventory of a selection is zero, so GMROI is undefined."""

    category = "ZeroInventory"


class InfeasibleBucket(GmroiError):
    """No selection meets the service floor."""

    category = "InfeasibleBucket"


@dataclass(frozen=True)
class ScenarioMetrics:
    """Simulated performance of one SKU at one safety-stock level."""

    margin: float
    inventory: float
    isp: float
    safety_stock: int
    isp_numerator: int
    isp_denominator: int
    rationalized: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.margin) and self.margin >= 0):
            raise ValidationError(f"margin must be finite and >= 0, got {self.margin}")
        if not (math.isfinite(self.inventory) and self.inventory >= 0):
            raise ValidationError(f"inventory must be finite and >= 0, got {self.inventory}")
        if not 0.0 <= self.isp <= 1.0:
            raise ValidationError(f"isp must lie in [0, 1], got {self.isp}")
        if self.safety_stock < 0:
            raise ValidationError(f"safety_stock must be >= 0, got {self.safety_stock}")
        if self.isp_denominator <= 0:
            raise ValidationError("isp_denominator must be positive")
        if not 0 <= self.isp_numerator <= self.isp_denominator:
            raise ValidationError(
                f"isp_numerator {self.isp_numerator} outside [0, {self.isp_denominator}]"
            )
        if not self.rationalized and abs(self.isp - self.isp_numerator / self.isp_denominator) > 1e-12:
            raise ValidationError("isp disagrees with isp_numerator / isp_denominator")

    @classmethod
    def from_counts(
        cls, margin: float, inventory: float, numerator: int, denominator: int, safety_stock: int = 0
    ) -> ScenarioMetrics:
        return cls(
            margin=float(margin),
            inventory=float(inventory),
            isp=numerator / denominator,
            safety_stock=int(safety_stock),
            isp_numerator=int(numerator),
            isp_denominator=int(denominator),
        )

    @classmethod
    def from_isp(
        cls, margin: float, inventory: float, isp: float, safety_stock: int = 0
    ) -> ScenarioMetrics:
        """Build from a float ISP, rounding it onto a ``10**6`` grid."""
        num = int(round(isp * RATIONALIZE_DENOMINATOR))
        return cls(
            margin=float(margin),
            inventory=float(inventory),
            isp=float(isp),
            safety_stock=int(safety_stock),
            isp_numerator=num,
            isp_denominator=RATIONALIZE_DENOMINATOR,
            rationalized=True,
        )

    @property
    def isp_fraction(self) -> Fraction:
        return Fraction(self.isp_numerator, self.isp_denominator)


@dataclass(frozen=True)
class SkuScenarios:
    sku_id: str
    scenarios: tuple[ScenarioMetrics, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        if not self.scenarios:
            raise ValidationError(f"SKU {self.sku_id!r} has no scenarios")

    def __len__(self) -> int:
        return len(self.scenarios)


def as_fraction(value: float | Fraction | str) -> Fraction:
    """Exact rational for a service floor.

    Floats are read through their shortest round-trip decimal, so ``0.9``
    becomes ``9/10`` rather than the binary value slightly above it.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(repr(float(value)))


@dataclass(frozen=True)
class Bucket:
    """A group of SKUs optimized jointly under one average-ISP floor."""

    skus: tuple[SkuScenarios, ...]
    service_floor: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "skus", tuple(self.skus))
        object.__setattr__(self, "service_floor", as_fraction(self.service_floor))
        if not self.skus:
            raise ValidationError("bucket must contain at least one SKU")
        if not 0 <= self.service_floor <= 1:
            raise ValidationError(f"service_floor must lie in [0, 1], got {self.service_floor}")

    @property
    def n(self) -> int:
        return len(self.skus)

    @property
    def scenario_counts(self) -> list[int]:
        return [len(s) for s in self.skus]

    @property
    def total_scenarios(self) -> int:
        return sum(self.scenario_counts)

    @property
    def selection_count(self) -> int:
        """Number of distinct selections, ``prod_i |J_i|``."""
        return math.prod(self.scenario_counts)

    @property
    def rationalized(self) -> bool:
        return any(sc.rationalized for s in self.skus for sc in s.scenarios)

    def with_floor(self, service_floor: float | Fraction) -> Bucket:
        return Bucket(self.skus, as_fraction(service_floor))

    @cached_property
    def arrays(self) -> BucketArrays:
        return BucketArrays.build(self)


@dataclass(frozen=True, eq=False)
class BucketArrays:
    """Dense padded view of a bucket for vectorized solvers.

    ``units[i, j]`` is the ISP of scenario ``(i, j)`` scaled to the common
    denominator ``unit_denominator`` so the floor reads
    ``units.sum() >= required_units``.
    """

    margin: np.ndarray
    inventory: np.ndarray
    isp: np.ndarray
    units: np.ndarray
    mask: np.ndarray
    counts: np.ndarray
    unit_denominator: int
    required_units: int

    @classmethod
    def build(cls, bucket: Bucket) -> BucketArrays:
        n = bucket.n
        width = max(bucket.scenario_counts)
        dens = {sc.isp_denominator for s in bucket.skus for sc in s.scenarios}
        lcm = reduce(math.lcm, dens, 1)
        margin = np.zeros((n, width))
        inventory = np.zeros((n, width))
        isp = np.zeros((n, width))
        units = np.zeros((n, width), dtype=np.int64)
        mask = np.zeros((n, width), dtype=bool)
        for i, sku in enumerate(bucket.skus):
            k = len(sku.scenarios)
            margin[i, :k] = [sc.margin for sc in sku.scenarios]
            inventory[i, :k] = [sc.inventory for sc in sku.scenarios]
            isp[i, :k] = [sc.isp for sc in sku.scenarios]
            units[i, :k] = [sc.isp_numerator * (lcm // sc.isp_denominator) for sc in sku.scenarios]
            mask[i, :k] = True
        required = math.ceil(bucket.service_floor * n * lcm)
        for a in (margin, inventory, isp, units, mask):
            a.setflags(write=False)
        counts = np.asarray(bucket.scenario_counts)
        return cls(margin, inventory, isp, units, mask, counts, lcm, required)

    def selection_units(self, chosen: np.ndarray) -> int:
        rows = np.arange(len(chosen))
        return int(self.units[rows, chosen].sum())


@dataclass(frozen=True)
class Selection:
    """One chosen scenario index (0-based) per SKU."""

    chosen: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "chosen", tuple(int(j) for j in self.chosen))

    def validate(self, bucket: Bucket) -> None:
        if len(self.chosen) != bucket.n:
            raise ValidationError(f"selection has {len(self.chosen)} entries for {bucket.n} SKUs")
        for i, (j, sku) in enumerate(zip(self.chosen, bucket.skus)):
            if not 0 <= j < len(sku):
                raise ValidationError(f"index {j} invalid for SKU {i} with {len(sku)} scenarios")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.chosen, dtype=np.intp)

    def __len__(self) -> int:
        return len(self.chosen)


@dataclass(frozen=True)
class Aggregates:
    total_margin: float
    total_inventory: float
    avg_isp: float
    isp_units: int
    gmroi: float | None


def aggregate(bucket: Bucket, sel: Selection) -> Aggregates:
    """Bucket-level margin, inventory, average ISP and GMROI of a selection.

    Raises :class:`ZeroInventory` when the selected inventory sums to zero.
    """
    sel.validate(bucket)
    arr = bucket.arrays
    idx = sel.as_array()
    rows = np.arange(bucket.n)
    m = float(arr.margin[rows, idx].sum())
    inv = float(arr.inventory[rows, idx].sum())
    units = int(arr.units[rows, idx].sum())
    avg = units / (bucket.n * arr.unit_denominator)
    if inv <= 0:
        raise ZeroInventory("selected scenarios carry zero total inventory")
    return Aggregates(m, inv, avg, units, m / inv)


def meets_floor(bucket: Bucket, sel: Selection) -> bool:
    """Exact rational test of ``S(x) >= C_S``."""
    sel.validate(bucket)
    return bucket.arrays.selection_units(sel.as_array()) >= bucket.arrays.required_units


def reduced_value(bucket: Bucket, sel: Selection, lam: float) -> float:
    """``M(x) - lam * I(x)`` for a selection."""
    arr = bucket.arrays
    idx = sel.as_array()
    rows = np.arange(bucket.n)
    return float((arr.margin[rows, idx] - lam * arr.inventory[rows, idx]).sum())


class Regime(str, enum.Enum):
    UNCONSTRAINED = "Unconstrained"
    CONSTRAINED = "Constrained"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class RegimeReport:
    min_achievable_isp: float
    max_achievable_isp: float
    regime: Regime
    min_units: int = field(repr=False, default=0)
    max_units: int = field(repr=False, default=0)
    unit_total: int = field(repr=False, default=1)

    @property
    def min_fraction(self) -> Fraction:
        return Fraction(self.min_units, self.unit_total)

    @property
    def max_fraction(self) -> Fraction:
        return Fraction(self.max_units, self.unit_total)


def classify_regime(bucket: Bucket) -> RegimeReport:
    """Compare the floor against the lowest and highest achievable average ISP."""
    arr = bucket.arrays
    big = np.iinfo(np.int64).max
    lo = int(np.where(arr.mask, arr.units, big).min(axis=1).sum())
    hi = int(np.where(arr.mask, arr.units, -1).max(axis=1).sum())
    total = bucket.n * arr.unit_denominator
    if lo >= arr.required_units:
        regime = Regime.UNCONSTRAINED
    elif hi < arr.required_units:
        regime = Regime.INFEASIBLE
    else:
        regime = Regime.CONSTRAINED
    return RegimeReport(lo / total, hi / total, regime, lo, hi, total)


def tar_err(exact_gmroi: float, solver_gmroi: float) -> float:
    """Relative GMROI deviation with the denominator clamped at one."""
    return abs(exact_gmroi - solver_gmroi) / max(1.0, abs(exact_gmroi))


def make_bucket(
    data: Sequence[Sequence[tuple[float, float, float]]], service_floor: float | Fraction
) -> Bucket:
    """Convenience constructor from ``(margin, inventory, isp)`` triples.

    ISP floats are rationalized; safety stocks are the scenario positions.
    """
    skus = []
    for i, rows in enumerate(data):
        scen = [ScenarioMetrics.from_isp(m, inv, s, safety_stock=j) for j, (m, inv, s) in enumerate(rows)]
        skus.append(SkuScenarios(str(i), tuple(scen)))
    return Bucket(tuple(skus), as_fraction(service_floor))
