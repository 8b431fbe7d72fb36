"""Monte Carlo reorder-point simulation producing per-SKU scenario tables.

Each SKU runs a single-echelon lost-sales system. With expected lead-time
demand ``D = round(mean * lead_time)`` the reorder point is
``R = safety_stock + D`` and, when the inventory position drops to ``R`` with
no order outstanding, an order lifts the position to ``R + D``. The system
starts full at ``R + D`` units on hand.

All safety-stock levels of one SKU share the same demand path (common random
numbers), so the grid is simulated in one vectorized pass.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from .core import Bucket, GmroiError, ScenarioMetrics, SkuScenarios, as_fraction

#: Dispersion at or above which demand is deterministic.
DETERMINISTIC_DISPERSION = 1e6
#: Target number of safety-stock levels in the default grid.
DEFAULT_GRID_POINTS = 60


class InvalidConfig(GmroiError, ValueError):
    category = "InvalidConfig"


class Review(str, enum.Enum):
    CONTINUOUS = "continuous"


class OrderRule(str, enum.Enum):
    ORDER_UP_TO = "order_up_to"


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 91
    demand_mean: float = 5.0
    demand_dispersion: float = 4.0
    lead_time: int = 7
    unit_price: float = 10.0
    unit_cost: float = 6.0
    review: Review = Review.CONTINUOUS
    order_quantity_rule: OrderRule = OrderRule.ORDER_UP_TO
    seed: int = 0
    sku_id: str | None = None

    def validate(self) -> None:
        if self.horizon < 1 or self.lead_time < 1:
            raise InvalidConfig("horizon and lead_time must be positive integers")
        if self.horizon < self.lead_time + 1:
            raise InvalidConfig(f"horizon {self.horizon} must be >= lead_time + 1")
        if not self.demand_mean >= 0:
            raise InvalidConfig("demand_mean must be >= 0")
        if not self.demand_dispersion > 0:
            raise InvalidConfig("demand_dispersion must be > 0")
        if self.unit_price < 0 or self.unit_cost < 0:
            raise InvalidConfig("unit_price and unit_cost must be >= 0")
        if self.unit_cost > self.unit_price:
            raise InvalidConfig("unit_cost above unit_price gives negative margin")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")

    @property
    def lead_time_demand(self) -> int:
        return round(self.demand_mean * self.lead_time)

    @property
    def deterministic(self) -> bool:
        return self.demand_dispersion >= DETERMINISTIC_DISPERSION


@dataclass(frozen=True)
class ScenarioGrid:
    safety_stocks: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "safety_stocks", tuple(int(s) for s in self.safety_stocks))
        if not self.safety_stocks:
            raise InvalidConfig("scenario grid must be non-empty")
        if self.safety_stocks[0] < 0:
            raise InvalidConfig("safety stocks must be nonnegative")
        if any(b <= a for a, b in zip(self.safety_stocks, self.safety_stocks[1:])):
            raise InvalidConfig("safety stocks must be strictly increasing")

    @classmethod
    def default(cls, cfg: SimConfig, points: int = DEFAULT_GRID_POINTS) -> ScenarioGrid:
        """``points`` levels spread evenly over ``[0, ceil(4 * mean * lead_time)]``.

        Levels are rounded to integers; short ranges yield every integer.
        """
        top = math.ceil(4 * cfg.demand_mean * cfg.lead_time)
        if points < 2 or top == 0:
            return cls((0,))
        levels = np.unique(np.rint(np.linspace(0, top, min(points, top + 1))).astype(np.int64))
        return cls(tuple(levels.tolist()))


@dataclass
class Trajectory:
    on_hand: np.ndarray
    in_stock_flag: np.ndarray
    units_sold: np.ndarray
    demand: np.ndarray
    arrivals: np.ndarray
    orders_placed: list[tuple[int, int]] = field(default_factory=list)
    initial_on_hand: int = 0


def stream(seed: int, sku_index: int = 0, replication: int = 0) -> np.random.Generator:
    """PCG64 stream keyed by hashing ``(seed, sku_index, replication)``."""
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, sku_index, replication])
    return np.random.Generator(np.random.PCG64(ss))


def draw_demand(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Negative binomial demand with the configured mean and shape.

    At or above :data:`DETERMINISTIC_DISPERSION` the path is deterministic,
    ``floor((t+1)*mean) - floor(t*mean)``, which averages exactly ``mean``.
    """
    h = cfg.horizon
    if cfg.demand_mean == 0:
        return np.zeros(h, dtype=np.int64)
    if cfg.deterministic:
        t = np.arange(h + 1)
        cum = np.floor(t * cfg.demand_mean).astype(np.int64)
        return np.diff(cum)
    r = cfg.demand_dispersion
    p = r / (r + cfg.demand_mean)
    return rng.negative_binomial(r, p, size=h).astype(np.int64)


def _run_levels(cfg: SimConfig, levels: np.ndarray, demand: np.ndarray) -> dict[str, np.ndarray]:
    """Step the policy for every safety-stock level over one demand path."""
    h, lt = cfg.horizon, cfg.lead_time
    ltd = cfg.lead_time_demand
    k = len(levels)
    reorder = levels + ltd
    up_to = reorder + ltd
    on_hand = up_to.astype(np.int64).copy()
    initial = on_hand.copy()
    pipeline = np.zeros((k, h + lt + 1), dtype=np.int64)
    outstanding = np.zeros(k, dtype=np.int64)

    end_on_hand = np.empty((k, h), dtype=np.int64)
    sold = np.empty((k, h), dtype=np.int64)
    arrivals = np.empty((k, h), dtype=np.int64)
    orders = np.zeros((k, h), dtype=np.int64)
    for t in range(h):
        arr = pipeline[:, t]
        on_hand += arr
        outstanding -= arr
        s = np.minimum(demand[t], on_hand)
        on_hand -= s
        position = on_hand + outstanding
        q = np.where((position <= reorder) & (outstanding == 0), up_to - position, 0)
        if q.any():
            pipeline[:, t + lt] += q
            outstanding += q
            orders[:, t] = q
        end_on_hand[:, t] = on_hand
        sold[:, t] = s
        arrivals[:, t] = arr
    return {
        "on_hand": end_on_hand,
        "sold": sold,
        "arrivals": arrivals,
        "orders": orders,
        "initial": initial,
    }


def _metrics(cfg: SimConfig, run: dict[str, np.ndarray], demand: np.ndarray, row: int):
    sold = run["sold"][row]
    served = sold == demand
    margin = float(sold.sum()) * (cfg.unit_price - cfg.unit_cost)
    inventory = float(run["on_hand"][row].mean()) * cfg.unit_cost
    return margin, inventory, int(served.sum())


def simulate_sku(
    cfg: SimConfig, safety_stock: int, sku_index: int = 0, replication: int = 0
) -> tuple[Trajectory, ScenarioMetrics]:
    """Simulate one SKU at one safety-stock level.

    A period counts as in stock when all of its demand is served.
    """
    cfg.validate()
    if safety_stock < 0:
        raise InvalidConfig("safety_stock must be >= 0")
    demand = draw_demand(cfg, stream(cfg.seed, sku_index, replication))
    run = _run_levels(cfg, np.array([safety_stock], dtype=np.int64), demand)
    margin, inventory, num = _metrics(cfg, run, demand, 0)
    orders = [(int(t), int(q)) for t, q in enumerate(run["orders"][0]) if q > 0]
    traj = Trajectory(
        on_hand=run["on_hand"][0],
        in_stock_flag=run["sold"][0] == demand,
        units_sold=run["sold"][0],
        demand=demand,
        arrivals=run["arrivals"][0],
        orders_placed=orders,
        initial_on_hand=int(run["initial"][0]),
    )
    metrics = ScenarioMetrics.from_counts(margin, inventory, num, cfg.horizon, safety_stock)
    return traj, metrics


def generate_scenarios(
    cfg: SimConfig,
    grid: ScenarioGrid | None = None,
    replications: int = 1,
    sku_index: int = 0,
) -> SkuScenarios:
    """One scenario per grid level, averaged over replications.

    Margin and inventory are replication means; ISP numerators and
    denominators are summed so the ISP stays an exact ratio of period counts.
    """
    cfg.validate()
    if replications < 1:
        raise InvalidConfig("replications must be >= 1")
    grid = grid or ScenarioGrid.default(cfg)
    levels = np.asarray(grid.safety_stocks, dtype=np.int64)
    k = len(levels)
    margin = np.zeros(k)
    inventory = np.zeros(k)
    served = np.zeros(k, dtype=np.int64)
    for rep in range(replications):
        demand = draw_demand(cfg, stream(cfg.seed, sku_index, rep))
        run = _run_levels(cfg, levels, demand)
        for row in range(k):
            m, inv, num = _metrics(cfg, run, demand, row)
            margin[row] += m
            inventory[row] += inv
            served[row] += num
    margin /= replications
    inventory /= replications
    den = cfg.horizon * replications
    scen = tuple(
        ScenarioMetrics.from_counts(margin[r], inventory[r], int(served[r]), den, int(levels[r]))
        for r in range(k)
    )
    sku_id = cfg.sku_id if cfg.sku_id is not None else str(sku_index)
    return SkuScenarios(sku_id, scen)


def generate_bucket(
    cfgs: Sequence[SimConfig],
    grids: Sequence[ScenarioGrid | None] | None = None,
    service_floor: float = 0.0,
    replications: int = 1,
) -> Bucket:
    if not cfgs:
        raise InvalidConfig("at least one SKU config is required")
    if grids is None:
        grids = [None] * len(cfgs)
    if len(grids) != len(cfgs):
        raise InvalidConfig("cfgs and grids must be aligned")
    skus = tuple(
        generate_scenarios(cfg, grid, replications, sku_index=i)
        for i, (cfg, grid) in enumerate(zip(cfgs, grids))
    )
    return Bucket(skus, as_fraction(service_floor))


@dataclass(frozen=True)
class BucketRecipe:
    """Heterogeneous bucket: per-SKU parameters drawn uniformly from ranges.

    Range fields are ``(low, high)`` pairs; integer fields draw integers
    inclusive of both ends. The draw uses its own stream so the recipe and
    the demand paths stay independent.
    """

    skus: int = 10
    seed: int = 0
    replications: int = 1
    service_floor: float = 0.0
    grid_points: int = DEFAULT_GRID_POINTS
    isotonic: bool = True
    horizon: int = 91
    demand_mean: tuple[float, float] = (2.0, 20.0)
    demand_dispersion: tuple[float, float] = (1.0, 10.0)
    lead_time: tuple[int, int] = (3, 14)
    unit_price: tuple[float, float] = (5.0, 50.0)
    margin_rate: tuple[float, float] = (0.2, 0.6)

    def sku_configs(self) -> list[SimConfig]:
        rng = stream(self.seed, 2**32 - 1, 0)
        cfgs = []
        for i in range(self.skus):
            price = float(rng.uniform(*self.unit_price))
            rate = float(rng.uniform(*self.margin_rate))
            cfgs.append(
                SimConfig(
                    horizon=self.horizon,
                    demand_mean=round(float(rng.uniform(*self.demand_mean)), 4),
                    demand_dispersion=round(float(rng.uniform(*self.demand_dispersion)), 4),
                    lead_time=int(rng.integers(self.lead_time[0], self.lead_time[1] + 1)),
                    unit_price=round(price, 2),
                    unit_cost=round(price * (1 - rate), 2),
                    seed=self.seed,
                    sku_id=f"SKU{i:05d}",
                )
            )
        return cfgs

    def build(self) -> Bucket:
        from .isotonic import preprocess_bucket

        cfgs = self.sku_configs()
        grids = [ScenarioGrid.default(c, self.grid_points) for c in cfgs]
        bucket = generate_bucket(cfgs, grids, self.service_floor, self.replications)
        return preprocess_bucket(bucket) if self.isotonic else bucket


_RANGE_FIELDS = {"demand_mean", "demand_dispersion", "lead_time", "unit_price", "margin_rate"}


def load_config(path: str | Path, seed: int | None = None) -> SimConfig | BucketRecipe:
    """Read a YAML simulation config.

    A mapping with a ``bucket`` key yields a :class:`BucketRecipe`; otherwise
    the mapping holds :class:`SimConfig` fields for a single SKU.
    """
    with open(path, encoding="utf-8") as fh:
        raw: dict[str, Any] = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise InvalidConfig(f"{path}: expected a key-value mapping")
    if "bucket" in raw:
        data = dict(raw["bucket"] or {})
        known = {f.name for f in fields(BucketRecipe)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"{path}: unknown bucket keys {sorted(unknown)}")
        for key in _RANGE_FIELDS & set(data):
            val = data[key]
            data[key] = tuple(val) if isinstance(val, (list, tuple)) else (val, val)
        recipe = BucketRecipe(**data)
        return replace(recipe, seed=seed) if seed is not None else recipe
    known = {f.name for f in fields(SimConfig)}
    unknown = set(raw) - known
    if unknown:
        raise InvalidConfig(f"{path}: unknown keys {sorted(unknown)}")
    if "review" in raw:
        raw["review"] = Review(raw["review"])
    if "order_quantity_rule" in raw:
        raw["order_quantity_rule"] = OrderRule(raw["order_quantity_rule"])
    cfg = SimConfig(**raw)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    cfg.validate()
    return cfg
