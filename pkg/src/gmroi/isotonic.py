"""Least-squares isotonic regression and per-SKU monotone preprocessing."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

from .core import Bucket, ScenarioMetrics, SkuScenarios, ValidationError


@dataclass(frozen=True)
class MetricSeries:
    xs: tuple[float, ...]
    ys: tuple[float, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "xs", tuple(self.xs))
        object.__setattr__(self, "ys", tuple(self.ys))
        if self.weights is None:
            object.__setattr__(self, "weights", (1.0,) * len(self.ys))
        else:
            object.__setattr__(self, "weights", tuple(self.weights))
        if not self.ys or len(self.xs) != len(self.ys) or len(self.weights) != len(self.ys):
            raise ValidationError("xs, ys and weights must have equal positive length")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise ValidationError("xs must be strictly increasing")
        if any(not w > 0 for w in self.weights):
            raise ValidationError("weights must be positive")


def pav(ys: Sequence[float], weights: Sequence[float] | None = None) -> list[float]:
    """Pool-adjacent-violators: weighted L2 projection onto non-decreasing sequences."""
    if weights is None:
        weights = [1.0] * len(ys)
    # each block: [weighted mean, total weight, length]
    blocks: list[list[float]] = []
    for y, w in zip(ys, weights):
        blocks.append([float(y), float(w), 1])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            m2, w2, n2 = blocks.pop()
            m1, w1, n1 = blocks[-1]
            wt = w1 + w2
            blocks[-1] = [(m1 * w1 + m2 * w2) / wt, wt, n1 + n2]
    out: list[float] = []
    for mean, _, count in blocks:
        out.extend([mean] * int(count))
    return out


def isotonic_fit(series: MetricSeries) -> list[float]:
    return pav(series.ys, series.weights)


def preprocess_sku(sku: SkuScenarios, weights: Sequence[float] | None = None) -> SkuScenarios:
    """Fit margin, inventory and ISP independently as non-decreasing in safety stock.

    The fitted ISP is clamped to [0, 1] and re-expressed on each scenario's own
    denominator by rounding the numerator.
    """
    scen = sku.scenarios
    if len(scen) == 1:
        return sku
    xs = [sc.safety_stock for sc in scen]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValidationError(f"SKU {sku.sku_id!r}: scenarios not ordered by safety stock")
    margin = pav([sc.margin for sc in scen], weights)
    inventory = pav([sc.inventory for sc in scen], weights)
    isp = pav([sc.isp for sc in scen], weights)

    out = []
    for sc, m, inv, s in zip(scen, margin, inventory, isp):
        s = min(1.0, max(0.0, s))
        if s == sc.isp:
            num, new_isp = sc.isp_numerator, sc.isp
        else:
            num = math.floor(s * sc.isp_denominator + 0.5)
            num = min(sc.isp_denominator, max(0, num))
            new_isp = num / sc.isp_denominator
        out.append(
            dataclasses.replace(
                sc,
                margin=max(0.0, m),
                inventory=max(0.0, inv),
                isp=new_isp,
                isp_numerator=num,
                rationalized=sc.rationalized and num == sc.isp_numerator,
            )
        )
    return SkuScenarios(sku.sku_id, tuple(out))


def preprocess_bucket(bucket: Bucket) -> Bucket:
    return Bucket(tuple(preprocess_sku(s) for s in bucket.skus), bucket.service_floor)
