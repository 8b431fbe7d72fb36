"""Scenario-table CSV reading and writing.

Columns: ``sku_id,scenario_id,safety_stock,margin,inventory,isp_num,isp_den``.
Floats are written with ``repr`` so a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import io
from fractions import Fraction
from pathlib import Path
from typing import TextIO

from .core import Bucket, GmroiError, ScenarioMetrics, SkuScenarios, ValidationError

COLUMNS = ("sku_id", "scenario_id", "safety_stock", "margin", "inventory", "isp_num", "isp_den")


class ParseError(GmroiError, ValueError):
    category = "ParseError"

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


def write_scenarios(bucket: Bucket, out: str | Path | TextIO) -> None:
    if isinstance(out, (str, Path)):
        with open(out, "w", encoding="utf-8", newline="") as fh:
            write_scenarios(bucket, fh)
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COLUMNS)
    for sku in bucket.skus:
        for j, sc in enumerate(sku.scenarios):
            w.writerow(
                [
                    sku.sku_id,
                    j,
                    sc.safety_stock,
                    repr(sc.margin),
                    repr(sc.inventory),
                    sc.isp_numerator,
                    sc.isp_denominator,
                ]
            )


def scenarios_csv(bucket: Bucket) -> str:
    buf = io.StringIO()
    write_scenarios(bucket, buf)
    return buf.getvalue()


def ingest_scenarios(
    source: str | Path | TextIO, service_floor: float | Fraction = 0.0
) -> Bucket:
    """Parse a scenario table into a bucket.

    SKUs keep their order of first appearance; each SKU's scenarios are
    sorted by safety stock.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return ingest_scenarios(fh, service_floor)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, "empty file, header required") from None
    if tuple(h.strip() for h in header) != COLUMNS:
        raise ParseError(1, f"expected header {','.join(COLUMNS)}")

    groups: dict[str, list[ScenarioMetrics]] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(COLUMNS):
            raise ParseError(line, f"expected {len(COLUMNS)} fields, got {len(row)}")
        sku_id = row[0].strip()
        try:
            safety = int(row[2])
            margin = float(row[3])
            inventory = float(row[4])
            num = int(row[5])
            den = int(row[6])
        except ValueError as exc:
            raise ParseError(line, str(exc)) from None
        if den <= 0:
            raise ValidationError(f"line {line}: isp_den must be positive")
        if not 0 <= num <= den:
            raise ValidationError(f"line {line}: isp_num {num} outside [0, isp_den={den}]")
        try:
            sc = ScenarioMetrics.from_counts(margin, inventory, num, den, safety)
        except ValidationError as exc:
            raise ValidationError(f"line {line}: {exc}") from None
        groups.setdefault(sku_id, []).append(sc)

    if not groups:
        raise ValidationError("scenario table has no rows")
    skus = []
    for sku_id, scen in groups.items():
        scen.sort(key=lambda s: s.safety_stock)
        stocks = [s.safety_stock for s in scen]
        if len(set(stocks)) != len(stocks):
            raise ValidationError(f"SKU {sku_id!r}: duplicate safety stock levels")
        skus.append(SkuScenarios(sku_id, tuple(scen)))
    return Bucket(tuple(skus), service_floor)
