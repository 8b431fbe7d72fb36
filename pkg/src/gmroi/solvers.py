"""Solvers for the parametric subproblem ``W(lam) = max {M(x) - lam*I(x) : S(x) >= C_S}``.

* :func:`solve_exact` - exact optimum by dynamic programming over the integer
  service budget (exhaustive enumeration as a small-instance fallback).
* :func:`solve_lagrangian` - relaxes the service floor with a multiplier
  ``mu`` and bisects on ``mu``; each evaluation is a per-SKU argmax.
* :func:`solve_unconstrained` - per-SKU argmax, ignoring the floor.
* :func:`brute_force_fractional` - enumerates every selection of the
  fractional problem itself; a test oracle for small buckets.

Every argmax breaks ties toward the lowest scenario index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .core import (
    Bucket,
    BucketArrays,
    GmroiError,
    InfeasibleBucket,
    Regime,
    Selection,
    ZeroInventory,
    classify_regime,
    reduced_value,
)

ENUMERATION_LIMIT = 10**4
BRUTE_FORCE_LIMIT = 10**6
DP_STATE_CAP = 10**8


class SubproblemFailure(GmroiError):
    category = "SubproblemFailure"


class BracketingFailed(SubproblemFailure):
    """Doubling ``mu`` never produced a selection meeting the floor."""

    category = "BracketingFailed"


class BudgetOverflow(SubproblemFailure):
    """The DP service grid is larger than the configured state cap."""

    category = "BudgetOverflow"


class TooLarge(GmroiError):
    category = "TooLarge"


@dataclass(frozen=True)
class LagrangianConfig:
    mu_tolerance: float | None = None
    mu_initial_high: float = 1.0
    doubling_cap: int = 64

    def __post_init__(self) -> None:
        if self.mu_tolerance is not None and not self.mu_tolerance > 0:
            raise ValueError("mu_tolerance must be positive")
        if not self.mu_initial_high > 0:
            raise ValueError("mu_initial_high must be positive")
        if self.doubling_cap < 1:
            raise ValueError("doubling_cap must be >= 1")


@dataclass(frozen=True)
class DualTracePoint:
    mu: float
    induced_isp: float
    dual_value: float
    feasible: bool


@dataclass
class SubproblemResult:
    selection: Selection
    value: float
    dual_trace: list[DualTracePoint] = field(default_factory=list)
    mu: float | None = None
    doublings: int = 0
    bisections: int = 0
    method: str = ""


def score_matrix(bucket: Bucket, lam: float) -> np.ndarray:
    """Reduced scores ``W_ij = M_ij - lam * I_ij``, padded with ``-inf``."""
    arr = bucket.arrays
    w = arr.margin - lam * arr.inventory
    return np.where(arr.mask, w, -np.inf)


def _service_scores(arr: BucketArrays) -> np.ndarray:
    return arr.units / arr.unit_denominator


def _argmax(scores: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum: lowest-index tie-break
    return np.argmax(scores, axis=1)


def _selection_value(w: np.ndarray, idx: np.ndarray) -> float:
    return float(w[np.arange(len(idx)), idx].sum())


def enumerate_solve(bucket: Bucket, lam: float, mu: float) -> Selection:
    """Per-SKU argmax of ``W_ij + (mu/n) S_ij``."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    w = score_matrix(bucket, lam)
    s = _service_scores(bucket.arrays)
    return Selection(tuple(_argmax(w + (mu / bucket.n) * s)))


def solve_unconstrained(bucket: Bucket, lam: float) -> SubproblemResult:
    w = score_matrix(bucket, lam)
    idx = _argmax(w)
    return SubproblemResult(Selection(tuple(idx)), _selection_value(w, idx), method="unconstrained")


def default_mu_tolerance(w: np.ndarray, n: int) -> float:
    finite = np.abs(w[np.isfinite(w)])
    return 1e-7 * (1.0 + float(finite.max()) * n)


def solve_lagrangian(
    bucket: Bucket, lam: float, cfg: LagrangianConfig | None = None
) -> SubproblemResult:
    """Bisection on the multiplier of the relaxed service floor.

    ``mu = 0`` is tried first; if its selection already meets the floor it is
    returned (non-binding constraint). Otherwise ``mu_high`` is doubled until
    the induced selection is feasible, then ``[0, mu_high]`` is bisected down
    to ``mu_tolerance``. The feasible selection with the largest reduced
    value seen is returned together with that value and the dual trace.
    """
    cfg = cfg or LagrangianConfig()
    arr = bucket.arrays
    n = bucket.n
    w = score_matrix(bucket, lam)
    s = _service_scores(arr)
    rows = np.arange(n)
    floor = float(bucket.service_floor)
    tol = cfg.mu_tolerance if cfg.mu_tolerance is not None else default_mu_tolerance(w, n)
    trace: list[DualTracePoint] = []
    scores = np.empty_like(w)

    def evaluate(mu: float) -> tuple[np.ndarray, bool]:
        np.multiply(s, mu / n, out=scores)
        np.add(scores, w, out=scores)
        idx = _argmax(scores)
        units = int(arr.units[rows, idx].sum())
        feasible = units >= arr.required_units
        phi = float(scores[rows, idx].sum()) - mu * floor
        trace.append(DualTracePoint(mu, units / (n * arr.unit_denominator), phi, feasible))
        return idx, feasible

    idx0, ok0 = evaluate(0.0)
    if ok0:
        return SubproblemResult(
            Selection(tuple(idx0)), _selection_value(w, idx0), trace, mu=0.0, method="lagrangian"
        )

    mu_low, mu_high = 0.0, cfg.mu_initial_high
    doublings = 0
    idx, ok = evaluate(mu_high)
    while not ok:
        if doublings >= cfg.doubling_cap:
            raise BracketingFailed(
                f"service floor {floor} unreachable after {doublings} doublings (mu={mu_high:g})"
            )
        mu_high *= 2.0
        doublings += 1
        idx, ok = evaluate(mu_high)

    best_idx, best_val = idx, _selection_value(w, idx)
    best_mu = mu_high
    bisections = 0
    while mu_high - mu_low > tol:
        mu = 0.5 * (mu_low + mu_high)
        if mu in (mu_low, mu_high):
            break
        bisections += 1
        idx, ok = evaluate(mu)
        if ok:
            mu_high = mu
            val = _selection_value(w, idx)
            if val > best_val:
                best_idx, best_val, best_mu = idx, val, mu
        else:
            mu_low = mu
    return SubproblemResult(
        Selection(tuple(best_idx)),
        best_val,
        trace,
        mu=best_mu,
        doublings=doublings,
        bisections=bisections,
        method="lagrangian",
    )


def dual_value(bucket: Bucket, lam: float, mu: float) -> float:
    """``phi(mu) = max_x {M - lam*I + mu*S} - mu*C_S`` over unconstrained selections."""
    w = score_matrix(bucket, lam)
    scores = w + (mu / bucket.n) * _service_scores(bucket.arrays)
    return float(scores.max(axis=1).sum()) - mu * float(bucket.service_floor)


def _cartesian(arr: BucketArrays, values: list[np.ndarray]) -> list[np.ndarray]:
    """Sum each per-scenario matrix over every selection (C order)."""
    counts = arr.counts
    out = [v[0, : counts[0]].copy() for v in values]
    for i in range(1, len(counts)):
        k = counts[i]
        out = [(o[:, None] + v[i, :k][None, :]).ravel() for o, v in zip(out, values)]
    return out


def _unravel(arr: BucketArrays, flat: int) -> Selection:
    return Selection(tuple(int(j) for j in np.unravel_index(flat, tuple(arr.counts))))


def _enumerate_exact(bucket: Bucket, lam: float) -> SubproblemResult:
    arr = bucket.arrays
    w = np.where(arr.mask, arr.margin - lam * arr.inventory, 0.0)
    total_w, total_u = _cartesian(arr, [w, arr.units])
    feasible = total_u >= arr.required_units
    if not feasible.any():
        raise InfeasibleBucket("no selection meets the service floor")
    masked = np.where(feasible, total_w, -np.inf)
    flat = int(np.argmax(masked))
    sel = _unravel(arr, flat)
    return SubproblemResult(sel, reduced_value(bucket, sel, lam), method="enumeration")


def _pareto_options(gains: np.ndarray, costs: np.ndarray) -> list[tuple[int, int, float]]:
    """Options ``(j, gain, cost)`` not dominated by a cheaper option with at least the same gain."""
    order = sorted(range(len(gains)), key=lambda j: (-gains[j], costs[j], j))
    kept = []
    best_cost = math.inf
    for j in order:
        if costs[j] < best_cost:
            kept.append((j, int(gains[j]), float(costs[j])))
            best_cost = costs[j]
    kept.sort(key=lambda t: t[0])
    return kept


def _dp_step(
    f: np.ndarray, options: list[tuple[int, int, float]], cap: int
) -> tuple[np.ndarray, np.ndarray]:
    """Fold one SKU into the budget table; state ``cap`` means "at least cap"."""
    new = f.copy()
    choice = np.full(cap + 1, -1, dtype=np.int32)
    for j, g, c in options:
        if g < cap:
            cand = f[: cap - g] + c
            better = cand < new[g:cap]
            if better.any():
                new[g:cap] = np.where(better, cand, new[g:cap])
                choice[g:cap][better] = j
        top = float(f[cap - g :].min()) + c
        if top < new[cap]:
            new[cap] = top
            choice[cap] = j
    return new, choice


def _solve_dp(bucket: Bucket, lam: float, state_cap: int) -> SubproblemResult:
    arr = bucket.arrays
    n = bucket.n
    w = score_matrix(bucket, lam)
    base = _argmax(w)
    rows = np.arange(n)
    base_units = arr.units[rows, base]
    deficit = arr.required_units - int(base_units.sum())
    if deficit <= 0:
        return SubproblemResult(Selection(tuple(base)), _selection_value(w, base), method="dp")

    gains = np.where(arr.mask, arr.units - base_units[:, None], 0)
    costs = w[rows, base][:, None] - w
    positive = gains[gains > 0]
    if positive.size == 0:
        raise InfeasibleBucket("no selection meets the service floor")
    g = math.gcd(*positive.tolist()) if positive.size > 1 else int(positive[0])
    cap = -(-deficit // g)
    red = np.minimum(gains // g, cap)

    per_sku: list[list[tuple[int, int, float]]] = []
    reach = 0
    for i in range(n):
        opt = np.flatnonzero(red[i] > 0)
        options = _pareto_options(red[i, opt], costs[i, opt]) if opt.size else []
        per_sku.append([(int(opt[k]), gg, cc) for k, gg, cc in options])
        reach += max((gg for _, gg, _ in options), default=0)
    if reach < cap:
        raise InfeasibleBucket("no selection meets the service floor")
    if n * (cap + 1) > state_cap:
        raise BudgetOverflow(f"{n} x {cap + 1} DP states exceed cap {state_cap}")

    # forward pass keeping tables only at block boundaries
    block = max(1, math.isqrt(n))
    f = np.full(cap + 1, np.inf)
    f[0] = 0.0
    checkpoints = []
    for i in range(n):
        if i % block == 0:
            checkpoints.append(f)
        f, _ = _dp_step(f, per_sku[i], cap)
    if not np.isfinite(f[cap]):
        raise InfeasibleBucket("no selection meets the service floor")

    chosen = base.copy()
    gain_of = {(i, j): gg for i in range(n) for j, gg, _ in per_sku[i]}
    state = cap
    for b in range(len(checkpoints) - 1, -1, -1):
        lo, hi = b * block, min(n, (b + 1) * block)
        tables, choices = [], []
        f = checkpoints[b]
        for i in range(lo, hi):
            tables.append(f)
            f, ch = _dp_step(f, per_sku[i], cap)
            choices.append(ch)
        for i in range(hi - 1, lo - 1, -1):
            j = int(choices[i - lo][state])
            if j < 0:
                continue
            chosen[i] = j
            gg = gain_of[(i, j)]
            if state == cap:
                prev = tables[i - lo]
                start = cap - gg
                state = start + int(np.argmin(prev[start:]))
            else:
                state -= gg
    sel = Selection(tuple(chosen))
    return SubproblemResult(sel, reduced_value(bucket, sel, lam), method="dp")


def solve_exact(
    bucket: Bucket,
    lam: float,
    state_cap: int = DP_STATE_CAP,
    enumeration_limit: int = ENUMERATION_LIMIT,
) -> SubproblemResult:
    """Exact constrained subproblem.

    Works on the deficit form: start from the per-SKU argmax and pay the
    score loss ``W_i,base - W_ij`` for each unit of extra service, so the DP
    table is indexed by service units still missing. Gains are divided by
    their gcd and capped at the deficit. When the table would exceed
    ``state_cap`` cells, small buckets (at most ``enumeration_limit``
    selections) fall back to enumeration; larger ones raise
    :class:`BudgetOverflow`.
    """
    try:
        return _solve_dp(bucket, lam, state_cap)
    except BudgetOverflow:
        if bucket.selection_count <= enumeration_limit:
            return _enumerate_exact(bucket, lam)
        raise


def brute_force_fractional(
    bucket: Bucket, limit: int = BRUTE_FORCE_LIMIT
) -> tuple[Selection, float]:
    """Maximal GMROI over every feasible selection (first in index order on ties)."""
    if bucket.selection_count > limit:
        raise TooLarge(f"{bucket.selection_count} selections exceed limit {limit}")
    arr = bucket.arrays
    m = np.where(arr.mask, arr.margin, 0.0)
    inv = np.where(arr.mask, arr.inventory, 0.0)
    total_m, total_i, total_u = _cartesian(arr, [m, inv, arr.units])
    feasible = total_u >= arr.required_units
    if not feasible.any():
        raise InfeasibleBucket("no selection meets the service floor")
    if (total_i[feasible] <= 0).any():
        raise ZeroInventory("a feasible selection has zero inventory")
    ratio = np.where(feasible, total_m / np.where(feasible, total_i, 1.0), -np.inf)
    flat = int(np.argmax(ratio))
    return _unravel(arr, flat), float(ratio[flat])


def achievable_ratios(bucket: Bucket, limit: int = BRUTE_FORCE_LIMIT) -> np.ndarray:
    """Distinct GMROI values over feasible selections."""
    if bucket.selection_count > limit:
        raise TooLarge(f"{bucket.selection_count} selections exceed limit {limit}")
    arr = bucket.arrays
    m = np.where(arr.mask, arr.margin, 0.0)
    inv = np.where(arr.mask, arr.inventory, 0.0)
    total_m, total_i, total_u = _cartesian(arr, [m, inv, arr.units])
    feasible = total_u >= arr.required_units
    return np.unique(total_m[feasible] / total_i[feasible])


class SubproblemSolver(Protocol):
    name: str

    def solve(self, bucket: Bucket, lam: float) -> SubproblemResult: ...


@dataclass
class ExactSolver:
    state_cap: int = DP_STATE_CAP
    enumeration_limit: int = ENUMERATION_LIMIT
    name: str = "exact"

    def solve(self, bucket: Bucket, lam: float) -> SubproblemResult:
        return solve_exact(bucket, lam, self.state_cap, self.enumeration_limit)


@dataclass
class LagrangianSolver:
    config: LagrangianConfig = field(default_factory=LagrangianConfig)
    name: str = "lagrangian"

    def solve(self, bucket: Bucket, lam: float) -> SubproblemResult:
        return solve_lagrangian(bucket, lam, self.config)


@dataclass
class UnconstrainedSolver:
    name: str = "unconstrained"

    def solve(self, bucket: Bucket, lam: float) -> SubproblemResult:
        return solve_unconstrained(bucket, lam)


@dataclass
class AutoSolver:
    """Separable solver when the floor can never bind, Lagrangian otherwise."""

    config: LagrangianConfig = field(default_factory=LagrangianConfig)
    name: str = "auto"

    def solve(self, bucket: Bucket, lam: float) -> SubproblemResult:
        regime = classify_regime(bucket).regime
        if regime is Regime.UNCONSTRAINED:
            return solve_unconstrained(bucket, lam)
        if regime is Regime.INFEASIBLE:
            raise InfeasibleBucket("service floor exceeds the maximum achievable ISP")
        return solve_lagrangian(bucket, lam, self.config)


SOLVER_NAMES = ("exact", "lagrangian", "unconstrained", "auto")


def make_solver(
    name: str, *, mu_tolerance: float | None = None, dp_state_cap: int = DP_STATE_CAP
) -> SubproblemSolver:
    lcfg = LagrangianConfig(mu_tolerance=mu_tolerance)
    if name == "exact":
        return ExactSolver(state_cap=dp_state_cap)
    if name == "lagrangian":
        return LagrangianSolver(lcfg)
    if name == "unconstrained":
        return UnconstrainedSolver()
    if name == "auto":
        return AutoSolver(lcfg)
    raise ValueError(f"unknown solver {name!r}; expected one of {SOLVER_NAMES}")
