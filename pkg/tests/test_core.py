from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import all_selections, naive_eval, random_bucket
from gmroi.core import (
    Bucket,
    Regime,
    ScenarioMetrics,
    Selection,
    SkuScenarios,
    ValidationError,
    ZeroInventory,
    aggregate,
    as_fraction,
    classify_regime,
    make_bucket,
    meets_floor,
    tar_err,
)
from gmroi.solvers import brute_force_fractional


def test_aggregate_single_sku():
    b = make_bucket([[(10, 4, 0.9)]], 0.0)
    agg = aggregate(b, Selection((0,)))
    assert (agg.total_margin, agg.total_inventory, agg.avg_isp, agg.gmroi) == (10, 4, 0.9, 2.5)


def test_aggregate_two_skus(running_bucket):
    sel = Selection((0, 1))
    agg = aggregate(running_bucket, sel)
    m, inv, s = naive_eval(running_bucket, sel.chosen)
    assert (agg.total_margin, agg.total_inventory) == (m, inv) == (19.0, 11.0)
    assert agg.avg_isp == pytest.approx(0.945, abs=1e-15)
    assert s == Fraction(189, 200)
    assert agg.gmroi == 19 / 11


def test_aggregate_zero_margin_gives_zero_gmroi():
    b = make_bucket([[(0, 3, 0.5), (0, 7, 0.9)], [(0, 1, 0.2)]], 0.0)
    for chosen in all_selections(b):
        assert aggregate(b, Selection(chosen)).gmroi == 0.0


def test_aggregate_zero_inventory():
    b = make_bucket([[(1, 0, 0.5)]], 0.0)
    with pytest.raises(ZeroInventory):
        aggregate(b, Selection((0,)))


def test_selection_validation(running_bucket):
    with pytest.raises(ValidationError):
        aggregate(running_bucket, Selection((0,)))
    with pytest.raises(ValidationError):
        aggregate(running_bucket, Selection((0, 2)))


def test_scenario_invariants():
    with pytest.raises(ValidationError):
        ScenarioMetrics.from_counts(-1, 1, 1, 2)
    with pytest.raises(ValidationError):
        ScenarioMetrics.from_counts(1, 1, 3, 2)
    with pytest.raises(ValidationError):
        SkuScenarios("a", ())
    with pytest.raises(ValidationError):
        Bucket((), 0.5)
    with pytest.raises(ValidationError):
        make_bucket([[(1, 1, 0.5)]], 1.5)


def test_float_floor_reads_decimal():
    assert as_fraction(0.9) == Fraction(9, 10)
    assert as_fraction(Fraction(1, 3)) == Fraction(1, 3)
    # a selection with ISP exactly 0.9 meets a 0.9 floor
    b = make_bucket([[(1, 1, 0.9)]], 0.9)
    assert meets_floor(b, Selection((0,)))


def test_regime_all_full_isp():
    b = make_bucket([[(1, 1, 1.0), (2, 2, 1.0)], [(1, 1, 1.0)]], 0.95)
    assert classify_regime(b).regime is Regime.UNCONSTRAINED


@pytest.mark.parametrize(
    "floor, regime",
    [(0.99, Regime.INFEASIBLE), (0.8, Regime.CONSTRAINED), (0.55, Regime.UNCONSTRAINED)],
)
def test_regime_ranges(floor, regime):
    b = make_bucket([[(1, 1, 0.5), (1, 1, 0.9)], [(1, 1, 0.6), (1, 1, 0.8)]], floor)
    rep = classify_regime(b)
    assert rep.min_achievable_isp == pytest.approx(0.55)
    assert rep.max_achievable_isp == pytest.approx(0.85)
    assert rep.regime is regime
    feasible = [naive_eval(b, c)[2] >= b.service_floor for c in all_selections(b)]
    assert any(feasible) == (regime is not Regime.INFEASIBLE)
    assert all(feasible) == (regime is Regime.UNCONSTRAINED)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_regime_matches_enumeration(seed):
    b = random_bucket(np.random.default_rng(seed), n_max=5, j_max=3)
    feasible = [naive_eval(b, c)[2] >= b.service_floor for c in all_selections(b)]
    regime = classify_regime(b).regime
    assert any(feasible) == (regime is not Regime.INFEASIBLE)
    assert all(feasible) == (regime is Regime.UNCONSTRAINED)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_aggregate_ranges(seed):
    rng = np.random.default_rng(seed)
    b = random_bucket(rng, n_max=6, j_max=4)
    for chosen in all_selections(b):
        agg = aggregate(b, Selection(chosen))
        assert 0 <= agg.avg_isp <= 1
        assert agg.total_margin >= 0 and agg.total_inventory >= 0


@pytest.mark.parametrize(
    "exact, solver, expected",
    [(2.0, 2.0, 0.0), (0.5, 0.4, 0.1), (4.0, 3.8, 0.05)],
)
def test_tar_err_examples(exact, solver, expected):
    assert tar_err(exact, solver) == pytest.approx(expected, abs=1e-15)


@given(
    st.floats(-1e6, 1e6, allow_nan=False),
    st.floats(0, 1e3, allow_nan=False),
)
def test_tar_err_properties(a, d):
    assert tar_err(a, a) == 0
    assert tar_err(a, a + d) == pytest.approx(tar_err(a, a - d), rel=1e-6, abs=1e-9)
    assert tar_err(a, a + d) <= d + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_gmroi_scale_covariance(seed, c):
    b = random_bucket(np.random.default_rng(seed), n_max=5, j_max=3)
    if classify_regime(b).regime is Regime.INFEASIBLE:
        return
    scaled = Bucket(
        tuple(
            SkuScenarios(
                s.sku_id,
                tuple(
                    ScenarioMetrics.from_counts(
                        sc.margin * c, sc.inventory, sc.isp_numerator, sc.isp_denominator, sc.safety_stock
                    )
                    for sc in s.scenarios
                ),
            )
            for s in b.skus
        ),
        b.service_floor,
    )
    sel, ratio = brute_force_fractional(b)
    sel_c, ratio_c = brute_force_fractional(scaled)
    assert ratio_c == pytest.approx(c * ratio, rel=1e-12)
    # the original argmax stays optimal after scaling
    assert aggregate(scaled, sel).gmroi == pytest.approx(ratio_c, rel=1e-12)
