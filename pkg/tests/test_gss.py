"""Star-system index: hub values, outside extensions, homothetic variant."""

from __future__ import annotations

import numpy as np
import pytest

from oracles import (
    cobb_douglas_dataset,
    lp_max_on_budget_bruteforce,
    lp_min_bruteforce,
    make_dataset,
    min_path_products_bruteforce,
)
from ppbounds.bounds import BoundKind, BoundMatrix, bound_matrix
from ppbounds.dataset import CountryObservation
from ppbounds.errors import ConfigurationError, ConsistencyError
from ppbounds.gss import (
    gss_full,
    gss_homothetic,
    gss_hub,
    gss_outside,
    gss_with_bounds,
    read_gss_csv,
    write_forecast_csv,
    write_gss_csv,
)
from ppbounds.indices import fisher
from ppbounds.rpgraph import build_graph, check_harp


# ---------------------------------------------------------------------------
# hub values


def test_hub_geometric_mean_known_value():
    ids = ("A", "D")
    bm = BoundMatrix(
        kind=BoundKind.LASPEYRES,
        lower=np.array([[1.0, 0.87], [1 / 2.25, 1.0]]),
        upper=np.array([[1.0, 2.25], [1 / 0.87, 1.0]]),
        classical_lower=np.full((2, 2), 0.1),
        classical_upper=np.full((2, 2), 10.0),
        country_ids=ids,
    )
    hub = gss_hub(bm)
    assert hub.values[0, 1] == pytest.approx(1.399, abs=5e-4)
    assert np.all(np.diag(hub.values) == 1.0)


def test_hub_values_sit_inside_bounds(abc):
    bm = bound_matrix(abc)
    hub = gss_hub(bm)
    assert np.all(hub.values >= bm.lower * (1 - 1e-12))
    assert np.all(hub.values <= bm.upper * (1 + 1e-12))


# ---------------------------------------------------------------------------
# outside extension


def test_outside_extension_worked_example(abc):
    outsider = CountryObservation("D", prices=(10.0, 4.0), quantities=(10.0, 2.0))
    ext = gss_outside(abc, outsider)
    assert ext.status == "ok"
    assert set(ext.vrw_hub) == {"A", "C"}
    assert ext.lower == pytest.approx(94 / 108, rel=1e-9)
    assert ext.upper == pytest.approx(2.25, rel=1e-9)
    assert ext.value == pytest.approx(1.399, abs=5e-4)
    assert ext.forecast == pytest.approx([0.0, 27.0], abs=1e-9)
    # The forecast exhausts the outside country's budget.
    assert float(outsider.prices @ ext.forecast) == pytest.approx(
        outsider.expenditure, rel=1e-9
    )


def test_outside_extension_matches_vertex_oracle(abc):
    outsider = CountryObservation("D", prices=(10.0, 4.0), quantities=(10.0, 2.0))
    ext = gss_outside(abc, outsider)
    prices = abc.price_matrix()
    spend = abc.expenditures()
    keep = [abc.index(c) for c in ext.vrw_hub]
    rows = np.vstack([prices[keep], outsider.prices[None, :]])
    rhs = np.concatenate([spend[keep], [outsider.expenditure]])
    at = abc.observations[0].prices
    assert ext.lower * outsider.expenditure == pytest.approx(
        lp_min_bruteforce(at, rows, rhs), rel=1e-7
    )
    assert ext.upper * outsider.expenditure == pytest.approx(
        lp_max_on_budget_bruteforce(at, rows, rhs, outsider.prices, outsider.expenditure),
        rel=1e-7,
    )


def test_outside_duplicate_of_hub_country(abc):
    # An outsider cloning a hub country inherits that country's anchored
    # constraint set, so the lower bounds coincide exactly; the ceiling
    # relaxes to the budget-slice maximum, which can only sit at or
    # above the observed-bundle ceiling (the clone's own bundle lies on
    # its budget and is feasible).
    clone = CountryObservation("B2", abc.observations[1].prices, abc.observations[1].quantities)
    ext = gss_outside(abc, clone)
    bm = bound_matrix(abc)
    assert ext.status == "ok"
    assert ext.lower == pytest.approx(bm.lower[0, 1], rel=1e-9)
    assert ext.upper >= bm.upper[0, 1] * (1 - 1e-9)
    # The hub value for B against the base stays inside the extension's
    # interval.
    hub_value = np.sqrt(bm.lower[0, 1] * bm.upper[0, 1])
    assert ext.lower * (1 - 1e-9) <= hub_value <= ext.upper * (1 + 1e-9)


def test_outside_with_unreachable_hub():
    # The outsider's budget affords no hub bundle, so only its own
    # budget constrains the programs and the ceiling is the largest
    # price relative.
    hub = make_dataset(["A", "B"], [(1, 1), (1.2, 0.8)], [(3, 3), (3, 3)])
    outsider = CountryObservation("X", prices=(1.0, 1.0), quantities=(0.4, 0.4))
    ext = gss_outside(hub, outsider)
    assert ext.status == "ok"
    assert ext.vrw_empty
    at = hub.observations[0].prices
    expected_upper = float(np.max(at / outsider.prices))
    assert ext.upper == pytest.approx(expected_upper, rel=1e-9)


# ---------------------------------------------------------------------------
# full system


def test_full_system_with_consistent_data_matches_hub(abc):
    result = gss_full(abc)
    assert result.hub == ("A", "B", "C")
    assert result.outside == ()
    bm = bound_matrix(abc)
    hub = gss_hub(bm)
    base = abc.base_index
    for i in range(3):
        assert result.values[i, base] == pytest.approx(hub.values[i, base], rel=1e-12)


def test_full_system_worked_example(abcd):
    result = gss_full(abcd)
    assert result.hub == ("A", "B", "C")
    assert [e.country_id for e in result.outside] == ["D"]
    assert result.value("A", "D") == pytest.approx(1.399, abs=1e-3)
    lo, hi = result.bounds_vs_base["D"]
    assert lo == pytest.approx(1 / 2.25, rel=1e-9)
    assert hi == pytest.approx(108 / 94, rel=1e-9)


def test_full_system_deterministic(abcd):
    first = gss_full(abcd)
    second = gss_full(abcd)
    assert np.array_equal(first.values, second.values)
    assert first.hub == second.hub
    assert all(
        np.array_equal(a.forecast, b.forecast)
        for a, b in zip(first.outside, second.outside)
        if a.forecast is not None
    )


def test_two_identical_outsiders_are_mutually_consistent(abc):
    # Processing the same outside country twice: the second program
    # inherits the first forecast's budget as an extra constraint row
    # and must stay feasible, landing on the same valuation.
    first_obs = CountryObservation("D1", prices=(10.0, 4.0), quantities=(10.0, 2.0))
    second_obs = CountryObservation("D2", prices=(10.0, 4.0), quantities=(10.0, 2.0))
    first = gss_outside(abc, first_obs)
    assert first.status == "ok"
    prior = (first_obs.prices[None, :], np.array([first_obs.expenditure]))
    second = gss_outside(abc, second_obs, prior_rows=prior)
    assert second.status == "ok"
    assert second.value == pytest.approx(first.value, rel=1e-9)
    for ext in (first, second):
        assert float(np.array([10.0, 4.0]) @ ext.forecast) == pytest.approx(108.0, rel=1e-9)


def test_base_outside_reference_set_is_rejected(abcd):
    with pytest.raises(ConfigurationError):
        gss_full(abcd.with_base("D"))


def _no_extension_dataset():
    # O1 and D share prices; O1's bigger budget is processed first and
    # its forecast row (p.q >= 129.6) contradicts D's budget equality
    # (p.q = 108), so D's extension program is infeasible.
    return make_dataset(
        ["A", "B", "C", "O1", "D"],
        [(5, 9), (7, 7), (10, 10), (10, 4), (10, 4)],
        [(8, 6), (7, 10), (1, 9), (12, 2.4), (10, 2)],
        base="A",
    )


def test_no_extension_country_is_reported():
    data = _no_extension_dataset()
    result = gss_full(data)
    assert result.hub == ("A", "B", "C")
    statuses = {e.country_id: e.status for e in result.outside}
    assert statuses == {"O1": "ok", "D": "no_extension"}
    assert result.no_extension == ("D",)
    d = data.country_ids.index("D")
    assert np.isnan(result.values[d, 0])
    # The full bound matrix carries an all-NaN column for the failed
    # extension and finite columns everywhere else.
    _, bm = gss_with_bounds(data)
    assert np.isnan(bm.lower[:, d]).all()
    assert np.isfinite(bm.lower[:, data.country_ids.index("O1")]).all()


def test_gss_with_bounds_matches_componentwise(abcd):
    result, full_bm = gss_with_bounds(abcd)
    hub_bm = bound_matrix(abcd.subset([0, 1, 2]))
    # Hub blocks agree entry by entry.
    for i in range(3):
        for j in range(3):
            assert full_bm.lower[i, j] == pytest.approx(hub_bm.lower[i, j], rel=1e-9)
            assert full_bm.upper[i, j] == pytest.approx(hub_bm.upper[i, j], rel=1e-9)
    # The extension column agrees with the published bounds.
    ext = result.outside[0]
    assert full_bm.lower[0, 3] == pytest.approx(ext.lower, rel=1e-9)
    assert full_bm.upper[0, 3] == pytest.approx(ext.upper, rel=1e-9)
    assert full_bm.base_in_rc.tolist() == [True, True, True, False]
    # Published star values stay inside the anchored bound columns.
    base = abcd.base_index
    for i in range(4):
        assert result.values[i, base] >= full_bm.lower[i, base] * (1 - 1e-9)
        assert result.values[i, base] <= full_bm.upper[i, base] * (1 + 1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_full_system_on_random_data(seed):
    rng = np.random.default_rng(6400 + seed)
    data = cobb_douglas_dataset(rng, 5, 3)
    result = gss_full(data)
    # Shared-utility data always admit the full hub.
    assert result.hub == data.country_ids
    values = result.values
    for i in range(5):
        for j in range(5):
            for k in range(5):
                assert values[i, k] == pytest.approx(values[i, j] * values[j, k], rel=1e-9)


# ---------------------------------------------------------------------------
# homothetic variant


def test_homothetic_two_countries_is_fisher():
    data = make_dataset(["A", "B"], [(5, 9), (7, 7)], [(8, 6), (7, 10)])
    matrix, bm = gss_homothetic(data)
    assert np.allclose(matrix.values, fisher(data).values, rtol=1e-12)
    # With two countries the bounds are the bilateral pair themselves.
    assert bm.upper[0, 1] == pytest.approx(bm.classical_upper[0, 1], rel=1e-12)


def test_homothetic_identical_countries():
    data = make_dataset(["A", "B", "C"], [(2, 3)] * 3, [(4, 1)] * 3)
    matrix, _ = gss_homothetic(data)
    assert np.allclose(matrix.values, 1.0, rtol=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_homothetic_min_paths_match_enumeration(seed):
    rng = np.random.default_rng(7700 + seed)
    data = cobb_douglas_dataset(rng, 4, 3)
    matrix, bm = gss_homothetic(data)
    steps = (data.price_matrix() @ data.quantity_matrix().T) / data.expenditures()[None, :]
    best = min_path_products_bruteforce(steps)
    assert np.allclose(bm.upper, best, rtol=1e-9)
    assert np.allclose(bm.lower, 1.0 / best.T, rtol=1e-9)


def test_homothetic_triangle_inequality_and_transitivity(abc):
    matrix, bm = gss_homothetic(abc)
    logu = np.log(bm.upper)
    n = abc.n
    for i in range(n):
        for j in range(n):
            for k in range(n):
                assert logu[i, k] <= logu[i, j] + logu[j, k] + 1e-12
                assert matrix.values[i, k] == pytest.approx(
                    matrix.values[i, j] * matrix.values[j, k], rel=1e-9
                )
    # Published values respect every pairwise bound.
    assert np.all(matrix.values <= bm.upper * (1 + 1e-12))
    assert np.all(matrix.values >= bm.lower * (1 - 1e-12))


def test_homothetic_refuses_violating_data(three_good_cycle):
    assert not check_harp(build_graph(three_good_cycle)).satisfied
    with pytest.raises(ConsistencyError):
        gss_homothetic(three_good_cycle)


def test_homothetic_on_restricted_hub(abcd):
    matrix, _ = gss_homothetic(abcd, hub=(0, 1, 2))
    assert matrix.country_ids == ("A", "B", "C")


# ---------------------------------------------------------------------------
# serialization


def test_gss_csv_roundtrip(tmp_path, abcd):
    result = gss_full(abcd)
    path = tmp_path / "gss.csv"
    write_gss_csv(result, path)
    rows = read_gss_csv(path)
    table = {r["country"]: r for r in rows}
    assert table["A"]["ppp_vs_base"] == pytest.approx(1.0)
    assert table["D"]["in_hub"] is False
    assert table["D"]["ppp_vs_base"] == pytest.approx(1 / 1.3994, abs=1e-3)
    assert table["B"]["in_hub"] is True


def test_forecast_csv(tmp_path, abcd):
    result = gss_full(abcd)
    path = tmp_path / "forecasts.csv"
    write_forecast_csv(result, path)
    text = path.read_text().strip().splitlines()
    assert text[0] == "country,status,vrw_hub,lower,upper,value,forecast"
    assert text[1].startswith("D,ok,")
