"""Ingestion, conversion, exclusion rules, and the direct CSV format."""

from __future__ import annotations

import numpy as np
import pytest

from oracles import make_dataset
from ppbounds.dataset import (
    CountryObservation,
    PooledDataset,
    convert,
    exclusion_report,
    ingest_icp,
    load_aux,
    load_direct,
    write_direct,
)
from ppbounds.errors import (
    ConfigurationError,
    EmptyDatasetError,
    ParseError,
    StructuralError,
    ValidationError,
)


def _write(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def small_tables(tmp_path):
    ppp = _write(
        tmp_path / "ppp.csv",
        "heading,USA,CAN\nfood,1,1.2\nrent,1,1.5\n",
    )
    exp = _write(
        tmp_path / "exp.csv",
        "heading,USA,CAN\nfood,10,12\nrent,20,30\n",
    )
    return ppp, exp


def test_ingest_direct_echo(small_tables):
    ppp, exp = small_tables
    raw = ingest_icp(ppp, exp, base="USA")
    assert raw.heading_labels == ("food", "rent")
    assert raw.country_labels == ("USA", "CAN")
    assert raw.ppp_matrix.shape == (2, 2)
    assert not raw.ppp_missing.any()
    assert raw.expenditure_matrix[1, 1] == 30


def test_ingest_missing_cell_mask(tmp_path, small_tables):
    _, exp = small_tables
    ppp = _write(tmp_path / "ppp2.csv", "heading,USA,CAN\nfood,1,NA\nrent,1,1.5\n")
    raw = ingest_icp(ppp, exp, base="USA")
    assert raw.ppp_missing.sum() == 1
    assert bool(raw.ppp_missing[0, 1])


def test_ingest_missing_country_column_is_structural(tmp_path):
    ppp = _write(tmp_path / "p.csv", "heading,USA,CAN\nfood,1,1.2\n")
    exp = _write(tmp_path / "e.csv", "heading,USA,CAN,MEX\nfood,10,12,13\n")
    with pytest.raises(StructuralError, match="MEX"):
        ingest_icp(ppp, exp, base="USA")


def test_ingest_malformed_cell_has_coordinates(tmp_path, small_tables):
    _, exp = small_tables
    ppp = _write(tmp_path / "bad.csv", "heading,USA,CAN\nfood,1,oops\n")
    with pytest.raises(ParseError) as err:
        ingest_icp(ppp, exp, base="USA")
    assert err.value.row == 2
    assert err.value.column == 3


def test_ingest_aux(tmp_path, small_tables):
    ppp, exp = small_tables
    aux = _write(tmp_path / "aux.csv", "country,population,market_rate\nUSA,330,1\nCAN,38,1.3\n")
    raw = ingest_icp(ppp, exp, base="USA", aux_file=aux)
    data = convert(raw)
    assert data.observations[1].population == 38
    assert data.observations[1].market_rate == 1.3
    pops, rates = load_aux(aux)
    assert pops["USA"] == 330 and rates["CAN"] == 1.3


def test_convert_unit_parities_echo_expenditures(small_tables):
    ppp, exp = small_tables
    raw = ingest_icp(ppp, exp, base="USA")
    data = convert(raw)
    usa = data.observations[data.index("USA")]
    assert usa.quantities == pytest.approx([10, 20])


def test_convert_single_country_hand_arithmetic(tmp_path):
    ppp = _write(tmp_path / "p.csv", "heading,AAA\nfood,2\nrent,4\n")
    exp = _write(tmp_path / "e.csv", "heading,AAA\nfood,10\nrent,20\n")
    data = convert(ingest_icp(ppp, exp, base="AAA"))
    obs = data.observations[0]
    assert obs.prices == pytest.approx([2, 4])
    assert obs.quantities == pytest.approx([5, 5])  # q = e / parity


def test_convert_drops_negative_expenditure_heading(tmp_path):
    ppp = _write(
        tmp_path / "p.csv",
        "heading,USA,CAN\nfood,1,1.2\nrent,1,1.5\nscrap,1,1\n",
    )
    exp = _write(
        tmp_path / "e.csv",
        "heading,USA,CAN\nfood,10,12\nrent,20,30\nscrap,5,-1\n",
    )
    data = convert(ingest_icp(ppp, exp, base="USA"))
    assert data.k == 2
    assert "scrap" not in data.heading_labels


def test_convert_drops_country_with_missing_price(tmp_path):
    ppp = _write(tmp_path / "p.csv", "heading,USA,CAN\nfood,1,NA\nrent,1,1.5\n")
    exp = _write(tmp_path / "e.csv", "heading,USA,CAN\nfood,10,12\nrent,20,30\n")
    raw = ingest_icp(ppp, exp, base="USA")
    report = exclusion_report(raw)
    assert report.dropped_countries == ("CAN",)
    assert convert(raw).country_ids == ("USA",)


def test_convert_base_excluded_is_configuration_error(tmp_path):
    ppp = _write(tmp_path / "p.csv", "heading,USA,CAN\nfood,NA,1.2\n")
    exp = _write(tmp_path / "e.csv", "heading,USA,CAN\nfood,10,12\n")
    with pytest.raises(ConfigurationError):
        convert(ingest_icp(ppp, exp, base="USA"))


def test_convert_everything_excluded_is_empty(tmp_path):
    ppp = _write(tmp_path / "p.csv", "heading,USA,CAN\nfood,NA,NA\n")
    exp = _write(tmp_path / "e.csv", "heading,USA,CAN\nfood,10,12\n")
    with pytest.raises(EmptyDatasetError):
        convert(ingest_icp(ppp, exp, base="USA"))


def test_roundtrip_preserves_expenditure_totals(tmp_path):
    rng = np.random.default_rng(5)
    k, n = 6, 4
    countries = [f"C{i}" for i in range(n)]
    parities = rng.uniform(0.5, 3.0, size=(k, n))
    spend = rng.uniform(1.0, 10.0, size=(k, n))
    lines_p = ["heading," + ",".join(countries)]
    lines_e = ["heading," + ",".join(countries)]
    for h in range(k):
        lines_p.append(f"h{h}," + ",".join(f"{parities[h, j]:.17g}" for j in range(n)))
        lines_e.append(f"h{h}," + ",".join(f"{spend[h, j]:.17g}" for j in range(n)))
    ppp = _write(tmp_path / "p.csv", "\n".join(lines_p) + "\n")
    exp = _write(tmp_path / "e.csv", "\n".join(lines_e) + "\n")
    data = convert(ingest_icp(ppp, exp, base="C0"))
    for j, obs in enumerate(data.observations):
        total = obs.prices @ obs.quantities
        assert total == pytest.approx(spend[:, j].sum(), rel=1e-12)


def test_exclusion_is_monotone_in_missingness(tmp_path):
    base_p = "heading,USA,CAN,MEX\nfood,1,1.2,{m}\nrent,1,1.5,2\n"
    exp = _write(tmp_path / "e.csv", "heading,USA,CAN,MEX\nfood,10,12,13\nrent,20,30,15\n")
    complete = convert(ingest_icp(_write(tmp_path / "p1.csv", base_p.format(m="2")), exp, base="USA"))
    masked = convert(ingest_icp(_write(tmp_path / "p2.csv", base_p.format(m="NA")), exp, base="USA"))
    assert set(masked.country_ids) <= set(complete.country_ids)
    assert "MEX" not in masked.country_ids


def test_convert_output_is_always_clean(tmp_path):
    rng = np.random.default_rng(17)
    for trial in range(25):
        k, n = rng.integers(2, 5), rng.integers(2, 5)
        countries = [f"C{i}" for i in range(n)]
        parities = rng.uniform(0.2, 4.0, size=(k, n)).astype(object)
        spend = rng.uniform(-1.0, 8.0, size=(k, n)).astype(object)
        # Sprinkle missing cells.
        for _ in range(rng.integers(0, 4)):
            parities[rng.integers(0, k), rng.integers(0, n)] = None
        lines_p = ["heading," + ",".join(countries)]
        lines_e = ["heading," + ",".join(countries)]
        for h in range(k):
            lines_p.append(
                f"h{h}," + ",".join("" if v is None else f"{v:.6g}" for v in parities[h])
            )
            lines_e.append(f"h{h}," + ",".join(f"{v:.6g}" for v in spend[h]))
        ppp = _write(tmp_path / f"p{trial}.csv", "\n".join(lines_p) + "\n")
        exp = _write(tmp_path / f"e{trial}.csv", "\n".join(lines_e) + "\n")
        raw = ingest_icp(ppp, exp, base=countries[0])
        try:
            data = convert(raw)
        except (EmptyDatasetError, ConfigurationError, ValidationError):
            continue
        assert np.all(data.price_matrix() > 0)
        assert np.all(np.isfinite(data.quantity_matrix()))
        assert np.all(data.quantity_matrix() >= 0)


def test_load_direct_worked_examples(tmp_path):
    path = _write(
        tmp_path / "d.csv",
        "country,p_1,p_2,q_1,q_2\nA,5,9,8,6\nB,7,7,7,10\nC,10,10,1,9\n",
    )
    data = load_direct(path)
    assert data.n == 3 and data.k == 2
    assert data.base_country == "A"
    assert data.observations[2].prices == pytest.approx([10, 10])

    path2 = _write(
        tmp_path / "d2.csv",
        "country,p_1,p_2,q_1,q_2\nV1,1,1,1,2\nV2,10,0.1,1,100\nV3,0.1,10,1000,10\n",
    )
    data2 = load_direct(path2, base="V2")
    assert data2.base_country == "V2"
    assert data2.observations[1].quantities == pytest.approx([1, 100])


def test_load_direct_empty_file(tmp_path):
    with pytest.raises(EmptyDatasetError):
        load_direct(_write(tmp_path / "empty.csv", ""))
    with pytest.raises(EmptyDatasetError):
        load_direct(_write(tmp_path / "header_only.csv", "country,p_1,q_1\n"))


def test_load_direct_rejects_nonpositive_price(tmp_path):
    path = _write(tmp_path / "d.csv", "country,p_1,p_2,q_1,q_2\nA,5,0,8,6\n")
    with pytest.raises(ValidationError):
        load_direct(path)


def test_direct_roundtrip_with_metadata(tmp_path):
    data = make_dataset(
        ["X", "Y"],
        [(1.5, 2.25), (3.0, 0.75)],
        [(4.0, 1.0), (2.0, 5.0)],
        populations=[10.0, 20.0],
        rates=[1.0, 6.759],
    )
    path = tmp_path / "round.csv"
    write_direct(data, path)
    loaded = load_direct(path)
    assert loaded.country_ids == data.country_ids
    assert np.allclose(loaded.price_matrix(), data.price_matrix(), rtol=1e-11)
    assert np.allclose(loaded.quantity_matrix(), data.quantity_matrix(), rtol=1e-11)
    assert loaded.observations[1].market_rate == pytest.approx(6.759)
    assert loaded.observations[0].population == pytest.approx(10.0)


def test_observation_invariants():
    with pytest.raises(ValidationError):
        CountryObservation("X", prices=[1.0, -1.0], quantities=[1.0, 1.0])
    with pytest.raises(ValidationError):
        CountryObservation("X", prices=[1.0, 1.0], quantities=[-0.5, 1.0])
    with pytest.raises(ValidationError):
        CountryObservation("X", prices=[1.0, 1.0], quantities=[0.0, 0.0])
    # Zero quantities in some headings are allowed.
    obs = CountryObservation("X", prices=[1.0, 2.0], quantities=[0.0, 3.0])
    assert obs.expenditure == pytest.approx(6.0)


def test_pooled_dataset_invariants(abc):
    with pytest.raises(ValidationError):
        PooledDataset(abc.observations + (abc.observations[0],), "A")
    with pytest.raises(ConfigurationError):
        PooledDataset(abc.observations, "ZZ")
    mixed = (
        abc.observations[0],
        CountryObservation("B", prices=[1.0], quantities=[1.0]),
    )
    with pytest.raises(ValidationError):
        PooledDataset(mixed, "A")


def test_subset_and_base_handling(abc):
    sub = abc.subset([2, 1])
    assert sub.country_ids == ("C", "B")
    assert sub.base_country == "C"  # base A dropped; first retained wins
    again = abc.subset([0, 2])
    assert again.base_country == "A"
    rebased = abc.with_base("B")
    assert rebased.base_country == "B"
    with pytest.raises(ConfigurationError):
        abc.with_base("ZZ")
