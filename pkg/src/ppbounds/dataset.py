"""Country price/quantity data: ingestion, conversion, and validation.

Two entry paths produce the same validated :class:`PooledDataset`:

* ``ingest_icp`` + ``convert`` start from statistical-agency style tables
  (per-heading price parities in local currency per base-currency unit,
  and nominal per-capita expenditures in local currency) and derive
  implicit volumes ``q = e / parity`` in base-currency units.
* ``load_direct`` reads explicit price and quantity vectors, which is the
  convenient route for small worked examples and fixtures.

Exclusion rules in ``convert`` follow standard practice for
revealed-preference work on comparison-program extracts: countries with
missing cells are dropped, and headings with a negative expenditure in
any kept country are dropped globally.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    EmptyDatasetError,
    ParseError,
    StructuralError,
    ValidationError,
)

__all__ = [
    "CountryObservation",
    "PooledDataset",
    "RawICPTable",
    "ExclusionReport",
    "ingest_icp",
    "convert",
    "exclusion_report",
    "load_direct",
    "load_aux",
    "write_direct",
]

MISSING_TOKENS = {"", "NA", "na", "NaN", "nan"}


@dataclass(frozen=True)
class CountryObservation:
    """One country's prices, per-capita quantities, and metadata.

    Prices must be strictly positive; quantities non-negative with a
    strictly positive total expenditure. Population and market exchange
    rate (local currency per base-currency unit) are optional and only
    required by the aggregate and market-rate operations.
    """

    country_id: str
    prices: np.ndarray
    quantities: np.ndarray
    population: float | None = None
    market_rate: float | None = None

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float)
        q = np.asarray(self.quantities, dtype=float)
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "quantities", q)
        if p.ndim != 1 or q.ndim != 1:
            raise ValidationError(f"{self.country_id}: prices and quantities must be 1-d vectors")
        if p.shape != q.shape:
            raise ValidationError(
                f"{self.country_id}: price vector has length {p.size}, quantities {q.size}"
            )
        if p.size == 0:
            raise ValidationError(f"{self.country_id}: empty price vector")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ValidationError(f"{self.country_id}: prices must be finite and strictly positive")
        if not np.all(np.isfinite(q)) or np.any(q < 0):
            raise ValidationError(f"{self.country_id}: quantities must be finite and non-negative")
        if float(p @ q) <= 0:
            raise ValidationError(f"{self.country_id}: total expenditure must be strictly positive")
        if self.population is not None and not (np.isfinite(self.population) and self.population > 0):
            raise ValidationError(f"{self.country_id}: population must be positive")
        if self.market_rate is not None and not (np.isfinite(self.market_rate) and self.market_rate > 0):
            raise ValidationError(f"{self.country_id}: market rate must be positive")

    @property
    def expenditure(self) -> float:
        return float(self.prices @ self.quantities)


@dataclass(frozen=True)
class PooledDataset:
    """Validated collection of country observations with a base country."""

    observations: tuple[CountryObservation, ...]
    base_country: str
    heading_labels: tuple[str, ...] = ()

    def __post_init__(self):
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        if not obs:
            raise EmptyDatasetError("dataset holds no observations")
        ids = [o.country_id for o in obs]
        if len(set(ids)) != len(ids):
            dupes = sorted({c for c in ids if ids.count(c) > 1})
            raise ValidationError(f"duplicate country ids: {', '.join(dupes)}")
        k = obs[0].prices.size
        for o in obs:
            if o.prices.size != k:
                raise ValidationError(
                    f"{o.country_id}: has {o.prices.size} headings, expected {k}"
                )
        if self.base_country not in ids:
            raise ConfigurationError(f"base country {self.base_country!r} not in dataset")
        labels = tuple(self.heading_labels) or tuple(f"h{i + 1}" for i in range(k))
        if len(labels) != k:
            raise ValidationError(f"{len(labels)} heading labels for {k} headings")
        object.__setattr__(self, "heading_labels", labels)

    @property
    def n(self) -> int:
        return len(self.observations)

    @property
    def k(self) -> int:
        return self.observations[0].prices.size

    @property
    def country_ids(self) -> tuple[str, ...]:
        return tuple(o.country_id for o in self.observations)

    def index(self, country_id: str) -> int:
        try:
            return self.country_ids.index(country_id)
        except ValueError:
            raise ConfigurationError(f"unknown country {country_id!r}") from None

    @property
    def base_index(self) -> int:
        return self.index(self.base_country)

    def price_matrix(self) -> np.ndarray:
        """(n, k) array with one price vector per row."""
        return np.array([o.prices for o in self.observations])

    def quantity_matrix(self) -> np.ndarray:
        return np.array([o.quantities for o in self.observations])

    def expenditures(self) -> np.ndarray:
        return np.array([o.expenditure for o in self.observations])

    def populations(self) -> np.ndarray:
        """(n,) array of populations, NaN where unknown."""
        return np.array(
            [o.population if o.population is not None else np.nan for o in self.observations]
        )

    def market_rates(self) -> np.ndarray:
        return np.array(
            [o.market_rate if o.market_rate is not None else np.nan for o in self.observations]
        )

    def subset(self, indices: Sequence[int], base: str | None = None) -> "PooledDataset":
        """Restrict to the given observation indices, keeping their order.

        The base country carries over when it survives the restriction;
        otherwise the first retained country becomes the base unless an
        explicit ``base`` is given.
        """
        obs = tuple(self.observations[i] for i in indices)
        if not obs:
            raise EmptyDatasetError("subset selects no observations")
        ids = [o.country_id for o in obs]
        if base is None:
            base = self.base_country if self.base_country in ids else ids[0]
        return PooledDataset(obs, base, self.heading_labels)

    def with_base(self, base: str) -> "PooledDataset":
        return replace(self, base_country=base)


@dataclass(frozen=True)
class RawICPTable:
    """Aligned per-heading parity and nominal-expenditure tables.

    Both matrices are (k, n) with NaN marking missing cells; nothing is
    imputed at this stage. ``ppp_matrix`` holds local currency per
    base-currency unit for each heading, ``expenditure_matrix`` nominal
    per-capita spending in local currency.
    """

    ppp_matrix: np.ndarray
    expenditure_matrix: np.ndarray
    heading_labels: tuple[str, ...]
    country_labels: tuple[str, ...]
    base_country: str
    populations: Mapping[str, float] = field(default_factory=dict)
    market_rates: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        ppp = np.asarray(self.ppp_matrix, dtype=float)
        exp = np.asarray(self.expenditure_matrix, dtype=float)
        object.__setattr__(self, "ppp_matrix", ppp)
        object.__setattr__(self, "expenditure_matrix", exp)
        shape = (len(self.heading_labels), len(self.country_labels))
        if ppp.shape != shape or exp.shape != shape:
            raise StructuralError(
                f"table shapes {ppp.shape} / {exp.shape} do not match labels {shape}"
            )
        if self.base_country not in self.country_labels:
            raise ConfigurationError(f"base country {self.base_country!r} not in table")

    @property
    def ppp_missing(self) -> np.ndarray:
        return np.isnan(self.ppp_matrix)

    @property
    def expenditure_missing(self) -> np.ndarray:
        return np.isnan(self.expenditure_matrix)


@dataclass(frozen=True)
class ExclusionReport:
    """Which countries and headings survive the conversion rules."""

    kept_countries: tuple[str, ...]
    dropped_countries: tuple[str, ...]
    kept_headings: tuple[str, ...]
    dropped_headings: tuple[str, ...]


def _parse_cell(text: str, *, row: int, column: int) -> float | None:
    value = text.strip()
    if value in MISSING_TOKENS:
        return None
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a number", row=row, column=column) from None


def _read_table_csv(path: Path) -> tuple[list[str], list[str], list[list[float | None]]]:
    """Read a heading-by-country CSV: header row of country codes, first
    column heading labels, cells numeric or missing."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise ParseError(f"{path}: table needs a header row and at least one heading row")
    header = [c.strip() for c in rows[0]]
    countries = header[1:]
    if not countries or any(not c for c in countries):
        raise ParseError(f"{path}: header row must list country codes", row=1)
    headings: list[str] = []
    cells: list[list[float | None]] = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(countries) + 1:
            raise ParseError(
                f"{path}: expected {len(countries) + 1} columns, found {len(row)}", row=r
            )
        headings.append(row[0].strip())
        cells.append([_parse_cell(cell, row=r, column=c + 2) for c, cell in enumerate(row[1:])])
    return headings, countries, cells


def load_aux(path: Path | str) -> tuple[dict[str, float], dict[str, float]]:
    """Read the auxiliary ``country,population,market_rate`` CSV."""
    populations: dict[str, float] = {}
    rates: dict[str, float] = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        required = {"country", "population", "market_rate"}
        if reader.fieldnames is None or not required.issubset(set(reader.fieldnames)):
            raise ParseError(f"{path}: expected columns country,population,market_rate", row=1)
        for r, row in enumerate(reader, start=2):
            country = row["country"].strip()
            pop = _parse_cell(row["population"] or "", row=r, column=2)
            rate = _parse_cell(row["market_rate"] or "", row=r, column=3)
            if pop is not None:
                populations[country] = pop
            if rate is not None:
                rates[country] = rate
    return populations, rates


def ingest_icp(
    ppp_file: Path | str,
    expenditure_file: Path | str,
    base: str,
    aux_file: Path | str | None = None,
) -> RawICPTable:
    """Read and align the parity and expenditure CSVs into one table.

    Missing cells are flagged (NaN) rather than zeroed. The two files
    must describe the same countries and headings; a country or heading
    present in one file but not the other is a structural error.
    """
    ppp_headings, ppp_countries, ppp_cells = _read_table_csv(Path(ppp_file))
    exp_headings, exp_countries, exp_cells = _read_table_csv(Path(expenditure_file))

    missing_countries = sorted(set(exp_countries) - set(ppp_countries))
    extra_countries = sorted(set(ppp_countries) - set(exp_countries))
    if missing_countries or extra_countries:
        parts = []
        if missing_countries:
            parts.append(f"missing from parity file: {', '.join(missing_countries)}")
        if extra_countries:
            parts.append(f"missing from expenditure file: {', '.join(extra_countries)}")
        raise StructuralError("country columns do not align; " + "; ".join(parts))
    if set(ppp_headings) != set(exp_headings):
        diff = sorted(set(ppp_headings) ^ set(exp_headings))
        raise StructuralError(f"heading rows do not align: {', '.join(diff)}")
    if len(set(ppp_countries)) != len(ppp_countries):
        raise StructuralError("duplicate country columns in parity file")
    if len(set(ppp_headings)) != len(ppp_headings):
        raise StructuralError("duplicate heading rows in parity file")

    # Re-order the expenditure table to the parity file's layout.
    col_of = {c: j for j, c in enumerate(exp_countries)}
    row_of = {h: i for i, h in enumerate(exp_headings)}
    k, n = len(ppp_headings), len(ppp_countries)
    ppp = np.full((k, n), np.nan)
    exp = np.full((k, n), np.nan)
    for i, h in enumerate(ppp_headings):
        for j, c in enumerate(ppp_countries):
            v = ppp_cells[i][j]
            ppp[i, j] = np.nan if v is None else v
            w = exp_cells[row_of[h]][col_of[c]]
            exp[i, j] = np.nan if w is None else w

    populations: dict[str, float] = {}
    rates: dict[str, float] = {}
    if aux_file is not None:
        populations, rates = load_aux(aux_file)

    return RawICPTable(
        ppp_matrix=ppp,
        expenditure_matrix=exp,
        heading_labels=tuple(ppp_headings),
        country_labels=tuple(ppp_countries),
        base_country=base,
        populations=populations,
        market_rates=rates,
    )


def exclusion_report(raw: RawICPTable) -> ExclusionReport:
    """Apply the exclusion rules without building the dataset.

    Countries with any missing parity or expenditure cell are dropped
    first; headings with a negative expenditure in any kept country are
    then dropped globally.
    """
    incomplete = raw.ppp_missing | raw.expenditure_missing
    keep_country = ~incomplete.any(axis=0)
    kept_idx = np.flatnonzero(keep_country)
    if kept_idx.size:
        negative = raw.expenditure_matrix[:, kept_idx] < 0
        keep_heading = ~negative.any(axis=1)
    else:
        keep_heading = np.zeros(len(raw.heading_labels), dtype=bool)
    labels = np.array(raw.country_labels)
    headings = np.array(raw.heading_labels)
    return ExclusionReport(
        kept_countries=tuple(labels[keep_country]),
        dropped_countries=tuple(labels[~keep_country]),
        kept_headings=tuple(headings[keep_heading]),
        dropped_headings=tuple(headings[~keep_heading]),
    )


def convert(raw: RawICPTable) -> PooledDataset:
    """Turn the raw table into price/quantity vectors in base-currency units.

    For each kept country and heading, the price is the parity itself
    and the quantity is nominal expenditure deflated by the parity.
    """
    report = exclusion_report(raw)
    if not report.kept_countries:
        raise EmptyDatasetError("all countries excluded (missing cells in every column)")
    if raw.base_country not in report.kept_countries:
        raise ConfigurationError(
            f"base country {raw.base_country!r} was excluded by the missing-data rules"
        )
    if not report.kept_headings:
        raise EmptyDatasetError("all headings excluded (negative expenditures everywhere)")

    col = {c: j for j, c in enumerate(raw.country_labels)}
    row = {h: i for i, h in enumerate(raw.heading_labels)}
    h_idx = [row[h] for h in report.kept_headings]
    observations = []
    for country in report.kept_countries:
        j = col[country]
        prices = raw.ppp_matrix[h_idx, j]
        spend = raw.expenditure_matrix[h_idx, j]
        if np.any(prices <= 0):
            raise ValidationError(f"{country}: non-positive parity cell")
        quantities = spend / prices
        observations.append(
            CountryObservation(
                country_id=country,
                prices=prices,
                quantities=quantities,
                population=raw.populations.get(country),
                market_rate=raw.market_rates.get(country),
            )
        )
    return PooledDataset(tuple(observations), raw.base_country, tuple(report.kept_headings))


def load_direct(
    path: Path | str,
    base: str | None = None,
    aux_file: Path | str | None = None,
) -> PooledDataset:
    """Read explicit vectors from a ``country,p_1..p_K,q_1..q_K`` CSV.

    Optional trailing ``population`` and ``market_rate`` columns are
    picked up when present; an auxiliary CSV can supply them as well.
    """
    with open(path, newline="") as handle:
        rows = [r for r in csv.reader(handle) if any(c.strip() for c in r)]
    if not rows:
        raise EmptyDatasetError(f"{path}: file holds no observations")
    header = [c.strip() for c in rows[0]]
    if not header or header[0] != "country":
        raise ParseError(f"{path}: first column must be 'country'", row=1, column=1)
    extras = [c for c in header[1:] if c in ("population", "market_rate")]
    vector_cols = header[1 : len(header) - len(extras)]
    k2 = len(vector_cols)
    if k2 == 0 or k2 % 2 != 0:
        raise ParseError(f"{path}: expected matching p_1..p_K and q_1..q_K columns", row=1)
    k = k2 // 2
    expected = [f"p_{i + 1}" for i in range(k)] + [f"q_{i + 1}" for i in range(k)]
    if vector_cols != expected:
        raise ParseError(f"{path}: expected columns {','.join(expected)}", row=1)

    populations: dict[str, float] = {}
    rates: dict[str, float] = {}
    if aux_file is not None:
        populations, rates = load_aux(aux_file)

    observations = []
    for r, rowvals in enumerate(rows[1:], start=2):
        if len(rowvals) != len(header):
            raise ParseError(f"{path}: expected {len(header)} columns, found {len(rowvals)}", row=r)
        country = rowvals[0].strip()
        values = [_parse_cell(cell, row=r, column=c + 2) for c, cell in enumerate(rowvals[1:])]
        vec = values[:k2]
        if any(v is None for v in vec):
            missing = vec.index(None)
            raise ParseError(f"{path}: missing value for {country}", row=r, column=missing + 2)
        record = dict(zip(header[1:], values))
        population = record.get("population", populations.get(country))
        market_rate = record.get("market_rate", rates.get(country))
        try:
            observations.append(
                CountryObservation(
                    country_id=country,
                    prices=np.array(vec[:k], dtype=float),
                    quantities=np.array(vec[k:], dtype=float),
                    population=population,
                    market_rate=market_rate,
                )
            )
        except ValidationError as err:
            raise ValidationError(f"{path}: {err}") from None
    if not observations:
        raise EmptyDatasetError(f"{path}: file holds no observations")
    return PooledDataset(tuple(observations), base or observations[0].country_id)


def write_direct(data: PooledDataset, path: Path | str) -> None:
    """Write the dataset in the direct CSV format (round-trips with
    ``load_direct``)."""
    k = data.k
    header = ["country"] + [f"p_{i + 1}" for i in range(k)] + [f"q_{i + 1}" for i in range(k)]
    has_pop = any(o.population is not None for o in data.observations)
    has_rate = any(o.market_rate is not None for o in data.observations)
    if has_pop:
        header.append("population")
    if has_rate:
        header.append("market_rate")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for o in data.observations:
            rowvals = [o.country_id]
            rowvals += [f"{v:.12g}" for v in o.prices]
            rowvals += [f"{v:.12g}" for v in o.quantities]
            if has_pop:
                rowvals.append("" if o.population is None else f"{o.population:.12g}")
            if has_rate:
                rowvals.append("" if o.market_rate is None else f"{o.market_rate:.12g}")
            writer.writerow(rowvals)
