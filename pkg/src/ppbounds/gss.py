"""Generalised star system: a welfare-consistent multilateral index.

Countries that jointly pass the cycle-consistency test form the star's
hub and are valued at the geometric mean of their multilateral bounds
against the base country. Every remaining country is valued *as if* it
shared the hub's tastes: its own budget pins an indifference level, the
hub's revealed-preference restrictions bound the spending needed to
reach that level at base prices, and the index again takes the bounds'
geometric mean. The upper bound for an outside country comes from a
demand forecast: the dearest bundle on the country's budget that the
hub restrictions allow.

Because each forecast is itself a demand claim, later outside countries
inherit earlier forecasts' budgets as extra constraints, keeping the
sequence of extensions mutually consistent (a deterministic, sequential
stand-in for solving all extensions jointly).

A homothetic variant replaces the per-pair bounds with minimum-path
products of bilateral price indices and anchors a transitive index at
the base country; at two countries it collapses to the Fisher index.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import BoundKind, BoundMatrix, _lower_bound_lp
from .dataset import CountryObservation, PooledDataset
from .errors import ConfigurationError, ConsistencyError, ValidationError
from .indices import IndexMatrix, Method
from .lpcore import LinearProgram, SolveStatus, solve
from .rpgraph import (
    EQ_TOL,
    build_graph,
    check_harp,
    max_reference_set,
    min_path_log,
    reachability,
)

__all__ = [
    "OutsideExtension",
    "GSSResult",
    "gss_hub",
    "gss_outside",
    "gss_full",
    "gss_with_bounds",
    "gss_homothetic",
    "write_gss_csv",
    "read_gss_csv",
    "write_forecast_csv",
]


@dataclass(frozen=True)
class OutsideExtension:
    """Star extension of one country outside the hub.

    ``lower``/``upper``/``value`` express the base country's price level
    relative to the outside country at the outside country's own
    indifference level; ``forecast`` is the demand bundle attaining the
    upper bound and always exhausts the country's budget.
    """

    country_id: str
    status: str  # "ok" or "no_extension"
    vrw_hub: tuple[str, ...]
    lower: float | None = None
    upper: float | None = None
    value: float | None = None
    forecast: np.ndarray | None = None
    vrw_empty: bool = False


@dataclass(frozen=True)
class GSSResult:
    """Full star-system index over hub and extended countries."""

    values: np.ndarray
    country_ids: tuple[str, ...]
    base_country: str
    hub: tuple[str, ...]
    outside: tuple[OutsideExtension, ...]
    bounds_vs_base: dict[str, tuple[float, float]]

    @property
    def no_extension(self) -> tuple[str, ...]:
        return tuple(e.country_id for e in self.outside if e.status != "ok")

    def as_index_matrix(self) -> IndexMatrix:
        return IndexMatrix(Method.GSS, self.values, self.country_ids)

    def value(self, i: str, j: str) -> float:
        a = self.country_ids.index(i)
        b = self.country_ids.index(j)
        return float(self.values[a, b])


def gss_hub(bm: BoundMatrix) -> IndexMatrix:
    """Entrywise geometric mean of a bound matrix."""
    values = np.sqrt(bm.lower * bm.upper)
    return IndexMatrix(Method.GSS, values, bm.country_ids)


class _OutsideProgram:
    """Constraint set for one outside country against the hub.

    Rows are the budgets of hub members the outsider's own budget can
    reach through affordable steps, the outsider's budget itself, and
    any accumulated forecast budgets; the upper-bound program adds the
    outsider's budget as an equality so candidate bundles exhaust it.
    """

    def __init__(
        self,
        hub_data: PooledDataset,
        outsider: CountryObservation,
        prior_rows: tuple[np.ndarray, np.ndarray] | None = None,
    ):
        if outsider.prices.size != hub_data.k:
            raise ValidationError(f"{outsider.country_id}: heading count differs from hub")
        self.outsider = outsider
        self.m_out = outsider.expenditure
        prices = hub_data.price_matrix()
        spend = hub_data.expenditures()
        hub_rel = reachability(build_graph(hub_data))
        # Direct affordable step outsider -> hub member i costs p_out.q_i.
        direct = (hub_data.quantity_matrix() @ outsider.prices) / self.m_out <= 1.0 + EQ_TOL
        worse = (
            hub_rel.reach[direct, :].any(axis=0) if direct.any() else np.zeros(hub_data.n, bool)
        )
        self.vrw_local = tuple(int(i) for i in np.flatnonzero(worse))
        self.vrw_ids = tuple(hub_data.country_ids[i] for i in self.vrw_local)
        rows = [prices[list(self.vrw_local)], outsider.prices[None, :]]
        rhs = [spend[list(self.vrw_local)], np.array([self.m_out])]
        if prior_rows is not None and prior_rows[0].size:
            rows.append(prior_rows[0])
            rhs.append(prior_rows[1])
        self.ge_matrix = np.vstack(rows)
        self.ge_rhs = np.concatenate(rhs)

    def lower(self, at: np.ndarray) -> float:
        return float(_lower_bound_lp(self.ge_matrix, self.ge_rhs, at).value)

    def upper(self, at: np.ndarray) -> tuple[float, np.ndarray] | None:
        lp = LinearProgram(
            objective=at,
            ge_matrix=self.ge_matrix,
            ge_rhs=self.ge_rhs,
            eq_matrix=self.outsider.prices[None, :],
            eq_rhs=np.array([self.m_out]),
            sense="max",
        )
        result = solve(lp)
        if result.status is not SolveStatus.OPTIMAL:
            return None
        return float(result.value), result.x


def gss_outside(
    hub_data: PooledDataset,
    outsider: CountryObservation,
    at: np.ndarray | None = None,
    prior_rows: tuple[np.ndarray, np.ndarray] | None = None,
) -> OutsideExtension:
    """Bound and value one outside country under the hub's tastes.

    ``at`` defaults to the base country's prices, so the returned ratios
    read "base relative to outsider" at the outsider's indifference
    level. An infeasible upper-bound program (the accumulated
    constraints contradict the budget equality) yields ``no_extension``.
    """
    at = hub_data.observations[hub_data.base_index].prices if at is None else np.asarray(at, float)
    program = _OutsideProgram(hub_data, outsider, prior_rows)
    upper_solution = program.upper(at)
    if upper_solution is None:
        return OutsideExtension(
            country_id=outsider.country_id, status="no_extension", vrw_hub=program.vrw_ids
        )
    upper_value, forecast = upper_solution
    lower = program.lower(at) / program.m_out
    upper = upper_value / program.m_out
    return OutsideExtension(
        country_id=outsider.country_id,
        status="ok",
        vrw_hub=program.vrw_ids,
        lower=lower,
        upper=upper,
        value=float(np.sqrt(lower * upper)),
        forecast=forecast,
        vrw_empty=not program.vrw_ids,
    )


def _hub_anchored_columns(
    hub_data: PooledDataset,
    objective_prices: np.ndarray,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Expenditure bounds for every objective price vector against every
    hub anchor; returns (lower, upper) of shape (n_obj, n_hub)."""
    rel = reachability(build_graph(hub_data))
    prices = hub_data.price_matrix()
    spend = hub_data.expenditures()
    cross_obj = objective_prices @ hub_data.quantity_matrix().T
    n_obj = objective_prices.shape[0]
    n_hub = hub_data.n
    lower = np.empty((n_obj, n_hub))
    upper = np.empty((n_obj, n_hub))

    def column(j: int) -> tuple[int, np.ndarray, np.ndarray]:
        worse = np.flatnonzero(rel.reach[j, :])
        rows, rhs = prices[worse], spend[worse]
        lo = np.array(
            [_lower_bound_lp(rows, rhs, objective_prices[i]).value for i in range(n_obj)]
        )
        preferred = np.flatnonzero(rel.reach[:, j])
        up = cross_obj[:, preferred].min(axis=1)
        return j, lo, up

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for j, lo, up in pool.map(column, range(n_hub)):
                lower[:, j] = lo
                upper[:, j] = up
    else:
        for j in range(n_hub):
            _, lo, up = column(j)
            lower[:, j] = lo
            upper[:, j] = up
    return lower, upper


def _gss_core(
    data: PooledDataset, exact_subset: bool, threads: int, full_matrix: bool
) -> tuple[GSSResult, BoundMatrix | None]:
    graph = build_graph(data)
    hub_idx = max_reference_set(graph, exact=exact_subset)
    base_idx = data.base_index
    if base_idx not in hub_idx:
        raise ConfigurationError(
            f"base country {data.base_country!r} is outside the reference set; "
            "pick a base inside it"
        )
    hub_data = data.subset(hub_idx)
    hub_pos = {g: h for h, g in enumerate(hub_idx)}
    base_prices = data.observations[base_idx].prices
    all_prices = data.price_matrix()
    spend = data.expenditures()
    n = data.n

    # Columns anchored at hub countries, objectives over every country.
    objective_prices = all_prices if full_matrix else all_prices[list(hub_idx)]
    hub_lower, hub_upper = _hub_anchored_columns(hub_data, objective_prices, threads)

    lower = np.full((n, n), np.nan)
    upper = np.full((n, n), np.nan)
    obj_rows = range(n) if full_matrix else list(hub_idx)
    for local_j, global_j in enumerate(hub_idx):
        denom_lo = hub_lower[list(obj_rows).index(global_j), local_j]
        denom_up = hub_upper[list(obj_rows).index(global_j), local_j]
        for row_pos, global_i in enumerate(obj_rows):
            lower[global_i, global_j] = hub_lower[row_pos, local_j] / denom_lo
            upper[global_i, global_j] = hub_upper[row_pos, local_j] / denom_up

    parity = np.full(n, np.nan)
    bounds: dict[str, tuple[float, float]] = {}
    for global_i in hub_idx:
        lo = float(lower[global_i, base_idx])
        hi = float(upper[global_i, base_idx])
        bounds[data.country_ids[global_i]] = (lo, hi)
        parity[global_i] = np.sqrt(lo * hi)

    # Outside countries: descending expenditure, ties by id; successful
    # forecasts add their budgets to the later programs.
    outside_idx = [i for i in range(n) if i not in hub_pos]
    outside_idx.sort(key=lambda i: (-spend[i], data.country_ids[i]))
    extensions: list[OutsideExtension] = []
    extra_rows: list[np.ndarray] = []
    extra_rhs: list[float] = []
    base_in_rc = np.zeros(n, dtype=bool)
    base_in_rc[list(hub_idx)] = True

    for k in outside_idx:
        obs = data.observations[k]
        prior = (np.array(extra_rows), np.array(extra_rhs)) if extra_rows else None
        program = _OutsideProgram(hub_data, obs, prior)
        base_solution = program.upper(base_prices)
        if base_solution is None:
            extensions.append(
                OutsideExtension(country_id=obs.country_id, status="no_extension", vrw_hub=program.vrw_ids)
            )
            continue
        up_base, forecast = base_solution
        lo_base = program.lower(base_prices)
        m_k = program.m_out
        ext = OutsideExtension(
            country_id=obs.country_id,
            status="ok",
            vrw_hub=program.vrw_ids,
            lower=lo_base / m_k,
            upper=up_base / m_k,
            value=float(np.sqrt(lo_base * up_base) / m_k),
            forecast=forecast,
            vrw_empty=not program.vrw_ids,
        )
        extensions.append(ext)
        parity[k] = 1.0 / ext.value
        bounds[obs.country_id] = (1.0 / ext.upper, 1.0 / ext.lower)
        extra_rows.append(obs.prices)
        extra_rhs.append(m_k)
        if full_matrix:
            for i in range(n):
                if i == k:
                    lower[i, k] = upper[i, k] = 1.0
                    continue
                sol = program.upper(all_prices[i])
                if sol is None:  # pragma: no cover - feasible once base is
                    continue
                lower[i, k] = program.lower(all_prices[i]) / m_k
                upper[i, k] = sol[0] / m_k

    values = parity[:, None] / parity[None, :]
    result = GSSResult(
        values=values,
        country_ids=data.country_ids,
        base_country=data.base_country,
        hub=hub_data.country_ids,
        outside=tuple(extensions),
        bounds_vs_base=bounds,
    )
    if not full_matrix:
        return result, None

    cross = all_prices @ data.quantity_matrix().T
    classical_lower = (all_prices[:, None, :] / all_prices[None, :, :]).min(axis=2)
    classical_upper = cross / spend[None, :]
    matrix = BoundMatrix(
        kind=BoundKind.LASPEYRES,
        lower=lower,
        upper=upper,
        classical_lower=classical_lower,
        classical_upper=classical_upper,
        country_ids=data.country_ids,
        base_in_rc=base_in_rc,
    )
    return result, matrix


def gss_full(data: PooledDataset, exact_subset: bool = False, threads: int = 1) -> GSSResult:
    """Hub selection, hub valuation, and sequential outside extensions.

    The published matrix is anchored at the base country's indifference
    level: entry (i, j) is the ratio of the two countries' parities
    against the base. Countries whose extension program is infeasible
    are listed and carry NaN parities.
    """
    result, _ = _gss_core(data, exact_subset, threads, full_matrix=False)
    return result


def gss_with_bounds(
    data: PooledDataset, exact_subset: bool = False, threads: int = 1
) -> tuple[GSSResult, BoundMatrix]:
    """Star system plus a full-sample bound matrix for appraisal.

    Columns anchored at hub countries carry the multilateral bounds
    under hub tastes; columns anchored at outside countries carry the
    star-extension bounds. The matrix records which anchors belong to
    the reference set so appraisal can segment on it.
    """
    result, matrix = _gss_core(data, exact_subset, threads, full_matrix=True)
    assert matrix is not None
    return result, matrix


def gss_homothetic(
    data: PooledDataset, hub: tuple[int, ...] | None = None
) -> tuple[IndexMatrix, BoundMatrix]:
    """Star-system index under homothetic tastes on a consistent hub.

    The tightest homothetic upper bound on the parity of i against j is
    the cheapest chain of bilateral price-index steps from i to j; the
    lower bound is the reciprocal chain. Per-country levels against the
    base take the geometric mean of their own bounds, and the published
    matrix is built from those levels, which keeps it transitive and
    inside every pairwise bound. At two countries this is the Fisher
    index.
    """
    hub_data = data if hub is None else data.subset(hub)
    verdict = check_harp(build_graph(hub_data))
    if not verdict.satisfied:
        raise ConsistencyError(
            "dataset is not homothetically consistent; build a reference set "
            "with greedy_homothetic_reference_set first"
        )
    prices = hub_data.price_matrix()
    quantities = hub_data.quantity_matrix()
    spend = hub_data.expenditures()
    # Bilateral price-index step i -> j: value of j's bundle at i's
    # prices over j's own spending.
    steps = (prices @ quantities.T) / spend[None, :]
    dist = min_path_log(np.log(steps))
    np.fill_diagonal(dist, 0.0)
    upper = np.exp(dist)
    lower = 1.0 / upper.T
    bm = BoundMatrix(
        kind=BoundKind.LASPEYRES,
        lower=lower,
        upper=upper,
        classical_lower=1.0 / steps.T,
        classical_upper=steps,
        country_ids=hub_data.country_ids,
    )
    b = hub_data.base_index
    levels = np.sqrt(upper[:, b] / upper[b, :])
    values = levels[:, None] / levels[None, :]
    return IndexMatrix(Method.GSS_HOMOTHETIC, values, hub_data.country_ids), bm


def write_gss_csv(result: GSSResult, path) -> None:
    """Publication table ``country,ppp_vs_base,lower,upper,in_hub``."""
    base = result.country_ids.index(result.base_country)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["country", "ppp_vs_base", "lower", "upper", "in_hub"])
        for i, cid in enumerate(result.country_ids):
            value = result.values[i, base]
            lo, hi = result.bounds_vs_base.get(cid, (np.nan, np.nan))
            writer.writerow(
                [
                    cid,
                    f"{value:.12g}",
                    f"{lo:.12g}",
                    f"{hi:.12g}",
                    str(cid in result.hub).lower(),
                ]
            )


def read_gss_csv(path) -> list[dict[str, object]]:
    with open(path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    return [
        {
            "country": row["country"],
            "ppp_vs_base": float(row["ppp_vs_base"]),
            "lower": float(row["lower"]),
            "upper": float(row["upper"]),
            "in_hub": row["in_hub"] == "true",
        }
        for row in rows
    ]


def write_forecast_csv(result: GSSResult, path) -> None:
    """Audit trail of the outside-country demand forecasts."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["country", "status", "vrw_hub", "lower", "upper", "value", "forecast"])
        for ext in result.outside:
            forecast = (
                " ".join(f"{q:.12g}" for q in ext.forecast) if ext.forecast is not None else ""
            )
            writer.writerow(
                [
                    ext.country_id,
                    ext.status,
                    " ".join(ext.vrw_hub),
                    "" if ext.lower is None else f"{ext.lower:.12g}",
                    "" if ext.upper is None else f"{ext.upper:.12g}",
                    "" if ext.value is None else f"{ext.value:.12g}",
                    forecast,
                ]
            )
