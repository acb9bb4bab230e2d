"""Cost-of-living bounds from revealed preference.

For a country pair (i, j), the matrices produced here bound the ratio
"price level of i relative to j" the same way the index matrices are
oriented: entry (i, j) of every index equals the parity of i expressed
in units of j.

Two bound families are computed. The quantity-weighted family
(:data:`BoundKind.LASPEYRES`) fixes the welfare anchor at country j's
observed bundle and sandwiches the ratio between the minimum price
relative and the bilateral Laspeyres index, with the tighter multilateral
pair inside:

    min_k p_i^k/p_j^k  <=  E-(p_i | j)/E-(p_j | j)
                       <=  parity(i, j)
                       <=  E+(p_i | j)/E+(p_j | j)
                       <=  p_i.q_j / p_j.q_j

where E- is the cheapest bundle no worse than every country revealed
worse than j, and E+ the cheapest observed bundle among countries
revealed preferred to j. The price-weighted family
(:data:`BoundKind.PAASCHE`) anchors at country i's own bundle; with the
anchor in the numerator its chain is the elementwise reciprocal of the
quantity-weighted chain with the pair transposed, running from the
bilateral Paasche index up to the maximum price relative.
"""

from __future__ import annotations

import csv
import enum
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import PooledDataset
from .errors import ConsistencyError, DomainError, NumericalError, ValidationError
from .lpcore import LinearProgram, LPResult, SolveStatus, solve
from .rpgraph import RPGraph, ReachabilityRelation, build_graph, check_garp, reachability

__all__ = [
    "BoundKind",
    "ExpenditureBounds",
    "BoundMatrix",
    "ImprovementStats",
    "expenditure_lower_bound",
    "expenditure_upper_bound",
    "expenditure_bounds",
    "bound_matrix",
    "bound_improvement_stats",
    "write_bound_csv",
    "read_bound_csv",
    "write_bound_json",
]


class BoundKind(enum.Enum):
    LASPEYRES = "laspeyres"
    PAASCHE = "paasche"


@dataclass(frozen=True)
class ExpenditureBounds:
    """Expenditure-function bounds for one (anchor, price vector) pair."""

    base: int
    at: int
    lower: float
    upper: float
    argmin_bundle: np.ndarray
    argmin_country: int


@dataclass(frozen=True)
class BoundMatrix:
    """Per-pair bounds; entry (i, j) brackets the parity of i relative to j."""

    kind: BoundKind
    lower: np.ndarray
    upper: np.ndarray
    classical_lower: np.ndarray
    classical_upper: np.ndarray
    country_ids: tuple[str, ...]
    base_in_rc: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        n = len(self.country_ids)
        for name in ("lower", "upper", "classical_lower", "classical_upper"):
            mat = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, mat)
            if mat.shape != (n, n):
                raise ValidationError(f"{name} must be {n}x{n}")
        mask = self.base_in_rc
        mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        object.__setattr__(self, "base_in_rc", mask)

    @property
    def n(self) -> int:
        return len(self.country_ids)

    def base_of_pair(self, i: int, j: int) -> int:
        """Index of the country whose bundle anchors the (i, j) bounds."""
        return j if self.kind is BoundKind.LASPEYRES else i


def _lower_bound_lp(constraints: np.ndarray, rhs: np.ndarray, at: np.ndarray) -> LPResult:
    lp = LinearProgram(objective=at, ge_matrix=constraints, ge_rhs=rhs, sense="min")
    result = solve(lp)
    if result.status is not SolveStatus.OPTIMAL:
        # With positive prices and >= rows the program is always feasible
        # and bounded below by zero, so anything else is an internal fault.
        raise NumericalError(f"expenditure bound solve returned {result.status.value}")
    return result


def expenditure_lower_bound(
    data: PooledDataset,
    rel: ReachabilityRelation,
    base: int,
    at: np.ndarray,
    extra_rows: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[float, np.ndarray]:
    """Cheapest bundle, at the given prices, no worse than the anchor.

    Minimises ``at . q`` subject to ``p_i . q >= p_i . q_i`` for every
    country i revealed worse than ``base`` (the anchor itself included).
    ``extra_rows`` appends additional (matrix, rhs) budget constraints.
    """
    worse = np.flatnonzero(rel.reach[base, :])
    constraints = data.price_matrix()[worse]
    rhs = data.expenditures()[worse]
    if extra_rows is not None:
        constraints = np.vstack([constraints, extra_rows[0]])
        rhs = np.concatenate([rhs, extra_rows[1]])
    result = _lower_bound_lp(constraints, rhs, np.asarray(at, dtype=float))
    return float(result.value), result.x


def expenditure_upper_bound(
    data: PooledDataset, rel: ReachabilityRelation, base: int, at: np.ndarray
) -> tuple[float, int]:
    """Cheapest observed bundle among countries revealed preferred to the
    anchor, valued at the given prices. The anchor itself qualifies, so
    the candidate set is never empty."""
    preferred = np.flatnonzero(rel.reach[:, base])
    values = data.quantity_matrix()[preferred] @ np.asarray(at, dtype=float)
    pos = int(np.argmin(values))
    return float(values[pos]), int(preferred[pos])


def expenditure_bounds(
    data: PooledDataset, rel: ReachabilityRelation, base: int, at: int
) -> ExpenditureBounds:
    """Both expenditure bounds for evaluating country ``at``'s prices
    against the anchor ``base``."""
    prices = data.observations[at].prices
    lower, bundle = expenditure_lower_bound(data, rel, base, prices)
    upper, country = expenditure_upper_bound(data, rel, base, prices)
    if lower > upper * (1 + 1e-9):
        raise NumericalError("expenditure bounds crossed")
    return ExpenditureBounds(
        base=base, at=at, lower=lower, upper=upper, argmin_bundle=bundle, argmin_country=country
    )


def _laspeyres_style(
    data: PooledDataset, rel: ReachabilityRelation, threads: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    prices = data.price_matrix()
    quantities = data.quantity_matrix()
    spend = data.expenditures()
    n = data.n
    cross = prices @ quantities.T

    m_lower = np.empty((n, n))  # [i, j] = E-(p_i | anchor j)
    m_upper = np.empty((n, n))

    def column(j: int) -> tuple[int, np.ndarray, np.ndarray]:
        worse = np.flatnonzero(rel.reach[j, :])
        rows = prices[worse]
        rhs = spend[worse]
        lo = np.empty(n)
        for i in range(n):
            # Constraint set depends only on the anchor; only the
            # objective changes across i.
            lo[i] = _lower_bound_lp(rows, rhs, prices[i]).value
        preferred = np.flatnonzero(rel.reach[:, j])
        up = cross[:, preferred].min(axis=1)
        return j, lo, up

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for j, lo, up in pool.map(column, range(n)):
                m_lower[:, j] = lo
                m_upper[:, j] = up
    else:
        for j in range(n):
            _, lo, up = column(j)
            m_lower[:, j] = lo
            m_upper[:, j] = up

    lower = m_lower / np.diag(m_lower)[None, :]
    upper = m_upper / np.diag(m_upper)[None, :]
    classical_lower = (prices[:, None, :] / prices[None, :, :]).min(axis=2)
    classical_upper = cross / spend[None, :]
    return lower, upper, classical_lower, classical_upper


def bound_matrix(
    data: PooledDataset,
    rel: ReachabilityRelation | None = None,
    kind: BoundKind = BoundKind.LASPEYRES,
    graph: RPGraph | None = None,
    threads: int = 1,
) -> BoundMatrix:
    """Classical and multilateral bounds for every ordered country pair.

    Refuses to run when the dataset fails the cycle-consistency test,
    since the multilateral bounds are only sharp for a consistent set;
    restrict to a consistent subset first (see ``max_reference_set``).
    """
    graph = graph if graph is not None else build_graph(data)
    verdict = check_garp(graph)
    if not verdict.satisfied:
        witness = verdict.witness.format_ids(data.country_ids) if verdict.witness else ""
        raise ConsistencyError(
            "dataset is not cycle-consistent; restrict to a reference set first "
            f"(witness cycle: {witness})"
        )
    rel = rel if rel is not None else reachability(graph)
    lower, upper, cl_lower, cl_upper = _laspeyres_style(data, rel, threads)
    if kind is BoundKind.LASPEYRES:
        return BoundMatrix(
            kind=kind,
            lower=lower,
            upper=upper,
            classical_lower=cl_lower,
            classical_upper=cl_upper,
            country_ids=data.country_ids,
        )
    # Price-weighted family: with the anchor country in the numerator the
    # chain is the reciprocal of the transposed quantity-weighted chain.
    return BoundMatrix(
        kind=kind,
        lower=1.0 / upper.T,
        upper=1.0 / lower.T,
        classical_lower=1.0 / cl_upper.T,
        classical_upper=1.0 / cl_lower.T,
        country_ids=data.country_ids,
    )


@dataclass(frozen=True)
class ImprovementStats:
    """How much the multilateral bounds tighten the classical ones.

    All shares are fractions of the classical pair width; the width
    improvement of a pair splits into a lower-side and an upper-side
    contribution. Pairs with a degenerate (non-positive) classical width
    are skipped and counted.
    """

    pair_width_improvement: np.ndarray
    pair_lower_share: np.ndarray
    pair_upper_share: np.ndarray
    per_country_width: dict[str, float]
    per_country_lower: dict[str, float]
    per_country_upper: dict[str, float]
    mean_width_improvement: float
    mean_lower_share: float
    mean_upper_share: float
    skipped_pairs: int


def bound_improvement_stats(bm: BoundMatrix) -> ImprovementStats:
    classical_width = bm.classical_upper - bm.classical_lower
    width = bm.upper - bm.lower
    with np.errstate(divide="ignore", invalid="ignore"):
        improvement = 1.0 - width / classical_width
        lower_share = (bm.lower - bm.classical_lower) / classical_width
        upper_share = (bm.classical_upper - bm.upper) / classical_width
    usable = classical_width > 0
    skipped = int(bm.n * bm.n - usable.sum())
    for mat in (improvement, lower_share, upper_share):
        mat[~usable] = np.nan

    per_width: dict[str, float] = {}
    per_lower: dict[str, float] = {}
    per_upper: dict[str, float] = {}
    for c, cid in enumerate(bm.country_ids):
        # Average over the pairs anchored at this country.
        sel = (slice(None), c) if bm.kind is BoundKind.LASPEYRES else (c, slice(None))
        per_width[cid] = float(np.nanmean(improvement[sel])) if usable[sel].any() else np.nan
        per_lower[cid] = float(np.nanmean(lower_share[sel])) if usable[sel].any() else np.nan
        per_upper[cid] = float(np.nanmean(upper_share[sel])) if usable[sel].any() else np.nan

    return ImprovementStats(
        pair_width_improvement=improvement,
        pair_lower_share=lower_share,
        pair_upper_share=upper_share,
        per_country_width=per_width,
        per_country_lower=per_lower,
        per_country_upper=per_upper,
        mean_width_improvement=float(np.nanmean(improvement)) if usable.any() else np.nan,
        mean_lower_share=float(np.nanmean(lower_share)) if usable.any() else np.nan,
        mean_upper_share=float(np.nanmean(upper_share)) if usable.any() else np.nan,
        skipped_pairs=skipped,
    )


def write_bound_csv(bm: BoundMatrix, path) -> None:
    """CSV export, one row per ordered pair: the anchor country, the
    country whose prices are being bounded, then the four bounds."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["base", "at", "classical_lower", "lower", "upper", "classical_upper"])
        for i in range(bm.n):
            for j in range(bm.n):
                b = bm.base_of_pair(i, j)
                at = i if bm.kind is BoundKind.LASPEYRES else j
                writer.writerow(
                    [bm.country_ids[b], bm.country_ids[at]]
                    + [
                        f"{mat[i, j]:.12g}"
                        for mat in (bm.classical_lower, bm.lower, bm.upper, bm.classical_upper)
                    ]
                )


def read_bound_csv(path, kind: BoundKind = BoundKind.LASPEYRES) -> BoundMatrix:
    """Round-trip reader for :func:`write_bound_csv`."""
    with open(path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    ids: list[str] = []
    for row in rows:
        for key in ("base", "at"):
            if row[key] not in ids:
                ids.append(row[key])
    index = {c: i for i, c in enumerate(ids)}
    n = len(ids)
    mats = {name: np.full((n, n), np.nan) for name in ("classical_lower", "lower", "upper", "classical_upper")}
    for row in rows:
        b = index[row["base"]]
        at = index[row["at"]]
        i, j = (at, b) if kind is BoundKind.LASPEYRES else (b, at)
        for name, mat in mats.items():
            mat[i, j] = float(row[name])
    if any(np.isnan(mat).any() for mat in mats.values()):
        raise DomainError("bound CSV does not cover every ordered pair")
    return BoundMatrix(kind=kind, country_ids=tuple(ids), **mats)


def write_bound_json(bm: BoundMatrix, path) -> None:
    payload = {
        "kind": bm.kind.value,
        "countries": list(bm.country_ids),
        "classical_lower": bm.classical_lower.tolist(),
        "lower": bm.lower.tolist(),
        "upper": bm.upper.tolist(),
        "classical_upper": bm.classical_upper.tolist(),
    }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
