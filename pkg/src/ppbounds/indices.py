"""Bilateral and multilateral price-index matrices.

Every method fills an n-by-n matrix whose (i, j) entry is the price
level of country i relative to country j, so a value above one means i
is the more expensive place at equal utility. The bilateral Fisher and
Tornqvist matrices reverse exactly (value(i,j) * value(j,i) = 1); their
multilateralised forms (GEKS, CCD) and the additive Geary-Khamis system
are transitive by construction, as are market exchange rates.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dataset import PooledDataset
from .errors import ConfigurationError, DomainError, NumericalError, ValidationError

__all__ = [
    "Method",
    "IndexMatrix",
    "fisher",
    "geks",
    "tornqvist",
    "ccd",
    "geary_khamis",
    "market_rates",
    "all_indices",
    "write_index_csv",
    "read_index_csv",
    "write_index_json",
    "write_base_table",
]


class Method:
    FISHER = "fisher"
    GEKS = "geks"
    TORNQVIST = "tornqvist"
    CCD = "ccd"
    GEARY_KHAMIS = "geary_khamis"
    MARKET_RATE = "market_rate"
    GSS = "gss"
    GSS_HOMOTHETIC = "gss_homothetic"


@dataclass(frozen=True)
class IndexMatrix:
    """Pairwise parities for one method; (i, j) = price of i in units of j."""

    method: str
    values: np.ndarray
    country_ids: tuple[str, ...]
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        n = len(self.country_ids)
        if vals.shape != (n, n):
            raise ValidationError(f"index matrix must be {n}x{n}")

    @property
    def n(self) -> int:
        return len(self.country_ids)

    def value(self, i: str, j: str) -> float:
        a = self.country_ids.index(i)
        b = self.country_ids.index(j)
        return float(self.values[a, b])

    def vs_base(self, base: str) -> dict[str, float]:
        b = self.country_ids.index(base)
        return {c: float(self.values[i, b]) for i, c in enumerate(self.country_ids)}


def _cross_products(data: PooledDataset) -> tuple[np.ndarray, np.ndarray]:
    cross = data.price_matrix() @ data.quantity_matrix().T
    if np.any(cross <= 0):
        raise DomainError("a cross-valuation p_i.q_j is not strictly positive")
    return cross, np.diag(cross).copy()


def _log_fisher(data: PooledDataset) -> np.ndarray:
    """Exactly antisymmetric log Fisher matrix."""
    cross, spend = _cross_products(data)
    log_cross = np.log(cross)
    log_spend = np.log(spend)
    # 0.5 * (log Laspeyres + log Paasche), assembled so that swapping the
    # pair negates every term exactly.
    return 0.5 * (
        (log_cross - log_cross.T) + (log_spend[:, None] - log_spend[None, :])
    )


def _scores_to_matrix(scores: np.ndarray) -> np.ndarray:
    return np.exp(scores[:, None] - scores[None, :])


def fisher(data: PooledDataset) -> IndexMatrix:
    """Bilateral Fisher parities: geometric mean of the price-weighted
    and quantity-weighted bilateral comparisons."""
    return IndexMatrix(Method.FISHER, np.exp(_log_fisher(data)), data.country_ids)


def geks(data: PooledDataset) -> IndexMatrix:
    """Transitive closure of Fisher by geometric path averaging.

    Implemented through per-country log scores, which makes circularity
    hold to machine precision and reduces to Fisher itself at n = 2.
    """
    logf = _log_fisher(data)
    scores = logf.mean(axis=1)
    return IndexMatrix(Method.GEKS, _scores_to_matrix(scores), data.country_ids)


def _log_tornqvist(data: PooledDataset) -> np.ndarray:
    prices = data.price_matrix()
    if np.any(prices <= 0):
        raise DomainError("price vectors must be strictly positive")
    spend_shares = prices * data.quantity_matrix()
    spend_shares = spend_shares / spend_shares.sum(axis=1, keepdims=True)
    log_prices = np.log(prices)
    mixed = spend_shares @ log_prices.T  # [i, j] = s_i . log p_j
    own = np.diag(mixed)
    # 0.5 * sum_k (s_ik + s_jk) (log p_ik - log p_jk), antisymmetric by
    # construction.
    return 0.5 * ((own[:, None] - mixed) + (mixed.T - own[None, :]))


def tornqvist(data: PooledDataset) -> IndexMatrix:
    """Bilateral Tornqvist parities with average expenditure-share weights.

    Headings a country does not consume get a zero share and contribute
    only through the partner's share; prices stay strictly positive so
    every log is finite.
    """
    return IndexMatrix(Method.TORNQVIST, np.exp(_log_tornqvist(data)), data.country_ids)


def ccd(data: PooledDataset) -> IndexMatrix:
    """Transitive closure of Tornqvist by geometric path averaging."""
    scores = _log_tornqvist(data).mean(axis=1)
    return IndexMatrix(Method.CCD, _scores_to_matrix(scores), data.country_ids)


def _gk_system(data: PooledDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    quantities = data.quantity_matrix()
    prices = data.price_matrix()
    world_q = quantities.sum(axis=0)
    keep = world_q > 0
    dropped = [h for h, k in zip(data.heading_labels, keep) if not k]
    if not keep.any():
        raise DomainError("no heading has positive aggregate quantity")
    return prices[:, keep], quantities[:, keep], world_q[keep], dropped


def _gk_real_share(pi: np.ndarray, prices, quantities) -> np.ndarray:
    # Per-country ratio of bundle value at reference prices to nominal spend.
    return (quantities @ pi) / np.einsum("nk,nk->n", prices, quantities)


def _gk_iterate(prices, quantities, world_q, tol=1e-12, max_iter=10_000) -> np.ndarray:
    spend_by_heading = prices * quantities
    pi = spend_by_heading.sum(axis=0) / world_q  # world average price start
    for _ in range(max_iter):
        share = _gk_real_share(pi, prices, quantities)
        target = (share @ spend_by_heading) / world_q
        new_pi = 0.5 * pi + 0.5 * target
        new_pi /= new_pi @ world_q
        delta = float(np.max(np.abs(new_pi - pi) / np.maximum(pi, 1e-300)))
        pi = new_pi
        if delta < tol:
            residual = float(
                np.max(np.abs((share @ spend_by_heading) / world_q - pi) / np.maximum(pi, 1e-300))
            )
            if residual < 1e-9:
                return pi
    raise NumericalError(
        f"reference-price iteration did not converge (last relative step {delta:.3e})"
    )


def _gk_linear(prices, quantities, world_q) -> np.ndarray:
    """Direct solve of the fixed point as a homogeneous linear system."""
    spend_by_heading = prices * quantities
    nominal = spend_by_heading.sum(axis=1)
    k = world_q.size
    # pi_k = sum_l A[k, l] pi_l with A from substituting the country
    # shares into the reference-price equation.
    a = np.einsum("nl,nk,n->kl", quantities, spend_by_heading, 1.0 / nominal) / world_q[:, None]
    system = np.vstack([a - np.eye(k), world_q[None, :]])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    pi = np.linalg.lstsq(system, rhs, rcond=None)[0]
    if np.any(pi <= 0):
        raise NumericalError("linear solve produced non-positive reference prices")
    return pi


def geary_khamis(data: PooledDataset, solver: str = "fixedpoint") -> IndexMatrix:
    """Additive multilateral system with jointly-determined reference prices.

    Reference heading prices and per-country price levels solve a fixed
    point: each heading's reference price is the volume-weighted average
    of deflated national values, and each country's level compares its
    nominal spend to its bundle at reference prices. Solved by damped
    fixed-point iteration (default) or a direct linear solve; levels are
    normalised so the base country equals one. Headings nobody consumes
    drop out of the system and are recorded in ``meta``.
    """
    if data.n < 2:
        raise ValidationError("the additive system needs at least two countries")
    prices, quantities, world_q, dropped = _gk_system(data)
    if solver == "fixedpoint":
        pi = _gk_iterate(prices, quantities, world_q)
    elif solver == "linear":
        pi = _gk_linear(prices, quantities, world_q)
    else:
        raise ConfigurationError(f"unknown solver {solver!r} (use fixedpoint or linear)")
    share = _gk_real_share(pi, prices, quantities)
    level = 1.0 / share  # price level: nominal over real
    level = level / level[data.base_index]
    values = level[:, None] / level[None, :]
    kept = [h for h in data.heading_labels if h not in dropped]
    meta = {
        "dropped_headings": tuple(dropped),
        "solver": solver,
        "reference_prices": tuple(float(x) for x in pi),
        "reference_price_headings": tuple(kept),
    }
    return IndexMatrix(Method.GEARY_KHAMIS, values, data.country_ids, meta)


def market_rates(data: PooledDataset) -> IndexMatrix:
    """Cross market exchange rates (local currency per base unit)."""
    rates = data.market_rates()
    missing = [c for c, r in zip(data.country_ids, rates) if np.isnan(r)]
    if missing:
        raise ConfigurationError(f"market rate missing for: {', '.join(missing)}")
    values = rates[:, None] / rates[None, :]
    return IndexMatrix(Method.MARKET_RATE, values, data.country_ids)


def all_indices(
    data: PooledDataset, gk_solver: str = "fixedpoint", include_market: bool = True
) -> dict[str, IndexMatrix]:
    """The five appraised index matrices, plus market rates when present."""
    out = {
        Method.FISHER: fisher(data),
        Method.GEKS: geks(data),
        Method.TORNQVIST: tornqvist(data),
        Method.CCD: ccd(data),
        Method.GEARY_KHAMIS: geary_khamis(data, solver=gk_solver),
    }
    if include_market and not np.isnan(data.market_rates()).any():
        out[Method.MARKET_RATE] = market_rates(data)
    return out


def write_index_csv(matrices: Mapping[str, IndexMatrix] | IndexMatrix, path) -> None:
    """Long-format CSV ``method,i,j,value`` covering all ordered pairs."""
    if isinstance(matrices, IndexMatrix):
        matrices = {matrices.method: matrices}
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["method", "i", "j", "value"])
        for method in matrices:
            matrix = matrices[method]
            for i, ci in enumerate(matrix.country_ids):
                for j, cj in enumerate(matrix.country_ids):
                    writer.writerow([method, ci, cj, f"{matrix.values[i, j]:.12g}"])


def read_index_csv(path) -> dict[str, IndexMatrix]:
    with open(path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    grouped: dict[str, list[dict]] = {}
    for row in rows:
        grouped.setdefault(row["method"], []).append(row)
    out: dict[str, IndexMatrix] = {}
    for method, entries in grouped.items():
        ids: list[str] = []
        for row in entries:
            if row["i"] not in ids:
                ids.append(row["i"])
        index = {c: i for i, c in enumerate(ids)}
        values = np.full((len(ids), len(ids)), np.nan)
        for row in entries:
            values[index[row["i"]], index[row["j"]]] = float(row["value"])
        out[method] = IndexMatrix(method, values, tuple(ids))
    return out


def write_index_json(matrices: Mapping[str, IndexMatrix], path) -> None:
    payload = {
        method: {
            "countries": list(matrix.country_ids),
            "values": matrix.values.tolist(),
            "meta": {k: list(v) if isinstance(v, tuple) else v for k, v in matrix.meta.items()},
        }
        for method, matrix in matrices.items()
    }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_base_table(matrices: Mapping[str, IndexMatrix], base: str, path) -> None:
    """Publication-style table: one row per country, one column per
    method, all parities expressed against the base country."""
    methods = list(matrices)
    ids = matrices[methods[0]].country_ids
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["country"] + methods)
        columns = {m: matrices[m].vs_base(base) for m in methods}
        for c in ids:
            writer.writerow([c] + [f"{columns[m].get(c, float('nan')):.12g}" for m in methods])
