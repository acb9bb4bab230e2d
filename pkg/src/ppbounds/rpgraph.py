"""Weighted comparison graph and revealed-preference consistency tests.

Vertices are countries; the edge weight from m to n is the bilateral
quantity index p_m.q_n / p_m.q_m, i.e. the cost of n's bundle at m's
prices relative to m's own spending. A weight at or below one means n's
bundle was affordable where m shopped, which is the raw material for
GARP-style consistency checks, reachability ("revealed preferred /
revealed worse") sets, and the money-pump diagnostic.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dataset import PooledDataset
from .errors import DomainError, ValidationError

__all__ = [
    "EQ_TOL",
    "RPGraph",
    "ReachabilityRelation",
    "ViolationCycle",
    "ConsistencyReport",
    "build_graph",
    "subgraph",
    "reachability",
    "transitive_closure",
    "check_garp",
    "check_harp",
    "revealed_sets",
    "max_reference_set",
    "money_pump_index",
    "greedy_homothetic_reference_set",
    "min_path_log",
    "export_edge_list",
    "export_adjacency_json",
]

# Relative tolerance for comparing edge weights against 1. Ties at the
# boundary of the affordability inequalities must not flip verdicts.
EQ_TOL = 1e-9


@dataclass(frozen=True)
class RPGraph:
    """Complete weighted digraph over countries with unit diagonal."""

    weights: np.ndarray
    country_ids: tuple[str, ...]
    expenditures: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.expenditures, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "expenditures", m)
        n = len(self.country_ids)
        if w.shape != (n, n):
            raise ValidationError(f"weight matrix {w.shape} does not match {n} countries")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValidationError("edge weights must be finite and strictly positive")
        if not np.allclose(np.diag(w), 1.0, rtol=0, atol=1e-12):
            raise ValidationError("diagonal weights must equal 1")

    @property
    def n(self) -> int:
        return len(self.country_ids)


@dataclass(frozen=True)
class ReachabilityRelation:
    """Reflexive-transitive reach and its strict refinement."""

    reach: np.ndarray
    strict: np.ndarray


@dataclass(frozen=True)
class ViolationCycle:
    """A closed vertex sequence witnessing a consistency failure.

    ``vertices`` repeats the starting vertex at the end; ``weights`` has
    one entry per traversed edge.
    """

    vertices: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.vertices) < 3 or self.vertices[0] != self.vertices[-1]:
            raise ValidationError("cycle must close on its starting vertex")
        if len(self.weights) != len(self.vertices) - 1:
            raise ValidationError("need one weight per edge of the cycle")

    def product(self) -> float:
        return float(np.prod(self.weights))

    def as_ids(self, country_ids: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(country_ids[v] for v in self.vertices)

    def format_ids(self, country_ids: tuple[str, ...]) -> str:
        return " -> ".join(self.as_ids(country_ids))


@dataclass(frozen=True)
class ConsistencyReport:
    """Verdict of a consistency test plus an optional witness cycle."""

    axiom: str
    satisfied: bool
    witness: ViolationCycle | None = None


def build_graph(data: PooledDataset) -> RPGraph:
    """Build the complete quantity-index graph for a dataset."""
    prices = data.price_matrix()
    quantities = data.quantity_matrix()
    cross = prices @ quantities.T
    spend = np.diag(cross).copy()
    if np.any(spend <= 0):
        bad = [data.country_ids[i] for i in np.flatnonzero(spend <= 0)]
        raise ValidationError(f"zero total expenditure for: {', '.join(bad)}")
    weights = cross / spend[:, None]
    np.fill_diagonal(weights, 1.0)
    return RPGraph(weights=weights, country_ids=data.country_ids, expenditures=spend)


def subgraph(graph: RPGraph, indices) -> RPGraph:
    idx = np.asarray(list(indices), dtype=int)
    return RPGraph(
        weights=graph.weights[np.ix_(idx, idx)],
        country_ids=tuple(graph.country_ids[i] for i in idx),
        expenditures=graph.expenditures[idx],
    )


def transitive_closure(relation: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure by repeated boolean squaring."""
    n = relation.shape[0]
    closed = relation.astype(bool) | np.eye(n, dtype=bool)
    while True:
        squared = (closed.astype(np.uint8) @ closed.astype(np.uint8)) > 0
        if np.array_equal(squared, closed):
            return closed
        closed = squared


def _edges(graph: RPGraph) -> np.ndarray:
    return graph.weights <= 1.0 + EQ_TOL


def _strict_edges(graph: RPGraph) -> np.ndarray:
    strict = graph.weights < 1.0 - EQ_TOL
    np.fill_diagonal(strict, False)
    return strict


def reachability(graph: RPGraph) -> ReachabilityRelation:
    """Reach = closure of affordable edges; strict marks walks that pass
    through at least one strictly-cheaper edge."""
    reach = transitive_closure(_edges(graph))
    strict_edge = _strict_edges(graph).astype(np.uint8)
    r = reach.astype(np.uint8)
    strict = (r @ strict_edge @ r) > 0
    return ReachabilityRelation(reach=reach, strict=strict)


def revealed_sets(rel: ReachabilityRelation, vertex: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Countries revealed preferred to / revealed worse than ``vertex``.

    Both sets contain the vertex itself (the empty walk qualifies).
    """
    n = rel.reach.shape[0]
    if not 0 <= vertex < n:
        raise DomainError(f"vertex {vertex} out of range for {n} countries")
    preferred = tuple(np.flatnonzero(rel.reach[:, vertex]))
    worse = tuple(np.flatnonzero(rel.reach[vertex, :]))
    return preferred, worse


def _shortest_edge_path(edges: np.ndarray, start: int, goal: int) -> list[int]:
    """BFS vertex path start -> goal through the boolean edge matrix."""
    if start == goal:
        return [start]
    n = edges.shape[0]
    parent = {start: None}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in range(n):
            if v != u and edges[u, v] and v not in parent:
                parent[v] = u
                if v == goal:
                    path = [v]
                    while parent[path[-1]] is not None:
                        path.append(parent[path[-1]])
                    return path[::-1]
                queue.append(v)
    raise DomainError("no path despite reachability")  # pragma: no cover


def check_garp(graph: RPGraph) -> ConsistencyReport:
    """Cycle-consistency (GARP) test on the quantity-index graph.

    The data fail exactly when some cycle uses only weights <= 1 and at
    least one weight strictly below 1; equivalently, when some vertex
    reaches another whose return edge is strictly below 1. The witness
    is recovered as a shortest such cycle.
    """
    rel = reachability(graph)
    strict = _strict_edges(graph)
    # Candidate (a, b): strict edge a->b that can be closed back to a.
    closable = strict & rel.reach.T
    if not closable.any():
        return ConsistencyReport(axiom="garp", satisfied=True)
    a, b = map(int, np.argwhere(closable)[0])
    path = _shortest_edge_path(_edges(graph) & ~np.eye(graph.n, dtype=bool), b, a)
    cycle = [a] + path
    weights = tuple(float(graph.weights[u, v]) for u, v in zip(cycle[:-1], cycle[1:]))
    return ConsistencyReport(
        axiom="garp",
        satisfied=False,
        witness=ViolationCycle(vertices=tuple(cycle), weights=weights),
    )


def min_path_log(log_costs: np.ndarray) -> np.ndarray:
    """All-pairs minimum walk costs (Floyd-Warshall).

    Diagonal entries start at +inf, so dist[i, i] ends up as the cost of
    the cheapest closed walk through i; a negative diagonal entry is a
    negative-cycle certificate.
    """
    dist = log_costs.astype(float).copy()
    np.fill_diagonal(dist, np.inf)
    for k in range(dist.shape[0]):
        through = dist[:, k, None] + dist[None, k, :]
        np.minimum(dist, through, out=dist)
    return dist


def _pred_cycle(pred: np.ndarray, start: int) -> list[int] | None:
    """Closed vertex list of the predecessor-graph cycle reachable
    backward from ``start``, or None if the chain ends at a root."""
    seen: set[int] = set()
    x = start
    while x != -1 and x not in seen:
        seen.add(x)
        x = int(pred[x])
    if x == -1:
        return None
    cycle = [x]
    v = int(pred[x])
    while v != x:
        cycle.append(v)
        v = int(pred[v])
    cycle.append(x)
    cycle.reverse()
    return cycle


def _negative_cycle(costs: np.ndarray) -> list[int] | None:
    """Bellman-Ford negative-cycle extraction on a complete cost matrix.

    Runs from an implicit super-source (all distances start at zero).
    Once a round beyond the n-th still relaxes an edge, the predecessor
    chain from a relaxed vertex is walked back until it loops; extra
    rounds are allowed so the loop demonstrably carries negative cost.
    """
    n = costs.shape[0]
    dist = np.zeros(n)
    pred = np.full(n, -1, dtype=int)
    off_diag = ~np.eye(n, dtype=bool)
    for round_no in range(4 * n):
        touched = -1
        for u in range(n):
            trial = dist[u] + costs[u]
            better = (trial < dist - 1e-15) & off_diag[u]
            if better.any():
                dist[better] = trial[better]
                pred[better] = u
                touched = int(np.flatnonzero(better)[-1])
        if touched == -1:
            return None
        if round_no < n - 1:
            continue
        cycle = _pred_cycle(pred, touched)
        if cycle is not None:
            total = sum(costs[a, b] for a, b in zip(cycle[:-1], cycle[1:]))
            if total < 0:
                return cycle
    return None  # pragma: no cover - a detected cycle always surfaces


def check_harp(graph: RPGraph) -> ConsistencyReport:
    """Homothetic consistency (HARP): every cycle's weight product >= 1.

    The verdict comes from the minimum closed-walk cost on log weights;
    the witness cycle is extracted by Bellman-Ford predecessor tracing.
    """
    logw = np.log(graph.weights)
    loops = np.diag(min_path_log(logw))
    if loops.min() >= -EQ_TOL:
        return ConsistencyReport(axiom="harp", satisfied=True)
    walk = _negative_cycle(logw)
    if walk is None:  # pragma: no cover - detection and extraction agree
        return ConsistencyReport(axiom="harp", satisfied=False)
    weights = tuple(float(graph.weights[u, v]) for u, v in zip(walk[:-1], walk[1:]))
    return ConsistencyReport(
        axiom="harp",
        satisfied=False,
        witness=ViolationCycle(vertices=tuple(walk), weights=weights),
    )


def _violating_pairs(graph: RPGraph) -> list[tuple[int, int]]:
    rel = reachability(graph)
    strict = _strict_edges(graph)
    # (i, j) such that i reaches j and the return edge j->i is strict.
    flagged = rel.reach & strict.T
    np.fill_diagonal(flagged, False)
    return [tuple(map(int, ij)) for ij in np.argwhere(flagged)]


def max_reference_set(graph: RPGraph, exact: bool = False) -> tuple[int, ...]:
    """Largest vertex subset consistent under the cycle test.

    Greedy mode repeatedly drops the vertex implicated in the most
    violating pairs; ties keep the smaller-expenditure country (the
    larger one is dropped), then resolve by country id. Exact mode
    (n <= 15) enumerates subsets by decreasing size.
    """
    n = graph.n
    if exact:
        if n > 15:
            raise ValidationError("exact subset search is limited to 15 countries")
        for size in range(n, 0, -1):
            for combo in itertools.combinations(range(n), size):
                if check_garp(subgraph(graph, combo)).satisfied:
                    return combo
        return ()  # pragma: no cover

    remaining = list(range(n))
    while True:
        sub = subgraph(graph, remaining)
        pairs = _violating_pairs(sub)
        if not pairs:
            return tuple(remaining)
        counts = np.zeros(len(remaining), dtype=int)
        for i, j in pairs:
            counts[i] += 1
            counts[j] += 1
        top = int(counts.max())
        tied = [t for t in range(len(remaining)) if counts[t] == top]
        tied.sort(key=lambda t: (sub.expenditures[t], sub.country_ids[t]), reverse=True)
        remaining.pop(tied[0])


def money_pump_index(graph: RPGraph, cycle: ViolationCycle) -> float:
    """Share of cycle expenditure extractable as arbitrage profit.

    Sum over cycle edges of (own spending minus the next bundle's cost at
    own prices), divided by the cycle's total spending. Only defined for
    genuine violations: every edge weight <= 1 and at least one < 1 (a
    cycle of exact ties has a zero numerator and is rejected).
    """
    edges = list(zip(cycle.vertices[:-1], cycle.vertices[1:]))
    weights = np.array([graph.weights[u, v] for u, v in edges])
    if np.any(weights > 1.0 + EQ_TOL) or not np.any(weights < 1.0 - EQ_TOL):
        raise DomainError("cycle is not a consistency violation")
    spend = np.array([graph.expenditures[u] for u, _ in edges])
    profit = float(np.sum(spend * (1.0 - weights)))
    return profit / float(np.sum(spend))


def _cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def greedy_homothetic_reference_set(data: PooledDataset) -> tuple[int, ...]:
    """Best homothetically-consistent country group over all seeds.

    For each seed, the other countries are tried in descending cosine
    price similarity and kept whenever the group still passes the
    homothetic cycle test. Among the per-seed candidates, the winner
    covers the largest average share of total output and population
    (countries without a population count as one person).
    """
    graph = build_graph(data)
    n = data.n
    prices = data.price_matrix()
    base_prices = prices[data.base_index]
    volumes = data.quantity_matrix() @ base_prices  # per-capita value at base prices
    pop = data.populations()
    pop = np.where(np.isnan(pop), 1.0, pop)
    output = pop * volumes

    best: tuple[float, int, tuple[int, ...]] | None = None
    for seed in range(n):
        order = sorted(
            range(n),
            key=lambda i: (-_cosine_similarity(prices[seed], prices[i]), data.country_ids[i]),
        )
        group: list[int] = []
        for candidate in order:
            trial = group + [candidate]
            if check_harp(subgraph(graph, trial)).satisfied:
                group = trial
        members = tuple(sorted(group))
        share = 0.5 * (output[list(members)].sum() / output.sum()) + 0.5 * (
            pop[list(members)].sum() / pop.sum()
        )
        if best is None or share > best[0] + 1e-15:
            best = (share, seed, members)
    assert best is not None
    return best[2]


def export_edge_list(graph: RPGraph, path) -> None:
    """Write the graph as a ``from,to,weight`` CSV."""
    with open(path, "w", newline="") as handle:
        handle.write("from,to,weight\n")
        for i in range(graph.n):
            for j in range(graph.n):
                if i != j:
                    handle.write(
                        f"{graph.country_ids[i]},{graph.country_ids[j]},"
                        f"{graph.weights[i, j]:.12g}\n"
                    )


def export_adjacency_json(graph: RPGraph, path) -> None:
    payload = {
        "countries": list(graph.country_ids),
        "weights": [[float(w) for w in rowvals] for rowvals in graph.weights],
    }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
