"""Independent brute-force oracles and fixture generators.

Nothing in here calls the package's solvers or closure routines: linear
programs are checked against vertex enumeration, reachability against
depth-first path search, consistency tests against explicit cycle
enumeration, and the Gini against the pairwise-difference formula. The
dataset generators produce consistent data by construction (demands from
one shared log-linear utility) so consistency never rests on the code
under test.
"""

from __future__ import annotations

import itertools

import numpy as np

from ppbounds.dataset import CountryObservation, PooledDataset


# ---------------------------------------------------------------------------
# datasets


def make_dataset(ids, prices, quantities, base=None, populations=None, rates=None):
    obs = []
    for i, cid in enumerate(ids):
        obs.append(
            CountryObservation(
                country_id=cid,
                prices=np.asarray(prices[i], dtype=float),
                quantities=np.asarray(quantities[i], dtype=float),
                population=None if populations is None else populations[i],
                market_rate=None if rates is None else rates[i],
            )
        )
    return PooledDataset(tuple(obs), base or ids[0])


def cobb_douglas_dataset(rng, n, k, populations=False):
    """Random prices and budgets, demands from one shared log-linear
    utility; the pooled data are therefore rationalisable and pass both
    consistency tests by construction."""
    alpha = rng.dirichlet(np.ones(k)) + 0.02
    alpha = alpha / alpha.sum()
    prices = np.exp(rng.normal(0.0, 0.6, size=(n, k)))
    budgets = np.exp(rng.normal(1.0, 0.5, size=n))
    quantities = alpha[None, :] * budgets[:, None] / prices
    ids = [f"C{i:02d}" for i in range(n)]
    pops = np.exp(rng.normal(2.0, 1.0, size=n)) if populations else None
    return make_dataset(ids, prices, quantities, populations=pops)


def perturbed_consistent_dataset(rng, n, k, scale=0.25, max_tries=200):
    """Noisy variation on the shared-utility generator, kept only when
    the brute-force cycle check still passes."""
    for _ in range(max_tries):
        data = cobb_douglas_dataset(rng, n, k)
        quantities = data.quantity_matrix() * np.exp(rng.normal(0.0, scale, size=(n, k)))
        candidate = make_dataset(list(data.country_ids), data.price_matrix(), quantities)
        weights = weight_matrix(candidate)
        if not cycle_violation_bruteforce(weights):
            return candidate
    return cobb_douglas_dataset(rng, n, k)


def weight_matrix(data: PooledDataset) -> np.ndarray:
    prices = data.price_matrix()
    quantities = data.quantity_matrix()
    cross = prices @ quantities.T
    return cross / np.diag(cross)[:, None]


# ---------------------------------------------------------------------------
# cycles and reachability


def simple_cycles(n):
    """All simple cycles over n vertices as closed index tuples, each
    cycle listed once (anchored at its smallest vertex)."""
    for size in range(2, n + 1):
        for combo in itertools.combinations(range(n), size):
            first = combo[0]
            for perm in itertools.permutations(combo[1:]):
                yield (first,) + perm + (first,)


def cycle_violation_bruteforce(weights, tol=1e-9):
    """A cycle whose weights all sit at or below one with a strict step,
    or None."""
    n = weights.shape[0]
    for cycle in simple_cycles(n):
        values = [weights[u, v] for u, v in zip(cycle[:-1], cycle[1:])]
        if all(w <= 1 + tol for w in values) and any(w < 1 - tol for w in values):
            return cycle
    return None


def product_violation_bruteforce(weights, tol=1e-9):
    """A cycle whose weight product falls below one, or None."""
    n = weights.shape[0]
    for cycle in simple_cycles(n):
        product = np.prod([weights[u, v] for u, v in zip(cycle[:-1], cycle[1:])])
        if product < 1 - tol:
            return cycle
    return None


def reach_bruteforce(weights, tol=1e-9):
    """Reachability through affordable edges by DFS over simple paths."""
    n = weights.shape[0]
    edges = weights <= 1 + tol
    np.fill_diagonal(edges, False)
    reach = np.eye(n, dtype=bool)
    for start in range(n):
        stack = [start]
        while stack:
            u = stack.pop()
            for v in range(n):
                if edges[u, v] and not reach[start, v]:
                    reach[start, v] = True
                    stack.append(v)
    return reach


def strict_reach_bruteforce(weights, tol=1e-9):
    """Pairs joined by a walk using at least one strictly-cheaper edge."""
    reach = reach_bruteforce(weights, tol)
    strict_edge = weights < 1 - tol
    np.fill_diagonal(strict_edge, False)
    n = weights.shape[0]
    strict = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(n):
            if strict_edge[a, b]:
                strict |= np.outer(reach[:, a], reach[b, :])
    return strict


def min_path_products_bruteforce(steps, max_len=None):
    """Minimum product over simple paths i -> j of the step matrix."""
    n = steps.shape[0]
    max_len = n if max_len is None else max_len
    best = np.full((n, n), np.inf)
    for i in range(n):
        for j in range(n):
            if i == j:
                best[i, j] = 1.0
                continue
            others = [v for v in range(n) if v not in (i, j)]
            for extra in range(0, min(max_len - 1, len(others)) + 1):
                for mids in itertools.permutations(others, extra):
                    path = (i,) + mids + (j,)
                    product = np.prod([steps[u, v] for u, v in zip(path[:-1], path[1:])])
                    best[i, j] = min(best[i, j], product)
    return best


# ---------------------------------------------------------------------------
# linear programming


def polytope_vertices(ge_matrix, ge_rhs, eq_row=None, eq_rhs=None, tol=1e-8):
    """Vertices of {q >= 0, Aq >= b (, e.q = d)} by basis enumeration."""
    a = np.asarray(ge_matrix, dtype=float)
    b = np.asarray(ge_rhs, dtype=float)
    m, k = a.shape
    rows = np.vstack([a, np.eye(k)])
    rhs = np.concatenate([b, np.zeros(k)])
    fixed_rows = 0
    if eq_row is not None:
        rows = np.vstack([np.asarray(eq_row, float).reshape(1, -1), rows])
        rhs = np.concatenate([[float(eq_rhs)], rhs])
        fixed_rows = 1
    vertices = []
    free = range(fixed_rows, rows.shape[0])
    for subset in itertools.combinations(free, k - fixed_rows):
        picked = list(range(fixed_rows)) + list(subset)
        square = rows[picked]
        try:
            q = np.linalg.solve(square, rhs[picked])
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(q)):
            continue
        if np.max(np.abs(square @ q - rhs[picked])) > tol:
            continue
        feasible = np.all(a @ q >= b - tol * (1 + np.abs(b))) and np.all(q >= -tol)
        if eq_row is not None:
            feasible = feasible and abs(np.dot(eq_row, q) - eq_rhs) <= tol * (1 + abs(eq_rhs))
        if feasible:
            vertices.append(q)
    return vertices


def lp_min_bruteforce(objective, ge_matrix, ge_rhs):
    """Minimum of c.q over {q >= 0, Aq >= b} via vertex enumeration.

    Valid whenever the minimum is attained (true for the expenditure
    programs: positive objective, lower-bounded feasible set)."""
    vertices = polytope_vertices(ge_matrix, ge_rhs)
    assert vertices, "oracle found no vertices"
    return min(float(np.dot(objective, q)) for q in vertices)


def lp_max_on_budget_bruteforce(objective, ge_matrix, ge_rhs, eq_row, eq_rhs):
    """Maximum of c.q over {q >= 0, Aq >= b, e.q = d} via vertices."""
    vertices = polytope_vertices(ge_matrix, ge_rhs, eq_row, eq_rhs)
    assert vertices, "oracle found no vertices"
    return max(float(np.dot(objective, q)) for q in vertices)


# ---------------------------------------------------------------------------
# inequality


def gini_pairwise(values, weights):
    """Population-weighted Gini from the mean-absolute-difference form."""
    x = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    mean = float(w @ x / w.sum())
    diff = np.abs(x[:, None] - x[None, :])
    return float((w[:, None] * w[None, :] * diff).sum() / (2.0 * w.sum() ** 2 * mean))
