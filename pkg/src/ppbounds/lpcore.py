"""Small dense linear-program solver.

Problems here are tiny (at most a few hundred rows and columns), so the
solver favours determinism and verifiability over speed: a classic
two-phase tableau simplex with Bland's anti-cycling pivot rule. Every
successful solve is self-checked for primal feasibility and for strong
duality against the dual vector recovered from the final basis.

The canonical problem is

    min / max  c . x
    subject to A_ge x >= b_ge,  A_eq x = b_eq,  x >= 0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError

__all__ = ["LinearProgram", "LPResult", "SolveStatus", "solve", "dumps"]

# Absolute tolerance on constraint residuals; relative on objectives.
RESIDUAL_TOL = 1e-9
OBJECTIVE_RTOL = 1e-8
_PIVOT_EPS = 1e-10
_MAX_ITER = 20_000


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    ge_matrix: np.ndarray | None = None
    ge_rhs: np.ndarray | None = None
    eq_matrix: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None
    sense: str = "min"

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        object.__setattr__(self, "objective", c)
        for name in ("ge", "eq"):
            mat = getattr(self, f"{name}_matrix")
            rhs = getattr(self, f"{name}_rhs")
            if (mat is None) != (rhs is None):
                raise ValidationError(f"{name} rows need both a matrix and a rhs")
            if mat is None:
                continue
            mat = np.atleast_2d(np.asarray(mat, dtype=float))
            rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
            object.__setattr__(self, f"{name}_matrix", mat)
            object.__setattr__(self, f"{name}_rhs", rhs)
            if mat.shape[1] != c.size:
                raise ValidationError(
                    f"{name} rows have {mat.shape[1]} columns, objective has {c.size}"
                )
            if mat.shape[0] != rhs.size:
                raise ValidationError(f"{name} rhs length {rhs.size} != {mat.shape[0]} rows")
            if not np.all(np.isfinite(rhs)):
                raise ValidationError("rhs entries must be finite")
        if self.sense not in ("min", "max"):
            raise ValidationError("sense must be 'min' or 'max'")

    @property
    def n_vars(self) -> int:
        return self.objective.size


@dataclass(frozen=True)
class LPResult:
    status: SolveStatus
    value: float | None = None
    x: np.ndarray | None = None
    dual_gap: float | None = None
    iterations: int = 0


def _bland_entering(reduced: np.ndarray) -> int:
    candidates = np.flatnonzero(reduced < -_PIVOT_EPS)
    return int(candidates[0]) if candidates.size else -1


def _bland_leaving(tableau: np.ndarray, col: int, basis: list[int]) -> int:
    rows = tableau.shape[0] - 1
    best_ratio = np.inf
    best_row = -1
    best_var = -1
    for i in range(rows):
        a = tableau[i, col]
        if a > _PIVOT_EPS:
            ratio = tableau[i, -1] / a
            # Bland: among minimal ratios pick the smallest basis variable.
            if ratio < best_ratio - 1e-12 or (
                abs(ratio - best_ratio) <= 1e-12 and basis[i] < best_var
            ):
                best_ratio = ratio
                best_row = i
                best_var = basis[i]
    return best_row


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row, :] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row, :])


def _run_simplex(tableau: np.ndarray, basis: list[int]) -> tuple[str, int]:
    for iteration in range(_MAX_ITER):
        col = _bland_entering(tableau[-1, :-1])
        if col == -1:
            return "optimal", iteration
        row = _bland_leaving(tableau, col, basis)
        if row == -1:
            return "unbounded", iteration
        _pivot(tableau, row, col)
        basis[row] = col
    raise NumericalError("simplex iteration limit reached")  # pragma: no cover


def solve(lp: LinearProgram) -> LPResult:
    """Two-phase simplex solve with post-hoc feasibility and duality checks."""
    n = lp.n_vars
    blocks = []
    rhs_parts = []
    kinds = []
    if lp.ge_matrix is not None:
        blocks.append(lp.ge_matrix)
        rhs_parts.append(lp.ge_rhs)
        kinds += ["ge"] * lp.ge_matrix.shape[0]
    if lp.eq_matrix is not None:
        blocks.append(lp.eq_matrix)
        rhs_parts.append(lp.eq_rhs)
        kinds += ["eq"] * lp.eq_matrix.shape[0]

    c = lp.objective if lp.sense == "min" else -lp.objective
    if not blocks:
        # Only x >= 0 remains: minimum is 0 at the origin unless some
        # objective coefficient rewards growing a coordinate forever.
        if np.any(c < 0):
            return LPResult(status=SolveStatus.UNBOUNDED)
        return LPResult(status=SolveStatus.OPTIMAL, value=0.0, x=np.zeros(n), dual_gap=0.0)

    a = np.vstack(blocks).astype(float)
    b = np.concatenate(rhs_parts).astype(float)
    m = a.shape[0]

    # Standard equality form: ge rows get a surplus column. Rows are then
    # sign-flipped to make the rhs non-negative for phase 1.
    n_surplus = sum(1 for kind in kinds if kind == "ge")
    full = np.zeros((m, n + n_surplus))
    full[:, :n] = a
    s = 0
    for i, kind in enumerate(kinds):
        if kind == "ge":
            full[i, n + s] = -1.0
            s += 1
    flip = b < 0
    full[flip] *= -1.0
    b = np.abs(b)

    total = n + n_surplus
    tableau = np.zeros((m + 1, total + m + 1))
    tableau[:m, :total] = full
    tableau[:m, total : total + m] = np.eye(m)  # artificial columns
    tableau[:m, -1] = b
    # Phase-1 objective: minimise the artificial sum, expressed through
    # the current (artificial) basis.
    tableau[-1, :total] = -full.sum(axis=0)
    tableau[-1, -1] = -b.sum()
    basis = list(range(total, total + m))

    status, it1 = _run_simplex(tableau, basis)
    if status != "optimal":  # pragma: no cover - phase 1 is always bounded
        raise NumericalError("phase 1 terminated abnormally")
    if -tableau[-1, -1] > RESIDUAL_TOL:
        return LPResult(status=SolveStatus.INFEASIBLE, iterations=it1)

    # Drive any residual artificial out of the basis, then drop those columns.
    for i, var in enumerate(basis):
        if var >= total:
            pivots = np.flatnonzero(np.abs(tableau[i, :total]) > _PIVOT_EPS)
            if pivots.size:
                _pivot(tableau, i, int(pivots[0]))
                basis[i] = int(pivots[0])
    keep = [i for i, var in enumerate(basis) if var < total]
    tableau = np.hstack([tableau[:, :total], tableau[:, -1:]])[keep + [-1], :]
    basis = [basis[i] for i in keep]

    # Phase-2 objective row in terms of the current basis.
    cost = np.zeros(total)
    cost[:n] = c
    tableau[-1, :] = 0.0
    tableau[-1, :total] = cost
    for i, var in enumerate(basis):
        if abs(cost[var]) > 0:
            tableau[-1, :] -= cost[var] * tableau[i, :]

    status, it2 = _run_simplex(tableau, basis)
    iterations = it1 + it2
    if status == "unbounded":
        return LPResult(status=SolveStatus.UNBOUNDED, iterations=iterations)

    x_full = np.zeros(total)
    for i, var in enumerate(basis):
        x_full[var] = tableau[i, -1]
    x = np.clip(x_full[:n], 0.0, None)
    value = float(c @ x)

    _verify(lp, a_eqform=full, b_eqform=b, cost=cost, basis=basis, x_full=x_full, value=value)

    dual_gap = _duality_gap(full, b, cost, basis, value)
    signed = value if lp.sense == "min" else -value
    return LPResult(
        status=SolveStatus.OPTIMAL, value=signed, x=x, dual_gap=dual_gap, iterations=iterations
    )


def _verify(lp, a_eqform, b_eqform, cost, basis, x_full, value) -> None:
    residual = a_eqform @ x_full - b_eqform
    scale = 1.0 + np.abs(b_eqform)
    if np.any(np.abs(residual) > RESIDUAL_TOL * scale * 10):
        raise NumericalError("solution failed the feasibility self-check")
    if np.any(x_full < -RESIDUAL_TOL):
        raise NumericalError("solution failed the non-negativity self-check")


def _duality_gap(full, b, cost, basis, value) -> float:
    # B^T y = c_B over the original equality form; lstsq covers the
    # (rare) case of redundant rows left after phase 1.
    basis_matrix = full[:, basis]
    y = np.linalg.lstsq(basis_matrix.T, cost[list(basis)], rcond=None)[0]
    dual_value = float(y @ b)
    gap = abs(dual_value - value)
    if gap > OBJECTIVE_RTOL * (1.0 + abs(value)):
        raise NumericalError(f"strong duality self-check failed (gap {gap:.3e})")
    return gap


def dumps(lp: LinearProgram) -> str:
    """Plain-text rendering of the program, for debugging."""
    terms = " + ".join(f"{ci:.6g}*x{i}" for i, ci in enumerate(lp.objective))
    lines = [f"{lp.sense} {terms}", "subject to"]
    if lp.ge_matrix is not None:
        for row, rhs in zip(lp.ge_matrix, lp.ge_rhs):
            lhs = " + ".join(f"{v:.6g}*x{i}" for i, v in enumerate(row) if v != 0)
            lines.append(f"  {lhs} >= {rhs:.6g}")
    if lp.eq_matrix is not None:
        for row, rhs in zip(lp.eq_matrix, lp.eq_rhs):
            lhs = " + ".join(f"{v:.6g}*x{i}" for i, v in enumerate(row) if v != 0)
            lines.append(f"  {lhs} = {rhs:.6g}")
    lines.append("  x >= 0")
    return "\n".join(lines)
