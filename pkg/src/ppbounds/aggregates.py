"""World output, Lorenz curves, and the inter-country Gini coefficient.

Real expenditure per country is population times per-capita nominal
spending deflated by the country's parity against the base. Inequality
statistics are population weighted: each country enters the Lorenz
construction with its population mass, not as a single point.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .dataset import PooledDataset
from .errors import ConfigurationError, DomainError, ValidationError
from .indices import IndexMatrix

__all__ = [
    "LorenzCurve",
    "WorldOutput",
    "world_output",
    "lorenz",
    "gini",
    "gini_from_curve",
    "write_lorenz_csv",
    "write_summary_json",
]


@dataclass(frozen=True)
class LorenzCurve:
    """Cumulative population share vs cumulative expenditure share."""

    points: np.ndarray  # (m, 2), from (0, 0) to (1, 1)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValidationError("curve needs at least the two endpoints")
        if not (np.allclose(pts[0], (0, 0)) and np.allclose(pts[-1], (1, 1))):
            raise ValidationError("curve must run from (0, 0) to (1, 1)")
        if np.any(np.diff(pts[:, 0]) < -1e-12) or np.any(np.diff(pts[:, 1]) < -1e-12):
            raise ValidationError("curve must be monotone in both coordinates")


@dataclass(frozen=True)
class WorldOutput:
    total: float
    per_country: dict[str, float]
    per_capita: dict[str, float]


def _checked_populations(data: PooledDataset) -> np.ndarray:
    pop = data.populations()
    missing = [c for c, p in zip(data.country_ids, pop) if np.isnan(p)]
    if missing:
        raise ConfigurationError(f"population missing for: {', '.join(missing)}")
    return pop


def world_output(data: PooledDataset, index: IndexMatrix, base: str | None = None) -> WorldOutput:
    """Total and per-country real expenditure under an index matrix."""
    base = base or data.base_country
    pop = _checked_populations(data)
    parities = index.vs_base(base)
    per_country: dict[str, float] = {}
    per_capita: dict[str, float] = {}
    for i, obs in enumerate(data.observations):
        parity = parities.get(obs.country_id)
        if parity is None or not np.isfinite(parity):
            raise DomainError(f"no parity for {obs.country_id}")
        per_capita[obs.country_id] = obs.expenditure / parity
        per_country[obs.country_id] = pop[i] * per_capita[obs.country_id]
    return WorldOutput(
        total=float(sum(per_country.values())),
        per_country=per_country,
        per_capita=per_capita,
    )


def _sorted_weights(values, populations, labels=None) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(values, dtype=float)
    w = np.asarray(populations, dtype=float)
    if x.shape != w.shape or x.ndim != 1:
        raise ValidationError("values and populations must be matching vectors")
    if np.any(w <= 0) or np.any(~np.isfinite(w)):
        raise ValidationError("populations must be positive")
    if np.any(x < 0) or np.any(~np.isfinite(x)):
        raise DomainError("per-capita values must be non-negative")
    if not np.any(x > 0):
        raise DomainError("all per-capita values are zero")
    keys = labels if labels is not None else [str(i) for i in range(x.size)]
    order = sorted(range(x.size), key=lambda i: (x[i], keys[i]))
    return x[order], w[order]


def lorenz(values, populations, labels=None) -> LorenzCurve:
    """Population-weighted Lorenz curve, poorest observation first."""
    x, w = _sorted_weights(values, populations, labels)
    cum_pop = np.concatenate([[0.0], np.cumsum(w)]) / w.sum()
    mass = x * w
    cum_exp = np.concatenate([[0.0], np.cumsum(mass)]) / mass.sum()
    pts = np.column_stack([cum_pop, cum_exp])
    pts[-1] = (1.0, 1.0)
    return LorenzCurve(points=pts)


def gini_from_curve(curve: LorenzCurve) -> float:
    """Gini as twice the area between the curve and the diagonal
    (trapezoid rule)."""
    x = curve.points[:, 0]
    y = curve.points[:, 1]
    area = float(np.trapezoid(y, x))
    return 1.0 - 2.0 * area


def gini(values, populations, labels=None) -> float:
    """Population-weighted inter-country Gini coefficient in [0, 1)."""
    return gini_from_curve(lorenz(values, populations, labels))


def write_lorenz_csv(curves: dict[str, LorenzCurve], path) -> None:
    """Long-format plot data: ``series,cum_population,cum_expenditure``."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["series", "cum_population", "cum_expenditure"])
        for name, curve in curves.items():
            for px, py in curve.points:
                writer.writerow([name, f"{px:.12g}", f"{py:.12g}"])


def read_lorenz_csv(path) -> dict[str, LorenzCurve]:
    """Round-trip reader for :func:`write_lorenz_csv`."""
    series: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            series.setdefault(row["series"], []).append(
                (float(row["cum_population"]), float(row["cum_expenditure"]))
            )
    return {name: LorenzCurve(points=np.array(pts)) for name, pts in series.items()}


def write_summary_json(outputs: dict[str, WorldOutput], ginis: dict[str, float], path) -> None:
    payload = {
        name: {"total_output": out.total, "gini": ginis.get(name)}
        for name, out in outputs.items()
    }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
