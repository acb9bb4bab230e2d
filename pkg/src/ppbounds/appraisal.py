"""Scoring index matrices against the cost-of-living bounds.

A pair (i, j) counts as an economic error when the index value leaves
the interval [lower, upper] prescribed by the bound matrix. The error
rate is the share of offending ordered pairs (diagonal included in the
denominator; it never violates), and the error magnitude is the mean
relative overshoot among the violators only.

Pairs can be segmented by whether the country anchoring the pair's
bounds belongs to the reference set used to build them, mirroring the
in-set / out-of-set split used when bounds for outside countries come
from the star extension.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .bounds import BoundMatrix
from .errors import StructuralError, ValidationError
from .indices import IndexMatrix, Method

__all__ = [
    "Segment",
    "PairViolation",
    "AppraisalReport",
    "CorrectionRecord",
    "appraise",
    "comparison_table",
    "format_comparison_table",
    "taste_correct",
    "write_report_csv",
    "write_reports_json",
]

# Relative guard so exact boundary ties are not flagged as violations.
_EDGE_RTOL = 1e-12


class Segment:
    ALL = "all"
    BASE_IN_RC = "in-rc"
    BASE_OUT_RC = "out-rc"


@dataclass(frozen=True)
class PairViolation:
    i: str
    j: str
    value: float
    lower: float
    upper: float
    side: str  # "upper" or "lower"
    overshoot: float


@dataclass(frozen=True)
class AppraisalReport:
    method: str
    segment: str
    error_rate: float
    error_magnitude: float
    upper_violations: int
    lower_violations: int
    pair_count: int
    per_pair: tuple[PairViolation, ...] = ()

    @property
    def violations(self) -> int:
        return self.upper_violations + self.lower_violations


def _segment_mask(bm: BoundMatrix, segment: str) -> np.ndarray:
    n = bm.n
    anchor_in_rc = np.empty((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            anchor_in_rc[i, j] = bm.base_in_rc[bm.base_of_pair(i, j)]
    if segment == Segment.ALL:
        return np.ones((n, n), dtype=bool)
    if segment == Segment.BASE_IN_RC:
        return anchor_in_rc
    if segment == Segment.BASE_OUT_RC:
        return ~anchor_in_rc
    raise ValidationError(f"unknown segment {segment!r}")


def appraise(index: IndexMatrix, bm: BoundMatrix, segment: str = Segment.ALL) -> AppraisalReport:
    """Count and size the bound violations of one index matrix.

    NaN entries (countries without an index value) are skipped and do
    not enter the pair count.
    """
    if index.country_ids != bm.country_ids:
        raise StructuralError("index and bounds must share the same country ordering")
    values = index.values
    mask = (
        _segment_mask(bm, segment)
        & np.isfinite(values)
        & np.isfinite(bm.lower)
        & np.isfinite(bm.upper)
    )
    over = mask & (values > bm.upper * (1 + _EDGE_RTOL))
    under = mask & (values < bm.lower * (1 - _EDGE_RTOL))

    per_pair: list[PairViolation] = []
    overshoots: list[float] = []
    for i, j in np.argwhere(over):
        overshoot = float(values[i, j] / bm.upper[i, j] - 1.0)
        overshoots.append(overshoot)
        per_pair.append(
            PairViolation(
                i=bm.country_ids[i],
                j=bm.country_ids[j],
                value=float(values[i, j]),
                lower=float(bm.lower[i, j]),
                upper=float(bm.upper[i, j]),
                side="upper",
                overshoot=overshoot,
            )
        )
    for i, j in np.argwhere(under):
        overshoot = float(bm.lower[i, j] / values[i, j] - 1.0)
        overshoots.append(overshoot)
        per_pair.append(
            PairViolation(
                i=bm.country_ids[i],
                j=bm.country_ids[j],
                value=float(values[i, j]),
                lower=float(bm.lower[i, j]),
                upper=float(bm.upper[i, j]),
                side="lower",
                overshoot=overshoot,
            )
        )

    pair_count = int(mask.sum())
    n_upper = int(over.sum())
    n_lower = int(under.sum())
    rate = (n_upper + n_lower) / pair_count if pair_count else 0.0
    magnitude = float(np.mean(overshoots)) if overshoots else 0.0
    return AppraisalReport(
        method=index.method,
        segment=segment,
        error_rate=rate,
        error_magnitude=magnitude,
        upper_violations=n_upper,
        lower_violations=n_lower,
        pair_count=pair_count,
        per_pair=tuple(sorted(per_pair, key=lambda v: (v.i, v.j, v.side))),
    )


# Pairwise designs isolating one index property each: additivity via the
# additive system against either superlative multilateral index, the
# homothetic-approximation level via GEKS alone, and the cost of forcing
# transitivity via each multilateral index against its bilateral parent.
_COMPARISONS = (
    ("gk_minus_geks", Method.GEARY_KHAMIS, Method.GEKS),
    ("gk_minus_ccd", Method.GEARY_KHAMIS, Method.CCD),
    ("geks_level", Method.GEKS, None),
    ("geks_minus_fisher", Method.GEKS, Method.FISHER),
    ("ccd_minus_tornqvist", Method.CCD, Method.TORNQVIST),
)


def comparison_table(
    reports: Mapping[str, AppraisalReport],
) -> list[dict[str, object]]:
    """Error-rate differences for the standard index-property contrasts.

    Missing reports leave the affected rows marked absent; the table is
    emitted either way.
    """
    rows: list[dict[str, object]] = []
    for label, first, second in _COMPARISONS:
        a = reports.get(first)
        b = reports.get(second) if second is not None else None
        row: dict[str, object] = {"comparison": label, "minuend": first, "subtrahend": second}
        if a is None or (second is not None and b is None):
            row.update({"delta_rate": None, "delta_magnitude": None, "status": "absent"})
        elif second is None:
            row.update(
                {
                    "delta_rate": a.error_rate,
                    "delta_magnitude": a.error_magnitude,
                    "status": "ok",
                }
            )
        else:
            row.update(
                {
                    "delta_rate": a.error_rate - b.error_rate,
                    "delta_magnitude": a.error_magnitude - b.error_magnitude,
                    "status": "ok",
                }
            )
        rows.append(row)
    return rows


def format_comparison_table(rows: Sequence[Mapping[str, object]], percent: bool = True) -> str:
    """Fixed-width text rendering of the comparison table (3 decimals)."""
    scale = 100.0 if percent else 1.0
    unit = " (pp)" if percent else ""
    lines = [f"{'comparison':<22}{'delta rate' + unit:>18}{'delta |mag|' + unit:>18}"]
    for row in rows:
        if row["status"] == "absent":
            lines.append(f"{row['comparison']:<22}{'absent':>18}{'absent':>18}")
        else:
            lines.append(
                f"{row['comparison']:<22}"
                f"{scale * row['delta_rate']:>18.3f}"
                f"{scale * row['delta_magnitude']:>18.3f}"
            )
    return "\n".join(lines)


@dataclass(frozen=True)
class CorrectionRecord:
    i: str
    j: str
    original: float
    corrected: float
    side: str


def taste_correct(
    index: IndexMatrix, bm: BoundMatrix
) -> tuple[IndexMatrix, tuple[CorrectionRecord, ...]]:
    """Replace every bound-violating entry by the bound midpoint.

    Under symmetric uncertainty about where in [lower, upper] the true
    parity sits, the arithmetic midpoint minimises both squared and
    absolute expected error, and the corrected matrix re-appraises with
    a zero error rate against the same bounds.
    """
    report = appraise(index, bm, Segment.ALL)
    values = index.values.copy()
    ids = {c: k for k, c in enumerate(index.country_ids)}
    log: list[CorrectionRecord] = []
    for violation in report.per_pair:
        i, j = ids[violation.i], ids[violation.j]
        midpoint = 0.5 * (violation.lower + violation.upper)
        log.append(
            CorrectionRecord(
                i=violation.i,
                j=violation.j,
                original=violation.value,
                corrected=midpoint,
                side=violation.side,
            )
        )
        values[i, j] = midpoint
    corrected = replace(index, values=values, meta=dict(index.meta) | {"corrected": True})
    return corrected, tuple(log)


def write_report_csv(report: AppraisalReport, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["i", "j", "value", "lower", "upper", "side", "overshoot"])
        for v in report.per_pair:
            writer.writerow(
                [v.i, v.j, f"{v.value:.12g}", f"{v.lower:.12g}", f"{v.upper:.12g}", v.side, f"{v.overshoot:.12g}"]
            )


def write_reports_json(reports: Mapping[str, AppraisalReport], path) -> None:
    payload = {}
    for method, report in reports.items():
        payload[method] = {
            "segment": report.segment,
            "error_rate": report.error_rate,
            "error_magnitude": report.error_magnitude,
            "upper_violations": report.upper_violations,
            "lower_violations": report.lower_violations,
            "pair_count": report.pair_count,
        }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
