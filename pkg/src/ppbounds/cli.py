"""Command-line front end.

Each pipeline stage is independently invokable (``ingest``, ``check``,
``refset``, ``bounds``, ``indices``, ``appraise``, ``gss``, ``correct``,
``aggregate``) and ``pipeline`` runs them end to end into an output
directory with a manifest of input/output hashes. Every flag can also
be supplied through an environment variable with the ``PPBOUNDS_``
prefix (e.g. ``PPBOUNDS_BASE=USA``).

Exit codes: 0 success, 1 consistency verdict (a ``check`` failure or a
refused bounds computation), 2 usage or input errors, 3 numerical
faults.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .aggregates import gini_from_curve, lorenz, world_output, write_lorenz_csv, write_summary_json
from .appraisal import (
    Segment,
    appraise,
    comparison_table,
    format_comparison_table,
    taste_correct,
    write_report_csv,
    write_reports_json,
)
from .bounds import (
    BoundKind,
    bound_improvement_stats,
    bound_matrix,
    write_bound_csv,
    write_bound_json,
)
from .dataset import PooledDataset, convert, exclusion_report, ingest_icp, load_direct, write_direct
from .errors import (
    ConfigurationError,
    ConsistencyError,
    NumericalError,
    PPBoundsError,
)
from .gss import gss_full, gss_homothetic, gss_with_bounds, write_forecast_csv, write_gss_csv
from .indices import Method, all_indices, geks, write_base_table, write_index_csv, write_index_json
from .rpgraph import (
    build_graph,
    check_garp,
    check_harp,
    export_adjacency_json,
    export_edge_list,
    greedy_homothetic_reference_set,
    max_reference_set,
    money_pump_index,
)

__all__ = ["RunConfig", "main", "entrypoint"]

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_ENV_PREFIX = "PPBOUNDS_"


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for one invocation (recorded in the manifest)."""

    command: str
    direct: str | None = None
    ppp: str | None = None
    expenditure: str | None = None
    aux: str | None = None
    base: str | None = None
    bound_style: str = "laspeyres"
    segment: str = Segment.ALL
    homothetic: bool = False
    exact_subset: bool = False
    gk_solver: str = "fixedpoint"
    threads: int = 1
    out: str | None = None
    seed: int = 0
    figures: bool = True

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        fields = {k: v for k, v in vars(args).items() if k in cls.__dataclass_fields__}
        return cls(**fields)


def _env_default(name: str, fallback):
    raw = os.environ.get(_ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return fallback
    if isinstance(fallback, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(fallback, int):
        return int(raw)
    return raw


def _add_input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--direct", default=_env_default("direct", None),
                        help="dataset in direct CSV form (country,p_1..p_K,q_1..q_K)")
    parser.add_argument("--ppp", default=_env_default("ppp", None),
                        help="per-heading parity CSV (header: country codes)")
    parser.add_argument("--expenditure", default=_env_default("expenditure", None),
                        help="per-heading nominal expenditure CSV")
    parser.add_argument("--aux", default=_env_default("aux", None),
                        help="auxiliary CSV: country,population,market_rate")
    parser.add_argument("--base", default=_env_default("base", None),
                        help="base country code (defaults to the first row)")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bound-style", dest="bound_style",
                        choices=["laspeyres", "paasche"],
                        default=_env_default("bound_style", "laspeyres"),
                        help="which bound family drives reports")
    parser.add_argument("--segment", choices=[Segment.ALL, Segment.BASE_IN_RC, Segment.BASE_OUT_RC],
                        default=_env_default("segment", Segment.ALL),
                        help="restrict appraisal to pairs by anchor membership")
    parser.add_argument("--homothetic", action="store_true",
                        default=_env_default("homothetic", False),
                        help="use the homothetic consistency test / index variant")
    parser.add_argument("--exact-subset", dest="exact_subset", action="store_true",
                        default=_env_default("exact_subset", False),
                        help="exact maximal reference set (up to 15 countries)")
    parser.add_argument("--gk-solver", dest="gk_solver", choices=["fixedpoint", "linear"],
                        default=_env_default("gk_solver", "fixedpoint"))
    parser.add_argument("--threads", type=int, default=_env_default("threads", 1),
                        help="worker threads for pairwise sweeps")
    parser.add_argument("--out", default=_env_default("out", None), help="output directory")
    parser.add_argument("--seed", type=int, default=_env_default("seed", 0),
                        help="seed recorded in the manifest (for synthetic fixtures)")
    parser.add_argument("--no-figures", dest="figures", action="store_false",
                        default=_env_default("figures", True),
                        help="skip rendering PNG figures")


def _load_dataset(config: RunConfig) -> PooledDataset:
    if config.direct:
        data = load_direct(config.direct, base=config.base, aux_file=config.aux)
    elif config.ppp and config.expenditure:
        base = config.base
        if base is None:
            raise ConfigurationError("--base is required with --ppp/--expenditure")
        raw = ingest_icp(config.ppp, config.expenditure, base=base, aux_file=config.aux)
        data = convert(raw)
    else:
        raise ConfigurationError("supply --direct or both --ppp and --expenditure")
    if config.base:
        data = data.with_base(config.base)
    return data


def _outdir(config: RunConfig) -> Path:
    if not config.out:
        raise ConfigurationError("--out is required for this command")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _write_json(payload, path: Path) -> None:
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _cmd_ingest(config: RunConfig) -> int:
    if not (config.ppp and config.expenditure and config.base):
        raise ConfigurationError("ingest needs --ppp, --expenditure and --base")
    out = _outdir(config)
    raw = ingest_icp(config.ppp, config.expenditure, base=config.base, aux_file=config.aux)
    report = exclusion_report(raw)
    data = convert(raw)
    write_direct(data, out / "dataset.csv")
    _write_json(
        {
            "kept_countries": list(report.kept_countries),
            "dropped_countries": list(report.dropped_countries),
            "kept_headings": list(report.kept_headings),
            "dropped_headings": list(report.dropped_headings),
        },
        out / "ingest_report.json",
    )
    print(f"kept {data.n} countries x {data.k} headings -> {out / 'dataset.csv'}")
    if report.dropped_countries:
        print(f"dropped countries: {', '.join(report.dropped_countries)}")
    if report.dropped_headings:
        print(f"dropped headings: {', '.join(report.dropped_headings)}")
    return EXIT_OK


def _cmd_check(config: RunConfig) -> int:
    data = _load_dataset(config)
    graph = build_graph(data)
    verdict = check_harp(graph) if config.homothetic else check_garp(graph)
    label = "homothetic cycle test" if config.homothetic else "cycle consistency"
    if verdict.satisfied:
        print(f"{label}: SATISFIED ({data.n} countries)")
        return EXIT_OK
    witness = verdict.witness
    assert witness is not None
    print(f"{label}: VIOLATED")
    print(f"witness cycle: {witness.format_ids(data.country_ids)}")
    print(f"cycle weight product: {witness.product():.6f}")
    try:
        mpi = money_pump_index(graph, witness)
        print(f"money pump index: {100 * mpi:.3f}% of cycle expenditure")
    except PPBoundsError:
        pass  # a homothetic witness need not be an affordability cycle
    return EXIT_VERDICT


def _cmd_refset(config: RunConfig) -> int:
    data = _load_dataset(config)
    if config.homothetic:
        members = greedy_homothetic_reference_set(data)
    else:
        members = max_reference_set(build_graph(data), exact=config.exact_subset)
    ids = [data.country_ids[i] for i in members]
    print(f"reference set ({len(ids)} of {data.n}): {', '.join(ids)}")
    if config.out:
        out = _outdir(config)
        with open(out / "refset.csv", "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["country", "in_refset"])
            for c in data.country_ids:
                writer.writerow([c, str(c in ids).lower()])
        print(f"wrote {out / 'refset.csv'}")
    return EXIT_OK


def _kind(config: RunConfig) -> BoundKind:
    return BoundKind.LASPEYRES if config.bound_style == "laspeyres" else BoundKind.PAASCHE


def _cmd_bounds(config: RunConfig) -> int:
    data = _load_dataset(config)
    out = _outdir(config)
    bm = bound_matrix(data, kind=_kind(config), threads=config.threads)
    write_bound_csv(bm, out / f"bounds_{config.bound_style}.csv")
    write_bound_json(bm, out / f"bounds_{config.bound_style}.json")
    stats = bound_improvement_stats(bm)
    _write_json(
        {
            "mean_width_improvement": stats.mean_width_improvement,
            "mean_lower_share": stats.mean_lower_share,
            "mean_upper_share": stats.mean_upper_share,
            "skipped_pairs": stats.skipped_pairs,
            "per_country_width": stats.per_country_width,
        },
        out / "bound_improvements.json",
    )
    graph = build_graph(data)
    export_edge_list(graph, out / "graph_edges.csv")
    export_adjacency_json(graph, out / "graph_adjacency.json")
    print(
        f"bounds ({config.bound_style}) for {data.n} countries; mean width improvement "
        f"{100 * stats.mean_width_improvement:.1f}%"
    )
    return EXIT_OK


def _cmd_indices(config: RunConfig) -> int:
    data = _load_dataset(config)
    out = _outdir(config)
    matrices = all_indices(data, gk_solver=config.gk_solver)
    write_index_csv(matrices, out / "indices.csv")
    write_index_json(matrices, out / "indices.json")
    write_base_table(matrices, data.base_country, out / "indices_vs_base.csv")
    print(f"computed {', '.join(matrices)} for {data.n} countries (base {data.base_country})")
    return EXIT_OK


def _appraise_all(data: PooledDataset, config: RunConfig):
    result, bm = gss_with_bounds(data, exact_subset=config.exact_subset, threads=config.threads)
    matrices = all_indices(data, gk_solver=config.gk_solver)
    matrices[Method.GSS] = result.as_index_matrix()
    reports = {m: appraise(matrices[m], bm, config.segment) for m in matrices}
    return result, bm, matrices, reports


def _cmd_appraise(config: RunConfig) -> int:
    data = _load_dataset(config)
    out = _outdir(config)
    _, bm, matrices, reports = _appraise_all(data, config)
    write_reports_json(reports, out / "appraisal.json")
    for method, report in reports.items():
        write_report_csv(report, out / f"violations_{method}.csv")
    rows = comparison_table(reports)
    _write_json(rows, out / "comparison.json")
    table = format_comparison_table(rows)
    (out / "comparison.txt").write_text(table + "\n")
    print(f"segment {config.segment}: error rates (%)")
    for method, report in sorted(reports.items(), key=lambda kv: kv[1].error_rate):
        print(
            f"  {method:<16}{100 * report.error_rate:8.3f}   "
            f"|magnitude| {100 * report.error_magnitude:8.3f}"
        )
    print(table)
    return EXIT_OK


def _cmd_gss(config: RunConfig) -> int:
    data = _load_dataset(config)
    out = _outdir(config)
    if config.homothetic:
        members = greedy_homothetic_reference_set(data)
        matrix, hbm = gss_homothetic(data, members)
        write_index_csv(matrix, out / "gss_homothetic.csv")
        write_bound_csv(hbm, out / "gss_homothetic_bounds.csv")
        print(f"homothetic star index over {len(members)} of {data.n} countries")
        return EXIT_OK
    result = gss_full(data, exact_subset=config.exact_subset, threads=config.threads)
    write_gss_csv(result, out / "gss.csv")
    write_forecast_csv(result, out / "gss_forecasts.csv")
    print(f"hub {len(result.hub)} of {data.n} countries; outside: "
          f"{', '.join(e.country_id for e in result.outside) or 'none'}")
    if result.no_extension:
        print(f"no extension for: {', '.join(result.no_extension)}")
    return EXIT_OK


def _cmd_correct(config: RunConfig) -> int:
    data = _load_dataset(config)
    out = _outdir(config)
    _, bm, matrices, _ = _appraise_all(data, config)
    corrected, log = taste_correct(matrices[Method.GEKS], bm)
    write_index_csv({f"{Method.GEKS}_corrected": corrected}, out / "corrected_geks.csv")
    with open(out / "corrections.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["i", "j", "original", "corrected", "side"])
        for record in log:
            writer.writerow(
                [record.i, record.j, f"{record.original:.12g}", f"{record.corrected:.12g}", record.side]
            )
    print(f"corrected {len(log)} entries of {Method.GEKS}")
    return EXIT_OK


def _cmd_aggregate(config: RunConfig) -> int:
    data = _load_dataset(config)
    out = _outdir(config)
    result = gss_full(data, exact_subset=config.exact_subset, threads=config.threads)
    matrices = {Method.GEKS: geks(data), Method.GSS: result.as_index_matrix()}
    outputs = {}
    curves = {}
    ginis = {}
    pops = data.populations()
    for method, matrix in matrices.items():
        output = world_output(data, matrix)
        outputs[method] = output
        values = [output.per_capita[c] for c in data.country_ids]
        curves[method] = lorenz(values, pops, labels=data.country_ids)
        ginis[method] = gini_from_curve(curves[method])
    write_lorenz_csv(curves, out / "lorenz.csv")
    write_summary_json(outputs, ginis, out / "aggregates.json")
    if config.figures:
        from .figures import lorenz_figure

        lorenz_figure(curves, out / "lorenz.png")
    for method in matrices:
        print(f"{method}: world output {outputs[method].total:.6g}, gini {ginis[method]:.4f}")
    return EXIT_OK


def _cmd_pipeline(config: RunConfig) -> int:
    out = _outdir(config)
    failures: list[dict[str, str]] = []
    stages: list[str] = []
    artifacts: dict[str, str] = {}

    def record(path: Path, hash_it: bool = True) -> None:
        artifacts[path.name] = _sha256(path) if hash_it else "unhashed"

    data = _load_dataset(config)
    write_direct(data, out / "dataset.csv")
    record(out / "dataset.csv")
    stages.append("load")

    graph = build_graph(data)
    verdict = check_garp(graph)
    check_payload = {"satisfied": verdict.satisfied}
    if verdict.witness is not None:
        check_payload["witness"] = list(verdict.witness.as_ids(data.country_ids))
        check_payload["money_pump_index"] = money_pump_index(graph, verdict.witness)
    harp_verdict = check_harp(graph)
    check_payload["homothetic_satisfied"] = harp_verdict.satisfied
    _write_json(check_payload, out / "consistency.json")
    record(out / "consistency.json")
    stages.append("check")

    members = max_reference_set(graph, exact=config.exact_subset)
    ids = [data.country_ids[i] for i in members]
    with open(out / "refset.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["country", "in_refset"])
        for c in data.country_ids:
            writer.writerow([c, str(c in ids).lower()])
    record(out / "refset.csv")
    stages.append("refset")

    refset_data = data.subset(members)
    refset_bounds = None
    try:
        for kind, name in ((BoundKind.LASPEYRES, "laspeyres"), (BoundKind.PAASCHE, "paasche")):
            bm_kind = bound_matrix(refset_data, kind=kind, threads=config.threads)
            if kind is BoundKind.LASPEYRES:
                refset_bounds = bm_kind
            write_bound_csv(bm_kind, out / f"bounds_{name}.csv")
            record(out / f"bounds_{name}.csv")
        stats = bound_improvement_stats(refset_bounds)
        _write_json(
            {
                "mean_width_improvement": stats.mean_width_improvement,
                "mean_lower_share": stats.mean_lower_share,
                "mean_upper_share": stats.mean_upper_share,
                "skipped_pairs": stats.skipped_pairs,
                "per_country_width": stats.per_country_width,
            },
            out / "bound_improvements.json",
        )
        record(out / "bound_improvements.json")
        stages.append("bounds")
    except PPBoundsError as err:
        failures.append({"stage": "bounds", "error": str(err)})

    matrices = {}
    try:
        matrices = all_indices(data, gk_solver=config.gk_solver)
        if np.isnan(data.market_rates()).any():
            failures.append(
                {"stage": "indices", "error": "market rates absent; market_rate index skipped"}
            )
        stages.append("indices")
    except PPBoundsError as err:
        failures.append({"stage": "indices", "error": str(err)})

    reports = {}
    try:
        result, bm = gss_with_bounds(data, exact_subset=config.exact_subset, threads=config.threads)
        matrices[Method.GSS] = result.as_index_matrix()
        write_gss_csv(result, out / "gss.csv")
        write_forecast_csv(result, out / "gss_forecasts.csv")
        record(out / "gss.csv")
        record(out / "gss_forecasts.csv")
        stages.append("gss")

        write_index_csv(matrices, out / "indices.csv")
        write_index_json(matrices, out / "indices.json")
        write_base_table(matrices, data.base_country, out / "indices_vs_base.csv")
        for name in ("indices.csv", "indices.json", "indices_vs_base.csv"):
            record(out / name)

        reports = {m: appraise(matrices[m], bm, config.segment) for m in matrices}
        write_reports_json(reports, out / "appraisal.json")
        for method, report in reports.items():
            write_report_csv(report, out / f"violations_{method}.csv")
            record(out / f"violations_{method}.csv")
        rows = comparison_table(reports)
        _write_json(rows, out / "comparison.json")
        (out / "comparison.txt").write_text(format_comparison_table(rows) + "\n")
        record(out / "appraisal.json")
        record(out / "comparison.json")
        record(out / "comparison.txt")
        stages.append("appraise")

        corrected, log = taste_correct(matrices[Method.GEKS], bm)
        write_index_csv({f"{Method.GEKS}_corrected": corrected}, out / "corrected_geks.csv")
        with open(out / "corrections.csv", "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["i", "j", "original", "corrected", "side"])
            for rec in log:
                writer.writerow(
                    [rec.i, rec.j, f"{rec.original:.12g}", f"{rec.corrected:.12g}", rec.side]
                )
        record(out / "corrected_geks.csv")
        record(out / "corrections.csv")
        stages.append("correct")
    except PPBoundsError as err:
        failures.append({"stage": "gss", "error": str(err)})
        result = None

    curves = {}
    if np.isnan(data.populations()).any():
        failures.append(
            {"stage": "aggregate", "error": "population data absent; aggregates skipped"}
        )
    elif result is not None and Method.GEKS in matrices:
        try:
            agg_matrices = {
                Method.GEKS: matrices[Method.GEKS],
                Method.GSS: result.as_index_matrix(),
            }
            outputs = {}
            ginis = {}
            pops = data.populations()
            for method, matrix in agg_matrices.items():
                output = world_output(data, matrix)
                outputs[method] = output
                values = [output.per_capita[c] for c in data.country_ids]
                curves[method] = lorenz(values, pops, labels=data.country_ids)
                ginis[method] = gini_from_curve(curves[method])
            write_lorenz_csv(curves, out / "lorenz.csv")
            write_summary_json(outputs, ginis, out / "aggregates.json")
            record(out / "lorenz.csv")
            record(out / "aggregates.json")
            stages.append("aggregate")
        except PPBoundsError as err:
            curves = {}
            failures.append({"stage": "aggregate", "error": str(err)})

    if config.figures:
        try:
            from .figures import error_rate_figure, improvement_figure, lorenz_figure

            if curves:
                lorenz_figure(curves, out / "lorenz.png")
                record(out / "lorenz.png", hash_it=False)
            if reports:
                error_rate_figure(reports, out / "error_rates.png")
                record(out / "error_rates.png", hash_it=False)
            if refset_bounds is not None:
                improvement_figure(
                    bound_improvement_stats(refset_bounds),
                    out / "bound_improvements.png",
                )
                record(out / "bound_improvements.png", hash_it=False)
            stages.append("figures")
        except Exception as err:  # figures never sink the run
            failures.append({"stage": "figures", "error": str(err)})

    inputs = {}
    for name in ("direct", "ppp", "expenditure", "aux"):
        path = getattr(config, name)
        if path:
            inputs[name] = _sha256(Path(path))
    # The output directory is where the manifest lives; leaving it out
    # keeps reruns into different directories byte-identical.
    recorded = {k: v for k, v in asdict(config).items() if k != "out"}
    manifest = {
        "config": recorded,
        "version": __version__,
        "numpy": np.__version__,
        "inputs": inputs,
        "outputs": artifacts,
        "stages": stages,
        "failures": failures,
        "seed": config.seed,
    }
    _write_json(manifest, out / "manifest.json")
    print(f"pipeline finished: {len(stages)} stages, {len(failures)} recorded failures -> {out}")
    for failure in failures:
        print(f"  [{failure['stage']}] {failure['error']}")
    hard = [f for f in failures if "skipped" not in f["error"] and "absent" not in f["error"]]
    return EXIT_USAGE if hard else EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "check": _cmd_check,
    "refset": _cmd_refset,
    "bounds": _cmd_bounds,
    "indices": _cmd_indices,
    "appraise": _cmd_appraise,
    "gss": _cmd_gss,
    "correct": _cmd_correct,
    "aggregate": _cmd_aggregate,
    "pipeline": _cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppbounds",
        description="Revealed-preference cost-of-living bounds and star-system parities.",
    )
    parser.add_argument("--version", action="version", version=f"ppbounds {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        _add_input_flags(p)
        _add_common_flags(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = RunConfig.from_args(args)
    handler = _COMMANDS[args.command]
    try:
        return handler(config)
    except ConsistencyError as err:
        print(f"consistency refusal: {err}", file=sys.stderr)
        return EXIT_VERDICT
    except NumericalError as err:
        print(f"numerical fault: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (PPBoundsError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:  # pragma: no cover - thin wrapper
    sys.exit(main())
