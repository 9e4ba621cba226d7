"""Command-line pipeline: ingest -> build -> rank/reduce/diff/classify/cluster/...

Every output file is written atomically and paired with a
``<output>.manifest.json`` naming the command, the parameter set and the
SHA-256 digests of all inputs and outputs, so identical inputs and flags
reproduce identical bytes.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import date as Date
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_RECEIVER_TYPES,
    TYPE_ISP,
    TYPE_NOT_DISCLOSED,
    TYPE_NSP,
    beta_stability_sweep,
    classification_metrics,
    classify_countries,
    eums_coverage,
    info_ratio_summary,
    top_hypergiants,
    traffic_receivers,
)
from .clustering import cluster_profiles, louvain_bipartite, symmetrize
from .errors import PeergraphError
from .graph import BetaParams, build_graph, fit_breakpoint
from .graphio import (
    atomic_write_text,
    export_edgelist,
    export_gexf,
    export_weight_csv,
    load_graph,
    load_reduced_csv,
    read_subset_file,
    save_graph,
    write_change_csv,
    write_rank_csv,
    write_reduced_csv,
    _csv_text,
)
from .ingest import (
    as_port_capacity,
    capacity_timeseries,
    load_ground_truth,
    parse_snapshot,
    validate_snapshot,
)
from .spectral import google_matrix, pagerank, rank_table, reduced_google_matrix, relative_change

_TYPE_SHORTHAND = {"ISP": TYPE_ISP, "ND": TYPE_NOT_DISCLOSED, "NSP": TYPE_NSP}


def _resolve_out(path: str) -> Path:
    """Relative outputs land in $PEERGRAPH_OUTPUT_DIR when it is set."""
    p = Path(path)
    base = os.environ.get("PEERGRAPH_OUTPUT_DIR")
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def _write_manifests(argv: list[str], params: dict, inputs: list[Path], outputs: list[Path]) -> None:
    manifest = {
        "command": argv,
        "parameters": params,
        "tool_version": __version__,
        "inputs": {str(p): _digest(p) for p in inputs},
        "outputs": {str(p): _digest(p) for p in outputs},
    }
    text = json.dumps(manifest, sort_keys=True, indent=1) + "\n"
    for out in outputs:
        atomic_write_text(Path(str(out) + ".manifest.json"), text)


def _parse_date(text: str) -> Date:
    return Date.fromisoformat(text)


def _parse_grid(spec: str) -> tuple[float, ...]:
    """Grid spec ``start:stop:count`` (inclusive linspace) or a single value."""
    if ":" in spec:
        start, stop, count = spec.split(":")
        return tuple(float(v) for v in np.linspace(float(start), float(stop), int(count)))
    return (float(spec),)


def _read_asn_list(path: str) -> list[int]:
    asns = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        token = line.split("#", 1)[0].strip()
        if token:
            asns.append(int(token.upper().removeprefix("AS")))
    return asns


def _beta_from_args(args) -> BetaParams:
    return BetaParams(balanced=args.beta_b, mostly=args.beta_m, heavy=args.beta_h)


def cmd_ingest(args, argv) -> int:
    snapshot = parse_snapshot(args.snapshot, _parse_date(args.date))
    rep = snapshot.report
    print(
        f"parsed {args.snapshot}: {rep.networks} networks, {rep.ixps} ixps, "
        f"{rep.memberships} memberships"
    )
    dropped = (
        rep.invalid_networks + rep.invalid_ixps + rep.invalid_memberships
        + rep.unresolved_memberships
    )
    print(
        f"dropped: {rep.unresolved_memberships} unresolved memberships, "
        f"{rep.invalid_networks}/{rep.invalid_ixps}/{rep.invalid_memberships} invalid "
        f"net/ix/netixlan rows, {rep.duplicate_networks + rep.duplicate_ixps} duplicates"
    )
    outliers = []
    if args.validate:
        if args.reference_asn is None:
            raise PeergraphError("--validate requires --reference-asn")
        capacities = as_port_capacity(snapshot)
        reference = capacities.get(args.reference_asn, 0.0)
        if reference <= 0:
            raise PeergraphError(
                f"reference AS {args.reference_asn} has no capacity in this snapshot"
            )
        outliers = validate_snapshot(snapshot, reference, factor=args.outlier_factor)
        for o in outliers:
            print(
                f"outlier AS{o.asn} ({o.name}): {o.total_capacity:.0f} Mbit/s "
                f"> {o.threshold:.0f}"
            )
        print(f"outliers above {args.outlier_factor}x reference: {len(outliers)}")

    if args.out:
        out = _resolve_out(args.out)
        summary = {
            "date": snapshot.date.isoformat(),
            "networks": rep.networks,
            "ixps": rep.ixps,
            "memberships": rep.memberships,
            "dropped_total": dropped,
            "report": rep.__dict__,
            "total_capacity_mbit": sum(m.port_size for m in snapshot.memberships),
            "outliers": [
                {"asn": o.asn, "name": o.name, "total_capacity": o.total_capacity}
                for o in outliers
            ],
        }
        atomic_write_text(out, json.dumps(summary, sort_keys=True, indent=1) + "\n")
        _write_manifests(
            argv,
            {"date": args.date, "validate": args.validate, "outlier_factor": args.outlier_factor},
            [Path(args.snapshot)],
            [out],
        )
    return 0


def cmd_build(args, argv) -> int:
    snapshot = parse_snapshot(args.snapshot, _parse_date(args.date))
    g = build_graph(snapshot, _beta_from_args(args), min_members=args.min_members)
    out = _resolve_out(args.out)
    save_graph(g, out)
    print(f"built graph: {g.n_as} ASes, {g.n_ixp} IXPs, {len(g.edges)} links -> {out}")
    _write_manifests(
        argv,
        {
            "date": args.date,
            "beta": {"balanced": args.beta_b, "mostly": args.beta_m, "heavy": args.beta_h},
            "min_members": args.min_members,
        },
        [Path(args.snapshot)],
        [out],
    )
    return 0


def cmd_rank(args, argv) -> int:
    g = load_graph(args.graph)
    G = google_matrix(g, alpha=args.alpha, direction=args.direction)
    pr = pagerank(G, tol=args.tol)
    keep = None
    if args.only:
        keep = (lambda i: g.kinds[i] == args.only)
    table = rank_table(pr, g.labels, g.kinds, g.names, keep=keep)
    out = _resolve_out(args.out)
    write_rank_csv(table, out)
    print(f"ranked {len(table)} nodes ({args.direction}) in {pr.iterations} iterations -> {out}")
    _write_manifests(
        argv,
        {"direction": args.direction, "alpha": args.alpha, "tol": args.tol, "only": args.only},
        [Path(args.graph)],
        [out],
    )
    return 0


def cmd_reduce(args, argv) -> int:
    g = load_graph(args.graph)
    subset = read_subset_file(args.subset, g)
    G = google_matrix(g, alpha=args.alpha, direction=args.direction)
    R = reduced_google_matrix(G, subset, tol=args.tol, method=args.method)
    if g.date is not None:
        from dataclasses import replace

        R = replace(R, date=g.date)
    if args.censor_diagonal:
        from .spectral import censor_diagonal

        R = censor_diagonal(R)
    out = _resolve_out(args.out)
    write_reduced_csv(R, out)
    print(f"reduced matrix over {len(subset)} nodes ({args.direction}) -> {out}")
    _write_manifests(
        argv,
        {
            "direction": args.direction,
            "alpha": args.alpha,
            "tol": args.tol,
            "method": args.method,
            "censor_diagonal": args.censor_diagonal,
        },
        [Path(args.graph), Path(args.subset)],
        [out],
    )
    return 0


def cmd_diff(args, argv) -> int:
    earlier = load_reduced_csv(args.reduced[0])
    later = load_reduced_csv(args.reduced[1])
    cap = tuple(args.cap) if args.cap else None
    change = relative_change(earlier, later, cap=cap)
    out = _resolve_out(args.out)
    write_change_csv(change, out, capped=cap is not None)
    undefined = int(change.undefined.sum())
    print(f"diffed {len(change.labels)}x{len(change.labels)} cells ({undefined} undefined) -> {out}")
    _write_manifests(
        argv,
        {"cap": list(cap) if cap else None},
        [Path(p) for p in args.reduced],
        [out],
    )
    return 0


def cmd_classify(args, argv) -> int:
    g = load_graph(args.graph)
    assignment = classify_countries(g, rule=args.rule)
    rows = [["asn", "name", "country"]]
    for rec in g.as_nodes:
        rows.append([rec.asn, rec.name, assignment.assignments[rec.asn]])
    out = _resolve_out(args.out)
    atomic_write_text(out, _csv_text(rows))
    outputs = [out]
    tied = sum(1 for c in assignment.assignments.values() if c == "Tied")
    print(f"classified {g.n_as} ASes ({tied} tied) -> {out}")

    inputs = [Path(args.graph)]
    if args.truth:
        truth = load_ground_truth(asorg_path=args.truth)
        countries = args.countries.split(",") if args.countries else sorted(
            assignment.countries()
        )
        report = classification_metrics(assignment, truth, countries)
        metric_rows = [["country", "precision", "recall", "f1", "support"]]
        for row in report.per_country:
            metric_rows.append(
                [row.country, repr(row.precision), repr(row.recall), repr(row.f1), row.support]
            )
        metrics_out = _resolve_out(args.metrics_out or (str(out) + ".metrics.csv"))
        atomic_write_text(metrics_out, _csv_text(metric_rows))
        outputs.append(metrics_out)
        inputs.append(Path(args.truth))
        print(f"classification metrics for {len(countries)} countries -> {metrics_out}")

    _write_manifests(argv, {"rule": args.rule}, inputs, outputs)
    return 0


def cmd_hypergiants(args, argv) -> int:
    g = load_graph(args.graph)
    table = top_hypergiants(g, k=args.k, alpha=args.alpha, tol=args.tol)
    rows = [["rank", "node", "name", "value"]]
    rows.extend([e.rank, e.label, e.name, repr(e.value)] for e in table)
    out = _resolve_out(args.out)
    atomic_write_text(out, _csv_text(rows))
    print(f"top {args.k} diffusive ASes -> {out}")
    _write_manifests(
        argv, {"k": args.k, "alpha": args.alpha, "tol": args.tol}, [Path(args.graph)], [out]
    )
    return 0


def cmd_receivers(args, argv) -> int:
    g = load_graph(args.graph)
    countries = [c.strip().upper() for c in args.countries.split(",") if c.strip()]
    types = frozenset(
        _TYPE_SHORTHAND.get(t.strip().upper(), t.strip()) for t in args.types.split(",")
    )
    exclusions = _read_asn_list(args.exclude) if args.exclude else []
    assignment = classify_countries(g, rule=args.rule)
    giants = top_hypergiants(g, k=args.hypergiants_k, alpha=args.alpha, tol=args.tol)
    giant_asns = [int(e.label.removeprefix("AS")) for e in giants]
    receivers = traffic_receivers(
        g,
        assignment,
        countries,
        hypergiant_asns=giant_asns,
        exclusions=exclusions,
        types=types,
        alpha=args.alpha,
        tol=args.tol,
    )
    rows = [["country", "rank", "node", "name", "value"]]
    for country in countries:
        for e in receivers[country]:
            rows.append([country, e.rank, e.label, e.name, repr(e.value)])
    out = _resolve_out(args.out)
    atomic_write_text(out, _csv_text(rows))
    outputs = [out]
    inputs = [Path(args.graph)] + ([Path(args.exclude)] if args.exclude else [])
    print(f"traffic receivers for {len(countries)} countries -> {out}")

    if args.apnic:
        truth = load_ground_truth(apnic_paths=args.apnic)
        coverage = eums_coverage(receivers, truth)
        cov_rows = [["country", "eums_pct"]]
        cov_rows.extend([c, repr(coverage[c])] for c in countries)
        coverage_out = _resolve_out(args.coverage_out or (str(out) + ".coverage.csv"))
        atomic_write_text(coverage_out, _csv_text(cov_rows))
        outputs.append(coverage_out)
        inputs.extend(Path(p) for p in args.apnic)
        print(f"market-share coverage -> {coverage_out}")

    _write_manifests(
        argv,
        {
            "countries": countries,
            "types": sorted(types),
            "hypergiants_k": args.hypergiants_k,
            "rule": args.rule,
            "alpha": args.alpha,
            "tol": args.tol,
        },
        inputs,
        outputs,
    )
    return 0


def cmd_sweep(args, argv) -> int:
    snapshot = parse_snapshot(args.snapshot, _parse_date(args.date))
    probes = _read_asn_list(args.probes) if args.probes else None
    report = beta_stability_sweep(
        snapshot,
        grid_heavy=_parse_grid(args.grid_h),
        grid_mostly=_parse_grid(args.grid_m),
        probes=probes,
        beta_default=BetaParams(balanced=args.beta_b, mostly=args.beta_m, heavy=args.beta_h),
        alpha=args.alpha,
        tol=args.tol,
        threads=args.threads,
    )
    rows = [[
        "asn", "name", "class", "pr_value", "pr_rank", "delta_pr_rank",
        "rpr_value", "rpr_rank", "delta_rpr_rank", "delta_pr_value", "delta_rpr_value",
    ]]
    for row in report.rows:
        rows.append([
            row.asn, row.name, row.traffic_class.short, repr(row.pr_value), row.pr_rank,
            row.delta_pr_rank, repr(row.rpr_value), row.rpr_rank, row.delta_rpr_rank,
            repr(row.delta_pr_value), repr(row.delta_rpr_value),
        ])
    out = _resolve_out(args.out)
    atomic_write_text(out, _csv_text(rows))
    print(
        f"swept {len(report.grid_heavy)}x{len(report.grid_mostly)} grid points "
        f"for {len(report.rows)} probes -> {out}"
    )
    _write_manifests(
        argv,
        {
            "grid_h": args.grid_h,
            "grid_m": args.grid_m,
            "beta_default": {"balanced": args.beta_b, "mostly": args.beta_m, "heavy": args.beta_h},
            "alpha": args.alpha,
            "tol": args.tol,
        },
        [Path(args.snapshot)] + ([Path(args.probes)] if args.probes else []),
        [out],
    )
    return 0


def cmd_cluster(args, argv) -> int:
    g = load_graph(args.graph)
    sym = symmetrize(g)
    partition = louvain_bipartite(sym, seed=args.seed, shuffle=args.shuffle)
    rows = [["node", "type", "name", "community"]]
    for i, label in enumerate(g.labels):
        rows.append([label, g.kinds[i], g.names[i], int(partition.communities[i])])
    out = _resolve_out(args.out)
    atomic_write_text(out, _csv_text(rows))
    outputs = [out]
    print(
        f"{partition.n_communities} communities, modularity {partition.modularity:.6f} -> {out}"
    )

    if args.profile_out:
        profiles = cluster_profiles(partition, g)
        prof_rows = [[
            "community", "capacity_share_pct", "ixp_share_pct", "n_ixps", "n_as",
            "n_countries", "countries",
        ]]
        for p in profiles:
            table = "|".join(f"{c}:{n}" for c, n in p.country_counts)
            prof_rows.append([
                p.community, repr(p.capacity_share_pct), repr(p.ixp_share_pct),
                p.n_ixps, p.n_as, p.n_countries, table,
            ])
        profile_out = _resolve_out(args.profile_out)
        atomic_write_text(profile_out, _csv_text(prof_rows))
        outputs.append(profile_out)
        print(f"cluster profiles -> {profile_out}")

    _write_manifests(
        argv, {"seed": args.seed, "shuffle": args.shuffle}, [Path(args.graph)], outputs
    )
    return 0


def cmd_export(args, argv) -> int:
    g = load_graph(args.graph)
    out = _resolve_out(args.out)
    if args.format == "gexf":
        outputs = [export_gexf(g, out)]
    elif args.format == "edgelist":
        outputs = export_edgelist(g, out)
    else:
        outputs = [export_weight_csv(g, out)]
    print(f"exported {args.format} -> {', '.join(str(p) for p in outputs)}")
    _write_manifests(argv, {"format": args.format}, [Path(args.graph)], outputs)
    return 0


def cmd_timeseries(args, argv) -> int:
    pairs = sorted(
        ((Path(path), _parse_date(date)) for path, date in args.snapshot),
        key=lambda item: item[1],
    )
    snapshots = [parse_snapshot(path, date) for path, date in pairs]
    series = capacity_timeseries(snapshots)
    rows = [["date", "total_capacity_mbit"]]
    rows.extend([d.isoformat(), repr(v)] for d, v in series)
    out = _resolve_out(args.out)
    atomic_write_text(out, _csv_text(rows))
    print(f"capacity series over {len(series)} snapshots -> {out}")

    if args.fit:
        fit = fit_breakpoint(series)
        # Input unit is Mbit/s per day; report Gbit/day alongside.
        print(
            f"breakpoint {fit.breakpoint}: slopes {fit.slope_before:.6g} / "
            f"{fit.slope_after:.6g} Mbit/day "
            f"({fit.slope_before / 1e3:.4g} / {fit.slope_after / 1e3:.4g} Gbit/day)"
        )
    _write_manifests(
        argv,
        {"fit": args.fit, "dates": [d.isoformat() for _, d in pairs]},
        [path for path, _ in pairs],
        [out],
    )
    return 0


def _add_beta_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--beta-h", type=float, default=0.95, help="beta for Heavy classes")
    parser.add_argument("--beta-m", type=float, default=0.75, help="beta for Mostly classes")
    parser.add_argument(
        "--beta-b", type=float, default=0.0, help="beta for Balanced/Not Disclosed"
    )


def _add_spectral_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, default=0.85, help="damping factor")
    parser.add_argument("--tol", type=float, default=1e-10, help="L1 convergence tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peergraph",
        description="Build and analyze the weighted directed bipartite AS-IXP peering graph.",
    )
    parser.add_argument("--threads", type=int, default=1, help="parallel workers (sweep)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a snapshot dump and report counts")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--date", required=True, help="YYYY-MM-DD")
    p.add_argument("--validate", action="store_true", help="screen for capacity outliers")
    p.add_argument("--reference-asn", type=int, default=None)
    p.add_argument("--outlier-factor", type=float, default=10.0)
    p.add_argument("--out", default=None, help="optional summary JSON")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build", help="build the capacity graph from a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--date", required=True)
    _add_beta_flags(p)
    p.add_argument("--min-members", type=int, default=1, help="drop IXPs with fewer members")
    p.add_argument("--out", required=True, help="graph JSON output")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("rank", help="PageRank / reverse PageRank table")
    p.add_argument("--graph", required=True)
    p.add_argument("--direction", choices=["forward", "reverse"], default="forward")
    _add_spectral_flags(p)
    p.add_argument("--only", choices=["AS", "IXP"], default=None, help="restrict and re-rank")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("reduce", help="reduced Google matrix for a node subset")
    p.add_argument("--graph", required=True)
    p.add_argument("--subset", required=True, help="file of AS numbers / AS-IX labels")
    p.add_argument("--direction", choices=["forward", "reverse"], default="reverse")
    p.add_argument("--censor-diagonal", action="store_true")
    p.add_argument("--method", choices=["direct", "series"], default="direct")
    _add_spectral_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("diff", help="relative change between two reduced matrices")
    p.add_argument("--reduced", nargs=2, required=True, metavar=("M1", "M2"))
    p.add_argument("--cap", nargs=2, type=float, default=None, metavar=("LO", "HI"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("classify", help="country attribution from IXP memberships")
    p.add_argument("--graph", required=True)
    p.add_argument("--rule", choices=["strict", "plurality"], default="strict")
    p.add_argument("--truth", default=None, help="asn,country rows for validation")
    p.add_argument("--countries", default=None, help="comma list for the metrics table")
    p.add_argument("--metrics-out", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("hypergiants", help="top diffusive ASes by reverse PageRank")
    p.add_argument("--graph", required=True)
    p.add_argument("--k", type=int, default=20)
    _add_spectral_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hypergiants)

    p = sub.add_parser("receivers", help="per-country top traffic receivers")
    p.add_argument("--graph", required=True)
    p.add_argument("--countries", required=True, help="comma list, e.g. US,DE,FR")
    p.add_argument("--types", default="ISP,ND", help="business types (ISP,ND[,NSP] or full names)")
    p.add_argument("--exclude", default=None, help="file of AS numbers to drop")
    p.add_argument("--hypergiants-k", type=int, default=20)
    p.add_argument("--rule", choices=["strict", "plurality"], default="strict")
    _add_spectral_flags(p)
    p.add_argument("--apnic", nargs="+", default=None, help="market-share tables")
    p.add_argument("--coverage-out", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_receivers)

    p = sub.add_parser("sweep", help="rank stability over a beta grid")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--date", required=True)
    p.add_argument("--grid-h", default="0.9:1.0:20", help="start:stop:count (1.0 is excluded)")
    p.add_argument("--grid-m", default="0.6:0.8:20")
    _add_beta_flags(p)
    _add_spectral_flags(p)
    p.add_argument("--probes", default=None, help="file of probe AS numbers")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cluster", help="bipartite Louvain communities")
    p.add_argument("--graph", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shuffle", action="store_true", help="randomize the visit order")
    p.add_argument("--profile-out", default=None, help="per-cluster country table")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("export", help="graph export for external tools")
    p.add_argument("--graph", required=True)
    p.add_argument("--format", choices=["gexf", "edgelist", "csv"], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("timeseries", help="total port capacity across snapshots")
    p.add_argument(
        "--snapshot",
        nargs=2,
        action="append",
        required=True,
        metavar=("PATH", "DATE"),
        help="repeatable snapshot/date pair",
    )
    p.add_argument("--fit", action="store_true", help="piecewise-linear breakpoint fit")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_timeseries)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, ["peergraph", *argv])
    except (PeergraphError, OSError, KeyError, ValueError) as exc:
        message = str(exc).strip() or exc.__class__.__name__
        print(f"peergraph: {message.splitlines()[0]}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
