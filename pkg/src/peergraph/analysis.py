"""Ecosystem analyses on top of the capacity graph and its spectral metrics.

Covers the country attribution of ASes from their IXP memberships, its
validation against registration data, the extraction of highly diffusive
ASes (reverse PageRank) and of per-country traffic receivers (forward
PageRank), end-user market-share coverage, traffic-class summaries and
the beta sensitivity sweep.
"""
from __future__ import annotations

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import BetaParams, PeeringGraph, build_graph, node_metrics
from .ingest import GroundTruth, RawSnapshot, TrafficClass
from .spectral import (
    DEFAULT_ALPHA,
    DEFAULT_TOL,
    PageRankVector,
    RankTable,
    google_matrix,
    pagerank,
    rank_positions,
    rank_table,
)

TIED = "Tied"

# PeeringDB business types; the access-network filter used for traffic receivers.
TYPE_ISP = "Cable/DSL/ISP"
TYPE_NSP = "NSP"
TYPE_CONTENT = "Content"
TYPE_NOT_DISCLOSED = "Not Disclosed"
DEFAULT_RECEIVER_TYPES = frozenset({TYPE_ISP, TYPE_NOT_DISCLOSED})


@dataclass(frozen=True)
class CountryAssignment:
    """AS number -> ISO country code, or "Tied" when no majority exists."""

    assignments: dict[int, str]

    def __getitem__(self, asn: int) -> str:
        return self.assignments[asn]

    def countries(self) -> set[str]:
        return {c for c in self.assignments.values() if c != TIED}


def classify_countries(g: PeeringGraph, rule: str = "strict") -> CountryAssignment:
    """Assign each AS the country of the majority of its IXPs.

    IXPs without a country label do not vote.  Under the default strict
    rule an AS is "Tied" unless one country holds more than half of the
    votes; ``rule="plurality"`` only requires a unique maximum.
    """
    if rule not in ("strict", "plurality"):
        raise ValueError("rule must be 'strict' or 'plurality'")
    country_of = {x.ixp_id: x.country for x in g.ixp_nodes}
    votes: dict[int, Counter] = {rec.asn: Counter() for rec in g.as_nodes}
    for (asn, ixp_id) in g.edges:
        country = country_of[ixp_id]
        if country:
            votes[asn][country] += 1

    assignments: dict[int, str] = {}
    for asn, counter in votes.items():
        if not counter:
            assignments[asn] = TIED
            continue
        ranked = counter.most_common()
        top_country, top_count = ranked[0]
        if rule == "strict":
            winner = top_count * 2 > sum(counter.values())
        else:
            winner = len(ranked) == 1 or ranked[1][1] < top_count
        assignments[asn] = top_country if winner else TIED
    return CountryAssignment(assignments=assignments)


@dataclass(frozen=True)
class CountryMetrics:
    country: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    per_country: tuple[CountryMetrics, ...]

    def for_country(self, country: str) -> CountryMetrics:
        for row in self.per_country:
            if row.country == country:
                return row
        raise KeyError(country)


def classification_metrics(
    assignment: CountryAssignment,
    truth: GroundTruth,
    countries: Sequence[str],
) -> ClassificationReport:
    """Per-country precision/recall/F1 against the registration dataset.

    Only ASes present in both the assignment and the truth mapping are
    evaluated.  "Tied" counts as a negative prediction for every country.
    """
    pairs = [
        (predicted, truth.as_country[asn])
        for asn, predicted in assignment.assignments.items()
        if asn in truth.as_country
    ]
    rows = []
    for country in countries:
        tp = sum(1 for p, t in pairs if p == country and t == country)
        fp = sum(1 for p, t in pairs if p == country and t != country)
        fn = sum(1 for p, t in pairs if p != country and t == country)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        rows.append(
            CountryMetrics(
                country=country,
                precision=precision,
                recall=recall,
                f1=f1,
                support=tp + fn,
            )
        )
    return ClassificationReport(per_country=tuple(rows))


def top_hypergiants(
    g: PeeringGraph,
    k: int = 20,
    alpha: float = DEFAULT_ALPHA,
    tol: float = DEFAULT_TOL,
    reverse_pr: PageRankVector | None = None,
) -> RankTable:
    """Top-k ASes by reverse PageRank (IXPs excluded, ranks re-numbered)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > g.n_as:
        raise ValueError(f"k={k} exceeds the number of AS nodes ({g.n_as})")
    pr = reverse_pr or pagerank(google_matrix(g, alpha, "reverse"), tol=tol)
    table = rank_table(pr, g.labels, g.kinds, g.names, keep=g.is_as)
    return RankTable(entries=table.top(k))


def traffic_receivers(
    g: PeeringGraph,
    assignment: CountryAssignment,
    countries: Sequence[str],
    hypergiant_asns: Iterable[int],
    exclusions: Iterable[int] = (),
    types: frozenset[str] | set[str] = DEFAULT_RECEIVER_TYPES,
    top_n: int = 4,
    alpha: float = DEFAULT_ALPHA,
    tol: float = DEFAULT_TOL,
    forward_pr: PageRankVector | None = None,
) -> dict[str, RankTable]:
    """Top traffic-receiving access networks per country by forward PageRank.

    Candidates are the ASes assigned to the country whose business type is
    in ``types``; hypergiants and the manual exclusion list never qualify.
    Countries without a qualifying AS map to an empty table.
    """
    pr = forward_pr or pagerank(google_matrix(g, alpha, "forward"), tol=tol)
    banned = set(hypergiant_asns) | set(exclusions)
    result: dict[str, RankTable] = {}
    for country in countries:
        keep = lambda i: (
            g.is_as(i)
            and g.as_nodes[i].asn not in banned
            and g.as_nodes[i].info_type in types
            and assignment.assignments.get(g.as_nodes[i].asn) == country
        )
        table = rank_table(pr, g.labels, g.kinds, g.names, keep=keep)
        result[country] = RankTable(entries=table.top(top_n))
    return result


def eums_coverage(
    receivers: Mapping[str, RankTable],
    truth: GroundTruth,
) -> dict[str, float]:
    """Aggregated end-user market share of the identified receivers per country.

    An AS missing from the market-share table contributes zero.
    """
    coverage: dict[str, float] = {}
    for country, table in receivers.items():
        total = 0.0
        for entry in table:
            asn = int(entry.label.removeprefix("AS"))
            record = truth.eums.get((asn, country))
            if record is not None:
                total += record.share
        coverage[country] = total
    return coverage


@dataclass(frozen=True)
class ClassShares:
    count_pct: float
    capacity_pct: float


def info_ratio_summary(g: PeeringGraph) -> dict[TrafficClass, ClassShares]:
    """Share of the AS population and of the total port capacity per traffic class."""
    metrics = node_metrics(g)
    counts: Counter = Counter()
    capacity: dict[TrafficClass, float] = {tc: 0.0 for tc in TrafficClass}
    for i, rec in enumerate(g.as_nodes):
        counts[rec.info_ratio] += 1
        capacity[rec.info_ratio] += metrics.port_capacity[i]
    total_count = sum(counts.values())
    total_capacity = sum(capacity.values())
    return {
        tc: ClassShares(
            count_pct=100.0 * counts.get(tc, 0) / total_count,
            capacity_pct=100.0 * capacity[tc] / total_capacity,
        )
        for tc in TrafficClass
    }


@dataclass(frozen=True)
class StabilityRow:
    asn: int
    name: str
    traffic_class: TrafficClass
    pr_value: float
    pr_rank: int
    rpr_value: float
    rpr_rank: int
    delta_pr_rank: int
    delta_rpr_rank: int
    delta_pr_value: float
    delta_rpr_value: float


@dataclass(frozen=True)
class StabilityReport:
    rows: tuple[StabilityRow, ...]
    grid_heavy: tuple[float, ...]
    grid_mostly: tuple[float, ...]
    beta_default: BetaParams


def default_probes(g: PeeringGraph, per_class: int = 4) -> tuple[int, ...]:
    """The best-provisioned ASes per traffic class (by port capacity)."""
    metrics = node_metrics(g)
    by_class: dict[TrafficClass, list[tuple[float, int]]] = {tc: [] for tc in TrafficClass}
    for i, rec in enumerate(g.as_nodes):
        by_class[rec.info_ratio].append((-metrics.port_capacity[i], rec.asn))
    probes: list[int] = []
    for tc in TrafficClass:
        for _, asn in sorted(by_class[tc])[:per_class]:
            probes.append(asn)
    return tuple(probes)


def _ranks_at(
    snapshot: RawSnapshot,
    beta: BetaParams,
    probe_asns: Sequence[int],
    alpha: float,
    tol: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    g = build_graph(snapshot, beta)
    pr = pagerank(google_matrix(g, alpha, "forward"), tol=tol)
    rpr = pagerank(google_matrix(g, alpha, "reverse"), tol=tol)
    pr_ranks = rank_positions(pr.P)
    rpr_ranks = rank_positions(rpr.P)
    idx = np.array([g.as_index(asn) for asn in probe_asns], dtype=np.int64)
    return pr_ranks[idx], rpr_ranks[idx], pr.P[idx], rpr.P[idx]


def _sweep_point(args):
    snapshot, beta_h, beta_m, beta_balanced, probes, alpha, tol = args
    beta = BetaParams(balanced=beta_balanced, mostly=beta_m, heavy=beta_h)
    return _ranks_at(snapshot, beta, probes, alpha, tol)


def beta_stability_sweep(
    snapshot: RawSnapshot,
    grid_heavy: Sequence[float],
    grid_mostly: Sequence[float],
    probes: Sequence[int] | None = None,
    beta_default: BetaParams | None = None,
    alpha: float = DEFAULT_ALPHA,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
) -> StabilityReport:
    """Rank sensitivity of probe ASes over a (beta_heavy, beta_mostly) grid.

    Each grid point rebuilds the graph and recomputes PageRank in both
    directions; the report carries the ranks at the default parameters
    plus the maximum rank variation (and, for diagnostics, the maximum
    value variation) over the whole grid.  ``beta_heavy = 1`` is excluded:
    it silences heavy-outbound ASes entirely.
    """
    grid_h = tuple(b for b in grid_heavy if b < 1.0)
    grid_m = tuple(grid_mostly)
    if not grid_h or not grid_m:
        raise ValueError("sweep grids must be non-empty (beta_heavy=1 is excluded)")
    beta_default = beta_default or BetaParams()

    g0 = build_graph(snapshot, beta_default)
    probe_asns = tuple(probes) if probes is not None else default_probes(g0)
    missing = [asn for asn in probe_asns if not g0.contains_as(asn)]
    if missing:
        raise ValueError(f"probe ASes not in graph: {missing}")

    pr0_rank, rpr0_rank, pr0_val, rpr0_val = _ranks_at(
        snapshot, beta_default, probe_asns, alpha, tol
    )

    jobs = [
        (snapshot, bh, bm, beta_default.balanced, probe_asns, alpha, tol)
        for bh in grid_h
        for bm in grid_m
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]

    pr_ranks = np.stack([res[0] for res in results])
    rpr_ranks = np.stack([res[1] for res in results])
    pr_vals = np.stack([res[2] for res in results])
    rpr_vals = np.stack([res[3] for res in results])

    rows = []
    for j, asn in enumerate(probe_asns):
        rec = snapshot.network_by_asn[asn]
        rows.append(
            StabilityRow(
                asn=asn,
                name=rec.name,
                traffic_class=rec.info_ratio,
                pr_value=float(pr0_val[j]),
                pr_rank=int(pr0_rank[j]),
                rpr_value=float(rpr0_val[j]),
                rpr_rank=int(rpr0_rank[j]),
                delta_pr_rank=int(pr_ranks[:, j].max() - pr_ranks[:, j].min()),
                delta_rpr_rank=int(rpr_ranks[:, j].max() - rpr_ranks[:, j].min()),
                delta_pr_value=float(pr_vals[:, j].max() - pr_vals[:, j].min()),
                delta_rpr_value=float(rpr_vals[:, j].max() - rpr_vals[:, j].min()),
            )
        )
    return StabilityReport(
        rows=tuple(rows),
        grid_heavy=grid_h,
        grid_mostly=grid_m,
        beta_default=beta_default,
    )
