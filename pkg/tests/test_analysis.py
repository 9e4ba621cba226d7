"""Country classification, hypergiants, receivers, market share, beta sweep."""
from __future__ import annotations

import numpy as np
import pytest

from peergraph.analysis import (
    TIED,
    beta_stability_sweep,
    classification_metrics,
    classify_countries,
    default_probes,
    eums_coverage,
    info_ratio_summary,
    top_hypergiants,
    traffic_receivers,
)
from peergraph.graph import BetaParams, build_graph
from peergraph.ingest import GroundTruth, TrafficClass, EumsEntry
from peergraph.spectral import RankTable

from conftest import make_snapshot
from oracles import dense_google, dense_pagerank

TC = TrafficClass


def graph_for_countries(countries: list[str], asn: int = 10):
    ixps = [(1 + i, c) for i, c in enumerate(countries)]
    memberships = [(asn, 1 + i, 10.0) for i in range(len(countries))]
    return build_graph(make_snapshot([(asn, TC.BALANCED)], ixps, memberships))


# --- country classification ---


def test_majority_assigns_country():
    assignment = classify_countries(graph_for_countries(["DE", "DE", "FR"]))
    assert assignment[10] == "DE"


def test_even_split_is_tied():
    assignment = classify_countries(graph_for_countries(["DE", "FR"]))
    assert assignment[10] == TIED


def test_single_ixp_unanimous():
    assignment = classify_countries(graph_for_countries(["BR"]))
    assert assignment[10] == "BR"


def test_unlabeled_ixps_do_not_vote():
    assignment = classify_countries(graph_for_countries(["DE", "", ""]))
    assert assignment[10] == "DE"
    assignment = classify_countries(graph_for_countries(["", ""]))
    assert assignment[10] == TIED


def test_plurality_rule_option():
    g = graph_for_countries(["DE", "DE", "FR", "US"])
    assert classify_countries(g, rule="strict")[10] == TIED  # 2 of 4 is no majority
    assert classify_countries(g, rule="plurality")[10] == "DE"
    g2 = graph_for_countries(["DE", "DE", "FR", "FR"])
    assert classify_countries(g2, rule="plurality")[10] == TIED


def test_votes_are_unweighted():
    # huge port at the FR exchange must not outvote two small DE ports
    snap = make_snapshot(
        [(10, TC.BALANCED)],
        [(1, "DE"), (2, "DE"), (3, "FR")],
        [(10, 1, 1.0), (10, 2, 1.0), (10, 3, 1_000_000.0)],
    )
    assert classify_countries(build_graph(snap))[10] == "DE"


def test_classification_invariant_under_ixp_relabeling():
    snap_a = make_snapshot(
        [(10, TC.BALANCED)],
        [(1, "DE"), (2, "DE"), (3, "FR")],
        [(10, 1, 5.0), (10, 2, 5.0), (10, 3, 5.0)],
    )
    snap_b = make_snapshot(
        [(10, TC.BALANCED)],
        [(7, "FR"), (8, "DE"), (9, "DE")],
        [(10, 7, 5.0), (10, 8, 5.0), (10, 9, 5.0)],
    )
    assert (
        classify_countries(build_graph(snap_a)).assignments
        == classify_countries(build_graph(snap_b)).assignments
    )


# --- classification metrics ---


def truth_of(mapping: dict[int, str]) -> GroundTruth:
    return GroundTruth(as_country=mapping, eums={})


def two_as_graph(countries_a: list[str], countries_b: list[str]):
    ixps, memberships = [], []
    next_id = 1
    for asn, countries in ((10, countries_a), (20, countries_b)):
        for c in countries:
            ixps.append((next_id, c))
            memberships.append((asn, next_id, 10.0))
            next_id += 1
    return build_graph(
        make_snapshot([(10, TC.BALANCED), (20, TC.BALANCED)], ixps, memberships)
    )


def test_perfect_agreement():
    g = two_as_graph(["DE"], ["FR"])
    report = classification_metrics(
        classify_countries(g), truth_of({10: "DE", 20: "FR"}), ["DE", "FR"]
    )
    for row in report.per_country:
        assert row.precision == row.recall == row.f1 == 1.0


def test_hand_computed_metrics():
    # truth {DE, DE}, predictions {DE, FR}
    g = two_as_graph(["DE"], ["FR"])
    report = classification_metrics(
        classify_countries(g), truth_of({10: "DE", 20: "DE"}), ["DE"]
    )
    row = report.for_country("DE")
    assert row.precision == 1.0
    assert row.recall == 0.5
    assert row.f1 == pytest.approx(2 / 3)
    assert row.support == 2


def test_tied_counts_as_negative():
    g = graph_for_countries(["DE", "FR"])  # prediction: Tied
    report = classification_metrics(
        classify_countries(g), truth_of({10: "DE"}), ["DE"]
    )
    row = report.for_country("DE")
    assert row.precision == 0.0 and row.recall == 0.0 and row.support == 1


def test_zero_support_reported():
    g = graph_for_countries(["DE"])
    report = classification_metrics(classify_countries(g), truth_of({10: "DE"}), ["JP"])
    assert report.for_country("JP").support == 0


# --- hypergiants ---


def dominant_graph():
    networks = [(1, TC.HEAVY_OUTBOUND)] + [
        (10 + i, [TC.MOSTLY_OUTBOUND, TC.BALANCED, TC.MOSTLY_INBOUND][i % 3])
        for i in range(9)
    ]
    memberships = [(1, x, 500_000.0) for x in (1, 2)]
    for i in range(9):
        memberships.append((10 + i, 1 + i % 2, float(1000 * (1 + i))))
    return build_graph(make_snapshot(networks, [(1, "DE"), (2, "US")], memberships))


def test_dominant_as_is_top_hypergiant():
    g = dominant_graph()
    table = top_hypergiants(g, k=3)
    assert table.entries[0].label == "AS1"
    # cross-check the whole ordering against a dense reverse PageRank
    oracle = dense_pagerank(dense_google(g.W.toarray().T))
    as_order = sorted(range(g.n_as), key=lambda i: (-oracle[i], i))
    expected = [g.labels[i] for i in as_order[:3]]
    assert [e.label for e in table] == expected


def test_hypergiants_k_one_single_as():
    g = build_graph(make_snapshot([(5, TC.BALANCED)], [(1, "DE")], [(5, 1, 10.0)]))
    table = top_hypergiants(g, k=1)
    assert [e.label for e in table] == ["AS5"]


def test_hypergiants_k_exceeding_as_count():
    g = build_graph(make_snapshot([(5, TC.BALANCED)], [(1, "DE")], [(5, 1, 10.0)]))
    with pytest.raises(ValueError):
        top_hypergiants(g, k=2)


def test_hypergiants_exclude_ixps():
    g = dominant_graph()
    table = top_hypergiants(g, k=g.n_as)
    assert all(e.kind == "AS" for e in table)
    assert [e.rank for e in table] == list(range(1, g.n_as + 1))


# --- traffic receivers ---


def receivers_graph():
    # 6 access networks in DE, 1 hypergiant, 1 NSP
    networks = [
        (1, TC.HEAVY_OUTBOUND),  # hypergiant, Content
        (2, TC.MOSTLY_INBOUND),
        (3, TC.MOSTLY_INBOUND),
        (4, TC.HEAVY_INBOUND),
        (5, TC.NOT_DISCLOSED),
        (6, TC.MOSTLY_INBOUND),
        (7, TC.BALANCED),  # NSP type, filtered out by default
    ]
    info_types = {
        1: "Content",
        2: "Cable/DSL/ISP",
        3: "Cable/DSL/ISP",
        4: "Cable/DSL/ISP",
        5: "Not Disclosed",
        6: "Cable/DSL/ISP",
        7: "NSP",
    }
    memberships = [
        (1, 1, 900_000.0),
        (2, 1, 90_000.0),
        (3, 1, 70_000.0),
        (4, 1, 50_000.0),
        (5, 1, 30_000.0),
        (6, 1, 10_000.0),
        (7, 1, 80_000.0),
    ]
    snap = make_snapshot(networks, [(1, "DE")], memberships, info_types=info_types)
    return build_graph(snap)


def test_receivers_ordered_by_pagerank():
    g = receivers_graph()
    assignment = classify_countries(g)
    tables = traffic_receivers(g, assignment, ["DE"], hypergiant_asns=[1])
    labels = [e.label for e in tables["DE"]]
    assert labels == ["AS2", "AS3", "AS4", "AS5"]
    assert [e.rank for e in tables["DE"]] == [1, 2, 3, 4]


def test_receivers_exclude_hypergiants_and_manual_list():
    g = receivers_graph()
    assignment = classify_countries(g)
    tables = traffic_receivers(
        g, assignment, ["DE"], hypergiant_asns=[1], exclusions=[2]
    )
    labels = [e.label for e in tables["DE"]]
    assert "AS1" not in labels and "AS2" not in labels
    assert labels == ["AS3", "AS4", "AS5", "AS6"]


def test_receivers_type_filter_and_nsp_opt_in():
    g = receivers_graph()
    assignment = classify_countries(g)
    default = traffic_receivers(g, assignment, ["DE"], hypergiant_asns=[1])
    assert "AS7" not in [e.label for e in default["DE"]]
    with_nsp = traffic_receivers(
        g,
        assignment,
        ["DE"],
        hypergiant_asns=[1],
        types={"Cable/DSL/ISP", "Not Disclosed", "NSP"},
    )
    assert "AS7" in [e.label for e in with_nsp["DE"]]


def test_receivers_empty_country():
    g = receivers_graph()
    assignment = classify_countries(g)
    tables = traffic_receivers(g, assignment, ["JP"], hypergiant_asns=[1])
    assert len(tables["JP"]) == 0


def test_receivers_disjoint_from_banned_sets():
    g = receivers_graph()
    assignment = classify_countries(g)
    giants, excluded = [1, 3], [5]
    tables = traffic_receivers(
        g, assignment, ["DE"], hypergiant_asns=giants, exclusions=excluded
    )
    picked = {int(e.label.removeprefix("AS")) for e in tables["DE"]}
    assert picked.isdisjoint(giants) and picked.isdisjoint(excluded)


# --- EUMS coverage ---


def test_eums_sums_over_receivers():
    truth = GroundTruth(
        as_country={},
        eums={(2, "DE"): EumsEntry(10.0, 1), (3, "DE"): EumsEntry(5.0, 2)},
    )
    g = receivers_graph()
    tables = traffic_receivers(g, classify_countries(g), ["DE"], hypergiant_asns=[1])
    coverage = eums_coverage(tables, truth)
    assert coverage["DE"] == 15.0  # AS4/AS5 are absent from the table: contribute 0


def test_eums_absent_country_is_zero():
    g = receivers_graph()
    tables = traffic_receivers(g, classify_countries(g), ["DE"], hypergiant_asns=[1])
    coverage = eums_coverage(tables, GroundTruth(as_country={}, eums={}))
    assert coverage == {"DE": 0.0}


# --- info_ratio summary ---


def test_all_balanced_summary():
    g = build_graph(make_snapshot([(5, TC.BALANCED)], [(1, "DE")], [(5, 1, 10.0)]))
    shares = info_ratio_summary(g)
    assert shares[TC.BALANCED].count_pct == 100.0
    assert shares[TC.BALANCED].capacity_pct == 100.0


def test_summary_shares():
    snap = make_snapshot(
        [(1, TC.HEAVY_OUTBOUND), (2, TC.BALANCED)],
        [(1, "DE")],
        [(1, 1, 90.0), (2, 1, 10.0)],
    )
    shares = info_ratio_summary(build_graph(snap))
    assert shares[TC.HEAVY_OUTBOUND].capacity_pct == pytest.approx(90.0)
    assert shares[TC.BALANCED].capacity_pct == pytest.approx(10.0)
    assert shares[TC.HEAVY_OUTBOUND].count_pct == pytest.approx(50.0)


def test_summary_sums_to_hundred(fixture_graph):
    shares = info_ratio_summary(fixture_graph)
    assert sum(s.count_pct for s in shares.values()) == pytest.approx(100.0, abs=1e-9)
    assert sum(s.capacity_pct for s in shares.values()) == pytest.approx(100.0, abs=1e-9)


# --- beta stability sweep ---


def sweep_snapshot():
    networks = [(1, TC.HEAVY_OUTBOUND)]
    memberships = [(1, x, 1_000_000.0) for x in (1, 2)]
    classes = [TC.MOSTLY_OUTBOUND, TC.BALANCED, TC.MOSTLY_INBOUND, TC.HEAVY_INBOUND]
    for i in range(8):
        asn = 10 + i
        networks.append((asn, classes[i % 4]))
        memberships.append((asn, 1 + i % 2, float(2000 * (1 + i))))
    return make_snapshot(networks, [(1, "DE"), (2, "US")], memberships)


def test_single_point_grid_has_zero_variation():
    report = beta_stability_sweep(
        sweep_snapshot(), grid_heavy=[0.95], grid_mostly=[0.75]
    )
    for row in report.rows:
        assert row.delta_pr_rank == 0 and row.delta_rpr_rank == 0
        assert row.delta_pr_value == 0.0 and row.delta_rpr_value == 0.0


def test_dominant_outbound_rpr_stable_across_grid():
    report = beta_stability_sweep(
        sweep_snapshot(),
        grid_heavy=np.linspace(0.90, 0.995, 4),
        grid_mostly=np.linspace(0.6, 0.8, 4),
        probes=[1],
    )
    assert report.rows[0].delta_rpr_rank == 0


def test_beta_one_is_excluded():
    report = beta_stability_sweep(
        sweep_snapshot(), grid_heavy=[0.95, 1.0], grid_mostly=[0.75]
    )
    assert report.grid_heavy == (0.95,)
    with pytest.raises(ValueError):
        beta_stability_sweep(sweep_snapshot(), grid_heavy=[1.0], grid_mostly=[0.75])


def test_variation_monotone_in_grid_size():
    snap = sweep_snapshot()
    probes = default_probes(build_graph(snap))
    small = beta_stability_sweep(snap, [0.92], [0.65], probes=probes)
    large = beta_stability_sweep(
        snap, [0.92, 0.9, 0.98], [0.65, 0.6, 0.8], probes=probes
    )
    for a, b in zip(small.rows, large.rows):
        assert a.delta_pr_rank <= b.delta_pr_rank
        assert a.delta_rpr_rank <= b.delta_rpr_rank


def test_default_probes_pick_top_capacity_per_class(fixture_graph):
    probes = default_probes(fixture_graph, per_class=4)
    assert 64500 in probes  # the dominant outbound network
    assert len(probes) == len(set(probes)) <= 4 * len(TC)
