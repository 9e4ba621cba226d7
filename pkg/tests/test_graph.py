"""Capacity-graph construction and structural metrics."""
from __future__ import annotations

from datetime import date as Date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peergraph.errors import DegenerateTailError, EmptyGraphError
from peergraph.graph import (
    BetaParams,
    _assemble,
    build_graph,
    degree_distribution,
    fit_breakpoint,
    fit_power_law,
    ixp_balance,
    largest_component_fraction,
    node_metrics,
)
from peergraph.ingest import IxpRecord, TrafficClass

from conftest import ALL_CLASSES, make_snapshot
from oracles import sample_discrete_power_law

TC = TrafficClass


@st.composite
def snapshots(draw, max_as=8, max_ixp=4):
    n_as = draw(st.integers(1, max_as))
    n_ixp = draw(st.integers(1, max_ixp))
    networks = [(100 + i, draw(st.sampled_from(ALL_CLASSES))) for i in range(n_as)]
    ixps = [(1 + j, draw(st.sampled_from(["DE", "US", ""]))) for j in range(n_ixp)]
    memberships = []
    for asn, _ in networks:
        n_ports = draw(st.integers(1, 3))
        for _ in range(n_ports):
            ixp_id = draw(st.integers(1, n_ixp))
            memberships.append((asn, ixp_id, float(draw(st.integers(1, 1_000_000)))))
    return make_snapshot(networks, ixps, memberships)


def single_edge(tc: TrafficClass, ps: float, beta: BetaParams | None = None):
    snap = make_snapshot([(10, tc)], [(1, "DE")], [(10, 1, ps)])
    return build_graph(snap, beta)


# --- edge orientation (the weighting rules) ---


def test_heavy_outbound_weights():
    g = single_edge(TC.HEAVY_OUTBOUND, 100.0)
    a, x = g.as_index(10), g.ixp_index(1)
    assert g.W[x, a] == 100.0  # AS -> IXP carries the full port size
    assert g.W[a, x] == (1.0 - 0.95) * 100.0  # IXP -> AS carries 5%


def test_mostly_inbound_weights():
    g = single_edge(TC.MOSTLY_INBOUND, 40.0)
    a, x = g.as_index(10), g.ixp_index(1)
    assert g.W[a, x] == 40.0
    assert g.W[x, a] == 10.0


def test_balanced_weights_symmetric():
    g = single_edge(TC.BALANCED, 10.0)
    a, x = g.as_index(10), g.ixp_index(1)
    assert g.W[a, x] == 10.0 and g.W[x, a] == 10.0


def test_router_ports_aggregate_by_sum():
    snap = make_snapshot(
        [(10, TC.BALANCED)], [(1, "DE")], [(10, 1, 10.0), (10, 1, 20.0)]
    )
    g = build_graph(snap)
    assert g.edges == {(10, 1): 30.0}


def test_zero_capacity_memberships_dropped():
    snap = make_snapshot(
        [(10, TC.BALANCED), (20, TC.BALANCED)],
        [(1, "DE")],
        [(10, 1, 10.0), (20, 1, 0.0)],
    )
    g = build_graph(snap)
    assert g.n_as == 1 and (20 not in {r.asn for r in g.as_nodes})


def test_empty_graph_is_an_error():
    snap = make_snapshot([(10, TC.BALANCED)], [(1, "DE")], [(10, 1, 0.0)])
    with pytest.raises(EmptyGraphError):
        build_graph(snap)


def test_min_members_filter():
    snap = make_snapshot(
        [(10, TC.BALANCED), (20, TC.BALANCED)],
        [(1, "DE"), (2, "US")],
        [(10, 1, 5.0), (20, 1, 5.0), (20, 2, 5.0)],
    )
    g = build_graph(snap, min_members=2)
    assert [r.ixp_id for r in g.ixp_nodes] == [1]
    assert {r.asn for r in g.as_nodes} == {10, 20}


def test_node_ordering_deterministic():
    snap = make_snapshot(
        [(30, TC.BALANCED), (10, TC.BALANCED)],
        [(7, "DE"), (2, "US")],
        [(30, 7, 1.0), (10, 2, 1.0)],
    )
    g = build_graph(snap)
    assert [r.asn for r in g.as_nodes] == [10, 30]
    assert [r.ixp_id for r in g.ixp_nodes] == [2, 7]
    assert g.labels == ("AS10", "AS30", "IX2", "IX7")


def test_beta_params_validate_range():
    with pytest.raises(ValueError):
        BetaParams(heavy=1.5)


@settings(max_examples=60, deadline=None)
@given(snapshots())
def test_weight_construction_invariants(snap):
    g = build_graph(snap)
    beta = g.beta
    # independent re-aggregation of the port sizes
    expected: dict[tuple[int, int], float] = {}
    for m in snap.memberships:
        if m.port_size > 0:
            expected[(m.asn, m.ixp_id)] = expected.get((m.asn, m.ixp_id), 0.0) + m.port_size
    assert g.edges == expected

    for (asn, ixp_id), ps in g.edges.items():
        a, x = g.as_index(asn), g.ixp_index(ixp_id)
        tc = snap.network_by_asn[asn].info_ratio
        b = beta.for_class(tc)
        w_pair = (g.W[a, x], g.W[x, a])
        assert max(w_pair) == ps
        assert min(w_pair) == (1.0 - b) * ps
        if tc in (TC.BALANCED, TC.NOT_DISCLOSED):
            assert g.W[a, x] == g.W[x, a] == ps  # beta_b defaults to 0

    # bipartite: nonzero entries always connect an AS with an IXP
    coo = g.W.tocoo()
    for i, j in zip(coo.row, coo.col):
        assert g.is_as(int(i)) != g.is_as(int(j))


@settings(max_examples=60, deadline=None)
@given(snapshots())
def test_capacity_sums_match_across_sides(snap):
    g = build_graph(snap)
    metrics = node_metrics(g)
    total_edges = sum(g.edges.values())
    assert metrics.port_capacity[: g.n_as].sum() == pytest.approx(total_edges, rel=1e-15)
    assert metrics.port_capacity[g.n_as :].sum() == pytest.approx(total_edges, rel=1e-15)


# --- node metrics ---


def test_mostly_inbound_metric_identity():
    snap = make_snapshot(
        [(10, TC.MOSTLY_INBOUND)], [(1, "DE"), (2, "US")], [(10, 1, 40.0), (10, 2, 60.0)]
    )
    g = build_graph(snap)
    m = node_metrics(g)
    a = g.as_index(10)
    assert m.port_capacity[a] == 100.0
    assert m.w_in[a] == 100.0
    assert m.w_out[a] == 25.0  # (1 - 0.75) * port capacity, exact for dyadic beta


def test_degree_counts_distinct_ixps():
    snap = make_snapshot(
        [(10, TC.BALANCED)],
        [(1, "DE"), (2, "US"), (3, "DE")],
        [(10, 1, 1.0), (10, 2, 1.0), (10, 3, 1.0), (10, 1, 2.0)],
    )
    g = build_graph(snap)
    assert node_metrics(g).degree[g.as_index(10)] == 3


@settings(max_examples=40, deadline=None)
@given(snapshots())
def test_every_node_has_a_neighbor(snap):
    g = build_graph(snap)
    assert (node_metrics(g).degree >= 1).all()


@settings(max_examples=40, deadline=None)
@given(snapshots())
def test_directional_metric_identities(snap):
    g = build_graph(snap)
    m = node_metrics(g)
    for i, rec in enumerate(g.as_nodes):
        b = g.beta.for_class(rec.info_ratio)
        pc = m.port_capacity[i]
        major, minor = (m.w_out[i], m.w_in[i]) if rec.info_ratio.is_outbound else (
            m.w_in[i], m.w_out[i]
        )
        assert major == pc  # integer port sizes: sums are exact
        assert minor == pytest.approx((1.0 - b) * pc, rel=1e-14, abs=0.0)


# --- IXP balance ---


def test_balance_zero_for_all_balanced():
    snap = make_snapshot(
        [(10, TC.BALANCED), (20, TC.BALANCED)],
        [(1, "DE")],
        [(10, 1, 123.0), (20, 1, 77.0)],
    )
    report = ixp_balance(build_graph(snap))
    assert report.balance[1] == 0.0


def test_balance_single_heavy_outbound_member():
    report = ixp_balance(single_edge(TC.HEAVY_OUTBOUND, 100.0))
    # IXP receives 100 in, forwards 5 out
    assert report.balance[1] == pytest.approx((5.0 - 100.0) / 105.0, abs=1e-12)


def test_balance_summary_statistics():
    snap = make_snapshot(
        [(10, TC.BALANCED), (20, TC.BALANCED)],
        [(1, "DE"), (2, "US")],
        [(10, 1, 10.0), (20, 2, 20.0)],
    )
    report = ixp_balance(build_graph(snap))
    assert report.mean == 0.0 and report.std == 0.0
    assert report.quartiles == (0.0, 0.0, 0.0)


def test_balance_isolated_ixp_reported_undefined():
    g = single_edge(TC.BALANCED, 10.0)
    g2 = _assemble(
        g.as_nodes,
        list(g.ixp_nodes) + [IxpRecord(ixp_id=99, name="silent", country="US")],
        g.edges,
        g.beta,
        g.date,
    )
    report = ixp_balance(g2)
    assert report.undefined == (99,)
    assert set(report.balance) == {1}


@settings(max_examples=40, deadline=None)
@given(snapshots())
def test_balance_in_range(snap):
    report = ixp_balance(build_graph(snap))
    for value in report.balance.values():
        assert -1.0 <= value <= 1.0


# --- degree distribution ---


def test_degree_distribution_counts():
    snap = make_snapshot(
        [(10, TC.BALANCED), (20, TC.BALANCED), (30, TC.BALANCED)],
        [(1, "DE"), (2, "US")],
        [(10, 1, 1.0), (20, 1, 1.0), (30, 1, 1.0), (30, 2, 1.0)],
    )
    dist = degree_distribution(build_graph(snap), "as")
    assert dist == {1: pytest.approx(2 / 3), 2: pytest.approx(1 / 3)}


def test_star_ixp_degree():
    k = 7
    snap = make_snapshot(
        [(10 + i, TC.BALANCED) for i in range(k)],
        [(1, "DE")],
        [(10 + i, 1, 1.0) for i in range(k)],
    )
    dist = degree_distribution(build_graph(snap), "ixp")
    assert dist == {k: 1.0}


@settings(max_examples=30, deadline=None)
@given(snapshots())
def test_degree_distribution_sums_to_one(snap):
    g = build_graph(snap)
    for side in ("as", "ixp"):
        assert sum(degree_distribution(g, side).values()) == pytest.approx(1.0)


# --- power-law fit ---


def test_power_law_recovery_fixed_xmin():
    rng = np.random.default_rng(7)
    samples = sample_discrete_power_law(rng, 10_000, gamma=2.5, xmin=1)
    fit = fit_power_law(samples, xmin=1)
    assert 2.4 <= fit.gamma <= 2.6
    assert fit.xmin == 1 and fit.n_tail == 10_000


def test_power_law_auto_xmin():
    rng = np.random.default_rng(11)
    samples = sample_discrete_power_law(rng, 10_000, gamma=2.5, xmin=1)
    fit = fit_power_law(samples)
    assert 2.35 <= fit.gamma <= 2.65
    assert fit.gamma > 1.0


def test_power_law_rejects_degenerate_tail():
    with pytest.raises(DegenerateTailError):
        fit_power_law([3.0] * 50, xmin=3)


def test_power_law_rejects_small_tail():
    with pytest.raises(DegenerateTailError):
        fit_power_law([1, 2, 3, 4, 5], xmin=1)


def test_power_law_rejects_non_integers():
    with pytest.raises(ValueError):
        fit_power_law([1.5] * 20)


# --- connected components ---


def test_connected_graph_fraction_one():
    snap = make_snapshot(
        [(10, TC.BALANCED), (20, TC.BALANCED)],
        [(1, "DE")],
        [(10, 1, 1.0), (20, 1, 1.0)],
    )
    assert largest_component_fraction(build_graph(snap)) == 1.0


def test_two_equal_halves_fraction_half():
    snap = make_snapshot(
        [(10, TC.BALANCED), (20, TC.BALANCED), (30, TC.BALANCED), (40, TC.BALANCED)],
        [(1, "DE"), (2, "US")],
        [(10, 1, 1.0), (20, 1, 1.0), (30, 2, 1.0), (40, 2, 1.0)],
    )
    assert largest_component_fraction(build_graph(snap)) == 0.5


# --- breakpoint fit ---


def test_breakpoint_recovers_noiseless_kink():
    xs = list(range(0, 101))
    ys = [x if x <= 50 else 50 + 3 * (x - 50) for x in xs]
    fit = fit_breakpoint(list(zip(xs, [float(y) for y in ys])))
    assert fit.breakpoint == 50
    assert abs(fit.slope_before - 1.0) < 1e-9
    assert abs(fit.slope_after - 3.0) < 1e-9


def test_breakpoint_with_dates():
    start = Date(2019, 1, 1)
    xs = [start + timedelta(days=i) for i in range(0, 80)]
    ys = [2.0 * i if i <= 30 else 60.0 + 5.0 * (i - 30) for i in range(0, 80)]
    fit = fit_breakpoint(list(zip(xs, ys)))
    assert fit.breakpoint == start + timedelta(days=30)
    assert abs(fit.slope_before - 2.0) < 1e-9
    assert abs(fit.slope_after - 5.0) < 1e-9


def test_breakpoint_constant_series():
    fit = fit_breakpoint([(i, 5.0) for i in range(6)])
    assert abs(fit.slope_before) < 1e-12 and abs(fit.slope_after) < 1e-12


def test_breakpoint_needs_four_points():
    with pytest.raises(ValueError):
        fit_breakpoint([(0, 1.0), (1, 2.0), (2, 3.0)])
