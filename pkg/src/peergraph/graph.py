"""The weighted directed bipartite AS-IXP capacity graph and its structural metrics.

Nodes are the ASes and IXPs that share at least one positive-capacity
membership.  Router ports of one AS at one IXP are aggregated by summation
into a single undirected port size ``ps``.  Each aggregated edge is split
into two directed edges whose weights depend on the AS's traffic class:
the declared direction carries the full port size, the opposite direction
carries ``(1 - beta) * ps`` with a per-class beta coefficient.

``W[i, j]`` is the weight of the directed link ``j -> i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date as Date
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import minimize_scalar
from scipy.sparse.csgraph import connected_components
from scipy.special import zeta

from .errors import DegenerateTailError, EmptyGraphError
from .ingest import IxpRecord, NetworkRecord, RawSnapshot, TrafficClass


@dataclass(frozen=True)
class BetaParams:
    """Per-class traffic imbalance coefficients, each in [0, 1].

    ``balanced`` applies to Balanced and Not Disclosed ASes, ``mostly`` to
    the Mostly In/Outbound classes and ``heavy`` to the Heavy classes.
    """

    balanced: float = 0.0
    mostly: float = 0.75
    heavy: float = 0.95

    def __post_init__(self) -> None:
        for name in ("balanced", "mostly", "heavy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"beta for {name} classes must be in [0, 1], got {v}")

    def for_class(self, tc: TrafficClass) -> float:
        if tc in (TrafficClass.HEAVY_INBOUND, TrafficClass.HEAVY_OUTBOUND):
            return self.heavy
        if tc in (TrafficClass.MOSTLY_INBOUND, TrafficClass.MOSTLY_OUTBOUND):
            return self.mostly
        return self.balanced


@dataclass(frozen=True, eq=False)
class PeeringGraph:
    """Immutable bipartite capacity graph.

    Node indices run over ASes first (ascending AS number) then IXPs
    (ascending exchange id); the ordering is part of the output contract
    for every matrix and rank table derived from the graph.
    """

    date: Date | None
    beta: BetaParams
    as_nodes: tuple[NetworkRecord, ...]
    ixp_nodes: tuple[IxpRecord, ...]
    edges: dict[tuple[int, int], float]  # (asn, ixp_id) -> aggregated port size
    W: sparse.csr_matrix

    @property
    def n_as(self) -> int:
        return len(self.as_nodes)

    @property
    def n_ixp(self) -> int:
        return len(self.ixp_nodes)

    @property
    def n_nodes(self) -> int:
        return self.n_as + self.n_ixp

    @cached_property
    def _as_pos(self) -> dict[int, int]:
        return {rec.asn: i for i, rec in enumerate(self.as_nodes)}

    @cached_property
    def _ixp_pos(self) -> dict[int, int]:
        return {rec.ixp_id: i for i, rec in enumerate(self.ixp_nodes)}

    def as_index(self, asn: int) -> int:
        return self._as_pos[asn]

    def contains_as(self, asn: int) -> bool:
        return asn in self._as_pos

    def ixp_index(self, ixp_id: int) -> int:
        return self.n_as + self._ixp_pos[ixp_id]

    @cached_property
    def labels(self) -> tuple[str, ...]:
        return tuple(f"AS{r.asn}" for r in self.as_nodes) + tuple(
            f"IX{r.ixp_id}" for r in self.ixp_nodes
        )

    @cached_property
    def kinds(self) -> tuple[str, ...]:
        return ("AS",) * self.n_as + ("IXP",) * self.n_ixp

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.as_nodes) + tuple(r.name for r in self.ixp_nodes)

    def is_as(self, index: int) -> bool:
        return index < self.n_as


def _assemble(
    as_records: Sequence[NetworkRecord],
    ixp_records: Sequence[IxpRecord],
    edges: Mapping[tuple[int, int], float],
    beta: BetaParams,
    date: Date | None,
) -> PeeringGraph:
    """Build the directed weight matrix from aggregated edges."""
    as_nodes = tuple(sorted(as_records, key=lambda r: r.asn))
    ixp_nodes = tuple(sorted(ixp_records, key=lambda r: r.ixp_id))
    as_pos = {r.asn: i for i, r in enumerate(as_nodes)}
    ixp_pos = {r.ixp_id: i for i, r in enumerate(ixp_nodes)}
    ratio = {r.asn: r.info_ratio for r in as_nodes}
    n = len(as_nodes) + len(ixp_nodes)

    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    ordered = dict(sorted(edges.items()))
    for (asn, ixp_id), ps in ordered.items():
        a = as_pos[asn]
        x = len(as_nodes) + ixp_pos[ixp_id]
        minor = (1.0 - beta.for_class(ratio[asn])) * ps
        if ratio[asn].is_outbound:
            to_as, to_ixp = minor, ps
        else:
            to_as, to_ixp = ps, minor
        if to_as > 0.0:
            rows.append(a)
            cols.append(x)
            data.append(to_as)
        if to_ixp > 0.0:
            rows.append(x)
            cols.append(a)
            data.append(to_ixp)

    W = sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), (rows, cols)), shape=(n, n)
    )
    W.sort_indices()
    return PeeringGraph(
        date=date, beta=beta, as_nodes=as_nodes, ixp_nodes=ixp_nodes, edges=ordered, W=W
    )


def build_graph(
    snapshot: RawSnapshot,
    beta: BetaParams | None = None,
    min_members: int = 1,
) -> PeeringGraph:
    """Construct the capacity graph for one snapshot.

    Memberships with zero port size are discarded; multiple router ports
    of one (AS, IXP) pair are summed.  ``min_members`` optionally removes
    IXPs with fewer distinct member ASes before the graph is assembled
    (the default keeps every IXP that has at least one member).
    """
    beta = beta or BetaParams()
    agg: dict[tuple[int, int], float] = {}
    for m in snapshot.memberships:
        if m.port_size <= 0.0:
            continue
        key = (m.asn, m.ixp_id)
        agg[key] = agg.get(key, 0.0) + m.port_size

    if min_members > 1:
        members: dict[int, set[int]] = {}
        for asn, ixp_id in agg:
            members.setdefault(ixp_id, set()).add(asn)
        keep = {ixp_id for ixp_id, asns in members.items() if len(asns) >= min_members}
        agg = {k: v for k, v in agg.items() if k[1] in keep}

    if not agg:
        raise EmptyGraphError("snapshot has no positive-capacity membership")

    as_ids = {asn for asn, _ in agg}
    ixp_ids = {ixp_id for _, ixp_id in agg}
    as_records = [snapshot.network_by_asn[asn] for asn in as_ids]
    ixp_records = [snapshot.ixp_by_id[ixp_id] for ixp_id in ixp_ids]
    return _assemble(as_records, ixp_records, agg, beta, snapshot.date)


@dataclass(frozen=True)
class NodeMetrics:
    """Per-node weighted degrees, neighbor counts and port capacities.

    Arrays are aligned with the graph's node ordering.  For an AS whose
    declared direction is inbound, ``w_in`` equals its port capacity and
    ``w_out`` equals ``(1 - beta) * port_capacity``; mirrored for outbound.
    """

    w_in: np.ndarray
    w_out: np.ndarray
    degree: np.ndarray
    port_capacity: np.ndarray


def node_metrics(g: PeeringGraph) -> NodeMetrics:
    w_in = np.asarray(g.W.sum(axis=1)).ravel()
    w_out = np.asarray(g.W.sum(axis=0)).ravel()
    degree = np.zeros(g.n_nodes, dtype=np.int64)
    capacity = np.zeros(g.n_nodes, dtype=np.float64)
    for (asn, ixp_id), ps in g.edges.items():
        a = g.as_index(asn)
        x = g.ixp_index(ixp_id)
        degree[a] += 1
        degree[x] += 1
        capacity[a] += ps
        capacity[x] += ps
    return NodeMetrics(w_in=w_in, w_out=w_out, degree=degree, port_capacity=capacity)


@dataclass(frozen=True)
class IxpBalance:
    """Normalized traffic balance per IXP: (w_out - w_in) / (w_out + w_in).

    Values lie in [-1, 1]; 0 means a perfectly balanced exchange.  IXPs
    whose total weight is zero are reported separately as undefined and
    excluded from the summary statistics.
    """

    balance: dict[int, float]  # ixp_id -> B
    undefined: tuple[int, ...]
    mean: float
    std: float
    quartiles: tuple[float, float, float]


def ixp_balance(g: PeeringGraph) -> IxpBalance:
    metrics = node_metrics(g)
    values: dict[int, float] = {}
    undefined: list[int] = []
    for pos, rec in enumerate(g.ixp_nodes):
        i = g.n_as + pos
        total = metrics.w_in[i] + metrics.w_out[i]
        if total <= 0.0:
            undefined.append(rec.ixp_id)
            continue
        values[rec.ixp_id] = (metrics.w_out[i] - metrics.w_in[i]) / total
    arr = np.array(list(values.values()), dtype=np.float64)
    if arr.size:
        q1, q2, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
        mean, std = float(arr.mean()), float(arr.std())
    else:
        q1 = q2 = q3 = mean = std = float("nan")
    return IxpBalance(
        balance=values,
        undefined=tuple(undefined),
        mean=mean,
        std=std,
        quartiles=(float(q1), float(q2), float(q3)),
    )


def degree_distribution(g: PeeringGraph, side: str = "as") -> dict[int, float]:
    """Empirical distribution of the undirected node degree on one side.

    ``side`` is "as" or "ixp".  The returned histogram sums to 1.
    """
    metrics = node_metrics(g)
    if side == "as":
        degrees = metrics.degree[: g.n_as]
    elif side == "ixp":
        degrees = metrics.degree[g.n_as :]
    else:
        raise ValueError("side must be 'as' or 'ixp'")
    if degrees.size == 0:
        raise ValueError(f"graph has no {side} nodes")
    values, counts = np.unique(degrees, return_counts=True)
    total = counts.sum()
    return {int(v): float(c) / total for v, c in zip(values, counts)}


@dataclass(frozen=True)
class PowerLawFit:
    gamma: float
    xmin: int
    n_tail: int
    ks_distance: float


def _gamma_mle(tail: np.ndarray, xmin: int) -> float:
    # Discrete maximum likelihood: maximize -gamma*sum(log x) - n*log(zeta(gamma, xmin)).
    log_sum = float(np.log(tail).sum())
    n = tail.size

    def negative_loglik(gamma: float) -> float:
        return gamma * log_sum + n * float(np.log(zeta(gamma, xmin)))

    result = minimize_scalar(
        negative_loglik, bounds=(1.0 + 1e-6, 25.0), method="bounded",
        options={"xatol": 1e-8},
    )
    return float(result.x)


def _ks_distance(tail: np.ndarray, gamma: float, xmin: int) -> float:
    # Compare empirical and fitted CDFs at the observed tail values.
    xs = np.unique(tail)
    ecdf = np.searchsorted(np.sort(tail), xs, side="right") / tail.size
    fitted = 1.0 - zeta(gamma, xs + 1) / zeta(gamma, xmin)
    return float(np.max(np.abs(ecdf - fitted)))


def fit_power_law(samples: Sequence[float], xmin: int | None = None) -> PowerLawFit:
    """Fit a discrete power-law exponent by maximum likelihood.

    When ``xmin`` is not given it is selected among the observed values by
    minimizing the Kolmogorov-Smirnov distance between the sample tail and
    the fitted distribution.  At least 10 samples must lie in the tail and
    the tail must contain more than one distinct value.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        raise DegenerateTailError("no samples")
    if np.any(arr < 1) or np.any(arr != np.floor(arr)):
        raise ValueError("samples must be integers >= 1")
    arr = arr.astype(np.int64)

    def fit_at(candidate: int) -> PowerLawFit | None:
        tail = arr[arr >= candidate]
        if tail.size < 10 or np.unique(tail).size < 2:
            return None
        gamma = _gamma_mle(tail, candidate)
        return PowerLawFit(
            gamma=gamma,
            xmin=candidate,
            n_tail=int(tail.size),
            ks_distance=_ks_distance(tail, gamma, candidate),
        )

    if xmin is not None:
        fit = fit_at(int(xmin))
        if fit is None:
            raise DegenerateTailError(
                f"tail above xmin={xmin} needs >= 10 samples and >= 2 distinct values"
            )
        return fit

    candidates = np.unique(arr)[:-1]  # the largest value leaves an empty tail
    fits = [f for f in (fit_at(int(c)) for c in candidates) if f is not None]
    if not fits:
        raise DegenerateTailError("no candidate cutoff leaves a usable tail")
    return min(fits, key=lambda f: (f.ks_distance, f.xmin))


def largest_component_fraction(g: PeeringGraph) -> float:
    """Fraction of nodes in the largest connected component (undirected sense)."""
    _, assignment = connected_components(g.W, directed=False)
    counts = np.bincount(assignment)
    return float(counts.max()) / g.n_nodes


@dataclass(frozen=True)
class BreakpointFit:
    breakpoint: object  # same type as the input x values
    slope_before: float
    slope_after: float
    sse: float


def _segment_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    # Least-squares line; returns (slope, sse).
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    denom = float(dx @ dx)
    slope = float(dx @ (y - ym)) / denom
    residual = y - (ym + slope * dx)
    return slope, float(residual @ residual)


def fit_breakpoint(series: Sequence[tuple[object, float]]) -> BreakpointFit:
    """Single-breakpoint piecewise-linear least squares.

    Every interior point is tried as the segment boundary (shared by both
    segments); the candidate with the smallest total squared residual
    wins, first one on ties.  X values may be dates or numbers and must be
    strictly increasing; slopes are per day for date inputs.
    """
    points = list(series)
    if len(points) < 4:
        raise ValueError("need at least 4 points for a breakpoint fit")
    raw_x = [p[0] for p in points]
    if isinstance(raw_x[0], Date):
        x = np.array([d.toordinal() for d in raw_x], dtype=np.float64)
    else:
        x = np.array(raw_x, dtype=np.float64)
    if np.any(np.diff(x) <= 0):
        raise ValueError("x values must be strictly increasing")
    y = np.array([p[1] for p in points], dtype=np.float64)

    best: tuple[float, int, float, float] | None = None
    for k in range(1, len(points) - 1):
        s1, e1 = _segment_fit(x[: k + 1], y[: k + 1])
        s2, e2 = _segment_fit(x[k:], y[k:])
        total = e1 + e2
        if best is None or total < best[0]:
            best = (total, k, s1, s2)
    assert best is not None
    sse, k, s1, s2 = best
    return BreakpointFit(breakpoint=raw_x[k], slope_before=s1, slope_after=s2, sse=sse)
