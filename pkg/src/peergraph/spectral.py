"""Google matrix machinery: PageRank, stochastic complementation, temporal diffs.

The Google matrix of a weighted directed graph with ``N`` nodes is
``G = alpha * S + (1 - alpha) / N`` where ``S`` column-normalizes the
weight matrix (``S[i, j] = W[i, j] / w_out(j)``) and columns without
out-weight are replaced by the uniform column ``1/N``.  ``G`` is kept
implicit: applying it costs ``O(nnz + N)``.

The reduced matrix for a node subset ``r`` (complement ``s``) is the
stochastic complement

    G_R = G_rr + G_rs (I - G_ss)^{-1} G_sr,

an exact Markov-chain reduction: the restriction of the PageRank vector
to ``r``, L1-normalized, is a fixed point of ``G_R``.  The linear solve
exploits that ``I - G_ss`` is a sparse matrix minus a rank-one term, so a
sparse LU factorization plus a Sherman-Morrison correction solves all
right-hand sides at once; a plain fixed-point series is available as an
alternative method.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import date as Date
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import CensorError, ConvergenceError, SubsetMismatchError

DEFAULT_ALPHA = 0.85
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


class GoogleMatrix:
    """Implicit column-stochastic operator over a weighted directed graph.

    ``direction="reverse"`` transposes the weight matrix before
    normalization, which is equivalent to inverting every edge.
    """

    def __init__(
        self,
        W: sparse.spmatrix,
        alpha: float = DEFAULT_ALPHA,
        direction: str = "forward",
        labels: Sequence[str] | None = None,
        kinds: Sequence[str] | None = None,
        names: Sequence[str] | None = None,
    ) -> None:
        if not 0.0 <= alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {alpha}")
        if direction not in ("forward", "reverse"):
            raise ValueError("direction must be 'forward' or 'reverse'")
        W = sparse.csc_matrix(W, dtype=np.float64)
        if W.shape[0] != W.shape[1]:
            raise ValueError("weight matrix must be square")
        if direction == "reverse":
            W = W.T.tocsc()
        if W.nnz and W.data.min() < 0:
            raise ValueError("weights must be non-negative")

        n = W.shape[0]
        out_weight = np.asarray(W.sum(axis=0)).ravel()
        A = W.copy()
        scale = np.divide(1.0, out_weight, out=np.zeros(n), where=out_weight > 0)
        A.data *= np.repeat(scale, np.diff(A.indptr))
        self._A = A
        self.dangling = out_weight == 0.0
        self.alpha = float(alpha)
        self.N = n
        self.direction = direction
        self.labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(n))
        self.kinds = tuple(kinds) if kinds is not None else ("",) * n
        self.names = tuple(names) if names is not None else ("",) * n
        if len(self.labels) != n:
            raise ValueError("labels length must match the node count")

    @property
    def normalized_weights(self) -> sparse.csc_matrix:
        """Column-normalized weight matrix (dangling columns left all-zero)."""
        return self._A

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Compute ``G @ v``."""
        y = self.alpha * (self._A @ v)
        lost = self.alpha * float(v[self.dangling].sum()) + (1.0 - self.alpha) * float(v.sum())
        return y + lost / self.N

    def column(self, j: int) -> np.ndarray:
        """Dense column ``G[:, j]``."""
        col = np.full(self.N, (1.0 - self.alpha) / self.N)
        if self.dangling[j]:
            col += self.alpha / self.N
        else:
            col += self.alpha * self._A[:, [j]].toarray().ravel()
        return col

    def dense(self) -> np.ndarray:
        """Full dense ``G``; only sensible for small graphs."""
        D = self.alpha * self._A.toarray()
        D[:, self.dangling] = self.alpha / self.N
        D += (1.0 - self.alpha) / self.N
        return D


def google_matrix(
    graph_or_weights,
    alpha: float = DEFAULT_ALPHA,
    direction: str = "forward",
) -> GoogleMatrix:
    """Build a :class:`GoogleMatrix` from a peering graph or a raw weight matrix."""
    if sparse.issparse(graph_or_weights) or isinstance(graph_or_weights, np.ndarray):
        return GoogleMatrix(sparse.csc_matrix(graph_or_weights), alpha, direction)
    g = graph_or_weights
    return GoogleMatrix(
        g.W, alpha, direction, labels=g.labels, kinds=g.kinds, names=g.names
    )


@dataclass(frozen=True)
class PageRankVector:
    P: np.ndarray
    iterations: int
    residual: float


def pagerank(
    G: GoogleMatrix,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PageRankVector:
    """Power iteration from the uniform vector until the L1 change drops below tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = np.full(G.N, 1.0 / G.N)
    for iteration in range(1, max_iter + 1):
        nxt = G.apply(v)
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - v).sum())
        v = nxt
        if residual < tol:
            return PageRankVector(P=v, iterations=iteration, residual=residual)
    raise ConvergenceError(
        f"PageRank did not reach tol={tol} within {max_iter} iterations"
    )


@dataclass(frozen=True)
class RankEntry:
    label: str
    kind: str
    name: str
    value: float
    rank: int


@dataclass(frozen=True)
class RankTable:
    entries: tuple[RankEntry, ...]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def top(self, k: int) -> tuple[RankEntry, ...]:
        return self.entries[:k]

    def rank_of(self, label: str) -> int | None:
        for entry in self.entries:
            if entry.label == label:
                return entry.rank
        return None


def rank_table(
    values: np.ndarray | PageRankVector,
    labels: Sequence[str],
    kinds: Sequence[str] | None = None,
    names: Sequence[str] | None = None,
    keep: Callable[[int], bool] | None = None,
) -> RankTable:
    """Order nodes by descending value; ties break toward the lower node index.

    ``keep`` optionally filters node indices before ranking, which
    re-ranks the survivors contiguously from 1.
    """
    vec = values.P if isinstance(values, PageRankVector) else np.asarray(values)
    if len(labels) != vec.shape[0]:
        raise ValueError("labels length must match the value vector")
    kinds = kinds if kinds is not None else ("",) * len(labels)
    names = names if names is not None else ("",) * len(labels)
    indices = [i for i in range(len(labels)) if keep is None or keep(i)]
    indices.sort(key=lambda i: (-vec[i], i))
    entries = tuple(
        RankEntry(label=labels[i], kind=kinds[i], name=names[i], value=float(vec[i]), rank=r)
        for r, i in enumerate(indices, start=1)
    )
    return RankTable(entries=entries)


def rank_positions(values: np.ndarray) -> np.ndarray:
    """1-based rank of every node under the same ordering as :func:`rank_table`."""
    n = values.shape[0]
    order = sorted(range(n), key=lambda i: (-values[i], i))
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(1, n + 1)
    return ranks


@dataclass(frozen=True)
class ReducedGoogleMatrix:
    """Dense stochastic complement over an ordered node subset.

    ``GR[i, j]`` is the reduced transition probability toward subset node
    ``i`` from subset node ``j`` (direct plus every indirect path through
    the censored complement).  ``Pr`` is the unnormalized PageRank slice
    of the subset nodes; ``GR @ (Pr / ||Pr||_1) = Pr / ||Pr||_1``.
    """

    labels: tuple[str, ...]
    indices: tuple[int, ...]
    GR: np.ndarray
    Pr: np.ndarray | None
    direction: str
    alpha: float
    censored: bool = False
    date: Date | None = None


def _slice_blocks(A: sparse.csc_matrix, r: np.ndarray, s: np.ndarray):
    cols_r = A[:, r].tocsr()
    A_rr = cols_r[r, :]
    A_sr = cols_r[s, :]
    if s.size:
        cols_s = A[:, s].tocsr()
        A_rs = cols_s[r, :]
        A_ss = cols_s[s, :]
    else:
        A_rs = sparse.csr_matrix((r.size, 0))
        A_ss = sparse.csr_matrix((0, 0))
    return A_rr, A_rs, A_sr, A_ss


def reduced_google_matrix(
    G: GoogleMatrix,
    subset: Sequence[int],
    tol: float = DEFAULT_TOL,
    method: str = "direct",
    max_iter: int = 200_000,
    pagerank_vector: PageRankVector | None = None,
) -> ReducedGoogleMatrix:
    """Stochastic complement of ``G`` onto ``subset`` (order preserved).

    ``method="direct"`` factorizes the sparse part of ``I - G_ss`` once
    (LU) and applies a rank-one Sherman-Morrison correction; the residual
    of every column solve is checked against ``tol``.  ``method="series"``
    iterates ``Y <- B + G_ss Y`` until the largest column change in L1
    norm drops below ``tol``.  With an empty complement the result is
    ``G`` itself restricted to the requested ordering.
    """
    r = np.asarray(list(subset), dtype=np.int64)
    if r.size == 0:
        raise ValueError("subset must contain at least one node")
    if np.unique(r).size != r.size:
        raise ValueError("subset nodes must be distinct")
    if r.min() < 0 or r.max() >= G.N:
        raise ValueError("subset index out of range")
    if method not in ("direct", "series"):
        raise ValueError("method must be 'direct' or 'series'")

    alpha, n = G.alpha, G.N
    in_r = np.zeros(n, dtype=bool)
    in_r[r] = True
    s = np.flatnonzero(~in_r)

    A_rr, A_rs, A_sr, A_ss = _slice_blocks(G.normalized_weights, r, s)
    dang_r = G.dangling[r].astype(np.float64)
    dang_s = G.dangling[s].astype(np.float64)
    base = (1.0 - alpha) / n

    # Dense G_rr and G_sr blocks (columns indexed by the subset order).
    G_rr = alpha * A_rr.toarray() + (alpha / n) * dang_r[None, :] + base
    if s.size == 0:
        GR = G_rr
    else:
        B = alpha * A_sr.toarray() + (alpha / n) * dang_r[None, :] + base
        ones_s = np.ones(s.size)

        def apply_G_ss(Y: np.ndarray) -> np.ndarray:
            return (
                alpha * (A_ss @ Y)
                + (alpha / n) * np.outer(ones_s, dang_s @ Y)
                + base * np.outer(ones_s, Y.sum(axis=0))
            )

        if method == "direct":
            # I - G_ss = M - 1 q^T with sparse M = I - alpha*A_ss and
            # q = (alpha/n)*dangling_s + (1-alpha)/n.
            M = (sparse.identity(s.size, format="csc") - alpha * A_ss.tocsc()).tocsc()
            lu = splu(M)
            q = (alpha / n) * dang_s + base
            h = lu.solve(ones_s)
            denom = 1.0 - float(q @ h)
            Z = lu.solve(B)
            Y = Z + np.outer(h, q @ Z) / denom
            residual = float(np.abs(Y - apply_G_ss(Y) - B).sum(axis=0).max())
            if residual > max(tol, 1e-9):
                raise ConvergenceError(
                    f"direct complement solve residual {residual:.3e} exceeds tolerance"
                )
        else:
            Y = B.copy()
            for _ in range(max_iter):
                nxt = B + apply_G_ss(Y)
                change = float(np.abs(nxt - Y).sum(axis=0).max())
                Y = nxt
                if change < tol:
                    break
            else:
                raise ConvergenceError(
                    f"series complement solve did not reach tol={tol} in {max_iter} iterations"
                )
        G_rsY = (
            alpha * (A_rs @ Y)
            + (alpha / n) * np.outer(np.ones(r.size), dang_s @ Y)
            + base * np.outer(np.ones(r.size), Y.sum(axis=0))
        )
        GR = G_rr + G_rsY

    pr = pagerank_vector if pagerank_vector is not None else pagerank(G, tol=min(tol, DEFAULT_TOL))
    return ReducedGoogleMatrix(
        labels=tuple(G.labels[i] for i in r),
        indices=tuple(int(i) for i in r),
        GR=np.asfortranarray(GR),
        Pr=pr.P[r].copy(),
        direction=G.direction,
        alpha=alpha,
    )


def censor_diagonal(R: ReducedGoogleMatrix) -> ReducedGoogleMatrix:
    """Zero the diagonal and re-normalize every column to sum 1."""
    GR = R.GR.copy()
    off_mass = GR.sum(axis=0) - np.diag(GR)
    if np.any(off_mass <= 0):
        bad = int(np.flatnonzero(off_mass <= 0)[0])
        raise CensorError(
            f"column for node {R.labels[bad]} has no off-diagonal mass to re-normalize"
        )
    np.fill_diagonal(GR, 0.0)
    GR /= off_mass[None, :]
    return replace(R, GR=np.asfortranarray(GR), censored=True)


@dataclass(frozen=True)
class ChangeMatrix:
    """Entrywise relative change between two reduced matrices.

    ``delta[i, j] = (later[i, j] - earlier[i, j]) / earlier[i, j]``;
    cells whose earlier value is zero are undefined and carried as NaN.
    A vanished link is exactly -1.  ``cap`` is a display clamp only and
    does not alter the stored values.
    """

    labels: tuple[str, ...]
    delta: np.ndarray
    dates: tuple[Date | None, Date | None]
    cap: tuple[float, float] | None = None

    @property
    def undefined(self) -> np.ndarray:
        return np.isnan(self.delta)

    def capped(self) -> np.ndarray:
        if self.cap is None:
            return self.delta.copy()
        return np.clip(self.delta, self.cap[0], self.cap[1])


def relative_change(
    earlier: ReducedGoogleMatrix,
    later: ReducedGoogleMatrix,
    cap: tuple[float, float] | None = None,
) -> ChangeMatrix:
    """Relative change of every reduced-matrix element between two dates."""
    if earlier.labels != later.labels:
        raise SubsetMismatchError("reduced matrices cover different node subsets")
    if earlier.direction != later.direction:
        raise SubsetMismatchError("reduced matrices have different directions")
    if earlier.censored != later.censored:
        raise SubsetMismatchError("reduced matrices are not censored identically")
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = (later.GR - earlier.GR) / earlier.GR
    delta[earlier.GR == 0.0] = np.nan
    return ChangeMatrix(
        labels=earlier.labels,
        delta=delta,
        dates=(earlier.date, later.date),
        cap=cap,
    )
