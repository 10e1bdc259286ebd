"""Convergence repair: unblock blocking sets by minimal edge additions.

When a blocking set S stops IPF from converging, feasibility is restored by
adding a few edges from S to columns outside its neighborhood, with combined
column marginal at least the deficit delta = p(S) - q(N(S)).  Two
objectives are supported:

* MinEdges:   fewest edges; take columns of the complement neighborhood in
              decreasing-q order until their q-sum covers delta.
* MinLambda1: smallest first-order increase of the leading eigenvalue; pick
              the row in S with the smallest left-eigenvector entry and a
              column set minimizing the summed right-eigenvector entries
              subject to covering delta, a min-cost covering knapsack.

The repair loop (conv_ipf) alternates feasibility checks and edge additions
until the marginals become feasible, then reports the exact change in the
leading eigenvalue alongside the first-order estimates.  fill_all_zeros is
the blunt baseline that gives every zero cell a small weight.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .core import MarginalPair, SparseNetwork
from .errors import InfeasibleError, IpfnetError, NonConvergenceError, ValidationError
from .feasibility import BlockingDiagnosis, check_feasibility, find_blocking_set
from .stats import SpectralInfo, perron_spectral

__all__ = [
    "RepairObjective",
    "Tiebreak",
    "RepairConfig",
    "EdgeAdditionSet",
    "RepairRound",
    "RepairReport",
    "unblock_min_edges",
    "perron_addition",
    "knapsack_min_cover",
    "conv_ipf",
    "fill_all_zeros",
]


class RepairObjective(enum.Enum):
    MIN_EDGES = "MinEdges"
    MIN_LAMBDA1 = "MinLambda1"


class Tiebreak(enum.Enum):
    LARGEST_P = "LargestP"
    SMALLEST_P = "SmallestP"


@dataclass(frozen=True)
class RepairConfig:
    """Knobs of the repair loop.

    ``edge_weight_rule`` is the multiplier applied to the minimum positive
    entry of the current matrix to obtain the uniform weight of added edges.
    ``max_rounds`` defaults to m*n when None (an all-positive matrix is
    always feasible, so the loop must stop by then).
    """

    objective: RepairObjective = RepairObjective.MIN_LAMBDA1
    tiebreak: Tiebreak = Tiebreak.LARGEST_P
    edge_weight_rule: float = 0.01
    knapsack_resolution: int = 10**6
    max_rounds: Optional[int] = None

    def __post_init__(self):
        if not self.edge_weight_rule > 0:
            raise ValidationError("edge weight multiplier must be positive")
        if self.knapsack_resolution < 1:
            raise ValidationError("knapsack resolution must be at least 1")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValidationError("max_rounds must be at least 1")


@dataclass(frozen=True)
class EdgeAdditionSet:
    """Edges to add at one uniform weight; rows lie in S, columns outside N(S).

    ``estimated_dlambda1`` carries the first-order eigenvalue increase
    w * sum_j u1(i*) v1(j) under the MinLambda1 objective, None otherwise.
    """

    edges: tuple
    weight: float
    estimated_dlambda1: Optional[float] = None


@dataclass(frozen=True)
class RepairRound:
    diagnosis: BlockingDiagnosis
    addition: EdgeAdditionSet


@dataclass(frozen=True)
class RepairReport:
    """What conv_ipf did: per-round diagnoses/additions and the exact eigen-shift."""

    rounds: int
    total_edges_added: int
    round_details: tuple
    exact_dlambda1: float
    final: SparseNetwork


def _complement_columns(n, neighbor_cols, q):
    """Columns outside N(S) that carry positive marginal, ascending."""
    mask = np.ones(n, dtype=bool)
    mask[np.asarray(neighbor_cols, dtype=np.int64)] = False
    mask &= q > 0
    return np.flatnonzero(mask)


def _pick_row(diag: BlockingDiagnosis, p, tiebreak: Tiebreak):
    rows = np.asarray(diag.rows, dtype=np.int64)
    vals = p[rows]
    best = vals.max() if tiebreak is Tiebreak.LARGEST_P else vals.min()
    return int(rows[np.flatnonzero(vals == best)[0]])  # rows ascending; ties -> smallest


def _added_edge_weight(X: SparseNetwork, kappa_w):
    return kappa_w * X.min_positive()


def _coverable_delta(delta, available):
    """Clamp delta to the reachable mass, raising only on a real shortfall.

    When S spans every row, the complement's q-sum equals delta exactly in
    real arithmetic (sum p = sum q); float rounding may land either side, so
    the infeasibility signal needs slack.
    """
    if available < delta - 1e-9 * max(1.0, abs(delta)):
        raise IpfnetError(
            "complement columns cannot cover the deficit; marginal totals are"
            " inconsistent with a blocking set"
        )
    return min(delta, available)


def unblock_min_edges(
    X: SparseNetwork,
    marg: MarginalPair,
    diag: BlockingDiagnosis,
    tiebreak: Tiebreak = Tiebreak.LARGEST_P,
    kappa_w: float = 0.01,
) -> EdgeAdditionSet:
    """Fewest-edge unblocking: greedy prefix of complement columns by q.

    Columns outside N(S) are taken in decreasing-q order (ties to the
    smallest index) until their cumulative marginal reaches delta; all edges
    attach to the single row of S selected by the tiebreak on p (ties to the
    smallest index).
    """
    cand = _complement_columns(X.n, diag.neighbor_cols, marg.q)
    qc = marg.q[cand]
    delta = _coverable_delta(diag.delta, float(qc.sum()))
    order = np.lexsort((cand, -qc))  # q descending, index ascending
    csum = np.cumsum(qc[order])
    k = int(np.searchsorted(csum, delta)) + 1
    k = min(k, cand.size)
    cols = cand[order[:k]]
    i_star = _pick_row(diag, marg.p, tiebreak)
    return EdgeAdditionSet(
        edges=tuple((i_star, int(j)) for j in sorted(cols)),
        weight=_added_edge_weight(X, kappa_w),
    )


def knapsack_min_cover(values, weights, threshold, resolution=10**6):
    """Minimize sum(values[J]) subject to sum(weights[J]) >= threshold.

    Reduces to ordinary knapsack on the complement: exclude a maximum-value
    set whose weight stays within capacity C = sum(weights) - threshold.
    Weights are floor-quantized to ``resolution`` units of C for the DP, so
    the excluded set never overshoots C in quantized units but the kept set
    J may undershoot the real threshold; J is verified against the exact
    constraint and greedily topped up (smallest value first) if needed.

    Returns the selected indices, ascending.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if values.shape != weights.shape or values.ndim != 1:
        raise ValidationError("values and weights must be 1-D and equal length")
    if np.any(values < 0) or np.any(weights < 0):
        raise ValidationError("values and weights must be non-negative")
    eta = values.size
    total = float(weights.sum())
    if threshold <= 0:
        return np.empty(0, dtype=np.int64)
    if total < threshold:
        raise InfeasibleError(
            f"total weight {total} cannot reach the threshold {threshold}"
        )
    cap_real = total - threshold
    if cap_real <= 0:
        return np.arange(eta, dtype=np.int64)
    unit = cap_real / resolution
    # clamp in float before the cast: quantized weights beyond the capacity
    # all behave alike, and untamed ratios can overflow int64
    wq = np.floor(np.minimum(weights / unit, resolution + 1.0)).astype(np.int64)
    dp, keep = _kernels.knapsack_table(wq, values, resolution)
    c = int(np.argmax(dp))
    excluded = np.zeros(eta, dtype=bool)
    for i in range(eta - 1, -1, -1):
        if keep[i, c]:
            excluded[i] = True
            c -= int(wq[i])
    J = ~excluded
    # quantization undershoot: restore cheapest excluded items until exact
    if weights[J].sum() < threshold:
        short = np.flatnonzero(excluded)
        for i in short[np.lexsort((short, values[short]))]:
            J[i] = True
            if weights[J].sum() >= threshold:
                break
    return np.flatnonzero(J).astype(np.int64)


def perron_addition(
    X: SparseNetwork,
    marg: MarginalPair,
    diag: BlockingDiagnosis,
    spec: SpectralInfo,
    cfg: RepairConfig = RepairConfig(),
) -> EdgeAdditionSet:
    """Eigenvalue-frugal unblocking via the first-order eigenscore.

    Adding edge (i, j) at weight w shifts the leading eigenvalue by about
    w * u1(i) * v1(j), so the cheapest unblocking attaches every new edge to
    the row of S with the smallest u1 entry and picks columns minimizing the
    summed v1 entries subject to covering delta (a covering knapsack on the
    complement neighborhood).
    """
    rows = np.asarray(diag.rows, dtype=np.int64)
    i_star = int(rows[np.argmin(spec.u1[rows])])
    cand = _complement_columns(X.n, diag.neighbor_cols, marg.q)
    delta = _coverable_delta(diag.delta, float(marg.q[cand].sum()))
    pick = knapsack_min_cover(
        spec.v1[cand], marg.q[cand], delta, cfg.knapsack_resolution
    )
    cols = cand[pick]
    w = _added_edge_weight(X, cfg.edge_weight_rule)
    est = w * float(spec.u1[i_star]) * float(spec.v1[cols].sum())
    return EdgeAdditionSet(
        edges=tuple((i_star, int(j)) for j in sorted(cols)),
        weight=w,
        estimated_dlambda1=est,
    )


def _with_edges(X: SparseNetwork, addition: EdgeAdditionSet) -> SparseNetwork:
    er = np.array([e[0] for e in addition.edges], dtype=np.int64)
    ec = np.array([e[1] for e in addition.edges], dtype=np.int64)
    return SparseNetwork(
        X.m,
        X.n,
        np.concatenate([X.row, er]),
        np.concatenate([X.col, ec]),
        np.concatenate([X.val, np.full(er.size, addition.weight)]),
    )


def conv_ipf(X: SparseNetwork, marg: MarginalPair, cfg: RepairConfig = RepairConfig()):
    """Repair loop: diagnose blocking sets and add edges until feasible.

    Returns (repaired network, RepairReport).  Each round adds at least one
    edge, so the loop ends within m*n rounds on consistent marginals; the
    ``max_rounds`` cap raises if exceeded.  The exact eigenvalue shift in the
    report compares the leading eigenvalues of the final and original
    networks (two eigensolves, not the first-order estimate).
    """
    if marg.m != X.m or marg.n != X.n:
        raise ValidationError("marginal lengths do not match network dims")
    max_rounds = cfg.max_rounds if cfg.max_rounds is not None else X.m * X.n
    current = X
    details = []
    while True:
        flow = check_feasibility(current, marg)
        if flow.feasible:
            break
        if len(details) >= max_rounds:
            raise NonConvergenceError(
                f"repair did not reach feasibility within {max_rounds} rounds"
            )
        diag = find_blocking_set(current, marg, flow)
        if cfg.objective is RepairObjective.MIN_EDGES:
            addition = unblock_min_edges(
                current, marg, diag, cfg.tiebreak, cfg.edge_weight_rule
            )
        else:
            addition = perron_addition(
                current, marg, diag, perron_spectral(current), cfg
            )
        current = _with_edges(current, addition)
        details.append(RepairRound(diagnosis=diag, addition=addition))
    exact = 0.0
    if details:
        exact = perron_spectral(current).lambda1 - perron_spectral(X).lambda1
    report = RepairReport(
        rounds=len(details),
        total_edges_added=sum(len(r.addition.edges) for r in details),
        round_details=tuple(details),
        exact_dlambda1=exact,
        final=current,
    )
    return current, report


def fill_all_zeros(X: SparseNetwork, marg: MarginalPair, eps_fill: float) -> SparseNetwork:
    """Give every zero cell the weight eps_fill (the blunt repair baseline)."""
    if marg.m != X.m or marg.n != X.n:
        raise ValidationError("marginal lengths do not match network dims")
    if not eps_fill > 0:
        raise ValidationError("fill value must be positive")
    dense = np.full((X.m, X.n), float(eps_fill))
    dense[X.row, X.col] = X.val
    return SparseNetwork.from_dense(dense)
