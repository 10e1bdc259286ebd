"""Feasibility certification by max-flow and blocking-set extraction.

Balancing X to (p, q) has a solution iff the flow network

    source -> row i   with capacity p_i
    row i  -> col j   with unbounded capacity wherever X_ij > 0
    col j  -> sink    with capacity q_j

carries sum(p) units of flow; the saturating flow matrix is then a witness
with marginals (p, q) inheriting the zeros of X.  Equivalently, no row set S
may satisfy sum_{i in S} p_i > sum_{j in N(S)} q_j; when the flow falls
short such a blocking set is recovered by an alternating BFS over the
residual structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MarginalPair, SparseNetwork
from .errors import IpfnetError, ValidationError

__all__ = [
    "FlowDiagnostics",
    "BlockingDiagnosis",
    "check_feasibility",
    "find_blocking_set",
    "verify_blocking",
]

#: relative tolerance for declaring the max flow equal to sum(p)
FEASIBILITY_REL_TOL = 1e-9
#: augmenting paths with a smaller bottleneck are ignored (float dust guard)
AUGMENT_CUTOFF = 1e-12


@dataclass(frozen=True)
class FlowDiagnostics:
    """Maximum flow through the feasibility network and its decomposition."""

    max_flow_value: float
    edge_flows: dict
    row_flow: np.ndarray
    col_flow: np.ndarray
    feasible: bool


@dataclass(frozen=True)
class BlockingDiagnosis:
    """A row set S whose total marginal exceeds its column neighborhood's."""

    rows: tuple
    neighbor_cols: tuple
    p_sum: float
    q_sum: float
    delta: float


class _Dinic:
    """Blocking-flow max-flow on an adjacency-array graph with real capacities."""

    def __init__(self, n_nodes):
        self.n = n_nodes
        self.head = [[] for _ in range(n_nodes)]
        self.to = []
        self.cap = []

    def add_edge(self, u, v, c):
        eid = len(self.to)
        self.head[u].append(eid)
        self.to.append(v)
        self.cap.append(c)
        self.head[v].append(eid + 1)
        self.to.append(u)
        self.cap.append(0.0)
        return eid

    def max_flow(self, s, t):
        total = 0.0
        to, cap, head = self.to, self.cap, self.head
        while True:
            # BFS level graph over residual edges
            level = [-1] * self.n
            level[s] = 0
            queue = [s]
            for u in queue:
                for eid in head[u]:
                    v = to[eid]
                    if cap[eid] > AUGMENT_CUTOFF and level[v] < 0:
                        level[v] = level[u] + 1
                        queue.append(v)
            if level[t] < 0:
                return total
            # blocking flow by iterative DFS with per-node edge pointers
            it = [0] * self.n
            path = []  # edge ids from s to the current node u
            u = s
            while True:
                if u == t:
                    bottleneck = min(cap[eid] for eid in path)
                    for eid in path:
                        cap[eid] -= bottleneck
                        cap[eid ^ 1] += bottleneck
                    total += bottleneck
                    # retreat to just before the first saturated edge
                    cut = next(
                        k for k, eid in enumerate(path) if cap[eid] <= AUGMENT_CUTOFF
                    )
                    del path[cut:]
                    u = s if not path else to[path[-1]]
                    continue
                advanced = False
                while it[u] < len(head[u]):
                    eid = head[u][it[u]]
                    v = to[eid]
                    if cap[eid] > AUGMENT_CUTOFF and level[v] == level[u] + 1:
                        path.append(eid)
                        u = v
                        advanced = True
                        break
                    it[u] += 1
                if advanced:
                    continue
                if u == s:
                    break  # phase finished; rebuild levels
                level[u] = -1  # dead end
                path.pop()
                u = s if not path else to[path[-1]]


def check_feasibility(X: SparseNetwork, marg: MarginalPair) -> FlowDiagnostics:
    """Max-flow diagnosis; ``feasible`` iff the flow saturates sum(p)."""
    if marg.m != X.m or marg.n != X.n:
        raise ValidationError("marginal lengths do not match network dims")
    m, n = X.m, X.n
    p, q = marg.p, marg.q
    src, snk = 0, m + n + 1
    g = _Dinic(m + n + 2)
    big = float(p.sum()) + 1.0
    row_eids = np.empty(m, dtype=np.int64)
    col_eids = np.empty(n, dtype=np.int64)
    for i in range(m):
        row_eids[i] = g.add_edge(src, 1 + i, float(p[i]))
    for j in range(n):
        col_eids[j] = g.add_edge(1 + m + j, snk, float(q[j]))
    support_eids = np.empty(X.nnz, dtype=np.int64)
    for k in range(X.nnz):
        support_eids[k] = g.add_edge(1 + int(X.row[k]), 1 + m + int(X.col[k]), big)
    value = g.max_flow(src, snk)
    cap = np.asarray(g.cap)
    flow_vals = big - cap[support_eids]
    flow_vals[flow_vals < 0] = 0.0
    row_flow = p - cap[row_eids]
    col_flow = q - cap[col_eids]
    total = float(p.sum())
    feasible = (total - value) <= FEASIBILITY_REL_TOL * max(total, 1e-300)
    edge_flows = {
        (int(i), int(j)): float(f) for i, j, f in zip(X.row, X.col, flow_vals)
    }
    return FlowDiagnostics(
        max_flow_value=float(value),
        edge_flows=edge_flows,
        row_flow=row_flow,
        col_flow=col_flow,
        feasible=bool(feasible),
    )


def find_blocking_set(
    X: SparseNetwork, marg: MarginalPair, flow: FlowDiagnostics
) -> BlockingDiagnosis:
    """Recover a blocking row set from an unsaturated maximum flow.

    Starts at the row with the largest deficit p_i - row_flow[i] (ties to the
    smallest index) and alternates: row -> every unvisited neighbor column,
    column -> rows sending positive flow into it.  The visited rows block.
    """
    if flow.feasible:
        raise ValidationError("blocking-set extraction requires an infeasible flow")
    p, q = marg.p, marg.q
    deficit = p - flow.row_flow
    start = int(np.argmax(deficit))
    if deficit[start] <= 0:
        raise IpfnetError("infeasible flow without a deficit row")

    # column -> [rows with positive flow on (row, col)]
    back = {}
    for (i, j), f in flow.edge_flows.items():
        if f > AUGMENT_CUTOFF:
            back.setdefault(j, []).append(i)
    fwd = {}
    for i, j in zip(X.row, X.col):
        fwd.setdefault(int(i), []).append(int(j))

    in_s = np.zeros(X.m, dtype=bool)
    in_n = np.zeros(X.n, dtype=bool)
    in_s[start] = True
    frontier = [start]
    while frontier:
        new_cols = []
        for i in frontier:
            for j in fwd.get(i, ()):
                if not in_n[j]:
                    in_n[j] = True
                    new_cols.append(j)
        frontier = []
        for j in new_cols:
            for i in back.get(j, ()):
                if not in_s[i]:
                    in_s[i] = True
                    frontier.append(i)
    rows = tuple(int(i) for i in np.flatnonzero(in_s))
    cols = tuple(int(j) for j in np.flatnonzero(in_n))
    p_sum = float(p[list(rows)].sum())
    q_sum = float(q[list(cols)].sum()) if cols else 0.0
    delta = p_sum - q_sum
    if delta <= 0:
        raise IpfnetError("blocking-set extraction produced a non-blocking set")
    return BlockingDiagnosis(rows, cols, p_sum, q_sum, delta)


def verify_blocking(X: SparseNetwork, marg: MarginalPair, S) -> bool:
    """Direct test: does sum_{i in S} p_i exceed sum over N(S) of q_j?"""
    S = sorted(set(int(i) for i in S))
    if any(i < 0 or i >= X.m for i in S):
        raise ValidationError("row index out of range")
    if not S:
        return False
    mask = np.isin(X.row, S)
    ncols = np.unique(X.col[mask])
    p_sum = marg.p[S].sum()
    q_sum = marg.q[ncols].sum() if ncols.size else 0.0
    return bool(p_sum > q_sum)
