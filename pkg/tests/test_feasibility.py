"""Feasibility certification: max-flow diagnosis against a networkx oracle
and the subset condition against exhaustive enumeration."""

import itertools

import networkx as nx
import numpy as np
import pytest

from ipfnet import (
    IpfStatus,
    MarginalPair,
    SparseNetwork,
    StructuralInfeasibilityError,
    ValidationError,
    check_feasibility,
    find_blocking_set,
    marginals,
    run_ipf,
    verify_blocking,
)

from conftest import TOY_DENSE, connected_support, interior_instance


def nx_max_flow(X, p, q):
    """Independent max-flow value via networkx on the same layered graph."""
    g = nx.DiGraph()
    m, n = X.shape
    for i in range(m):
        g.add_edge("s", ("r", i), capacity=float(p[i]))
    for j in range(n):
        g.add_edge(("c", j), "t", capacity=float(q[j]))
    for i in range(m):
        for j in range(n):
            if X[i, j] > 0:
                g.add_edge(("r", i), ("c", j))  # uncapped
    return nx.maximum_flow_value(g, "s", "t")


def subset_condition_violated(X, p, q):
    """Exhaustive Condition-2 scan: some S with sum p_S > sum q over N(S)."""
    m, n = X.shape
    for size in range(1, m + 1):
        for S in itertools.combinations(range(m), size):
            cols = np.any(X[list(S)] > 0, axis=0)
            if p[list(S)].sum() > q[cols].sum():
                return True
    return False


def _rand_case(rng, m, n, density=0.5, zero_rows=False):
    mask = rng.random((m, n)) < density
    dense = np.where(mask, rng.uniform(0.5, 2.0, (m, n)), 0.0)
    if not zero_rows:
        for i in range(m):
            if not mask[i].any():
                dense[i, rng.integers(n)] = 1.0
        for j in range(n):
            if not mask[:, j].any():
                dense[rng.integers(m), j] = 1.0
    p = rng.uniform(0.2, 2.0, m)
    q = rng.uniform(0.2, 2.0, n)
    q *= p.sum() / q.sum()
    return dense, p, q


class TestCheckFeasibility:
    def test_toy_flow_value(self, toy_net, toy_marg):
        flow = check_feasibility(toy_net, toy_marg)
        assert flow.max_flow_value == pytest.approx(3.0)
        assert toy_marg.total == pytest.approx(4.0)
        assert not flow.feasible

    def test_dense_positive_always_feasible(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            m, n = rng.integers(2, 7, 2)
            dense = rng.uniform(0.1, 1.0, (int(m), int(n)))
            p = rng.uniform(0.2, 2.0, int(m))
            q = rng.uniform(0.2, 2.0, int(n))
            q *= p.sum() / q.sum()
            flow = check_feasibility(SparseNetwork.from_dense(dense), MarginalPair(p, q))
            assert flow.feasible
            assert flow.max_flow_value == pytest.approx(p.sum())

    def test_own_marginals_certificate(self, toy_net):
        marg = marginals(toy_net)
        flow = check_feasibility(toy_net, marg)
        assert flow.feasible
        # one optimal flow is the matrix itself
        assert flow.max_flow_value == pytest.approx(toy_net.total())

    def test_matches_networkx_flow_value(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            m, n = (int(x) for x in rng.integers(2, 9, 2))
            dense, p, q = _rand_case(rng, m, n, density=float(rng.uniform(0.2, 0.9)))
            flow = check_feasibility(SparseNetwork.from_dense(dense), MarginalPair(p, q))
            want = nx_max_flow(dense, p, q)
            assert flow.max_flow_value == pytest.approx(want, rel=1e-9)

    def test_flow_conservation_invariants(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            m, n = (int(x) for x in rng.integers(2, 9, 2))
            dense, p, q = _rand_case(rng, m, n)
            net = SparseNetwork.from_dense(dense)
            flow = check_feasibility(net, MarginalPair(p, q))
            row_acc = np.zeros(m)
            col_acc = np.zeros(n)
            for (i, j), f in flow.edge_flows.items():
                assert dense[i, j] > 0
                assert f >= -1e-12
                row_acc[i] += f
                col_acc[j] += f
            np.testing.assert_allclose(row_acc, flow.row_flow, atol=1e-9)
            np.testing.assert_allclose(col_acc, flow.col_flow, atol=1e-9)
            assert np.all(flow.row_flow <= p + 1e-9)
            assert np.all(flow.col_flow <= q + 1e-9)
            assert flow.max_flow_value <= p.sum() + 1e-9
            assert flow.max_flow_value == pytest.approx(flow.row_flow.sum())

    def test_flow_matrix_is_feasibility_certificate(self):
        # when feasible, edge_flows is a matrix with marginals (p, q) and
        # support inside X's support
        rng = np.random.default_rng(3)
        hits = 0
        for _ in range(20):
            m, n = (int(x) for x in rng.integers(3, 8, 2))
            dense, p, q = _rand_case(rng, m, n, density=0.8)
            flow = check_feasibility(SparseNetwork.from_dense(dense), MarginalPair(p, q))
            if not flow.feasible:
                continue
            hits += 1
            np.testing.assert_allclose(flow.row_flow, p, atol=1e-9)
            np.testing.assert_allclose(flow.col_flow, q, atol=1e-9)
        assert hits >= 5

    def test_dim_mismatch(self, toy_net):
        with pytest.raises(ValidationError):
            check_feasibility(toy_net, MarginalPair([1.0], [1.0, 1.0, 1.0]))


class TestExhaustiveEquivalence:
    def test_subset_condition_matches_flow(self):
        rng = np.random.default_rng(4)
        infeasible_seen = 0
        for trial in range(120):
            m = int(rng.integers(2, 7))
            n = int(rng.integers(2, 7))
            dense, p, q = _rand_case(rng, m, n, density=0.35, zero_rows=True)
            flow = check_feasibility(SparseNetwork.from_dense(dense), MarginalPair(p, q))
            violated = subset_condition_violated(dense, p, q)
            assert flow.feasible == (not violated)
            infeasible_seen += not flow.feasible
        assert infeasible_seen >= 20


class TestFindBlockingSet:
    def test_toy_blocking_set(self, toy_net, toy_marg):
        flow = check_feasibility(toy_net, toy_marg)
        diag = find_blocking_set(toy_net, toy_marg, flow)
        assert set(diag.rows) == {0, 1, 2}
        assert set(diag.neighbor_cols) == {0, 1}
        assert diag.p_sum == pytest.approx(3.0)
        assert diag.q_sum == pytest.approx(2.0)
        assert diag.delta == pytest.approx(1.0)

    def test_isolated_row(self):
        dense = np.array([[1.0, 1.0], [0.0, 0.0]])
        marg = MarginalPair([1.0, 0.5], [0.75, 0.75])
        flow = check_feasibility(SparseNetwork.from_dense(dense), marg)
        diag = find_blocking_set(SparseNetwork.from_dense(dense), marg, flow)
        assert diag.rows == (1,)
        assert diag.neighbor_cols == ()
        assert diag.delta == pytest.approx(0.5)

    def test_output_always_blocks(self):
        rng = np.random.default_rng(5)
        found = 0
        for _ in range(60):
            m = int(rng.integers(2, 9))
            n = int(rng.integers(2, 9))
            dense, p, q = _rand_case(rng, m, n, density=0.3, zero_rows=True)
            net = SparseNetwork.from_dense(dense)
            marg = MarginalPair(p, q)
            flow = check_feasibility(net, marg)
            if flow.feasible:
                continue
            found += 1
            diag = find_blocking_set(net, marg, flow)
            assert verify_blocking(net, marg, diag.rows)
            assert diag.delta == pytest.approx(diag.p_sum - diag.q_sum)
            assert diag.delta > 0
            # neighbor set is exactly the columns adjacent to S
            mask = np.isin(net.row, diag.rows)
            assert set(diag.neighbor_cols) == set(net.col[mask].tolist())
        assert found >= 15

    def test_rejects_feasible_flow(self, toy_net):
        marg = marginals(toy_net)
        flow = check_feasibility(toy_net, marg)
        with pytest.raises(ValidationError):
            find_blocking_set(toy_net, marg, flow)


class TestVerifyBlocking:
    def test_toy_true_set(self, toy_net, toy_marg):
        assert verify_blocking(toy_net, toy_marg, {0, 1, 2})

    def test_toy_false_set(self, toy_net, toy_marg):
        assert not verify_blocking(toy_net, toy_marg, {3})

    def test_empty_set(self, toy_net, toy_marg):
        assert not verify_blocking(toy_net, toy_marg, set())

    def test_out_of_range(self, toy_net, toy_marg):
        with pytest.raises(ValidationError):
            verify_blocking(toy_net, toy_marg, {4})


class TestAgreementWithBalancing:
    def test_feasible_implies_converged(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            m, n = (int(x) for x in rng.integers(4, 9, 2))
            Xbar, marg, _ = interior_instance(rng, m, n)
            assert check_feasibility(Xbar, marg).feasible
            assert run_ipf(Xbar, marg).status is IpfStatus.CONVERGED

    def test_infeasible_implies_oscillation_or_structural(self):
        rng = np.random.default_rng(7)
        seen = 0
        for _ in range(60):
            m = int(rng.integers(2, 8))
            n = int(rng.integers(2, 8))
            dense, p, q = _rand_case(rng, m, n, density=0.3, zero_rows=True)
            net = SparseNetwork.from_dense(dense)
            marg = MarginalPair(p, q)
            if check_feasibility(net, marg).feasible:
                continue
            seen += 1
            try:
                res = run_ipf(net, marg)
            except StructuralInfeasibilityError:
                continue
            assert res.status is IpfStatus.OSCILLATING
        assert seen >= 15
