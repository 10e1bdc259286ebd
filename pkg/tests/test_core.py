import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipfnet import (
    MarginalPair,
    NetworkSeries,
    SparseNetwork,
    ValidationError,
    aggregate,
    marginals,
    read_marginal,
    read_network,
    validate_pair,
    write_marginal,
    write_network,
)
from conftest import TOY_DENSE


class TestSparseNetwork:
    def test_from_dense_round_trip(self):
        net = SparseNetwork.from_dense(TOY_DENSE)
        assert net.nnz == 6
        np.testing.assert_array_equal(net.to_dense(), TOY_DENSE)

    def test_rejects_duplicates(self):
        with pytest.raises(ValidationError, match="duplicate"):
            SparseNetwork(2, 2, [0, 0], [1, 1], [1.0, 2.0])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            SparseNetwork(2, 2, [0, 2], [0, 0], [1.0, 1.0])
        with pytest.raises(ValidationError):
            SparseNetwork(2, 2, [0, 1], [0, -1], [1.0, 1.0])

    def test_rejects_nonpositive_weights(self):
        with pytest.raises(ValidationError):
            SparseNetwork(1, 2, [0, 0], [0, 1], [1.0, 0.0])
        with pytest.raises(ValidationError):
            SparseNetwork(1, 1, [0], [0], [-1.0])
        with pytest.raises(ValidationError):
            SparseNetwork(1, 1, [0], [0], [np.inf])

    def test_sorts_row_major(self):
        net = SparseNetwork(2, 2, [1, 0], [0, 1], [3.0, 4.0])
        assert net.entries == [(0, 1, 4.0), (1, 0, 3.0)]

    def test_empty_network(self):
        net = SparseNetwork.from_dense(np.zeros((2, 3)))
        assert net.nnz == 0
        assert net.total() == 0.0
        np.testing.assert_array_equal(net.row_sums(), np.zeros(2))
        with pytest.raises(ValidationError):
            net.min_positive()

    def test_sums_and_min_positive(self):
        net = SparseNetwork.from_dense([[1.0, 2.0], [0.0, 0.5]])
        np.testing.assert_allclose(net.row_sums(), [3.0, 0.5])
        np.testing.assert_allclose(net.col_sums(), [1.0, 2.5])
        assert net.min_positive() == 0.5
        assert net.total() == 3.5

    def test_immutable(self):
        net = SparseNetwork.from_dense([[1.0]])
        with pytest.raises(ValueError):
            net.val[0] = 2.0


class TestMarginalPair:
    def test_basic(self):
        marg = MarginalPair(np.array([1.0, 2.0]), np.array([3.0]))
        assert marg.m == 2 and marg.n == 1
        assert marg.total == 3.0

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            MarginalPair(np.array([-1.0]), np.array([1.0]))

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            MarginalPair(np.array([np.nan]), np.array([1.0]))


class TestAggregate:
    def test_identical_slices_double(self):
        s = SparseNetwork.from_dense(np.ones((2, 2)))
        series = NetworkSeries(["a", "b"], [s, s])
        np.testing.assert_array_equal(aggregate(series).to_dense(), 2 * np.ones((2, 2)))

    def test_single_slice_identity(self):
        s = SparseNetwork.from_dense([[1.0, 0.0], [2.0, 3.0]])
        assert aggregate(NetworkSeries(["a"], [s])) == s

    def test_disjoint_support_union(self):
        a = SparseNetwork.from_dense([[1.0, 0.0], [0.0, 0.0]])
        b = SparseNetwork.from_dense([[0.0, 0.0], [0.0, 2.0]])
        out = aggregate(NetworkSeries(["a", "b"], [a, b]))
        np.testing.assert_array_equal(out.to_dense(), [[1.0, 0.0], [0.0, 2.0]])

    def test_empty_series_error(self):
        with pytest.raises(ValidationError):
            aggregate(NetworkSeries([], []))

    def test_dim_mismatch_error(self):
        a = SparseNetwork.from_dense(np.ones((2, 2)))
        b = SparseNetwork.from_dense(np.ones((2, 3)))
        with pytest.raises(ValidationError):
            NetworkSeries(["a", "b"], [a, b])

    def test_marginal_linearity(self):
        rng = np.random.default_rng(0)
        slices = [
            SparseNetwork.from_dense(rng.uniform(0, 1, (3, 4)) * (rng.random((3, 4)) < 0.7))
            for _ in range(5)
        ]
        series = NetworkSeries(list(range(5)), slices)
        agg = marginals(aggregate(series))
        np.testing.assert_allclose(agg.p, sum(marginals(s).p for s in slices), atol=1e-12)
        np.testing.assert_allclose(agg.q, sum(marginals(s).q for s in slices), atol=1e-12)


class TestMarginals:
    def test_toy(self):
        marg = marginals(SparseNetwork.from_dense(TOY_DENSE))
        np.testing.assert_array_equal(marg.p, [1.0, 2.0, 1.0, 2.0])
        np.testing.assert_array_equal(marg.q, [2.0, 3.0, 1.0])

    def test_zero_matrix(self):
        marg = marginals(SparseNetwork.from_dense(np.zeros((2, 2))))
        np.testing.assert_array_equal(marg.p, np.zeros(2))
        np.testing.assert_array_equal(marg.q, np.zeros(2))

    def test_identity(self):
        marg = marginals(SparseNetwork.from_dense(np.eye(3)))
        np.testing.assert_array_equal(marg.p, np.ones(3))
        np.testing.assert_array_equal(marg.q, np.ones(3))


class TestValidatePair:
    def test_equal_totals_unchanged(self):
        net = SparseNetwork.from_dense(np.ones((2, 2)))
        marg = validate_pair(net, MarginalPair(np.array([1.0, 1.0]), np.array([1.0, 1.0])))
        np.testing.assert_array_equal(marg.q, [1.0, 1.0])

    def test_small_mismatch_rescaled(self):
        net = SparseNetwork.from_dense(np.ones((2, 2)))
        marg = validate_pair(
            net, MarginalPair(np.array([2.0, 2.0]), np.array([1.9999999, 2.0000001]))
        )
        assert marg.q.sum() == pytest.approx(4.0, abs=1e-14)

    def test_gross_mismatch_error(self):
        net = SparseNetwork.from_dense(np.ones((2, 2)))
        with pytest.raises(ValidationError):
            validate_pair(net, MarginalPair(np.array([1.0, 1.0]), np.array([3.0, 3.0])))

    def test_dim_mismatch_error(self):
        net = SparseNetwork.from_dense(np.ones((2, 2)))
        with pytest.raises(ValidationError):
            validate_pair(net, MarginalPair(np.array([1.0]), np.array([1.0])))


class TestIo:
    def test_network_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        dense = rng.uniform(0, 1, (5, 4)) * (rng.random((5, 4)) < 0.6)
        net = SparseNetwork.from_dense(dense)
        path = tmp_path / "net.net"
        write_network(net, path)
        back = read_network(path)
        assert back == net

    def test_marginal_round_trip_bit_exact(self, tmp_path):
        vec = np.random.default_rng(8).uniform(0, 10, 17)
        path = tmp_path / "m.p"
        write_marginal(vec, path)
        np.testing.assert_array_equal(read_marginal(path), vec)

    def test_read_network_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.net"
        path.write_text("not a header\n")
        with pytest.raises(ValidationError):
            read_network(path)
        path.write_text("2 2 1\n0 0 nope\n")
        with pytest.raises(ValidationError):
            read_network(path)
        path.write_text("2 2 1\n0 0 1.0\ntrailing\n")
        with pytest.raises(ValidationError):
            read_network(path)

    def test_read_marginal_length_check(self, tmp_path):
        path = tmp_path / "m.p"
        path.write_text("1.0\n2.0\n")
        with pytest.raises(ValidationError):
            read_marginal(path, expected_len=3)

    @settings(max_examples=50, deadline=None)
    @given(
        values=st.lists(
            st.floats(min_value=1e-9, max_value=1e9, allow_nan=False),
            min_size=1,
            max_size=8,
        )
    )
    def test_marginal_round_trip_property(self, values, tmp_path_factory):
        path = tmp_path_factory.mktemp("io") / "v.p"
        write_marginal(np.array(values), path)
        np.testing.assert_array_equal(read_marginal(path), np.array(values))
