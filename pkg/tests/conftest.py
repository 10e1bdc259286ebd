import numpy as np
import pytest

from ipfnet import MarginalPair, SparseNetwork, marginals

TOY_DENSE = np.array(
    [
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 1.0, 1.0],
    ]
)


@pytest.fixture
def toy_net():
    return SparseNetwork.from_dense(TOY_DENSE)


@pytest.fixture
def toy_marg():
    """The marginals that make the toy instance infeasible."""
    return MarginalPair(np.array([1.0, 1.0, 1.0, 1.0]), np.array([1.0, 1.0, 2.0]))


@pytest.fixture
def toy_feasible_marg():
    return marginals(SparseNetwork.from_dense(TOY_DENSE))


def connected_support(rng, m, n, density=0.5):
    """Random 0/1 mask whose bipartite graph is connected.

    A wrap-around diagonal touches every row and column and chains them into
    one component; extra cells are sprinkled on top.
    """
    mask = rng.random((m, n)) < density
    for i in range(m):
        mask[i, i % n] = True
    for j in range(n):
        mask[j % m, j] = True
    return mask


def interior_instance(rng, m, n, density=0.7):
    """(Xbar, marg) where the target is A*Xbar*B for positive diagonals.

    The balanced solution then has full Xbar support, so IPF converges
    geometrically and the MLE is finite and interior.  Mild factor ranges
    keep the sweep well conditioned; very skinny sparse supports can still
    stop on the period-2 rule before the single-step rule.
    """
    base = rng.uniform(0.4, 1.2, (m, n)) * connected_support(rng, m, n, density)
    Xbar = SparseNetwork.from_dense(base)
    a = rng.uniform(0.7, 1.4, m)
    b = rng.uniform(0.7, 1.4, n)
    target = base * a[:, None] * b[None, :]
    return Xbar, MarginalPair(target.sum(axis=1), target.sum(axis=0)), target
