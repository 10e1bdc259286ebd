"""Alternating row/column rescaling (IPF / Sinkhorn) with oscillation detection.

The solver alternates

    d0_i <- p_i / sum_j X_ij d1_j        (odd iterations)
    d1_j <- q_j / sum_i X_ij d0_i        (even iterations)

starting from d0 = d1 = 1, with rows and columns whose target marginal is
zero pinned to factor 0 before the first sweep (equivalent to running plain
IPF on the submatrix that drops them).  Writing Xhat(tau) for the scaled
matrix after iteration tau, the loop stops

* Converged   when ||Xhat(tau) - Xhat(tau-1)||_1 < eps,
* Oscillating when ||Xhat(tau) - Xhat(tau-2)||_1 < eps and
                   ||Xhat(tau-1) - Xhat(tau-3)||_1 < eps,

else MaxIterations.  Only the last four iterates are kept.  When the run
oscillates there are exactly two accumulation points: a row-updated iterate
whose row sums equal p, and a column-updated one whose column sums equal q.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .core import MarginalPair, SparseNetwork
from .errors import StructuralInfeasibilityError, ValidationError

__all__ = [
    "IpfConfig",
    "IpfStatus",
    "IpfResult",
    "run_ipf",
    "scaled_matrix",
    "l1_marginal_error",
    "normalize_factors",
]


class IpfStatus(enum.Enum):
    CONVERGED = "Converged"
    OSCILLATING = "Oscillating"
    MAX_ITERATIONS = "MaxIterations"


@dataclass(frozen=True)
class IpfConfig:
    """Tolerance eps applies to the l1 stopping tests on scaled matrices."""

    tolerance: float = 1e-8
    max_iterations: int = 10000
    record_trace: bool = True

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be positive")
        if self.max_iterations < 4:
            raise ValidationError("max_iterations must be at least 4 (oscillation test)")


@dataclass(frozen=True)
class IpfResult:
    """Scaling factors and termination record of one run.

    ``d0[i] == 0`` iff ``p[i] == 0`` and ``d1[j] == 0`` iff ``q[j] == 0``.
    ``l1_trace[k]`` is the l1 marginal error of the scaled matrix after
    iteration k (index 0 = before the first sweep); it is non-increasing.
    ``row_matched``/``col_matched`` hold the two accumulation points when the
    run oscillates (row sums of the former match p, column sums of the
    latter match q) and are None otherwise.
    """

    d0: np.ndarray
    d1: np.ndarray
    status: IpfStatus
    iterations: int
    l1_trace: np.ndarray
    row_matched: Optional[SparseNetwork] = None
    col_matched: Optional[SparseNetwork] = None

    @property
    def converged(self):
        return self.status is IpfStatus.CONVERGED


def run_ipf(X: SparseNetwork, marg: MarginalPair, cfg: IpfConfig = IpfConfig()) -> IpfResult:
    """Balance X to the marginals (p, q); see the module docstring for the rules.

    Raises
    ------
    StructuralInfeasibilityError
        if a row (column) with positive marginal has no support on columns
        (rows) carrying positive marginals, at any sweep.  The repair module
        fixes such inputs.
    """
    if marg.m != X.m or marg.n != X.n:
        raise ValidationError("marginal lengths do not match network dims")
    status_code, iters, d0, d1, trace, last, prev, err_axis, err_idx = _kernels.ipf_loop(
        X.row, X.col, X.val, marg.p, marg.q, cfg.tolerance, cfg.max_iterations
    )
    if status_code == _kernels.STATUS_STRUCTURAL:
        raise StructuralInfeasibilityError("row" if err_axis == 0 else "col", err_idx)
    status = {
        _kernels.STATUS_CONVERGED: IpfStatus.CONVERGED,
        _kernels.STATUS_OSCILLATING: IpfStatus.OSCILLATING,
        _kernels.STATUS_MAX_ITERATIONS: IpfStatus.MAX_ITERATIONS,
    }[status_code]
    row_matched = col_matched = None
    if status is IpfStatus.OSCILLATING:
        # the final iterate `last` came from iteration `iters`; odd = row update
        odd_vals, even_vals = (last, prev) if iters % 2 == 1 else (prev, last)
        row_matched = _from_support(X, odd_vals)
        col_matched = _from_support(X, even_vals)
    return IpfResult(
        d0=d0,
        d1=d1,
        status=status,
        iterations=int(iters),
        l1_trace=trace if cfg.record_trace else np.empty(0),
        row_matched=row_matched,
        col_matched=col_matched,
    )


def _from_support(X, vals):
    keep = vals > 0
    return SparseNetwork(X.m, X.n, X.row[keep], X.col[keep], vals[keep])


def scaled_matrix(X: SparseNetwork, d0, d1) -> SparseNetwork:
    """Entrywise d0_i * X_ij * d1_j; zero factors erase rows/columns."""
    d0 = np.asarray(d0, dtype=np.float64)
    d1 = np.asarray(d1, dtype=np.float64)
    if d0.size != X.m or d1.size != X.n:
        raise ValidationError("factor lengths do not match network dims")
    vals = X.val * d0[X.row] * d1[X.col]
    return _from_support(X, vals)


def l1_marginal_error(Xhat: SparseNetwork, marg: MarginalPair) -> float:
    """||Xhat 1 - p||_1 + ||Xhat^T 1 - q||_1."""
    if marg.m != Xhat.m or marg.n != Xhat.n:
        raise ValidationError("marginal lengths do not match network dims")
    return float(
        np.abs(Xhat.row_sums() - marg.p).sum() + np.abs(Xhat.col_sums() - marg.q).sum()
    )


def normalize_factors(d0, d1):
    """Divide each factor vector by the mean of its positive entries.

    Zero entries (the zero-marginal convention) are preserved; the scaled
    matrix changes by the constant mean0 * mean1.
    """
    d0 = np.asarray(d0, dtype=np.float64)
    d1 = np.asarray(d1, dtype=np.float64)
    out = []
    for d in (d0, d1):
        pos = d > 0
        if not pos.any():
            raise ValidationError("cannot normalize an all-zero factor vector")
        out.append(d / d[pos].mean())
    return out[0], out[1]
