"""Core bipartite-network data types, validation, aggregation, and file formats.

A :class:`SparseNetwork` is a non-negative m x n matrix in coordinate form.
The same type carries the time-aggregated network, a single time slice, an
inferred estimate, or a distance kernel.  :class:`MarginalPair` holds the
target row sums p and column sums q for one time step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ValidationError

__all__ = [
    "SparseNetwork",
    "MarginalPair",
    "NetworkSeries",
    "aggregate",
    "marginals",
    "validate_pair",
    "read_network",
    "write_network",
    "read_marginal",
    "write_marginal",
]


def _as_readonly(arr, dtype):
    out = np.ascontiguousarray(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SparseNetwork:
    """Non-negative m x n matrix in coordinate form, row-major sorted.

    Only strictly positive weights are stored.  Instances are immutable and
    safe to share between workers.
    """

    m: int
    n: int
    row: np.ndarray
    col: np.ndarray
    val: np.ndarray

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise ValidationError("negative dimension")
        row = _as_readonly(self.row, np.int64)
        col = _as_readonly(self.col, np.int64)
        val = _as_readonly(self.val, np.float64)
        if not (row.shape == col.shape == val.shape) or row.ndim != 1:
            raise ValidationError("coordinate arrays must be 1-D and equal length")
        if row.size:
            if row.min() < 0 or row.max() >= self.m:
                raise ValidationError("row index out of range")
            if col.min() < 0 or col.max() >= self.n:
                raise ValidationError("col index out of range")
            if not np.all(np.isfinite(val)):
                raise ValidationError("non-finite weight")
            if val.min() <= 0:
                raise ValidationError("weights must be strictly positive")
            # enforce row-major order, reject duplicates
            order = np.lexsort((col, row))
            row, col, val = row[order], col[order], val[order]
            key = row[:-1] * self.n + col[:-1]
            key_next = row[1:] * self.n + col[1:]
            if key.size and np.any(key == key_next):
                raise ValidationError("duplicate (row, col) entry")
            row.setflags(write=False)
            col.setflags(write=False)
            val.setflags(write=False)
        object.__setattr__(self, "row", row)
        object.__setattr__(self, "col", col)
        object.__setattr__(self, "val", val)

    # construction helpers -------------------------------------------------

    @classmethod
    def from_entries(cls, m, n, entries):
        """Build from an iterable of (i, j, w) triplets; zero weights are rejected."""
        entries = list(entries)
        if entries:
            row, col, val = map(np.asarray, zip(*entries))
        else:
            row = col = val = np.empty(0)
        return cls(m, n, row, col, val)

    @classmethod
    def from_dense(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError("dense input must be 2-D")
        if arr.size and arr.min() < 0:
            raise ValidationError("weights must be non-negative")
        row, col = np.nonzero(arr)
        return cls(arr.shape[0], arr.shape[1], row, col, arr[row, col])

    # views -----------------------------------------------------------------

    @property
    def nnz(self):
        return int(self.val.size)

    @property
    def entries(self):
        return [
            (int(i), int(j), float(w))
            for i, j, w in zip(self.row, self.col, self.val)
        ]

    @cached_property
    def col_order(self):
        """Permutation putting entries in column-major order (built on demand)."""
        return np.lexsort((self.row, self.col))

    def to_dense(self):
        out = np.zeros((self.m, self.n))
        out[self.row, self.col] = self.val
        return out

    def min_positive(self):
        if self.nnz == 0:
            raise ValidationError("network has no positive entries")
        return float(self.val.min())

    def row_sums(self):
        return np.bincount(self.row, weights=self.val, minlength=self.m)

    def col_sums(self):
        return np.bincount(self.col, weights=self.val, minlength=self.n)

    def total(self):
        return float(self.val.sum())

    def support_keys(self):
        """Packed support coordinates i*n + j (row-major sorted)."""
        return self.row * self.n + self.col

    def same_support(self, other):
        return (
            self.m == other.m
            and self.n == other.n
            and self.nnz == other.nnz
            and np.array_equal(self.row, other.row)
            and np.array_equal(self.col, other.col)
        )

    def __eq__(self, other):
        if not isinstance(other, SparseNetwork):
            return NotImplemented
        return self.same_support(other) and np.array_equal(self.val, other.val)

    def __hash__(self):  # pragma: no cover - identity hashing is enough
        return id(self)


@dataclass(frozen=True)
class MarginalPair:
    """Target row sums p and column sums q for one time step.

    ``total`` is the canonical mass c = sum(p).  Use :func:`validate_pair` to
    construct a pair whose totals are reconciled against a network.
    """

    p: np.ndarray
    q: np.ndarray
    total: float = field(init=False)

    def __post_init__(self):
        p = _as_readonly(self.p, np.float64)
        q = _as_readonly(self.q, np.float64)
        if p.ndim != 1 or q.ndim != 1:
            raise ValidationError("marginals must be 1-D vectors")
        if (p.size and p.min() < 0) or (q.size and q.min() < 0):
            raise ValidationError("marginals must be non-negative")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ValidationError("non-finite marginal")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "total", float(p.sum()))

    @property
    def m(self):
        return self.p.size

    @property
    def n(self):
        return self.q.size


@dataclass(frozen=True)
class NetworkSeries:
    """An ordered list of time labels with one network slice per label."""

    timesteps: tuple
    slices: tuple

    def __post_init__(self):
        object.__setattr__(self, "timesteps", tuple(self.timesteps))
        object.__setattr__(self, "slices", tuple(self.slices))
        if len(self.timesteps) != len(self.slices):
            raise ValidationError("timesteps and slices length mismatch")
        dims = {(s.m, s.n) for s in self.slices}
        if len(dims) > 1:
            raise ValidationError("slices disagree on (m, n)")

    def __len__(self):
        return len(self.slices)


def aggregate(series: NetworkSeries) -> SparseNetwork:
    """Entrywise sum of the slices; support is the union of slice supports."""
    if len(series) == 0:
        raise ValidationError("cannot aggregate an empty series")
    first = series.slices[0]
    m, n = first.m, first.n
    keys = np.concatenate([s.support_keys() for s in series.slices])
    vals = np.concatenate([s.val for s in series.slices])
    uniq, inv = np.unique(keys, return_inverse=True)
    summed = np.bincount(inv, weights=vals, minlength=uniq.size)
    return SparseNetwork(m, n, uniq // n, uniq % n, summed)


def marginals(net: SparseNetwork) -> MarginalPair:
    """Row and column sums of ``net``; totals agree by construction."""
    return MarginalPair(net.row_sums(), net.col_sums())


def validate_pair(net: SparseNetwork, marg: MarginalPair, rel_tol=1e-6) -> MarginalPair:
    """Check dims, then reconcile totals by rescaling q to sum(p).

    A relative mismatch up to ``rel_tol`` is absorbed by rescaling q; a larger
    one is a hard error so gross data problems are not silently hidden.
    """
    if marg.m != net.m or marg.n != net.n:
        raise ValidationError(
            f"marginal lengths ({marg.m}, {marg.n}) do not match network "
            f"dims ({net.m}, {net.n})"
        )
    sp = marg.p.sum()
    sq = marg.q.sum()
    if sp <= 0:
        raise ValidationError("sum of row marginals must be positive")
    if abs(sp - sq) > rel_tol * sp:
        raise ValidationError(
            f"marginal totals disagree beyond tolerance: sum p = {sp!r}, "
            f"sum q = {sq!r}"
        )
    if sq == sp:
        return MarginalPair(marg.p, marg.q)
    return MarginalPair(marg.p, marg.q * (sp / sq))


# on-disk formats ----------------------------------------------------------
#
# Network triplet file (UTF-8, LF): header "m n nnz", then nnz lines
# "i j w" with 0-based indices, row-major sorted.  Marginal file: one decimal
# per line.  Floats are written with repr() so a read round-trips bit-exactly.


def write_network(net: SparseNetwork, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{net.m} {net.n} {net.nnz}\n")
        for i, j, w in zip(net.row, net.col, net.val):
            fh.write(f"{i} {j} {float(w)!r}\n")


def read_network(path) -> SparseNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValidationError(f"{path}: bad header, expected 'm n nnz'")
        try:
            m, n, nnz = (int(tok) for tok in header)
        except ValueError as exc:
            raise ValidationError(f"{path}: bad header: {exc}") from None
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        for k in range(nnz):
            parts = fh.readline().split()
            if len(parts) != 3:
                raise ValidationError(f"{path}: truncated at entry {k}")
            try:
                rows[k] = int(parts[0])
                cols[k] = int(parts[1])
                vals[k] = float(parts[2])
            except ValueError as exc:
                raise ValidationError(f"{path}: bad entry {k}: {exc}") from None
        if fh.read().strip():
            raise ValidationError(f"{path}: trailing data after {nnz} entries")
    try:
        return SparseNetwork(m, n, rows, cols, vals)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_marginal(vec, path):
    vec = np.asarray(vec, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for x in vec:
            fh.write(f"{float(x)!r}\n")


def read_marginal(path, expected_len=None):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(float(line))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: not a number: {line!r}") from None
    vec = np.asarray(out, dtype=np.float64)
    if expected_len is not None and vec.size != expected_len:
        raise ValidationError(
            f"{path}: expected {expected_len} values, found {vec.size}"
        )
    return vec
