"""Hot numeric kernels: the IPF sweep loop and the knapsack DP table.

Each kernel has two interchangeable implementations: a loop version compiled
with numba ``@njit`` and a vectorized pure-numpy fallback.  Selection happens
once at import time: set ``IPFNET_NUMBA=0`` to force the numpy path; the
fallback also engages automatically when numba is not importable.
``benchmarks/ipf_bench.py`` times one against the other.

The IPF loop works on the coordinate arrays of a network (row, col, val) and
returns plain arrays; wrapping into result types happens in
:mod:`ipfnet.engine`.

Status codes returned by the loop:
    0 converged, 1 oscillating, 2 iteration budget exhausted,
    3 structural infeasibility (err_axis 0 = row, 1 = col; err_idx set).
"""

import os

import numpy as np

_env = os.environ.get("IPFNET_NUMBA", "1").strip().lower()
USE_NUMBA = _env not in ("0", "false", "no")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

STATUS_CONVERGED = 0
STATUS_OSCILLATING = 1
STATUS_MAX_ITERATIONS = 2
STATUS_STRUCTURAL = 3


def _ipf_loop_py(row, col, val, p, q, eps, max_iter):
    m = p.shape[0]
    n = q.shape[0]
    nnz = val.shape[0]
    d0 = np.where(p > 0.0, 1.0, 0.0)
    d1 = np.where(q > 0.0, 1.0, 0.0)
    win = np.zeros((4, nnz))
    win[0] = val * d0[row] * d1[col]
    # zero-filled so the slot at a structural break is deterministic
    trace = np.zeros(max_iter + 1)
    trace[0] = (
        np.abs(np.bincount(row, weights=win[0], minlength=m) - p).sum()
        + np.abs(np.bincount(col, weights=win[0], minlength=n) - q).sum()
    )
    status = STATUS_MAX_ITERATIONS
    iters = max_iter
    err_axis = -1
    err_idx = -1
    for tau in range(1, max_iter + 1):
        if tau % 2 == 1:
            denom = np.bincount(row, weights=val * d1[col], minlength=m)
            bad = (p > 0.0) & (denom <= 0.0)
            if bad.any():
                status, iters = STATUS_STRUCTURAL, tau
                err_axis, err_idx = 0, int(np.flatnonzero(bad)[0])
                break
            d0 = np.divide(p, denom, out=np.zeros(m), where=p > 0.0)
        else:
            denom = np.bincount(col, weights=val * d0[row], minlength=n)
            bad = (q > 0.0) & (denom <= 0.0)
            if bad.any():
                status, iters = STATUS_STRUCTURAL, tau
                err_axis, err_idx = 1, int(np.flatnonzero(bad)[0])
                break
            d1 = np.divide(q, denom, out=np.zeros(n), where=q > 0.0)
        cur = tau % 4
        win[cur] = val * d0[row] * d1[col]
        trace[tau] = (
            np.abs(np.bincount(row, weights=win[cur], minlength=m) - p).sum()
            + np.abs(np.bincount(col, weights=win[cur], minlength=n) - q).sum()
        )
        # tau >= 2: a full sweep-pair must run before declaring convergence,
        # else a row-matched start would skip the column structural check
        if tau >= 2 and np.abs(win[cur] - win[(tau - 1) % 4]).sum() < eps:
            status, iters = STATUS_CONVERGED, tau
            break
        if (
            tau >= 3
            and np.abs(win[cur] - win[(tau - 2) % 4]).sum() < eps
            and np.abs(win[(tau - 1) % 4] - win[(tau - 3) % 4]).sum() < eps
        ):
            status, iters = STATUS_OSCILLATING, tau
            break
    last = win[iters % 4].copy()
    prev = win[(iters - 1) % 4].copy() if iters >= 1 else win[0].copy()
    return status, iters, d0, d1, trace[: iters + 1].copy(), last, prev, err_axis, err_idx


def _ipf_loop_loops(row, col, val, p, q, eps, max_iter):
    m = p.shape[0]
    n = q.shape[0]
    nnz = val.shape[0]
    d0 = np.empty(m)
    d1 = np.empty(n)
    for i in range(m):
        d0[i] = 1.0 if p[i] > 0.0 else 0.0
    for j in range(n):
        d1[j] = 1.0 if q[j] > 0.0 else 0.0
    win = np.zeros((4, nnz))
    rsum = np.empty(m)
    csum = np.empty(n)
    for k in range(nnz):
        win[0, k] = val[k] * d0[row[k]] * d1[col[k]]
    trace = np.zeros(max_iter + 1)
    rsum[:] = 0.0
    csum[:] = 0.0
    for k in range(nnz):
        rsum[row[k]] += win[0, k]
        csum[col[k]] += win[0, k]
    err = 0.0
    for i in range(m):
        err += abs(rsum[i] - p[i])
    for j in range(n):
        err += abs(csum[j] - q[j])
    trace[0] = err
    status = STATUS_MAX_ITERATIONS
    iters = max_iter
    err_axis = -1
    err_idx = -1
    for tau in range(1, max_iter + 1):
        if tau % 2 == 1:
            rsum[:] = 0.0
            for k in range(nnz):
                rsum[row[k]] += val[k] * d1[col[k]]
            hit = -1
            for i in range(m):
                if p[i] > 0.0:
                    if rsum[i] <= 0.0:
                        hit = i
                        break
                    d0[i] = p[i] / rsum[i]
                else:
                    d0[i] = 0.0
            if hit >= 0:
                status, iters = STATUS_STRUCTURAL, tau
                err_axis, err_idx = 0, hit
                break
        else:
            csum[:] = 0.0
            for k in range(nnz):
                csum[col[k]] += val[k] * d0[row[k]]
            hit = -1
            for j in range(n):
                if q[j] > 0.0:
                    if csum[j] <= 0.0:
                        hit = j
                        break
                    d1[j] = q[j] / csum[j]
                else:
                    d1[j] = 0.0
            if hit >= 0:
                status, iters = STATUS_STRUCTURAL, tau
                err_axis, err_idx = 1, hit
                break
        cur = tau % 4
        prev = (tau - 1) % 4
        rsum[:] = 0.0
        csum[:] = 0.0
        diff1 = 0.0
        for k in range(nnz):
            w = val[k] * d0[row[k]] * d1[col[k]]
            win[cur, k] = w
            rsum[row[k]] += w
            csum[col[k]] += w
            diff1 += abs(w - win[prev, k])
        err = 0.0
        for i in range(m):
            err += abs(rsum[i] - p[i])
        for j in range(n):
            err += abs(csum[j] - q[j])
        trace[tau] = err
        if tau >= 2 and diff1 < eps:
            status, iters = STATUS_CONVERGED, tau
            break
        if tau >= 3:
            diff2 = 0.0
            diff3 = 0.0
            b2 = (tau - 2) % 4
            b3 = (tau - 3) % 4
            for k in range(nnz):
                diff2 += abs(win[cur, k] - win[b2, k])
                diff3 += abs(win[prev, k] - win[b3, k])
            if diff2 < eps and diff3 < eps:
                status, iters = STATUS_OSCILLATING, tau
                break
    last = win[iters % 4].copy()
    prev_arr = win[(iters - 1) % 4].copy() if iters >= 1 else win[0].copy()
    return status, iters, d0, d1, trace[: iters + 1].copy(), last, prev_arr, err_axis, err_idx


def _knapsack_table_py(wq, values, cap):
    """Max-value 0/1 knapsack DP over integer weights; returns (dp, keep)."""
    eta = wq.shape[0]
    dp = np.zeros(cap + 1)
    keep = np.zeros((eta, cap + 1), dtype=np.uint8)
    for it in range(eta):
        w = int(wq[it])
        v = values[it]
        if w > cap:
            continue
        if w == 0:
            if v > 0.0:
                keep[it, :] = 1
                dp += v
            continue
        cand = dp[: cap + 1 - w] + v
        better = cand > dp[w:]
        keep[it, w:] = better
        dp[w:] = np.where(better, cand, dp[w:])
    return dp, keep


def _knapsack_table_loops(wq, values, cap):
    eta = wq.shape[0]
    dp = np.zeros(cap + 1)
    keep = np.zeros((eta, cap + 1), dtype=np.uint8)
    for it in range(eta):
        w = wq[it]
        v = values[it]
        if w > cap:
            continue
        if w == 0:
            if v > 0.0:
                for c in range(cap + 1):
                    keep[it, c] = 1
                    dp[c] += v
            continue
        for c in range(cap, w - 1, -1):
            cand = dp[c - w] + v
            if cand > dp[c]:
                dp[c] = cand
                keep[it, c] = 1
    return dp, keep


if USE_NUMBA:
    ipf_loop = njit(cache=True, nogil=True)(_ipf_loop_loops)
    knapsack_table = njit(cache=True, nogil=True)(_knapsack_table_loops)
else:
    ipf_loop = _ipf_loop_py
    knapsack_table = _knapsack_table_py
