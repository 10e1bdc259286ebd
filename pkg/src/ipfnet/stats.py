"""Statistical layer of the biproportional Poisson model.

The model posits independent Poisson entries

    Y_ij ~ Poisson(e^{u_i} Xbar_ij e^{-v_j})   on the support of Xbar,

whose log-likelihood given marginals (p, q) is

    l(u, v) = sum_i p_i u_i - sum_j q_j v_j - sum_ij Xbar_ij e^{u_i - v_j}.

The maximizer coincides with the IPF limit via (u, v) = (log d0, -log d1)
up to the common-shift gauge (u + c, v + c).  This module provides the
likelihood, its gradient, a damped-Newton maximum-likelihood solver with
Wald intervals (an oracle independent of the IPF iteration), the bipartite
Laplacian and its Fiedler eigenvalue, dominant-eigenpair extraction by power
iteration, the expected-risk bound and finite-MLE condition, Pearson
residual/dispersion diagnostics, and the stationarity check.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.stats

from .core import MarginalPair, SparseNetwork
from .errors import InfeasibleError, NonConvergenceError, ValidationError
from .feasibility import check_feasibility

__all__ = [
    "Normalization",
    "ScalingParameters",
    "SpectralInfo",
    "LaplacianSpectrum",
    "GlmFit",
    "ErrorBoundReport",
    "FitDiagnostics",
    "StationaritySummary",
    "log_likelihood",
    "neg_ll_gradient",
    "mle_newton",
    "normalize_params",
    "bipartite_laplacian",
    "bipartite_laplacian_fiedler",
    "perron_spectral",
    "error_bound",
    "finite_mle_condition",
    "fit_diagnostics",
    "stationarity_check",
]

#: exponents above this are treated as overflow (exp(709) is the float64 edge)
EXP_CAP = 700.0


class Normalization(enum.Enum):
    SUM_ZERO = "SumZero"
    MEAN_ONE_EXP = "MeanOneExp"


@dataclass(frozen=True)
class ScalingParameters:
    """Model parameters (u, v); rates are e^{u_i} Xbar_ij e^{-v_j}.

    ``normalization`` records which convention the vectors satisfy:
    SumZero (sum u + sum v = 0, a pure gauge shift that preserves rates) or
    MeanOneExp (mean of e^u = 1 over the p-support and mean of e^{-v} = 1
    over the q-support; used to compare against IPF factors, not
    rate-preserving).  None means unnormalized.  Coordinates with zero
    marginal carry u_i = -inf / v_j = +inf so that e^u, e^{-v} vanish there,
    mirroring the zero factors of the IPF convention.
    """

    u: np.ndarray
    v: np.ndarray
    normalization: Optional[Normalization] = None

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=np.float64)
        v = np.ascontiguousarray(self.v, dtype=np.float64)
        if u.ndim != 1 or v.ndim != 1:
            raise ValidationError("parameters must be 1-D vectors")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def m(self):
        return self.u.size

    @property
    def n(self):
        return self.v.size

    def rate_matrix(self, Xbar: SparseNetwork) -> SparseNetwork:
        """e^{u_i} Xbar_ij e^{-v_j} on the support of Xbar."""
        t = _exponents(Xbar, self)
        vals = Xbar.val * np.exp(t)
        keep = vals > 0
        return SparseNetwork(Xbar.m, Xbar.n, Xbar.row[keep], Xbar.col[keep], vals[keep])


@dataclass(frozen=True)
class SpectralInfo:
    """Dominant eigenpair of the bipartite adjacency [[0, W], [W^T, 0]].

    u1 (length m) and v1 (length n) are unit-norm and entrywise
    non-negative; the stacked vector [u1; v1] satisfies the eigen-equation
    with eigenvalue lambda1.
    """

    lambda1: float
    u1: np.ndarray
    v1: np.ndarray


@dataclass(frozen=True)
class LaplacianSpectrum:
    """Fiedler eigenvalue of the bipartite Laplacian; 0 iff disconnected."""

    lambda2: float
    dimension: int


@dataclass(frozen=True)
class GlmFit:
    """Newton maximum-likelihood fit with Wald intervals.

    ``ci_lower``/``ci_upper`` are stacked per-coordinate vectors over
    [u; v] in the fit's normalization gauge.
    """

    params: ScalingParameters
    loglik: float
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    converged: bool
    newton_iterations: int
    alpha: float = 0.05


@dataclass(frozen=True)
class ErrorBoundReport:
    """Expected-risk bound 8 e^{4B} kappa / lambda2^2 and its ingredients.

    kappa is the total rate; M is the maximum row/column sum of the rate
    matrix; lambda2 is the Fiedler eigenvalue of the aggregate network's
    bipartite Laplacian.  When the support is disconnected the bound is +inf
    and ``disconnected`` is set.
    """

    kappa: float
    B: float
    lambda2: float
    bound: float
    M: float
    disconnected: bool


@dataclass(frozen=True)
class FitDiagnostics:
    """Pearson residuals over the observation set and the dispersion ratio."""

    pearson_residuals: dict
    dispersion: float
    observation_count: int


@dataclass(frozen=True)
class StationaritySummary:
    """Percentiles of median-normalized sums over time of d0_i(t) d1_j(t)."""

    percentiles: dict
    pair_count: int
    timesteps: int


def _exponents(Xbar: SparseNetwork, params: ScalingParameters):
    if params.m != Xbar.m or params.n != Xbar.n:
        raise ValidationError("parameter lengths do not match network dims")
    t = params.u[Xbar.row] - params.v[Xbar.col]
    if np.any(np.isnan(t)) or np.any(t == np.inf):
        raise ValidationError("exponent u_i - v_j is NaN or +inf on the support")
    finite = np.isfinite(t)
    if np.any(np.abs(t[finite]) > EXP_CAP):
        raise ValidationError("finite exponent |u_i - v_j| exceeds the cap (700)")
    return t


def log_likelihood(Xbar: SparseNetwork, marg: MarginalPair, params: ScalingParameters) -> float:
    """sum p_i u_i - sum q_j v_j - sum_ij Xbar_ij e^{u_i - v_j} over the support.

    Marginal terms are accumulated over positive marginals only, so the
    -inf/+inf convention at zero marginals contributes 0 rather than NaN.
    -inf exponents (zero rates) are allowed; finite exponents beyond +-700
    raise.
    """
    if marg.m != Xbar.m or marg.n != Xbar.n:
        raise ValidationError("marginal lengths do not match network dims")
    t = _exponents(Xbar, params)
    pmask = marg.p > 0
    qmask = marg.q > 0
    return float(
        marg.p[pmask] @ params.u[pmask]
        - marg.q[qmask] @ params.v[qmask]
        - Xbar.val @ np.exp(t)
    )


def neg_ll_gradient(Xbar: SparseNetwork, marg: MarginalPair, params: ScalingParameters):
    """Gradient of -l: (sum_j R_ij - p_i, q_j - sum_i R_ij) with R the rates."""
    if marg.m != Xbar.m or marg.n != Xbar.n:
        raise ValidationError("marginal lengths do not match network dims")
    t = _exponents(Xbar, params)
    rates = Xbar.val * np.exp(t)
    gu = np.bincount(Xbar.row, weights=rates, minlength=Xbar.m) - marg.p
    gv = marg.q - np.bincount(Xbar.col, weights=rates, minlength=Xbar.n)
    return gu, gv


def normalize_params(
    params: ScalingParameters, normalization: Normalization, marg: MarginalPair = None
) -> ScalingParameters:
    """Re-gauge parameters to the requested convention.

    SumZero applies the single common shift (u - c, v - c) over finite
    coordinates, a pure gauge move that preserves every rate u_i - v_j.
    MeanOneExp divides e^u by its mean over the p-support and e^{-v} by its
    mean over the q-support (all finite coordinates when no marginals are
    given); this is the convention used to compare against IPF factors and
    rescales the represented matrix by a constant.
    """
    u, v = params.u.copy(), params.v.copy()
    ufin = np.isfinite(u)
    vfin = np.isfinite(v)
    if not ufin.any() or not vfin.any():
        raise ValidationError("no finite coordinates to normalize over")
    if normalization is Normalization.SUM_ZERO:
        c = (u[ufin].sum() + v[vfin].sum()) / (ufin.sum() + vfin.sum())
        u[ufin] -= c
        v[vfin] -= c
    elif normalization is Normalization.MEAN_ONE_EXP:
        usup = ufin & ((marg.p > 0) if marg is not None else True)
        vsup = vfin & ((marg.q > 0) if marg is not None else True)
        if not usup.any() or not vsup.any():
            raise ValidationError("no finite support to normalize over")
        u[ufin] -= np.log(np.exp(u[usup]).mean())
        v[vfin] += np.log(np.exp(-v[vsup]).mean())
    else:
        raise ValidationError(f"unknown normalization {normalization!r}")
    return ScalingParameters(u, v, normalization)


def bipartite_laplacian(W: SparseNetwork):
    """Dense Laplacian D(A1) - A of the bipartite adjacency A = [[0,W],[W^T,0]]."""
    N = W.m + W.n
    L = np.zeros((N, N))
    L[W.row, W.m + W.col] = -W.val
    L[W.m + W.col, W.row] = -W.val
    deg = np.concatenate([W.row_sums(), W.col_sums()])
    L[np.arange(N), np.arange(N)] = deg
    return L


#: above this combined dimension the Fiedler value is found iteratively
FIEDLER_DENSE_CUTOFF = 4000


def bipartite_laplacian_fiedler(W: SparseNetwork) -> LaplacianSpectrum:
    """Second-smallest eigenvalue of the bipartite Laplacian of W.

    Dense symmetric solve up to a combined dimension of 4000; beyond that a
    LOBPCG iteration with the all-ones direction deflated (tolerance 1e-9
    relative).  Tiny negative round-off is clamped to 0.
    """
    N = W.m + W.n
    if N < 2:
        raise ValidationError("need at least two vertices")
    if N <= FIEDLER_DENSE_CUTOFF:
        L = bipartite_laplacian(W)
        vals = scipy.linalg.eigh(L, eigvals_only=True, subset_by_index=(1, 1))
        lam2 = float(vals[0])
    else:  # pragma: no cover - beyond desk-test scale
        lam2 = _fiedler_lobpcg(W)
    return LaplacianSpectrum(lambda2=max(lam2, 0.0), dimension=N)


def _fiedler_lobpcg(W):  # pragma: no cover - exercised only on large inputs
    N = W.m + W.n
    A = scipy.sparse.coo_matrix(
        (np.concatenate([-W.val, -W.val]),
         (np.concatenate([W.row, W.m + W.col]), np.concatenate([W.m + W.col, W.row]))),
        shape=(N, N),
    ).tocsr()
    deg = np.concatenate([W.row_sums(), W.col_sums()])
    L = A + scipy.sparse.diags(deg)
    rng = np.random.default_rng(0)
    x = rng.standard_normal((N, 1))
    ones = np.ones((N, 1)) / np.sqrt(N)
    vals, _ = scipy.sparse.linalg.lobpcg(
        L, x, Y=ones, largest=False, tol=1e-9, maxiter=5000
    )
    return float(vals[0])


def perron_spectral(W: SparseNetwork, tol=1e-12, max_iter=100000) -> SpectralInfo:
    """Dominant eigenpair of [[0, W], [W^T, 0]] by alternating power iteration.

    Iterates u <- W v / ||.||, v <- W^T u / ||.|| from a uniform positive
    start; entries stay non-negative throughout and each block is returned
    with unit norm, so (lambda1, u1, v1) is the dominant singular triple of
    W and the stacked [u1; v1] solves the bipartite eigen-equation.  Stops
    when both residuals ||W v - lambda u|| and ||W^T u - lambda v|| drop
    below ``tol`` relative to max(1, lambda1) in the max norm.
    """
    if W.nnz == 0:
        raise ValidationError("dominant eigenpair of an all-zero matrix is undefined")
    A = scipy.sparse.csr_matrix((W.val, (W.row, W.col)), shape=(W.m, W.n))
    v = np.full(W.n, 1.0 / np.sqrt(W.n))
    for _ in range(max_iter):
        u_new = A @ v
        u = u_new / np.linalg.norm(u_new)
        v_new = A.T @ u
        lam = float(np.linalg.norm(v_new))
        v = v_new / lam
        res = max(
            np.abs(A @ v - lam * u).max(initial=0.0),
            np.abs(A.T @ u - lam * v).max(initial=0.0),
        )
        if res <= tol * max(1.0, lam):
            return SpectralInfo(lam, np.abs(u), np.abs(v))
    raise NonConvergenceError(
        f"power iteration did not reach tolerance {tol} in {max_iter} iterations"
    )


def mle_newton(
    Xbar: SparseNetwork,
    marg: MarginalPair,
    normalization: Normalization = Normalization.SUM_ZERO,
    tol=1e-10,
    max_iter=200,
) -> GlmFit:
    """Damped Newton maximizer of the marginal likelihood; an IPF-independent oracle.

    Works on the subproblem restricted to rows/columns with positive
    marginals (zero-marginal coordinates get u_i = -inf / v_j = +inf, the
    zero-rate convention).  The Hessian of -l is the bipartite Laplacian of
    the rate matrix; steps solve it on the subspace orthogonal to the
    all-ones null direction (minimum-norm least squares), with halving line
    search from the start (0, 0).  Convergence: gradient inf-norm < tol.

    Wald intervals use the Moore-Penrose pseudo-inverse of the Hessian at
    the optimum (the SumZero gauge); zero-marginal coordinates get
    degenerate intervals at their infinite point estimates.
    """
    if marg.m != Xbar.m or marg.n != Xbar.n:
        raise ValidationError("marginal lengths do not match network dims")
    if not check_feasibility(Xbar, marg).feasible:
        raise InfeasibleError(
            "marginals are infeasible on this support; repair the network first"
        )
    rows_on = marg.p > 0
    cols_on = marg.q > 0
    keep = rows_on[Xbar.row] & cols_on[Xbar.col]
    ridx = np.cumsum(rows_on) - 1  # original row -> reduced row
    cidx = np.cumsum(cols_on) - 1
    ma, na = int(rows_on.sum()), int(cols_on.sum())
    r = ridx[Xbar.row[keep]]
    c = cidx[Xbar.col[keep]]
    w = Xbar.val[keep]
    pa = marg.p[rows_on]
    qa = marg.q[cols_on]

    x = np.zeros(ma + na)  # stacked [u; v] on the reduced problem

    def objective_and_grad(xv):
        t = xv[r] - xv[ma + c]
        if np.any(np.abs(t) > EXP_CAP):
            return np.inf, None, None
        rates = w * np.exp(t)
        g = rates.sum() - pa @ xv[:ma] + qa @ xv[ma:]
        grad = np.concatenate(
            [
                np.bincount(r, weights=rates, minlength=ma) - pa,
                qa - np.bincount(c, weights=rates, minlength=na),
            ]
        )
        return g, grad, rates

    g, grad, rates = objective_and_grad(x)
    iterations = 0
    converged = np.abs(grad).max() < tol
    while not converged and iterations < max_iter:
        H = _laplacian_from(r, c, rates, ma, na)
        step = np.linalg.lstsq(H, -grad, rcond=None)[0]
        alpha = 1.0
        for _ in range(60):
            g_new, grad_new, rates_new = objective_and_grad(x + alpha * step)
            if g_new < g:
                break
            # in the quadratic endgame the decrease falls below float
            # resolution of g while the gradient still contracts; accept on
            # gradient progress when the objective is tied within rounding
            if (
                np.isfinite(g_new)
                and g_new <= g + 1e-12 * max(1.0, abs(g))
                and np.abs(grad_new).max() <= 0.5 * np.abs(grad).max()
            ):
                break
            alpha *= 0.5
        else:
            raise NonConvergenceError("Newton line search failed to descend")
        x = x + alpha * step
        g, grad, rates = g_new, grad_new, rates_new
        iterations += 1
        converged = np.abs(grad).max() < tol
    if not converged:
        raise NonConvergenceError(
            f"Newton did not reach gradient tolerance {tol} in {max_iter} iterations"
        )

    H = _laplacian_from(r, c, rates, ma, na)
    cov = np.linalg.pinv(H, hermitian=True)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    z = scipy.stats.norm.ppf(0.975)

    u = np.full(Xbar.m, -np.inf)
    v = np.full(Xbar.n, np.inf)
    u[rows_on] = x[:ma]
    v[cols_on] = x[ma:]
    lo = np.concatenate([u, v])
    hi = lo.copy()
    on = np.concatenate([rows_on, cols_on])
    lo[on] = np.concatenate([x[:ma] - z * se[:ma], x[ma:] - z * se[ma:]])
    hi[on] = np.concatenate([x[:ma] + z * se[:ma], x[ma:] + z * se[ma:]])

    raw = ScalingParameters(u, v)
    params = normalize_params(raw, normalization, marg)
    # the re-gauge is a shift; move the intervals with the point estimates
    du = np.zeros(Xbar.m)
    dv = np.zeros(Xbar.n)
    du[rows_on] = params.u[rows_on] - u[rows_on]
    dv[cols_on] = params.v[cols_on] - v[cols_on]
    shift = np.concatenate([du, dv])
    return GlmFit(
        params=params,
        loglik=log_likelihood(Xbar, marg, params),
        ci_lower=lo + shift,
        ci_upper=hi + shift,
        converged=True,
        newton_iterations=iterations,
    )


def _laplacian_from(r, c, rates, ma, na):
    H = np.zeros((ma + na, ma + na))
    np.add.at(H, (r, ma + c), -rates)
    H[ma:, :ma] = H[:ma, ma:].T
    deg = np.concatenate(
        [
            np.bincount(r, weights=rates, minlength=ma),
            np.bincount(c, weights=rates, minlength=na),
        ]
    )
    H[np.arange(ma + na), np.arange(ma + na)] = deg
    return H


def error_bound(Xbar: SparseNetwork, truth: ScalingParameters, B: float) -> ErrorBoundReport:
    """Expected-risk bound 8 e^{4B} kappa / lambda2^2 with its ingredients.

    kappa is the total of the rate matrix e^{u} Xbar e^{-v}; lambda2 is the
    Fiedler eigenvalue of Xbar's bipartite Laplacian; M is the largest
    row/column sum of the rate matrix.  Requires max(|u|, |v|) <= B.
    """
    finite_mags = [np.abs(t[np.isfinite(t)]) for t in (truth.u, truth.v)]
    mag = max((float(t.max()) for t in finite_mags if t.size), default=0.0)
    if mag > B:
        raise ValidationError(f"parameter magnitude {mag} exceeds B = {B}")
    R = truth.rate_matrix(Xbar)
    kappa = R.total()
    M = float(max(R.row_sums().max(initial=0.0), R.col_sums().max(initial=0.0)))
    lam2 = bipartite_laplacian_fiedler(Xbar).lambda2
    # eigh round-off on lambda2 is O(eps * ||L||); ||L|| <= 2 * max degree
    deg_scale = max(
        float(Xbar.row_sums().max(initial=0.0)),
        float(Xbar.col_sums().max(initial=0.0)),
        1.0,
    )
    disconnected = lam2 <= 1e-10 * deg_scale
    bound = np.inf if disconnected else 8.0 * np.exp(4.0 * B) * kappa / lam2**2
    return ErrorBoundReport(
        kappa=kappa, B=B, lambda2=lam2, bound=float(bound), M=M,
        disconnected=bool(disconnected),
    )


def finite_mle_condition(Xbar: SparseNetwork, truth: ScalingParameters):
    """Whether the rate-matrix Fiedler value reaches 8 log(m+n).

    Returns (condition holds, lambda2 of the rate matrix's Laplacian).
    """
    R = truth.rate_matrix(Xbar)
    lam2 = bipartite_laplacian_fiedler(R).lambda2
    return bool(lam2 >= 8.0 * np.log(Xbar.m + Xbar.n)), lam2


def fit_diagnostics(Y: SparseNetwork, Xhat: SparseNetwork, m, n) -> FitDiagnostics:
    """Pearson residuals (Y - Xhat)/sqrt(Xhat) over the support of Xhat.

    The observation set D is the support of the fitted matrix (aggregate
    support intersected with positive-marginal rows and columns); cells of D
    where Y has no entry count as observed zeros.  The dispersion ratio
    divides the squared residual total by |D| - m - n.
    """
    if (Y.m, Y.n) != (Xhat.m, Xhat.n):
        raise ValidationError("Y and Xhat dims disagree")
    d_keys = Xhat.support_keys()
    y_keys = Y.support_keys()
    if not np.all(np.isin(y_keys, d_keys)):
        raise ValidationError("observed entries outside the fitted support")
    dof = Xhat.nnz - m - n
    if dof <= 0:
        raise ValidationError(
            f"non-positive degrees of freedom: |D| = {Xhat.nnz} <= m + n = {m + n}"
        )
    yvals = np.zeros(Xhat.nnz)
    yvals[np.searchsorted(d_keys, y_keys)] = Y.val
    res = (yvals - Xhat.val) / np.sqrt(Xhat.val)
    dispersion = float((res**2).sum() / dof)
    residuals = {
        (int(i), int(j)): float(rv) for i, j, rv in zip(Xhat.row, Xhat.col, res)
    }
    return FitDiagnostics(
        pearson_residuals=residuals,
        dispersion=dispersion,
        observation_count=Xhat.nnz,
    )


def stationarity_check(results, support: SparseNetwork) -> StationaritySummary:
    """Spread of sum_t d0_i(t) d1_j(t) over support pairs, median-normalized.

    Under a stationary sequence of balanced slices these sums concentrate;
    the returned 5/25/50/75/95th percentiles quantify the spread (the median
    entry is 1 by construction).
    """
    results = list(results)
    if len(results) < 2:
        raise ValidationError("stationarity check needs at least two time steps")
    if support.nnz == 0:
        raise ValidationError("empty support")
    for res in results:
        if res.d0.size != support.m or res.d1.size != support.n:
            raise ValidationError("factor lengths do not match the support dims")
    s = np.zeros(support.nnz)
    for res in results:
        s += res.d0[support.row] * res.d1[support.col]
    med = np.median(s)
    if med <= 0:
        raise ValidationError("median pair sum is zero; factors degenerate")
    s /= med
    pct = {k: float(np.percentile(s, k)) for k in (5, 25, 50, 75, 95)}
    return StationaritySummary(
        percentiles=pct, pair_count=support.nnz, timesteps=len(results)
    )
