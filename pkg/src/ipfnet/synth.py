"""Generative models, gravity baseline, ablation baselines, and metrics.

Instances are built in five steps: draw e^u and e^{-v} entrywise uniform,
draw the aggregate X̄ entrywise uniform, zero out floor(r*m*n) cells chosen
without replacement, form the rates e^{u_i} X̄_ij e^{-v_j} on the remaining
support, and sample Y from the chosen noise law with those means.  All
structural draws happen before any noise draw, so the four models share
X̄ and truth exactly at a common seed.

The gravity baseline fits log f(d) = alpha log d - beta d to per-bin means
of the aggregate network and runs the balancing loop on the fitted kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import MarginalPair, SparseNetwork, marginals
from .engine import IpfConfig, run_ipf, scaled_matrix
from .errors import NonConvergenceError, ValidationError
from .stats import Normalization, ScalingParameters, normalize_params

__all__ = [
    "SynthConfig",
    "Poisson",
    "Exponential",
    "NegBinom",
    "Interaction",
    "GenerativeModel",
    "GravityModel",
    "SynthInstance",
    "trial_seed",
    "generate_instance",
    "negbinom_params",
    "uniform_positions",
    "pairwise_distances",
    "effective_distances",
    "fit_gravity",
    "gravity_infer",
    "baseline_rank1",
    "baseline_row_share",
    "baseline_col_share",
    "baseline_scale",
    "cosine_similarity",
    "l2_param_error",
]


@dataclass(frozen=True)
class SynthConfig:
    """Instance shape and draw ranges; e^u, e^{-v} ~ U(param range), X̄ ~ U(base range)."""

    m: int = 100
    n: int = 100
    sparsity: float = 0.0
    param_low: float = 0.0
    param_high: float = 4.0
    base_low: float = 0.0
    base_high: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValidationError("dimensions must be positive")
        if not 0.0 <= self.sparsity < 1.0:
            raise ValidationError("sparsity must lie in [0, 1)")
        if not (self.param_low < self.param_high and self.base_low < self.base_high):
            raise ValidationError("draw ranges must satisfy low < high")
        if self.param_low < 0 or self.base_low < 0:
            raise ValidationError("draw ranges must be non-negative")


@dataclass(frozen=True)
class Poisson:
    pass


@dataclass(frozen=True)
class Exponential:
    """Continuous noise with the same mean and variance lambda^2."""


@dataclass(frozen=True)
class NegBinom:
    """Overdispersed counts: variance lambda/gamma, Poisson in the gamma -> 1 limit."""

    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValidationError("gamma must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class Interaction:
    """Rates additionally damped by the distance kernel d^alpha e^{-beta d}."""

    alpha: float
    beta: float
    row_positions: np.ndarray
    col_positions: np.ndarray

    def __post_init__(self):
        for name in ("row_positions", "col_positions"):
            pos = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if pos.ndim != 2 or pos.shape[1] != 2:
                raise ValidationError(f"{name} must be an (count, 2) array")
            pos.setflags(write=False)
            object.__setattr__(self, name, pos)


GenerativeModel = Union[Poisson, Exponential, NegBinom, Interaction]


@dataclass(frozen=True)
class GravityModel:
    """Distance-kernel exponents and the (positive) effective distance matrix."""

    alpha: float
    beta: float
    distances: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.distances, dtype=np.float64)
        if d.ndim != 2:
            raise ValidationError("distances must be a 2-D matrix")
        if not np.all(d > 0):
            raise ValidationError(
                "effective distances must be positive; run effective_distances first"
            )
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)

    def kernel(self) -> np.ndarray:
        return self.distances**self.alpha * np.exp(-self.beta * self.distances)


@dataclass(frozen=True)
class SynthInstance:
    """One generated trial: aggregate, truth, sample, and the sample's marginals."""

    Xbar: SparseNetwork
    truth: ScalingParameters
    Y: SparseNetwork
    marg: MarginalPair
    seed: int


def trial_seed(seed, *key) -> int:
    """Deterministic child seed for (seed, key...); safe to use across processes."""
    ss = np.random.SeedSequence((int(seed),) + tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _rates_on_support(Xbar, truth, model):
    lam = np.exp(truth.u[Xbar.row]) * Xbar.val * np.exp(-truth.v[Xbar.col])
    if isinstance(model, Interaction):
        if model.row_positions.shape[0] != Xbar.m or model.col_positions.shape[0] != Xbar.n:
            raise ValidationError("position counts do not match instance dims")
        d = pairwise_distances(model.row_positions, model.col_positions)[Xbar.row, Xbar.col]
        if np.any(d <= 0):
            raise ValidationError("interaction model needs positive distances on the support")
        lam = lam * d**model.alpha * np.exp(-model.beta * d)
    return lam


def generate_instance(cfg: SynthConfig, model: GenerativeModel = Poisson()) -> SynthInstance:
    """Draw one instance; deterministic given cfg.seed and model choice."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    eu = rng.uniform(cfg.param_low, cfg.param_high, cfg.m)
    ev = rng.uniform(cfg.param_low, cfg.param_high, cfg.n)
    base = rng.uniform(cfg.base_low, cfg.base_high, (cfg.m, cfg.n))
    kill = int(np.floor(cfg.sparsity * cfg.m * cfg.n))
    if kill:
        flat = rng.choice(cfg.m * cfg.n, size=kill, replace=False)
        base.flat[flat] = 0.0
    Xbar = SparseNetwork.from_dense(base)
    with np.errstate(divide="ignore"):
        truth = ScalingParameters(np.log(eu), -np.log(ev))
    lam = _rates_on_support(Xbar, truth, model)
    if isinstance(model, Poisson):
        yval = rng.poisson(lam).astype(np.float64)
    elif isinstance(model, Exponential):
        yval = rng.exponential(scale=lam)
    elif isinstance(model, NegBinom):
        s, gamma = negbinom_params(lam, model.gamma)
        # gamma-Poisson mixture; numpy's negative_binomial needs integral counts
        yval = rng.poisson(rng.gamma(shape=s, scale=(1.0 - gamma) / gamma)).astype(np.float64)
    elif isinstance(model, Interaction):
        yval = rng.poisson(lam).astype(np.float64)
    else:
        raise ValidationError(f"unknown generative model {model!r}")
    keep = yval > 0
    Y = SparseNetwork(cfg.m, cfg.n, Xbar.row[keep], Xbar.col[keep], yval[keep])
    return SynthInstance(Xbar=Xbar, truth=truth, Y=Y, marg=marginals(Y), seed=cfg.seed)


def negbinom_params(lam, gamma):
    """Success count s = gamma*lam/(1-gamma) giving mean lam and variance lam/gamma."""
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam <= 0):
        raise ValidationError("negative binomial mean must be positive")
    if not 0.0 < gamma < 1.0:
        raise ValidationError("gamma must lie strictly inside (0, 1)")
    return gamma * lam / (1.0 - gamma), gamma


def uniform_positions(count, rng) -> np.ndarray:
    """count points uniform on the unit square."""
    return rng.uniform(0.0, 1.0, (count, 2))


def pairwise_distances(row_positions, col_positions) -> np.ndarray:
    """Euclidean distance from every row point to every column point."""
    a = np.asarray(row_positions, dtype=np.float64)
    b = np.asarray(col_positions, dtype=np.float64)
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def effective_distances(distances) -> np.ndarray:
    """Replace zero distances with half the smallest positive distance."""
    d = np.array(distances, dtype=np.float64)
    zero = d <= 0
    if zero.any():
        pos = d[~zero]
        if pos.size == 0:
            raise ValidationError("all distances are zero")
        d[zero] = pos.min() / 2.0
    return d


def fit_gravity(Xbar: SparseNetwork, distances, bin_width=0.001) -> GravityModel:
    """Least squares for log f(d) = alpha log d - beta d on per-bin means of X̄.

    Pairs are bucketed by distance into half-open bins of the given width;
    each usable bin contributes (mean distance, log mean X̄ over all pairs in
    the bin, zero cells included).  An intercept absorbs the kernel's
    unidentifiable overall scale.
    """
    if not bin_width > 0:
        raise ValidationError("bin width must be positive")
    d = effective_distances(distances)
    if d.shape != (Xbar.m, Xbar.n):
        raise ValidationError("distance matrix shape does not match the network")
    dense = Xbar.to_dense()
    idx = np.floor(d / bin_width).astype(np.int64).ravel()
    order = np.unique(idx)
    sums = np.bincount(idx, weights=dense.ravel())
    counts = np.bincount(idx)
    dsum = np.bincount(idx, weights=d.ravel())
    means = sums[order] / counts[order]
    dmean = dsum[order] / counts[order]
    usable = means > 0
    if usable.sum() < 2:
        raise ValidationError("need at least two distance bins with positive mean")
    y = np.log(means[usable])
    x = dmean[usable]
    design = np.column_stack([np.ones(x.size), np.log(x), -x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return GravityModel(alpha=float(coef[1]), beta=float(coef[2]), distances=d)


def gravity_infer(gm: GravityModel, marg: MarginalPair, cfg: IpfConfig = IpfConfig()) -> SparseNetwork:
    """Balance the fitted distance kernel to the marginals."""
    kernel = SparseNetwork.from_dense(gm.kernel())
    if kernel.m != marg.m or kernel.n != marg.n:
        raise ValidationError("kernel shape does not match the marginals")
    res = run_ipf(kernel, marg, cfg)
    if res.status.value == "MaxIterations":
        raise NonConvergenceError("balancing the gravity kernel hit the iteration cap")
    return scaled_matrix(kernel, res.d0, res.d1)


def baseline_rank1(marg: MarginalPair) -> SparseNetwork:
    """X̂_ij = p_i q_j / sum(q): the no-structure estimate."""
    c = marg.q.sum()
    if c <= 0:
        raise ValidationError("column marginal total is zero")
    return SparseNetwork.from_dense(np.outer(marg.p, marg.q) / c)


def baseline_row_share(Xbar: SparseNetwork, p) -> SparseNetwork:
    """Distribute p_i over row i proportional to X̄'s row pattern."""
    p = np.asarray(p, dtype=np.float64)
    if p.size != Xbar.m:
        raise ValidationError("row marginal length does not match")
    rs = Xbar.row_sums()
    bad = (p > 0) & (rs <= 0)
    if bad.any():
        raise ValidationError(f"row {int(np.flatnonzero(bad)[0])} has positive marginal but empty support")
    with np.errstate(invalid="ignore", divide="ignore"):
        share = np.where(rs > 0, p / np.where(rs > 0, rs, 1.0), 0.0)
    vals = Xbar.val * share[Xbar.row]
    keep = vals > 0
    return SparseNetwork(Xbar.m, Xbar.n, Xbar.row[keep], Xbar.col[keep], vals[keep])


def baseline_col_share(Xbar: SparseNetwork, q) -> SparseNetwork:
    """Distribute q_j over column j proportional to X̄'s column pattern."""
    q = np.asarray(q, dtype=np.float64)
    if q.size != Xbar.n:
        raise ValidationError("column marginal length does not match")
    cs = Xbar.col_sums()
    bad = (q > 0) & (cs <= 0)
    if bad.any():
        raise ValidationError(f"column {int(np.flatnonzero(bad)[0])} has positive marginal but empty support")
    share = np.where(cs > 0, q / np.where(cs > 0, cs, 1.0), 0.0)
    vals = Xbar.val * share[Xbar.col]
    keep = vals > 0
    return SparseNetwork(Xbar.m, Xbar.n, Xbar.row[keep], Xbar.col[keep], vals[keep])


def baseline_scale(Xbar: SparseNetwork, total) -> SparseNetwork:
    """X̄ rescaled so its entries sum to ``total``."""
    if total < 0:
        raise ValidationError("target total must be non-negative")
    base = Xbar.total()
    if base <= 0:
        raise ValidationError("cannot rescale an empty network")
    vals = Xbar.val * (total / base)
    keep = vals > 0
    return SparseNetwork(Xbar.m, Xbar.n, Xbar.row[keep], Xbar.col[keep], vals[keep])


def cosine_similarity(A: SparseNetwork, B: SparseNetwork) -> float:
    """<A, B> / (||A|| ||B||) entrywise over the union of supports."""
    if (A.m, A.n) != (B.m, B.n):
        raise ValidationError("matrix dims disagree")
    na = float(np.linalg.norm(A.val))
    nb = float(np.linalg.norm(B.val))
    if na == 0 or nb == 0:
        raise ValidationError("cosine similarity with a zero matrix is undefined")
    ka, kb = A.support_keys(), B.support_keys()
    common, ia, ib = np.intersect1d(ka, kb, assume_unique=True, return_indices=True)
    dot = float(A.val[ia] @ B.val[ib])
    return dot / (na * nb)


def l2_param_error(d0, d1, truth: ScalingParameters) -> float:
    """Distance between estimated and true factors after mean normalization.

    Both sides are divided by their means over the estimate's positive
    support, so the unidentifiable common scale (c*d0, d1/c) drops out.
    """
    d0 = np.asarray(d0, dtype=np.float64)
    d1 = np.asarray(d1, dtype=np.float64)
    if d0.size != truth.m or d1.size != truth.n:
        raise ValidationError("factor lengths do not match the truth")
    tu = np.exp(truth.u)
    tv = np.exp(-truth.v)
    err2 = 0.0
    for est, tru in ((d0, tu), (d1, tv)):
        sup = est > 0
        if not sup.any():
            raise ValidationError("estimate has no positive entries")
        e = est / est[sup].mean()
        t = tru / tru[sup].mean()
        err2 += float(((e - t) ** 2).sum())
    return float(np.sqrt(err2))
