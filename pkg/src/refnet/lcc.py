"""Local coordinate coding: anchors, soft coefficients, and anchor fitting.

A point x is approximated by a convex combination of anchor points,
x ~ gamma(x) = sum_j gamma_j(x) v_j, with coefficients produced by a
softmax over a tri-nonlinear compatibility score

    s(x, v_j) = v_s^T tanh(W_s v_j + U_s x + V_s (v_j o x)),

where "o" is the element-wise product. Anchors and score parameters are
fitted by minimizing the localization measure

    l_alpha ||x - gamma(x)|| + l_beta sum_j |gamma_j(x)| ||v_j - gamma(x)||^2

averaged over a dataset. The same expression evaluated pointwise doubles
as an approximation-error bound diagnostic; it is reported, never trained
on directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor, no_grad
from .params import (Optimizer, OptimizerConfig, ParamStore, backward)


@dataclass
class LccConfig:
    l_alpha: float = 1.0
    l_beta: float = 0.01
    first_term_squared: bool = False  # plain (unsquared) norm by default

    def __post_init__(self):
        if self.l_alpha < 0 or self.l_beta < 0:
            raise ValueError("l_alpha and l_beta must be non-negative")


class AnchorSet:
    """The |C| anchor points, each of dimension d_v."""

    def __init__(self, points):
        self.points = points if isinstance(points, Tensor) else Tensor(points)
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise ValueError("anchors must form a non-empty (|C|, d_v) matrix")

    @property
    def count(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass
class ScoreParams:
    """Trainable pieces of the tri-nonlinear score."""

    W: Tensor  # (d_att, d_v), applied to the anchor
    U: Tensor  # (d_att, d_v), applied to the input
    V: Tensor  # (d_att, d_v), applied to the element-wise product
    v: Tensor  # (d_att,)

    @classmethod
    def init(cls, d_v, d_att, rng):
        def mat():
            limit = np.sqrt(6.0 / (d_att + d_v))
            return Tensor(rng.uniform(-limit, limit, size=(d_att, d_v)))
        return cls(mat(), mat(), mat(), Tensor(rng.uniform(-0.5, 0.5, size=d_att)))


def tri_score(x, anchor, sp: ScoreParams):
    """Score of one (input, anchor) pair; both must share dimension d_v."""
    x, anchor = as_tensor(x), as_tensor(anchor)
    if x.shape != anchor.shape:
        raise ValueError(f"dimension mismatch: x {x.shape} vs anchor {anchor.shape}")
    xc = ad.reshape(x, (x.size, 1))
    vc = ad.reshape(anchor, (anchor.size, 1))
    pre = ad.matmul(sp.W, vc) + ad.matmul(sp.U, xc) + ad.matmul(sp.V, vc * xc)
    return ad.sum_(ad.tanh(pre[:, 0]) * sp.v)


def tri_scores(X, anchors, W, U, V, v):
    """All pairwise scores: (N, d_v) inputs x (C, d_v) anchors -> (N, C)."""
    X = as_tensor(X)
    A = anchors.points if isinstance(anchors, AnchorSet) else as_tensor(anchors)
    N, d = X.shape
    C = A.shape[0]
    wa = ad.matmul(A, ad.transpose(W))                    # (C, d_att)
    ux = ad.matmul(X, ad.transpose(U))                    # (N, d_att)
    cross = ad.reshape(X, (N, 1, d)) * ad.reshape(A, (1, C, d))
    vc = ad.matmul(ad.reshape(cross, (N * C, d)), ad.transpose(V))
    d_att = W.shape[0]
    pre = ad.reshape(wa, (1, C, d_att)) + ad.reshape(ux, (N, 1, d_att)) \
        + ad.reshape(vc, (N, C, d_att))
    return ad.sum_(ad.tanh(pre) * v, axis=2)              # (N, C)


def lcc_weights(x, anchors: AnchorSet, sp: ScoreParams):
    """Soft coefficients gamma(x): softmax over the anchor scores."""
    if anchors.count < 1:
        raise ValueError("need at least one anchor")
    x = as_tensor(x)
    scores = tri_scores(ad.reshape(x, (1, x.size)), anchors, sp.W, sp.U, sp.V, sp.v)
    return ad.softmax(scores, axis=1)[0, :]


def reconstruct(gamma, anchors: AnchorSet):
    """gamma-weighted combination of the anchors; stays in their convex hull."""
    gamma = as_tensor(gamma)
    if gamma.shape[-1] != anchors.count:
        raise ValueError(f"{gamma.shape[-1]} coefficients for {anchors.count} anchors")
    if gamma.ndim == 1:
        return ad.matmul(ad.reshape(gamma, (1, anchors.count)), anchors.points)[0, :]
    return ad.matmul(gamma, anchors.points)


def _measure_terms(X, anchors: AnchorSet, sp: ScoreParams, cfg: LccConfig):
    """Per-point localization measure for a batch of inputs (N, d_v)."""
    X = as_tensor(X)
    N, d = X.shape
    C = anchors.count
    scores = tri_scores(X, anchors, sp.W, sp.U, sp.V, sp.v)
    gamma = ad.softmax(scores, axis=1)                    # (N, C)
    recon = ad.matmul(gamma, anchors.points)              # (N, d)
    sq1 = ad.sum_(ad.square(X - recon), axis=1)
    term1 = sq1 if cfg.first_term_squared else ad.sqrt(sq1)
    diffs = ad.reshape(anchors.points, (1, C, d)) - ad.reshape(recon, (N, 1, d))
    sqd = ad.sum_(ad.square(diffs), axis=2)               # (N, C)
    term2 = ad.sum_(ad.abs_(gamma) * sqd, axis=1)
    return cfg.l_alpha * term1 + cfg.l_beta * term2


def localization_measure(x, anchors: AnchorSet, sp: ScoreParams,
                         cfg: LccConfig = LccConfig()):
    """The fitting objective evaluated at a single point."""
    x = as_tensor(x)
    return _measure_terms(ad.reshape(x, (1, x.size)), anchors, sp, cfg)[0]


def mean_localization_measure(X, anchors, sp, cfg=LccConfig()):
    return ad.mean(_measure_terms(X, anchors, sp, cfg))


def lipschitz_bound_diag(x, anchors: AnchorSet, sp: ScoreParams,
                         l_alpha, l_beta):
    """Approximation-error upper bound at x; diagnostic only."""
    cfg = LccConfig(l_alpha=l_alpha, l_beta=l_beta)
    with no_grad():
        return float(localization_measure(x, anchors, sp, cfg).data)


@dataclass
class AnchorFitConfig:
    iters: int = 2000
    lr: float = 0.05
    lr_decay: float = 0.998   # multiplicative, per iteration
    batch_size: int = 0       # 0 = full batch
    d_att: int = 0            # 0 = anchor dimension
    seed: int = 0


@dataclass
class AnchorFitResult:
    anchors: AnchorSet
    score: ScoreParams
    final_measure: float
    initial_measure: float
    history: list = field(default_factory=list)


def init_anchor_points(dataset, n_anchors, rng):
    """Draw anchors from the data (without replacement); Gaussian fallback."""
    dataset = np.asarray(dataset, dtype=np.float64)
    n, d = dataset.shape
    if n_anchors <= n:
        idx = rng.choice(n, size=n_anchors, replace=False)
        return dataset[idx].copy()
    extra = rng.normal(0.0, dataset.std() + 1e-8, size=(n_anchors - n, d))
    return np.concatenate([dataset.copy(), extra + dataset.mean(axis=0)], axis=0)


def fit_anchors(dataset, n_anchors, cfg: LccConfig = LccConfig(),
                fit: AnchorFitConfig = AnchorFitConfig()):
    """Fit anchors and score parameters by minimizing the mean measure.

    Adam with a decaying step size; the decay is what lets the unsquared
    first term settle below any fixed tolerance instead of orbiting the
    optimum at a step-size radius.
    """
    dataset = np.asarray(dataset, dtype=np.float64)
    if dataset.ndim != 2 or dataset.shape[0] == 0:
        raise ValueError("dataset must be a non-empty (N, d) matrix")
    if n_anchors < 1:
        raise ValueError("need at least one anchor")
    rng = np.random.default_rng(fit.seed)
    d_v = dataset.shape[1]
    d_att = fit.d_att or d_v

    ps = ParamStore()
    ps.add("anchors/points", init_anchor_points(dataset, n_anchors, rng), "anchors")
    proto = ScoreParams.init(d_v, d_att, rng)
    for key, t in (("W", proto.W), ("U", proto.U), ("V", proto.V), ("v", proto.v)):
        ps.add(f"anchors/score/{key}", t.data, "anchors")

    def views():
        sp = ScoreParams(*(ps[f"anchors/score/{k}"] for k in ("W", "U", "V", "v")))
        return AnchorSet(ps["anchors/points"]), sp

    anchors, sp = views()
    with no_grad():
        initial = float(mean_localization_measure(dataset, anchors, sp, cfg).data)

    opt = Optimizer(OptimizerConfig(kind="adam", lr=fit.lr))
    history = []
    n = dataset.shape[0]
    for it in range(fit.iters):
        if fit.batch_size and fit.batch_size < n:
            idx = rng.choice(n, size=fit.batch_size, replace=False)
            X = dataset[idx]
        else:
            X = dataset
        anchors, sp = views()
        loss = mean_localization_measure(X, anchors, sp, cfg)
        value = float(loss.data)
        if not np.isfinite(value):
            raise FloatingPointError(f"anchor fitting diverged at iteration {it}")
        history.append(value)
        grads = backward(loss, ps)
        opt.step(ps, grads)
        opt.config.lr *= fit.lr_decay

    anchors, sp = views()
    with no_grad():
        final = float(mean_localization_measure(dataset, anchors, sp, cfg).data)
    frozen_anchors = AnchorSet(ps["anchors/points"].data.copy())
    frozen_sp = ScoreParams(*(Tensor(ps[f"anchors/score/{k}"].data.copy())
                              for k in ("W", "U", "V", "v")))
    return AnchorFitResult(frozen_anchors, frozen_sp, final, initial, history)
