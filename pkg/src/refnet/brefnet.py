"""Bilingual reference network.

The decoder's next-word problem is recast as regression: a query
q_t = [e(y_{t-1}); s_{t-1}; c_t] is mapped towards the embedding of the
word being produced. The regression has anchor-dependent weights,

    f_s(q_t) = sum_j gamma_j ( W_vj g(q_t) + b_vj ),

where g is a tanh-affine map to anchor size and gamma comes from the
tri-nonlinear score between g(q_t) and each anchor. (The raw query and the
anchors have different dimensions, so the element-wise product inside the
score is taken against g(q_t); see the README notes.) The prediction is fed
to the decoder as an extra input, and f_s itself is trained with a hinge
loss against the gold embeddings plus a weight-norm penalty.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .lcc import tri_scores
from .params import ParamStore
from .seq2seq import ModelDims, decoder_step, gates_per_cell, xavier


def query_dim(dims: ModelDims):
    return dims.d_e + 3 * dims.d_h  # e(y) + s + c


def init_b_params(ps: ParamStore, dims: ModelDims, n_anchors, d_a, rng):
    """Add the theta_B group; anchors and regression weights train jointly."""
    d_q, d_e = query_dim(dims), dims.d_e
    ng = gates_per_cell(dims.cell)
    ps.add("bref/anchors", rng.normal(0.0, 0.3, size=(n_anchors, d_a)), "b_ref")
    ps.add("bref/g/W", xavier(rng, d_q, d_a), "b_ref")
    ps.add("bref/g/b", np.zeros(d_a), "b_ref")
    ps.add("bref/score/W", xavier(rng, d_a, d_a), "b_ref")
    ps.add("bref/score/U", xavier(rng, d_a, d_a), "b_ref")
    ps.add("bref/score/V", xavier(rng, d_a, d_a), "b_ref")
    ps.add("bref/score/v", xavier(rng, d_a, 1, (d_a,)), "b_ref")
    ps.add("bref/reg/W", rng.normal(0.0, np.sqrt(1.0 / d_a), size=(n_anchors, d_a, d_e)),
           "b_ref")
    ps.add("bref/reg/b", np.zeros((n_anchors, d_e)), "b_ref")
    ps.add("bref/proj", np.zeros((d_e, ng * dims.d_h)), "b_ref")
    return ps


def build_query(e_prev, s_prev, c_t):
    """q_t = [e(y_{t-1}); s_{t-1}; c_t], batched or single vectors."""
    parts = [p if isinstance(p, Tensor) else Tensor(p) for p in (e_prev, s_prev, c_t)]
    ndims = {p.ndim for p in parts}
    if len(ndims) != 1:
        raise ValueError("query components must all be vectors or all be batches")
    axis = 1 if parts[0].ndim == 2 else 0
    return ad.concat(parts, axis=axis)


def g_transform(q, params):
    """Anchor-size projection of the query: tanh of an affine map."""
    q2 = ad.reshape(q, (1, q.size)) if q.ndim == 1 else q
    out = ad.tanh(ad.matmul(q2, params["bref/g/W"]) + params["bref/g/b"])
    return out[0, :] if q.ndim == 1 else out


def regression_weight_norms(params):
    """Squared Frobenius norm of each per-anchor weight matrix: (|C|,)."""
    return ad.sum_(ad.square(params["bref/reg/W"]), axis=(1, 2))


def f_s(q, params):
    """Anchor-coded regression estimate of the current target embedding."""
    single = q.ndim == 1
    q2 = ad.reshape(q, (1, q.size)) if single else q
    G = g_transform(q2, params)                                   # (B, d_a)
    anchors = params["bref/anchors"]
    C = anchors.shape[0]
    scores = tri_scores(G, anchors, params["bref/score/W"], params["bref/score/U"],
                        params["bref/score/V"], params["bref/score/v"])
    gamma = ad.softmax(scores, axis=1)                            # (B, C)
    preds = ad.stack([ad.matmul(G, params["bref/reg/W"][j]) + params["bref/reg/b"][j]
                      for j in range(C)], axis=0)                 # (C, B, d_e)
    gT = ad.reshape(ad.transpose(gamma), (C, G.shape[0], 1))
    out = ad.sum_(preds * gT, axis=0)                             # (B, d_e)
    return out[0, :] if single else out


def lcc_gamma(q, params):
    """Just the anchor coefficients for a query (diagnostics and tests)."""
    single = q.ndim == 1
    q2 = ad.reshape(q, (1, q.size)) if single else q
    G = g_transform(q2, params)
    scores = tri_scores(G, params["bref/anchors"], params["bref/score/W"],
                        params["bref/score/U"], params["bref/score/V"],
                        params["bref/score/v"])
    gamma = ad.softmax(scores, axis=1)
    return gamma[0, :] if single else gamma


def b_decoder_step(params, dims: ModelDims, e_prev, s_prev, c_t):
    """Baseline state update augmented with the regression estimate."""
    q = build_query(e_prev, s_prev, c_t)
    pred = f_s(q, params)
    return decoder_step(params, e_prev, s_prev, c_t,
                        extras=[(pred, params["bref/proj"])], cell=dims.cell)
