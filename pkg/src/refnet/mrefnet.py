"""Monolingual reference network.

The training corpus is compressed into a fitted set of anchor points over
mean-pooled encoder annotations. At each decoder step an attention over
the (frozen) anchors produces a global context

    c_t^G = sum_j softmax_j( v^T tanh(W s_{t-1} + U c_t + V v_j) ) * v_j

which enters the decoder state update as an extra input. The extra-input
projection starts at zero, so an untuned model reproduces the baseline.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, no_grad
from .corpus import make_batches
from .params import ParamStore
from .seq2seq import ModelDims, decoder_step, encode_batch, gates_per_cell, xavier

ANCHOR_KEY = "anchors/m"
SCORE_KEYS = ("anchors/m_score/W", "anchors/m_score/U",
              "anchors/m_score/V", "anchors/m_score/v")


def init_m_params(ps: ParamStore, dims: ModelDims, rng):
    """Add the theta_M group: fresh anchor attention + a zero extra projection."""
    d_h, d_att = dims.d_h, dims.d_att
    ng = gates_per_cell(dims.cell)
    ps.add("mref/att/W", xavier(rng, d_h, d_att), "m_ref")
    ps.add("mref/att/U", xavier(rng, 2 * d_h, d_att), "m_ref")
    ps.add("mref/att/V", xavier(rng, 2 * d_h, d_att), "m_ref")
    ps.add("mref/att/v", xavier(rng, 2 * d_h, 1, (d_att,)), "m_ref")
    ps.add("mref/proj", np.zeros((2 * d_h, ng * d_h)), "m_ref")
    return ps


def add_anchor_params(ps: ParamStore, anchor_points, score_arrays):
    """Store a fitted anchor set (and its fitting-score net) in the store."""
    ps.add(ANCHOR_KEY, anchor_points, "anchors")
    for key, arr in zip(SCORE_KEYS, score_arrays):
        ps.add(key, arr, "anchors")
    return ps


def sentence_repr(h):
    """Mean-pooled sentence representation: element-wise mean over the rows."""
    h = h if isinstance(h, Tensor) else Tensor(h)
    if h.ndim != 2 or h.shape[0] < 1:
        raise ValueError("expected a non-empty (m, 2*d_h) annotation matrix")
    return ad.mean(h, axis=0)


def collect_sentence_reprs(params, dims: ModelDims, corpus, vocab_src, vocab_tgt,
                           batch_size=64):
    """h_M for every sentence, computed with the (frozen) encoder, one pass."""
    reprs = np.empty((len(corpus), 2 * dims.d_h))
    row = 0
    with no_grad():
        for batch in make_batches(corpus, batch_size, vocab_src, vocab_tgt):
            h, mask = encode_batch(params, dims, batch.src, batch.src_lens)
            counts = mask.sum(axis=1, keepdims=True)
            pooled = (h.data * mask[:, :, None]).sum(axis=1) / counts
            reprs[row: row + len(batch)] = pooled
            row += len(batch)
    return reprs


def global_context(s_prev, c_t, anchor_points, params):
    """Attention over the anchors (batched); returns (alpha_G, c_G)."""
    A = anchor_points if isinstance(anchor_points, Tensor) else Tensor(anchor_points)
    if A.shape[0] < 1:
        raise ValueError("need at least one anchor")
    ws = ad.matmul(s_prev, params["mref/att/W"])       # (B, d_att)
    uc = ad.matmul(c_t, params["mref/att/U"])          # (B, d_att)
    va = ad.matmul(A, params["mref/att/V"])            # (C, d_att)
    B, d_att = ws.shape
    C = A.shape[0]
    pre = ad.reshape(ws + uc, (B, 1, d_att)) + ad.reshape(va, (1, C, d_att))
    scores = ad.sum_(ad.tanh(pre) * params["mref/att/v"], axis=2)
    alpha = ad.softmax(scores, axis=1)                 # (B, C)
    return alpha, ad.matmul(alpha, A)


def m_decoder_step(params, dims: ModelDims, e_prev, s_prev, c_t, anchor_points):
    """Baseline state update augmented with the global anchor context."""
    _, c_g = global_context(s_prev, c_t, anchor_points, params)
    return decoder_step(params, e_prev, s_prev, c_t,
                        extras=[(c_g, params["mref/proj"])], cell=dims.cell)
