"""Model facade: one object covering the baseline and both reference variants.

The variant only changes which extra inputs reach the decoder cell:
nothing for the baseline, the anchor-attention context for the
monolingual variant ("m_ref"), the regression estimate f_s for the
bilingual one ("b_ref"). Loss evaluation and decoding share the same
teacher-forced / rollout machinery across all three.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import brefnet, mrefnet, seq2seq
from .autodiff import Tensor, no_grad
from .corpus import Batch, BOS, EOS
from .params import ParamStore
from .seq2seq import ModelDims

KINDS = ("baseline", "m_ref", "b_ref")


@dataclass
class LossParts:
    joint: Tensor          # the tensor actually minimized
    nll_token_mean: float  # per-token negative log-likelihood
    n_tokens: float
    l_m: float | None = None  # per-sentence hinge loss (b_ref only)


class TranslationModel:
    def __init__(self, params: ParamStore, dims: ModelDims, kind="baseline",
                 drop_emb=0.0, drop_out=0.0, lam=1.0, lam_m=1e-4):
        if kind not in KINDS:
            raise ValueError(f"unknown model kind {kind!r}")
        self.params = params
        self.dims = dims
        self.kind = kind
        self.drop_emb = drop_emb
        self.drop_out = drop_out
        self.lam = lam
        self.lam_m = lam_m

    # -- training-side ------------------------------------------------------

    def loss(self, batch: Batch, training=False, rng=None) -> LossParts:
        params, dims = self.params, self.dims
        residuals = []

        def m_hook(t, ctx):
            _, c_g = mrefnet.global_context(ctx["s_prev"], ctx["c"],
                                            params[mrefnet.ANCHOR_KEY], params)
            return [(c_g, params["mref/proj"])]

        def b_hook(t, ctx):
            q = brefnet.build_query(ctx["e_prev"], ctx["s_prev"], ctx["c"])
            pred = brefnet.f_s(q, params)
            diff2 = ad.sum_(ad.square(ctx["emb_clean"][:, t, :] - pred), axis=1)
            residuals.append(ad.sum_(diff2 * ctx["tmask_t"]))
            return [(pred, params["bref/proj"])]

        hook = {"baseline": None, "m_ref": m_hook, "b_ref": b_hook}[self.kind]
        nll_mean, n_tokens = seq2seq.nll_loss(
            params, dims, batch, training=training, rng=rng,
            drop_emb=self.drop_emb, drop_out=self.drop_out, step_hook=hook)

        if self.kind != "b_ref":
            return LossParts(nll_mean, float(nll_mean.data), n_tokens)

        B = len(batch)
        res_sum = residuals[0]
        for r in residuals[1:]:
            res_sum = res_sum + r
        reg = ad.sum_(brefnet.regression_weight_norms(params))
        l_m_mean = res_sum * (1.0 / B) + self.lam_m * reg
        joint = nll_mean * (n_tokens / B) + self.lam * l_m_mean
        return LossParts(joint, float(nll_mean.data), n_tokens,
                         l_m=float(l_m_mean.data))

    def dev_loss(self, batches):
        """Mean per-token NLL over batches, dropout disabled."""
        total, count = 0.0, 0.0
        with no_grad():
            for batch in batches:
                parts = self.loss(batch, training=False)
                total += parts.nll_token_mean * parts.n_tokens
                count += parts.n_tokens
        return total / count

    def hinge_loss(self, src_ids, tgt_ids):
        """Regression loss for one sentence pair (teacher forcing).

        Sum over target positions of ||e(y_t) - f_s(q_t)||^2 plus the
        weight-norm penalty; requires a b_ref model.
        """
        if self.kind != "b_ref":
            raise ValueError("hinge loss is defined for the b_ref variant")
        if len(tgt_ids) == 0:
            raise ValueError("empty target sentence")
        batch = Batch(src=np.asarray(src_ids)[None, :],
                      src_lens=np.array([len(src_ids)]),
                      tgt=np.array([[BOS] + list(tgt_ids) + [EOS]]),
                      tgt_lens=np.array([len(tgt_ids) + 2]))
        parts = self.loss(batch, training=False)
        return parts.l_m  # batch of one: the per-sentence value

    # -- decoding -----------------------------------------------------------

    def _prepare(self, src_ids):
        h, _ = seq2seq.encode_batch(self.params, self.dims,
                                    np.asarray(src_ids)[None, :],
                                    np.array([len(src_ids)]))
        h_proj = seq2seq.attention_proj(self.params, h)
        s0 = seq2seq.initial_state(self.params, h)
        return h, h_proj, s0.data[0].copy()

    def _make_step(self, h, h_proj):
        params, dims = self.params, self.dims

        def step(prev_ids, states):
            with no_grad():
                e_prev = ad.take_rows(params["dec/tgt_emb"], prev_ids)
                s_prev = Tensor(states)
                _, c = seq2seq.attention(s_prev, h, params, h_proj=h_proj)
                extras = ()
                if self.kind == "m_ref":
                    _, c_g = mrefnet.global_context(
                        s_prev, c, params[mrefnet.ANCHOR_KEY], params)
                    extras = [(c_g, params["mref/proj"])]
                elif self.kind == "b_ref":
                    q = brefnet.build_query(e_prev, s_prev, c)
                    extras = [(brefnet.f_s(q, params), params["bref/proj"])]
                s_new = seq2seq.decoder_step(params, e_prev, s_prev, c,
                                             extras, dims.cell)
                logits = seq2seq.output_logits(params, e_prev, s_new, c)
                logp = ad.log_softmax(logits, axis=1)
            return logp.data, s_new.data

        return step

    def translate(self, src_ids, beam=1, max_steps=None, length_normalize=True):
        """Decode one sentence; returns emitted token ids without BOS/EOS."""
        if max_steps is None:
            max_steps = 2 * len(src_ids) + 5
        h, h_proj, s0 = self._prepare(src_ids)
        step = self._make_step(h, h_proj)
        if beam == 1:
            hyp = seq2seq.greedy_decode(step, s0, max_steps)
            toks = hyp.tokens
            return toks[:-1] if toks and toks[-1] == EOS else toks
        return seq2seq.beam_search(step, s0, beam, max_steps, length_normalize)

    def greedy(self, src_ids, max_steps=None):
        return self.translate(src_ids, beam=1, max_steps=max_steps)
