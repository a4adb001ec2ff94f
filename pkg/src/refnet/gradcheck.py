"""Finite-difference validation of every differentiable operation.

Each check builds a tiny instance of one computation, evaluates the
analytic gradients via the tape, evaluates the central-difference oracle,
and reports the worst element-wise relative error
|a - b| / max(|a|, |b|, 1e-8). Probe inputs (the non-parameter arguments
whose gradients are also part of the contract) are registered as
parameters so the oracle covers them too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import brefnet, mrefnet, seq2seq
from .autodiff import Tensor
from .corpus import Batch
from .lcc import (AnchorSet, LccConfig, ScoreParams,
                  mean_localization_measure, tri_score)
from .model import TranslationModel
from .params import ParamStore, backward, finite_diff_grad
from .seq2seq import ModelDims

TOL = 1e-4
_DIMS = dict(d_e=3, d_h=4, d_att=4, d_out=3)


@dataclass
class CheckResult:
    name: str
    seed: int
    max_rel_err: float

    @property
    def passed(self):
        return self.max_rel_err <= TOL


def _elementwise_rel(a, b, floor=1e-8):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.abs(a - b) / denom


def _compare(f, ps, steps=(1e-4,)):
    # No single step suits every coordinate: truncation grows with h while
    # the roundoff term eps*|f|/h competes with the 1e-8 error floor on
    # near-zero gradients. Each coordinate is checked against its more
    # accurate oracle estimate.
    analytic = backward(f(ps), ps)
    best = None
    for step in steps:
        oracle = finite_diff_grad(f, ps, step=step)
        errs = {k: _elementwise_rel(analytic[k], oracle[k]) for k in analytic}
        best = errs if best is None else {k: np.minimum(best[k], errs[k])
                                          for k in best}
    return max(float(e.max()) for e in best.values())


def _tiny_dims(vocab=6):
    return ModelDims(vocab_src=vocab, vocab_tgt=vocab, **_DIMS)


def _probe(ps, name, data):
    return ps.add(name, data, "m_ref")  # group label is irrelevant for probes


def check_attention(seed):
    """Alignment weights and context against the oracle."""
    rng = np.random.default_rng((seed, 11))
    dims = _tiny_dims()
    ps = seq2seq.init_baseline_params(dims, rng)
    h = Tensor(rng.normal(size=(2, 3, 2 * dims.d_h)))
    u = rng.normal(size=2 * dims.d_h)
    r = rng.normal(size=3)
    _probe(ps, "probe/s_prev", rng.normal(size=(2, dims.d_h)))

    def f(ps_):
        alpha, c = seq2seq.attention(ps_["probe/s_prev"], h, ps_)
        return ad.sum_(ad.tanh(c) * u) + ad.sum_(alpha * r)

    return _compare(f, ps)


def check_decoder_step(seed):
    """Baseline state update (no extra inputs)."""
    rng = np.random.default_rng((seed, 13))
    dims = _tiny_dims()
    ps = seq2seq.init_baseline_params(dims, rng)
    u = rng.normal(size=dims.d_h)
    _probe(ps, "probe/e_prev", rng.normal(size=(2, dims.d_e)))
    _probe(ps, "probe/s_prev", rng.normal(size=(2, dims.d_h)))
    _probe(ps, "probe/c", rng.normal(size=(2, 2 * dims.d_h)))

    def f(ps_):
        s = seq2seq.decoder_step(ps_, ps_["probe/e_prev"], ps_["probe/s_prev"],
                                 ps_["probe/c"])
        return ad.sum_(ad.tanh(s) * u)

    return _compare(f, ps)


def check_decoder_step_extras(seed):
    """Augmented update: anchor-attention context fed through its projection."""
    rng = np.random.default_rng((seed, 17))
    dims = _tiny_dims()
    ps = seq2seq.init_baseline_params(dims, rng)
    mrefnet.init_m_params(ps, dims, rng)
    ps["mref/proj"].data[...] = rng.normal(0, 0.3, size=ps["mref/proj"].shape)
    ps.add("anchors/m", rng.normal(size=(3, 2 * dims.d_h)), "anchors")
    u = rng.normal(size=dims.d_h)
    _probe(ps, "probe/e_prev", rng.normal(size=(2, dims.d_e)))
    _probe(ps, "probe/s_prev", rng.normal(size=(2, dims.d_h)))
    _probe(ps, "probe/c", rng.normal(size=(2, 2 * dims.d_h)))

    def f(ps_):
        s = mrefnet.m_decoder_step(ps_, dims, ps_["probe/e_prev"],
                                   ps_["probe/s_prev"], ps_["probe/c"],
                                   ps_["anchors/m"])
        return ad.sum_(ad.tanh(s) * u)

    return _compare(f, ps)


def check_tri_score(seed):
    """The tri-nonlinear compatibility score."""
    rng = np.random.default_rng((seed, 19))
    d_v, d_att = 4, 3
    ps = ParamStore()
    for key in ("W", "U", "V"):
        ps.add(f"anchors/score/{key}", rng.normal(0, 0.5, size=(d_att, d_v)), "anchors")
    ps.add("anchors/score/v", rng.normal(size=d_att), "anchors")
    ps.add("anchors/point", rng.normal(size=d_v), "anchors")
    _probe(ps, "probe/x", rng.normal(size=d_v))

    def f(ps_):
        sp = ScoreParams(ps_["anchors/score/W"], ps_["anchors/score/U"],
                         ps_["anchors/score/V"], ps_["anchors/score/v"])
        return tri_score(ps_["probe/x"], ps_["anchors/point"], sp)

    return _compare(f, ps)


def check_localization_measure(seed):
    """The anchor-fitting objective, including the unsquared first term."""
    rng = np.random.default_rng((seed, 23))
    d_v, d_att, C = 3, 3, 3
    ps = ParamStore()
    ps.add("anchors/points", rng.normal(size=(C, d_v)), "anchors")
    for key in ("W", "U", "V"):
        ps.add(f"anchors/score/{key}", rng.normal(0, 0.5, size=(d_att, d_v)), "anchors")
    ps.add("anchors/score/v", rng.normal(size=d_att), "anchors")
    _probe(ps, "probe/x", rng.normal(size=(4, d_v)))
    cfg = LccConfig(l_alpha=1.0, l_beta=0.01)

    def f(ps_):
        sp = ScoreParams(ps_["anchors/score/W"], ps_["anchors/score/U"],
                         ps_["anchors/score/V"], ps_["anchors/score/v"])
        return mean_localization_measure(ps_["probe/x"],
                                         AnchorSet(ps_["anchors/points"]), sp, cfg)

    return _compare(f, ps)


def _bref_store(rng, dims, C=3, d_a=4):
    ps = seq2seq.init_baseline_params(dims, rng)
    brefnet.init_b_params(ps, dims, C, d_a, rng)
    ps["bref/proj"].data[...] = rng.normal(0, 0.3, size=ps["bref/proj"].shape)
    return ps


def check_f_s(seed):
    """The anchor-coded regression onto the embedding space."""
    rng = np.random.default_rng((seed, 29))
    dims = _tiny_dims()
    ps = _bref_store(rng, dims)
    u = rng.normal(size=dims.d_e)
    _probe(ps, "probe/q", rng.normal(size=(2, brefnet.query_dim(dims))))

    def f(ps_):
        return ad.sum_(ad.tanh(brefnet.f_s(ps_["probe/q"], ps_)) * u)

    return _compare(f, ps)


def check_hinge_loss(seed):
    """Regression residual plus the per-anchor weight-norm penalty."""
    rng = np.random.default_rng((seed, 31))
    dims = _tiny_dims()
    ps = _bref_store(rng, dims)
    _probe(ps, "probe/q", rng.normal(size=(3, brefnet.query_dim(dims))))
    _probe(ps, "probe/target", rng.normal(size=(3, dims.d_e)))
    lam_m = 0.5

    def f(ps_):
        pred = brefnet.f_s(ps_["probe/q"], ps_)
        residual = ad.sum_(ad.square(ps_["probe/target"] - pred))
        return residual + lam_m * ad.sum_(brefnet.regression_weight_norms(ps_))

    return _compare(f, ps)


def _toy_batch(rng, dims, B=2, m=3, T=4):
    src = rng.integers(4, dims.vocab_src, size=(B, m))
    tgt = np.full((B, T + 2), 0, dtype=np.int64)
    for i in range(B):
        tgt[i, 0] = 1
        tgt[i, 1:T + 1] = rng.integers(4, dims.vocab_tgt, size=T)
        tgt[i, T + 1] = 2
    return Batch(src=src, src_lens=np.full(B, m), tgt=tgt,
                 tgt_lens=np.full(B, T + 2))


def check_nll(seed):
    """Teacher-forced likelihood through the whole baseline graph."""
    rng = np.random.default_rng((seed, 37))
    dims = _tiny_dims()
    ps = seq2seq.init_baseline_params(dims, rng)
    batch = _toy_batch(rng, dims)

    def f(ps_):
        loss, _ = seq2seq.nll_loss(ps_, dims, batch)
        return loss

    return _compare(f, ps, steps=(1e-3, 2e-3))


def check_joint_b_loss(seed):
    """The full bilingual objective: NLL plus weighted hinge loss."""
    rng = np.random.default_rng((seed, 41))
    dims = _tiny_dims()
    ps = _bref_store(rng, dims)
    batch = _toy_batch(rng, dims)
    model = TranslationModel(ps, dims, "b_ref", lam=1.0, lam_m=1e-2)

    def f(ps_):
        return model.loss(batch).joint

    return _compare(f, ps, steps=(1e-3, 2e-3))


CHECKS = {
    "attention": check_attention,
    "decoder_step": check_decoder_step,
    "decoder_step_extras": check_decoder_step_extras,
    "tri_score": check_tri_score,
    "localization_measure": check_localization_measure,
    "f_s": check_f_s,
    "hinge_loss": check_hinge_loss,
    "nll_loss": check_nll,
    "joint_b_loss": check_joint_b_loss,
}


def run_suite(seeds=range(5), checks=None):
    results = []
    for name in (checks or CHECKS):
        fn = CHECKS[name]
        for seed in seeds:
            results.append(CheckResult(name, seed, fn(seed)))
    return results


def suite_report(results):
    lines = []
    by_name = {}
    for r in results:
        by_name.setdefault(r.name, []).append(r)
    for name, rs in by_name.items():
        worst = max(r.max_rel_err for r in rs)
        status = "PASS" if all(r.passed for r in rs) else "FAIL"
        lines.append(f"{status}\t{name}\tseeds={len(rs)}\tmax_rel_err={worst:.3e}")
    return "\n".join(lines)
