import math

import numpy as np
import pytest

from refnet.autodiff import Tensor
from refnet.lcc import (AnchorFitConfig, AnchorSet, LccConfig, ScoreParams,
                        fit_anchors, lcc_weights, lipschitz_bound_diag,
                        localization_measure, reconstruct, tri_score)


def make_score(d_v, d_att=None, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    d_att = d_att or d_v
    return ScoreParams(Tensor(rng.normal(0, scale, size=(d_att, d_v))),
                       Tensor(rng.normal(0, scale, size=(d_att, d_v))),
                       Tensor(rng.normal(0, scale, size=(d_att, d_v))),
                       Tensor(rng.normal(0, scale, size=d_att)))


def zero_score(d_v, d_att=None):
    d_att = d_att or d_v
    zeros = lambda shape: Tensor(np.zeros(shape))
    return ScoreParams(zeros((d_att, d_v)), zeros((d_att, d_v)),
                       zeros((d_att, d_v)), zeros(d_att))


class TestTriScore:
    def test_zero_readout_gives_zero(self):
        sp = make_score(3, seed=1)
        sp.v.data[...] = 0.0
        out = tri_score([1.0, -2.0, 0.5], [0.3, 0.3, 0.3], sp)
        assert float(out.data) == 0.0

    def test_zero_input_drops_product_term(self):
        sp = make_score(3, seed=2)
        x = np.zeros(3)
        v = np.array([0.4, -1.0, 2.0])
        out = tri_score(x, v, sp)
        expected = sp.v.data @ np.tanh(sp.W.data @ v)
        assert float(out.data) == pytest.approx(expected, rel=1e-12)

    def test_identity_weights_hand_example(self):
        """W = U = V = I, x = (1,0), v = (1,1): score = v_s . tanh((3,1))."""
        sp = ScoreParams(Tensor(np.eye(2)), Tensor(np.eye(2)),
                         Tensor(np.eye(2)), Tensor(np.array([1.0, 1.0])))
        out = tri_score([1.0, 0.0], [1.0, 1.0], sp)
        assert float(out.data) == pytest.approx(math.tanh(3) + math.tanh(1))

    def test_dimension_mismatch_rejected(self):
        sp = make_score(3)
        with pytest.raises(ValueError, match="mismatch"):
            tri_score([1.0, 2.0], [1.0, 2.0, 3.0], sp)


class TestLccWeights:
    def test_single_anchor(self):
        sp = make_score(2, seed=3)
        gamma = lcc_weights([0.5, 0.5], AnchorSet([[1.0, 2.0]]), sp)
        np.testing.assert_allclose(gamma.data, [1.0])

    def test_equal_scores_split_evenly(self):
        sp = make_score(2, seed=4)
        anchors = AnchorSet([[1.0, 2.0], [1.0, 2.0]])  # identical anchors
        gamma = lcc_weights([0.3, -0.7], anchors, sp)
        np.testing.assert_allclose(gamma.data, [0.5, 0.5])

    def test_hand_built_scores_give_point_one_point_nine(self):
        """Scores (0, ln 9) -> weights (0.1, 0.9)."""
        sp = zero_score(2, d_att=1)
        sp.W.data[0, 0] = 1.0
        sp.v.data[0] = 3.0
        anchors = AnchorSet([[0.0, 5.0],
                             [math.atanh(math.log(9.0) / 3.0), 5.0]])
        gamma = lcc_weights([0.2, 0.4], anchors, sp)
        np.testing.assert_allclose(gamma.data, [0.1, 0.9], atol=1e-12)

    def test_simplex_on_random_inputs(self):
        sp = make_score(4, seed=5)
        anchors = AnchorSet(np.random.default_rng(6).normal(size=(7, 4)))
        rng = np.random.default_rng(7)
        for _ in range(1000):
            gamma = lcc_weights(rng.normal(size=4), anchors, sp)
            assert (gamma.data >= 0).all()
            assert abs(gamma.data.sum() - 1.0) <= 1e-9

    def test_permutation_equivariance(self):
        sp = make_score(3, seed=8)
        pts = np.random.default_rng(9).normal(size=(5, 3))
        x = np.array([0.1, -0.2, 0.3])
        perm = np.array([3, 0, 4, 1, 2])
        g1 = lcc_weights(x, AnchorSet(pts), sp)
        g2 = lcc_weights(x, AnchorSet(pts[perm]), sp)
        np.testing.assert_allclose(g2.data, g1.data[perm], atol=1e-12)
        r1 = reconstruct(g1, AnchorSet(pts))
        r2 = reconstruct(g2, AnchorSet(pts[perm]))
        np.testing.assert_allclose(r1.data, r2.data, atol=1e-12)


class TestReconstruct:
    def test_single_anchor_returns_it(self):
        out = reconstruct([1.0], AnchorSet([[3.0, -1.0]]))
        np.testing.assert_array_equal(out.data, [3.0, -1.0])

    def test_midpoint(self):
        out = reconstruct([0.5, 0.5], AnchorSet([[0.0, 0.0], [2.0, 4.0]]))
        np.testing.assert_allclose(out.data, [1.0, 2.0])

    def test_stays_in_coordinate_hull(self):
        rng = np.random.default_rng(10)
        pts = rng.normal(size=(6, 3))
        anchors = AnchorSet(pts)
        for _ in range(200):
            raw = rng.random(6)
            gamma = raw / raw.sum()
            out = reconstruct(gamma, anchors).data
            assert (out >= pts.min(axis=0) - 1e-12).all()
            assert (out <= pts.max(axis=0) + 1e-12).all()

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            reconstruct([0.5, 0.5], AnchorSet([[1.0, 2.0]]))


class TestLocalizationMeasure:
    def test_zero_when_anchor_is_the_point(self):
        sp = make_score(2, seed=11)
        x = np.array([0.7, -0.3])
        out = localization_measure(x, AnchorSet([x.copy()]), sp, LccConfig())
        assert float(out.data) == 0.0

    def test_zero_weights_give_zero(self):
        sp = make_score(2, seed=12)
        out = localization_measure([1.0, 2.0], AnchorSet([[0.0, 0.0]]), sp,
                                   LccConfig(l_alpha=0.0, l_beta=0.0))
        assert float(out.data) == 0.0

    def test_hand_example_totals_one(self):
        """Uniform weights, x between the anchors: 0 + 0.5 + 0.5 = 1."""
        sp = zero_score(2)  # all-zero score net makes gamma uniform
        anchors = AnchorSet([[0.0, 0.0], [2.0, 0.0]])
        out = localization_measure([1.0, 0.0], anchors, sp,
                                   LccConfig(l_alpha=1.0, l_beta=1.0))
        assert float(out.data) == pytest.approx(1.0, rel=1e-12)

    def test_non_negative(self):
        sp = make_score(3, seed=13)
        anchors = AnchorSet(np.random.default_rng(14).normal(size=(4, 3)))
        rng = np.random.default_rng(15)
        for _ in range(100):
            out = localization_measure(rng.normal(size=3), anchors, sp,
                                       LccConfig(l_alpha=0.5, l_beta=0.2))
            assert float(out.data) >= 0.0

    def test_squared_first_term_switch(self):
        sp = zero_score(2)
        anchors = AnchorSet([[0.0, 0.0], [4.0, 0.0]])  # recon = (2, 0)
        x = [1.0, 0.0]
        plain = localization_measure(x, anchors, sp,
                                     LccConfig(l_alpha=1.0, l_beta=0.0))
        squared = localization_measure(
            x, anchors, sp, LccConfig(l_alpha=1.0, l_beta=0.0,
                                      first_term_squared=True))
        assert float(plain.data) == pytest.approx(1.0)
        assert float(squared.data) == pytest.approx(1.0)
        x2 = [0.5, 0.0]
        plain2 = localization_measure(x2, anchors, sp,
                                      LccConfig(l_alpha=1.0, l_beta=0.0))
        squared2 = localization_measure(
            x2, anchors, sp, LccConfig(l_alpha=1.0, l_beta=0.0,
                                       first_term_squared=True))
        assert float(plain2.data) == pytest.approx(1.5)
        assert float(squared2.data) == pytest.approx(2.25)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            LccConfig(l_alpha=-1.0)


class TestFitAnchors:
    def test_singleton_dataset_reaches_optimum(self):
        fit = fit_anchors(np.array([[0.7, -1.2, 0.4]]), 1, LccConfig(),
                          AnchorFitConfig(iters=300, seed=3))
        assert fit.final_measure < 1e-4
        np.testing.assert_allclose(fit.anchors.points.data,
                                   [[0.7, -1.2, 0.4]], atol=1e-3)

    def test_two_clusters_beat_one_anchor(self):
        rng = np.random.default_rng(5)
        data = np.concatenate([rng.normal(0.0, 0.5, size=(160, 2)),
                               rng.normal(10.0, 0.5, size=(40, 2))])
        fit1 = fit_anchors(data, 1, LccConfig(), AnchorFitConfig(iters=800, seed=0))
        fit2 = fit_anchors(data, 2, LccConfig(), AnchorFitConfig(iters=800, seed=0))
        assert fit2.final_measure < fit1.final_measure

    def test_deterministic_given_seed(self):
        data = np.random.default_rng(16).normal(size=(20, 3))
        a = fit_anchors(data, 2, LccConfig(), AnchorFitConfig(iters=100, seed=4))
        b = fit_anchors(data, 2, LccConfig(), AnchorFitConfig(iters=100, seed=4))
        np.testing.assert_array_equal(a.anchors.points.data, b.anchors.points.data)
        assert a.final_measure == b.final_measure

    def test_gaussian_fallback_when_anchors_exceed_data(self):
        data = np.random.default_rng(17).normal(size=(3, 2))
        fit = fit_anchors(data, 5, LccConfig(), AnchorFitConfig(iters=30, seed=1))
        assert fit.anchors.count == 5

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            fit_anchors(np.zeros((0, 2)), 1)


class TestLipschitzBoundDiag:
    def test_zero_at_anchor(self):
        sp = make_score(2, seed=18)
        x = np.array([1.0, 1.0])
        assert lipschitz_bound_diag(x, AnchorSet([x.copy()]), sp, 1.0, 0.01) == 0.0

    def test_equals_measure(self):
        sp = make_score(3, seed=19)
        anchors = AnchorSet(np.random.default_rng(20).normal(size=(4, 3)))
        x = np.random.default_rng(21).normal(size=3)
        diag = lipschitz_bound_diag(x, anchors, sp, 0.8, 0.05)
        measure = localization_measure(x, anchors, sp,
                                       LccConfig(l_alpha=0.8, l_beta=0.05))
        assert diag == float(measure.data)

    def test_decreases_after_fitting(self):
        rng = np.random.default_rng(22)
        data = np.concatenate([rng.normal(-2.0, 0.3, size=(30, 2)),
                               rng.normal(2.0, 0.3, size=(30, 2))])
        fit = fit_anchors(data, 2, LccConfig(), AnchorFitConfig(iters=400, seed=2))
        before = fit.initial_measure
        after = float(np.mean([lipschitz_bound_diag(x, fit.anchors, fit.score,
                                                    1.0, 0.01) for x in data]))
        assert after < before
