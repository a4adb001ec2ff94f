import numpy as np
import pytest

from refnet import autodiff as ad
from refnet.autodiff import Tensor, no_grad
from refnet.params import (Optimizer, OptimizerConfig, ParamStore, backward,
                           clip_gradient_norm, clip_gradient_value,
                           finite_diff_grad, grad_global_norm, optimizer_step,
                           relative_error)


class TestBackward:
    def test_sum_of_parameter(self):
        ps = ParamStore()
        ps.add("p", [1.0, 2.0], "encoder")
        grads = backward(ad.sum_(ps["p"]), ps)
        np.testing.assert_array_equal(grads["p"], [1.0, 1.0])

    def test_squared_norm(self):
        ps = ParamStore()
        ps.add("p", [3.0, 4.0], "encoder")
        grads = backward(ad.sum_(ad.square(ps["p"])), ps)
        np.testing.assert_array_equal(grads["p"], [6.0, 8.0])

    def test_non_scalar_loss_rejected(self):
        ps = ParamStore()
        ps.add("p", [1.0, 2.0], "encoder")
        with pytest.raises(ValueError, match="scalar"):
            backward(ps["p"] * 2.0, ps)

    def test_detached_parameter_rejected(self):
        ps = ParamStore()
        ps.add("p", [1.0], "encoder")
        loss = ad.sum_(ad.square(Tensor([2.0], requires_grad=True)))
        with pytest.raises(ValueError, match="participates"):
            backward(loss, ps)

    def test_three_layer_composition_matches_oracle(self):
        """tanh/affine/softmax stack against central differences."""
        for seed in range(5):
            rng = np.random.default_rng(seed)
            ps = ParamStore()
            ps.add("W1", rng.normal(size=(3, 5)), "encoder")
            ps.add("b1", rng.normal(size=5), "encoder")
            ps.add("W2", rng.normal(size=(5, 4)), "encoder")
            ps.add("W3", rng.normal(size=(4, 2)), "encoder")
            x = Tensor(rng.normal(size=(2, 3)))
            w = rng.normal(size=(2, 2))

            def f(p):
                h1 = ad.tanh(ad.matmul(x, p["W1"]) + p["b1"])
                h2 = ad.tanh(ad.matmul(h1, p["W2"]))
                out = ad.softmax(ad.matmul(h2, p["W3"]), axis=1)
                return ad.sum_(out * w)

            analytic = backward(f(ps), ps)
            oracle = finite_diff_grad(f, ps, step=1e-4)
            for name in analytic:
                assert relative_error(analytic[name], oracle[name]) < 1e-4


class TestFiniteDiff:
    def test_quadratic(self):
        ps = ParamStore()
        ps.add("p", 2.0, "encoder")
        grads = finite_diff_grad(lambda p: ad.square(p["p"]), ps, step=1e-4)
        assert abs(grads["p"] - 4.0) < 1e-6

    def test_constant_function(self):
        ps = ParamStore()
        ps.add("p", [1.0, -2.0, 3.0], "encoder")
        grads = finite_diff_grad(lambda p: Tensor(7.0), ps, step=1e-4)
        np.testing.assert_array_equal(grads["p"], np.zeros(3))

    @pytest.mark.filterwarnings("ignore:invalid value encountered")
    @pytest.mark.filterwarnings("ignore:divide by zero encountered")
    def test_nonfinite_objective_reported(self):
        ps = ParamStore()
        ps.add("p", 0.5, "encoder")
        with pytest.raises(FloatingPointError):
            finite_diff_grad(lambda p: ad.log(p["p"] - 0.5), ps, step=1e-4)

    def test_bad_step_rejected(self):
        ps = ParamStore()
        ps.add("p", 1.0, "encoder")
        with pytest.raises(ValueError):
            finite_diff_grad(lambda p: ad.square(p["p"]), ps, step=0.0)


class TestClipping:
    def test_forced_scaling(self):
        out = clip_gradient_norm({"g": np.array([3.0, 4.0])}, 1.0)
        np.testing.assert_allclose(out["g"], [0.6, 0.8])

    def test_small_gradient_unchanged(self):
        grads = {"g": np.array([0.1, 0.2])}
        out = clip_gradient_norm(grads, 1.0)
        np.testing.assert_array_equal(out["g"], grads["g"])

    def test_global_norm_over_tensors(self):
        out = clip_gradient_norm({"a": np.array([3.0, 0.0]),
                                  "b": np.array([0.0, 4.0])}, 1.0)
        np.testing.assert_allclose(out["a"], [0.6, 0.0])
        np.testing.assert_allclose(out["b"], [0.0, 0.8])

    def test_norm_bound_and_direction(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            grads = {f"g{i}": rng.normal(size=rng.integers(1, 6))
                     for i in range(3)}
            out = clip_gradient_norm(grads, 0.5)
            assert grad_global_norm(out) <= 0.5 + 1e-12
            flat_in = np.concatenate([grads[k].ravel() for k in sorted(grads)])
            flat_out = np.concatenate([out[k].ravel() for k in sorted(out)])
            cos = flat_in @ flat_out / (np.linalg.norm(flat_in)
                                        * np.linalg.norm(flat_out))
            assert abs(cos - 1.0) < 1e-12

    def test_value_mode(self):
        out = clip_gradient_value({"g": np.array([-3.0, 0.5])}, 1.0)
        np.testing.assert_array_equal(out["g"], [-1.0, 0.5])


class TestDropout:
    def test_rate_zero_identity(self):
        x = Tensor([1.0, 2.0])
        assert ad.dropout(x, 0.0, training=True,
                          rng=np.random.default_rng(0)) is x

    def test_eval_mode_identity(self):
        x = Tensor([1.0, 2.0])
        assert ad.dropout(x, 0.9, training=False) is x

    def test_inverted_scaling_preserves_mean(self):
        rng = np.random.default_rng(7)
        x = Tensor(np.ones(100_000))
        out = ad.dropout(x, 0.5, training=True, rng=rng)
        assert abs(out.data.mean() - 1.0) < 0.02

    def test_bad_rate_rejected(self):
        with pytest.raises(ValueError):
            ad.dropout(Tensor([1.0]), 1.0, training=True,
                       rng=np.random.default_rng(0))


class TestOptimizer:
    def test_sgd_update(self):
        ps = ParamStore()
        ps.add("p", 1.0, "encoder")
        opt = Optimizer(OptimizerConfig(kind="sgd", lr=0.1))
        optimizer_step(ps, {"p": np.array(2.0)}, opt)
        assert ps["p"].data == pytest.approx(0.8)

    def test_frozen_parameter_untouched(self):
        ps = ParamStore()
        ps.add("p", 1.0, "encoder")
        ps.freeze("encoder")
        opt = Optimizer(OptimizerConfig(kind="sgd", lr=0.1))
        opt.step(ps, {"p": np.array(2.0)})
        assert ps["p"].data == 1.0

    def test_all_frozen_step_is_identity(self):
        ps = ParamStore()
        ps.add("a", [1.0, 2.0], "encoder")
        ps.add("b", [[3.0]], "decoder")
        ps.freeze("encoder", "decoder")
        before = ps.snapshot()
        loss = ad.sum_(ps["a"]) + ad.sum_(ps["b"])
        grads = backward(loss, ps)
        assert grads == {}
        Optimizer(OptimizerConfig(kind="adam")).step(ps, grads)
        for name, arr in before.items():
            np.testing.assert_array_equal(ps[name].data, arr)

    def test_sgd_converges_on_quadratic(self):
        ps = ParamStore()
        ps.add("p", 1.0, "encoder")
        opt = Optimizer(OptimizerConfig(kind="sgd", lr=0.1))
        for _ in range(50):
            grads = backward(ad.square(ps["p"]), ps)
            opt.step(ps, grads)
        assert abs(float(ps["p"].data)) < 1e-3

    def test_shape_mismatch_rejected(self):
        ps = ParamStore()
        ps.add("p", [1.0, 2.0], "encoder")
        opt = Optimizer(OptimizerConfig(kind="sgd"))
        with pytest.raises(ValueError, match="shape"):
            opt.step(ps, {"p": np.zeros(3)})


class TestParamStore:
    def test_duplicate_names_rejected(self):
        ps = ParamStore()
        ps.add("p", 1.0, "encoder")
        with pytest.raises(ValueError, match="duplicate"):
            ps.add("p", 2.0, "decoder")

    def test_freeze_controls_gradients(self):
        ps = ParamStore()
        ps.add("a", [1.0], "encoder")
        ps.add("b", [1.0], "decoder")
        ps.freeze("encoder")
        grads = backward(ad.sum_(ps["a"] * 1.0) + ad.sum_(ps["b"]), ps)
        assert set(grads) == {"b"}
        ps.unfreeze("encoder")
        grads = backward(ad.sum_(ps["a"]) + ad.sum_(ps["b"]), ps)
        assert set(grads) == {"a", "b"}

    def test_group_digest_changes_with_values(self):
        ps = ParamStore()
        ps.add("a", [1.0], "encoder")
        before = ps.group_digest("encoder")
        ps["a"].data[0] = 2.0
        assert ps.group_digest("encoder") != before


class TestDeterminism:
    def test_forward_deterministic_given_seed(self):
        def run():
            rng = np.random.default_rng(123)
            x = Tensor(rng.normal(size=(4, 3)))
            w = Tensor(rng.normal(size=(3, 2)))
            out = ad.dropout(ad.tanh(ad.matmul(x, w)), 0.3, training=True,
                             rng=np.random.default_rng(5))
            return out.data.copy()

        np.testing.assert_array_equal(run(), run())

    def test_no_grad_blocks_tape(self):
        ps = ParamStore()
        ps.add("p", [1.0, 2.0], "encoder")
        with no_grad():
            loss = ad.sum_(ad.square(ps["p"]))
        assert loss.parents == ()
        assert not loss.requires_grad
