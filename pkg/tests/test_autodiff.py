"""Tensor ops, backward pass, MLPs and batchnorm."""

import numpy as np
import pytest

from aembench.autodiff import tensor as ad
from aembench.autodiff.gradcheck import gradcheck, numerical_gradient, relative_error
from aembench.autodiff.nn import Mlp, MlpSpec, mlp_apply
from aembench.autodiff.tensor import Tensor, forward_graph, parameter
from aembench.errors import ConfigError, ShapeError


class TestForwardGraph:
    def test_identity_matmul(self):
        out = forward_graph([np.eye(2), [[3.0], [-4.0]]], [("matmul", [0, 1])])
        np.testing.assert_array_equal(out.data, [[3.0], [-4.0]])

    def test_relu(self):
        out = forward_graph([[-1.0, 0.0, 2.0]], [("relu", [0])])
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])

    def test_mean_of_square(self):
        out = forward_graph([[1.0, 3.0]], [("square", [0]), ("mean", [1])])
        assert out.item() == 5.0

    def test_concat_and_slice(self):
        program = [("concat", [0, 1], {"axis": 0}), ("slice", [2, slice(1, 3)])]
        out = forward_graph([[1.0, 2.0], [3.0]], program)
        np.testing.assert_array_equal(out.data, [2.0, 3.0])

    def test_shape_mismatch_names_op(self):
        with pytest.raises(ShapeError) as err:
            forward_graph([np.ones((2, 3)), np.ones((2, 3))], [("matmul", [0, 1])])
        assert "matmul" in str(err.value)
        assert (2, 3) in err.value.shapes

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            forward_graph([[1.0]], [("conv", [0])])


class TestBackward:
    def test_square(self):
        x = parameter(3.0)
        (x * x).backward()
        assert x.grad == pytest.approx(6.0)

    def test_product(self):
        x, y = parameter(2.0), parameter(5.0)
        (x * y).backward()
        assert (x.grad, y.grad) == (pytest.approx(5.0), pytest.approx(2.0))

    def test_non_scalar_loss(self):
        x = parameter([1.0, 2.0])
        with pytest.raises(ShapeError):
            (x * 2.0).backward()

    def test_gradients_are_overwritten(self):
        x = parameter(3.0)
        for _ in range(3):
            ad.square(x).backward()
        assert x.grad == pytest.approx(6.0)

    def test_broadcast_add_reduces_gradient(self):
        x = parameter(np.ones((4, 3)))
        b = parameter(np.zeros(3))
        ad.sum_(x + b).backward()
        np.testing.assert_array_equal(b.grad, [4.0, 4.0, 4.0])

    def test_ndarray_on_the_left(self):
        x = parameter([1.0, 2.0])
        loss = ad.sum_(np.array([3.0, 4.0]) - x)
        assert isinstance(loss, Tensor)
        loss.backward()
        np.testing.assert_array_equal(x.grad, [-1.0, -1.0])

    @pytest.mark.parametrize(
        "op",
        [ad.tanh, ad.exp, ad.square, ad.softplus, lambda t: ad.log(ad.exp(t) + 1.0), lambda t: ad.sqrt(ad.square(t) + 1.0)],
    )
    def test_unary_ops_match_finite_differences(self, op, rng):
        x = parameter(rng.normal(size=(3, 4)))
        errors = gradcheck(lambda: ad.sum_(op(x) * np.arange(12.0).reshape(3, 4)), {"x": x})
        assert errors["x"] < 1e-6

    def test_reductions_and_structure(self, rng):
        a = parameter(rng.normal(size=(3, 4)))
        b = parameter(rng.normal(size=(4, 2)))

        def loss():
            h = ad.concat([a @ b, a[:, [0, 2]]], axis=-1)
            h = ad.reshape(h, (2, 6))
            return ad.mean(ad.logsumexp(h, axis=-1)) + ad.sum_(ad.mean(ad.square(h), axis=0))

        errors = gradcheck(loss, {"a": a, "b": b})
        assert max(errors.values()) < 1e-6

    def test_fancy_index_repeats_accumulate(self):
        x = parameter([1.0, 2.0, 3.0])
        ad.sum_(x[[0, 0, 2]]).backward()
        np.testing.assert_array_equal(x.grad, [2.0, 0.0, 1.0])

    def test_item_requires_scalar(self):
        with pytest.raises(ShapeError):
            Tensor([1.0, 2.0]).item()


def _random_mlp(rng, seed):
    depth = int(rng.integers(1, 4))
    widths = [int(w) for w in rng.integers(1, 9, size=depth + 1)]
    # relu kinks make central differences unreliable at this tolerance
    acts = tuple(str(a) for a in rng.choice(["tanh", "linear"], size=depth))
    bn = tuple(bool(b) for b in rng.integers(0, 2, size=depth))
    return Mlp(MlpSpec(widths=tuple(widths), activations=acts, batchnorm=bn, seed=seed))


class TestMlpGradients:
    def test_random_mlps_match_finite_differences(self, rng):
        for seed in range(10):
            net = _random_mlp(rng, seed)
            x = rng.normal(size=(5, net.spec.widths[0]))
            errors = gradcheck(lambda: ad.mean(ad.square(net(x, mode="train"))), net.params)
            assert max(errors.values()) < 1e-5, (seed, net.spec, errors)

    @pytest.mark.slow
    def test_fifty_mlps_up_to_32_wide(self, rng):
        for seed in range(50):
            depth = int(rng.integers(1, 4))
            widths = tuple(int(w) for w in rng.integers(1, 33, size=depth + 1))
            net = Mlp(MlpSpec.build(widths[0], widths[1:-1], widths[-1], "tanh", batchnorm=False, seed=seed))
            x = rng.normal(size=(4, widths[0]))
            errors = gradcheck(lambda: ad.sum_(net(x)), net.params)
            assert max(errors.values()) < 1e-5

    def test_small_relu_network(self, rng):
        net = Mlp(MlpSpec.build(3, [4], 1, "relu", batchnorm=False, seed=2))
        x = rng.normal(size=(3, 3))
        errors = gradcheck(lambda: ad.sum_(net(x)), net.params)
        assert max(errors.values()) < 1e-5

    def test_input_gradient(self, rng):
        net = Mlp(MlpSpec.build(3, [6], 2, "tanh", batchnorm=False, seed=1))
        x = parameter(rng.normal(size=(4, 3)))
        ad.sum_(net(x)).backward()
        numeric = numerical_gradient(lambda: float(net.predict(x.data).sum()), x.data)
        assert relative_error(x.grad, numeric) < 1e-6


class TestMlp:
    def test_zero_weights_give_bias(self):
        spec = MlpSpec(widths=(3, 2), activations=("linear",), batchnorm=(False,))
        net = Mlp(spec).zero_last_layer()
        net.params["b0"].data[...] = [0.5, -1.5]
        np.testing.assert_array_equal(net.predict(np.random.default_rng(0).normal(size=(4, 3))), [[0.5, -1.5]] * 4)

    def test_hand_evaluated_layer(self):
        spec = MlpSpec(widths=(1, 1), activations=("relu",), batchnorm=(False,))
        params = {"W0": parameter([[2.0]]), "b0": parameter([1.0])}
        np.testing.assert_array_equal(mlp_apply(spec, params, np.array([[3.0]])).data, [[7.0]])

    def test_train_batchnorm_normalizes(self, rng):
        spec = MlpSpec(widths=(3, 5), activations=("linear",), batchnorm=(True,))
        net = Mlp(spec)
        out = net(rng.normal(3.0, 2.0, size=(64, 3)), mode="train").data
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=0), 1.0, atol=1e-3)

    def test_batchnorm_running_stats(self, rng):
        net = Mlp(MlpSpec(widths=(2, 2), activations=("linear",), batchnorm=(True,)))
        net(rng.normal(size=(8, 2)), mode="train")
        assert not np.allclose(net.buffers["running_mean0"], 0.0)

    def test_batch_of_one_in_train_mode(self):
        net = Mlp(MlpSpec.build(2, [4], 1, batchnorm=True))
        with pytest.raises(ShapeError):
            net(np.ones((1, 2)), mode="train")
        assert net(np.ones((1, 2)), mode="eval").shape == (1, 1)

    def test_predict_matches_graph(self, rng):
        net = Mlp(MlpSpec.build(4, [8, 8], 3, "relu", batchnorm=True, seed=5))
        net(rng.normal(size=(16, 4)), mode="train")
        x = rng.normal(size=(6, 4))
        np.testing.assert_allclose(net.predict(x), net(x).data, rtol=1e-13, atol=1e-13)

    def test_input_width_checked(self):
        net = Mlp(MlpSpec.build(4, [8], 3))
        with pytest.raises(ShapeError):
            net.predict(np.ones((2, 5)))

    def test_seeded_init_is_reproducible(self):
        a = Mlp(MlpSpec.build(4, [8], 3, seed=9))
        b = Mlp(MlpSpec.build(4, [8], 3, seed=9))
        assert a.fingerprint() == b.fingerprint()
        assert a.fingerprint() != Mlp(MlpSpec.build(4, [8], 3, seed=10)).fingerprint()

    def test_freeze_stops_gradients(self, rng):
        net = Mlp(MlpSpec.build(2, [4], 1, batchnorm=False)).freeze()
        x = parameter(rng.normal(size=(3, 2)))
        ad.sum_(net(x, mode="train")).backward()
        assert x.grad is not None
        assert all(not p.requires_grad for p in net.params.values())

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"widths": (3,), "activations": (), "batchnorm": ()},
            {"widths": (3, 0), "activations": ("relu",), "batchnorm": (False,)},
            {"widths": (3, 2), "activations": ("gelu",), "batchnorm": (False,)},
            {"widths": (3, 2), "activations": ("relu", "relu"), "batchnorm": (False,)},
        ],
    )
    def test_invalid_specs(self, kwargs):
        with pytest.raises(ConfigError):
            MlpSpec(**kwargs)

    def test_parameter_count(self):
        net = Mlp(MlpSpec.build(3, [4], 2, batchnorm=True))
        # W0 12 + b0 4 + gamma/beta 8 + W1 8 + b1 2
        assert net.n_parameters() == 34
