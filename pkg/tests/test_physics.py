"""Forward models: conservation laws and closed-form oracles."""

import numpy as np
import pytest

from aembench.autodiff.nn import Mlp, MlpSpec
from aembench.errors import CheckpointError, ConfigError, DomainError, MissingArtifactError
from aembench.physics import forward_model, get_task, is_surrogate, simulate
from aembench.physics.shell import layered_sphere_cross_section, simulate_shell, sphere_cross_section
from aembench.physics.stack import StackPhysics, simulate_stack, slab_reflectance, stack_rta
from aembench.physics.surrogate import (
    SurrogateModel,
    load_surrogate,
    reference_surrogate,
    save_surrogate,
    simulate_surrogate,
    surrogate_task,
)
from aembench.physics.tasks import TaskSpec
from aembench.physics.toy import LINEAR_MAP, simulate_linear, simulate_toy


class TestTasks:
    @pytest.mark.parametrize(
        "name, dims",
        [("stack", (5, 256)), ("shell", (8, 201)), ("adm-surrogate", (14, 2000)), ("toy", (2, 32))],
    )
    def test_builtin_dimensions(self, name, dims):
        task = get_task(name)
        assert (task.d_g, task.d_s) == dims
        np.testing.assert_array_equal(task.mu_g, (task.lo + task.hi) / 2)
        np.testing.assert_array_equal(task.r_g, task.hi - task.lo)

    def test_unknown_task(self):
        with pytest.raises(ConfigError):
            get_task("metasurface")

    def test_bounds_must_be_ordered(self):
        with pytest.raises(ValueError):
            TaskSpec(name="bad", d_g=1, d_s=2, lower=(1.0,), upper=(0.0,), grid=(0.0, 1.0))

    def test_grid_must_be_monotone(self):
        with pytest.raises(ValueError):
            TaskSpec(name="bad", d_g=1, d_s=3, lower=(0.0,), upper=(1.0,), grid=(0.0, 2.0, 1.0))

    def test_surrogate_detection(self):
        assert is_surrogate(get_task("adm-surrogate"))
        assert not is_surrogate(get_task("stack"))


class TestStack:
    def test_conservation(self, rng):
        task = get_task("stack")
        for _ in range(5):
            g = task.lo + task.r_g * rng.random(task.d_g)
            R, T, A = stack_rta(g, task.wavelengths)
            np.testing.assert_allclose(R + T + A, 1.0, atol=1e-10)
            assert A.min() >= 0.0 and A.max() <= 1.0
            assert R.min() >= 0.0 and T.min() >= 0.0

    def test_no_loss_no_absorption(self):
        task = get_task("stack")
        _, _, A = stack_rta(np.full(5, 60.0), task.wavelengths, StackPhysics(conductivity_scale=0.0))
        np.testing.assert_allclose(A, 0.0, atol=1e-12)

    def test_single_slab_matches_airy(self):
        wl = np.linspace(240.0, 2000.0, 256)
        physics = StackPhysics(graphene=False, n_dielectric=2.0, n_incident=1.0, n_substrate=1.45)
        R, _, _ = stack_rta([73.0], wl, physics)
        np.testing.assert_allclose(R, slab_reflectance(1.0, 2.0, 1.45, 73.0, wl), atol=1e-10)

    def test_graphene_absorbs(self):
        assert simulate_stack(np.full(5, 50.0)).max() > 0.01

    def test_out_of_bounds(self):
        with pytest.raises(DomainError):
            simulate_stack(np.array([10.0, 50.0, 50.0, 50.0, 50.0]))

    def test_small_perturbation(self):
        g = np.array([30.0, 45.0, 60.0, 75.0, 90.0])
        a = simulate_stack(g)
        b = simulate_stack(g + np.array([1e-9, 0, 0, 0, 0]))
        assert np.max(np.abs(a - b)) < 1e-6


class TestShell:
    def test_no_contrast_is_invisible(self):
        wl = np.linspace(400.0, 800.0, 21)
        sigma = layered_sphere_cross_section([50.0, 100.0, 150.0], [1.33, 1.33, 1.33], wl, n_host=1.33)
        np.testing.assert_allclose(sigma, 0.0, atol=1e-9)

    def test_uniform_layers_match_homogeneous_sphere(self):
        wl = np.linspace(400.0, 800.0, 41)
        radii = np.cumsum([40.0, 35.0, 50.0, 30.0])
        layered = layered_sphere_cross_section(radii, [2.5] * 4, wl, n_host=1.0)
        oracle = sphere_cross_section(radii[-1], 2.5, wl, n_host=1.0)
        np.testing.assert_allclose(layered, oracle, rtol=1e-8)

    def test_small_sphere_follows_rayleigh(self):
        wl = np.linspace(400.0, 800.0, 201)
        sigma = layered_sphere_cross_section([1.0, 2.0, 3.0], [2.5, 1.45, 2.5], wl)
        # best fit of sigma = c / wl^4
        c = np.exp(np.mean(np.log(sigma * wl**4)))
        np.testing.assert_allclose(sigma, c / wl**4, rtol=0.02)

    def test_full_task(self):
        task = get_task("shell")
        s = simulate_shell(np.full(8, 50.0))
        assert s.shape == (task.d_s,)
        assert np.all(np.isfinite(s)) and np.all(s > 0)

    def test_radii_must_increase(self):
        with pytest.raises(DomainError):
            layered_sphere_cross_section([50.0, 40.0], [2.5, 1.45], np.array([500.0]))

    def test_out_of_bounds(self):
        with pytest.raises(DomainError):
            simulate_shell(np.full(8, 80.0))


class TestToy:
    def test_origin_is_flat(self, toy):
        np.testing.assert_array_equal(simulate_toy(np.zeros(2)), np.zeros(toy.d_s))

    def test_radial_symmetry(self):
        g = np.array([0.3, -0.7])
        np.testing.assert_array_equal(simulate_toy(g), simulate_toy(-g))
        np.testing.assert_array_equal(simulate_toy(np.array([0.5, 0.0])), simulate_toy(np.array([0.0, 0.5])))

    def test_out_of_bounds(self):
        with pytest.raises(DomainError):
            simulate_toy(np.array([1.5, 0.0]))

    def test_linear(self):
        g = np.array([0.1, -0.2, 0.3])
        np.testing.assert_allclose(simulate_linear(g), LINEAR_MAP @ g)

    def test_batched_simulate_matches_rows(self, toy, rng):
        g = rng.uniform(-1, 1, size=(6, 2))
        np.testing.assert_array_equal(simulate(toy, g), np.stack([forward_model(toy)(row) for row in g]))

    def test_empty_batch(self, toy):
        assert simulate(toy, np.zeros((0, 2))).shape == (0, toy.d_s)


def _hand_surrogate(toy):
    spec = MlpSpec(widths=(2, 1, toy.d_s), activations=("tanh", "linear"), batchnorm=(False, False))
    net = Mlp(spec)
    net.params["W0"].data[...] = [[0.5], [-1.0]]
    net.params["b0"].data[...] = [0.25]
    net.params["W1"].data[...] = np.linspace(-1.0, 1.0, toy.d_s)[None, :]
    net.params["b1"].data[...] = 0.1
    return SurrogateModel(net, toy, 0.0, 1.0, 0.0, 1.0)


class TestSurrogate:
    def test_zero_weights_give_bias(self, toy, tmp_path):
        net = Mlp(MlpSpec.build(2, [4], toy.d_s, "tanh", batchnorm=False)).zero_last_layer()
        bias = np.linspace(0.0, 1.0, toy.d_s)
        net.params["b1"].data[...] = bias
        path = save_surrogate(tmp_path / "zero.ibchk", SurrogateModel(net, toy, 0.0, 1.0, 0.0, 1.0))
        for g in ([0.0, 0.0], [0.9, -0.4]):
            np.testing.assert_array_equal(simulate_surrogate(np.array(g), path), bias)

    def test_hand_built_chain(self, toy, tmp_path):
        path = save_surrogate(tmp_path / "hand.ibchk", _hand_surrogate(toy))
        g = np.array([0.4, 0.2])
        hidden = np.tanh(0.5 * 0.4 - 1.0 * 0.2 + 0.25)
        expected = hidden * np.linspace(-1.0, 1.0, toy.d_s) + 0.1
        np.testing.assert_allclose(simulate_surrogate(g, path), expected, rtol=1e-12, atol=1e-15)

    def test_deterministic(self, toy, tmp_path):
        path = save_surrogate(tmp_path / "hand.ibchk", _hand_surrogate(toy))
        g = np.array([-0.3, 0.8])
        assert simulate_surrogate(g, path).tobytes() == simulate_surrogate(g, path).tobytes()

    def test_task_from_checkpoint(self, toy, tmp_path):
        path = save_surrogate(tmp_path / "hand.ibchk", _hand_surrogate(toy))
        task = surrogate_task(path)
        assert (task.d_g, task.d_s) == (2, toy.d_s)
        assert is_surrogate(task)
        assert simulate(task, np.zeros((3, 2))).shape == (3, toy.d_s)

    def test_shape_mismatch(self, toy, tmp_path):
        path = save_surrogate(tmp_path / "hand.ibchk", _hand_surrogate(toy))
        with pytest.raises(CheckpointError):
            simulate_surrogate(np.zeros(5), path, get_task("stack"))

    def test_width_mismatch_on_build(self, toy):
        net = Mlp(MlpSpec.build(3, [4], toy.d_s))
        with pytest.raises(CheckpointError):
            SurrogateModel(net, toy, 0.0, 1.0, 0.0, 1.0)

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            load_surrogate(tmp_path / "nothing.ibchk")

    def test_reference_adm_model(self):
        task = get_task("adm-surrogate")
        model = reference_surrogate(task, seed=1, hidden=(8,))
        s = model.predict(np.zeros((2, 14)))
        assert s.shape == (2, 2000)
        np.testing.assert_array_equal(s[0], s[1])
