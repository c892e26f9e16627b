"""Coupling blocks, flow losses and the INN / cINN solvers."""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from aembench.autodiff import checkpoint
from aembench.autodiff.gradcheck import gradcheck
from aembench.errors import ConfigError, ShapeError
from aembench.flows import (
    CouplingBlock,
    CouplingFlow,
    FlowConfig,
    cinn_loss,
    coupling_forward,
    coupling_inverse,
    inn_dims,
    inn_loss,
)
from aembench.physics.dataset import generate_dataset
from aembench.solvers import load_solver, make_solver


def _numerical_logdet(fn, x, h=1e-6):
    d = x.size
    jac = np.zeros((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        jac[:, j] = (fn(x + e) - fn(x - e)) / (2 * h)
    return np.linalg.slogdet(jac)[1]


class TestCouplingBlock:
    def test_identity_block_permutes(self, rng):
        block = CouplingBlock(6, hidden=(8,), seed=3).identity()
        x = rng.normal(size=(4, 6))
        y, logdet = coupling_forward(block, x)
        np.testing.assert_array_equal(y.data, x[:, block.permutation])
        np.testing.assert_array_equal(logdet.data, np.zeros(4))
        np.testing.assert_array_equal(coupling_inverse(block, x), x[:, np.argsort(block.permutation)])

    def test_constant_scale_logdet(self, rng):
        block = CouplingBlock(6, hidden=(8,), clamp=None, seed=1).identity()
        block.scale.params["b1"].data[...] = 0.3
        _, logdet = block.forward(rng.normal(size=(5, 6)))
        np.testing.assert_allclose(logdet.data, 3 * 0.3)

    @pytest.mark.parametrize("pass_first", [True, False])
    def test_logdet_matches_jacobian(self, pass_first, rng):
        block = CouplingBlock(6, pass_first=pass_first, hidden=(8, 8), activation="tanh", seed=4)
        x = rng.normal(size=6)
        _, logdet = block.forward(x[None, :])
        numeric = _numerical_logdet(lambda v: block.forward(v[None, :])[0].data[0], x)
        assert abs(logdet.data[0] - numeric) < 1e-6

    def test_conditioned_logdet_matches_jacobian(self, rng):
        flow = CouplingFlow(5, FlowConfig(n_blocks=3, hidden=(8,), activation="tanh", seed=2), cond_dim=3)
        x, c = rng.normal(size=5), rng.normal(size=(1, 3))
        _, logdet = flow.forward(x[None, :], c)
        numeric = _numerical_logdet(lambda v: flow.forward(v[None, :], c)[0].data[0], x)
        assert abs(logdet.data[0] - numeric) < 1e-6

    def test_roundtrip(self, rng):
        block = CouplingBlock(7, hidden=(16,), seed=5)
        x = rng.normal(size=(10, 7))
        y, _ = block.forward(x)
        assert np.max(np.abs(block.inverse(y.data) - x)) < 1e-9

    def test_shape_errors(self, rng):
        block = CouplingBlock(4, hidden=(4,))
        with pytest.raises(ShapeError):
            block.forward(np.zeros((2, 5)))
        cond_block = CouplingBlock(4, cond_dim=2, hidden=(4,))
        with pytest.raises(ShapeError) as err:
            cond_block.forward(np.zeros((2, 4)))
        assert err.value.shapes == [(2, 4)]
        with pytest.raises(ShapeError):
            block.forward(np.zeros((2, 4)), np.zeros((2, 2)))

    def test_too_narrow(self):
        with pytest.raises(ConfigError):
            CouplingBlock(1)

    @pytest.mark.parametrize("dim", [2, 7, 8])
    def test_transformed_coordinates_lead(self, dim):
        block = CouplingBlock(dim, hidden=(4,), seed=9)
        n_trans = block.trans_idx.size
        assert sorted(block.permutation[:n_trans].tolist()) == block.trans_idx.tolist()
        assert sorted(block.permutation[n_trans:].tolist()) == block.pass_idx.tolist()


class TestCouplingFlow:
    @pytest.mark.parametrize("n_blocks", [2, 3, 4, 6])
    @pytest.mark.parametrize("dim", [8, 9])
    def test_every_output_depends_on_trailing_latent(self, n_blocks, dim, rng):
        # inverse of [s, z] with z in the last two columns, as the INN samples
        flow = CouplingFlow(dim, FlowConfig(n_blocks=n_blocks, hidden=(16,), activation="tanh", seed=n_blocks))
        s = np.repeat(rng.normal(size=(1, dim - 2)), 6, axis=0)
        x = flow.inverse(np.hstack([s, rng.normal(size=(6, 2))]))
        assert np.all(np.ptp(x, axis=0) > 1e-6)

    @pytest.mark.parametrize("n_blocks", [1, 2, 4])
    def test_every_output_depends_on_conditioned_latent(self, n_blocks, rng):
        flow = CouplingFlow(2, FlowConfig(n_blocks=n_blocks, hidden=(16,), activation="tanh"), cond_dim=5)
        c = np.repeat(rng.normal(size=(1, 5)), 6, axis=0)
        x = flow.inverse(rng.normal(size=(6, 2)), c)
        assert np.all(np.ptp(x, axis=0) > 1e-6)

    def test_four_block_roundtrip(self, rng):
        flow = CouplingFlow(6, FlowConfig(n_blocks=4, hidden=(16, 16)))
        x = rng.normal(size=(20, 6))
        y, _ = flow.forward(x)
        assert np.max(np.abs(flow.inverse(y.data) - x)) < 1e-8

    def test_conditioned_roundtrip(self, rng):
        flow = CouplingFlow(4, FlowConfig(n_blocks=4, hidden=(16,)), cond_dim=3)
        x, c = rng.normal(size=(8, 4)), rng.normal(size=(8, 3))
        y, _ = flow.forward(x, c)
        assert np.max(np.abs(flow.inverse(y.data, c) - x)) < 1e-8

    def test_identity_flow_is_standard_normal_density(self, rng):
        flow = CouplingFlow(4, FlowConfig(n_blocks=3, hidden=(8,)), cond_dim=2, identity_init=True)
        g, c = rng.normal(size=(6, 4)), rng.normal(size=(6, 2))
        loss = cinn_loss(*flow.forward(g, c)).item()
        nll = -np.mean(multivariate_normal(np.zeros(4), np.eye(4)).logpdf(g))
        assert loss == pytest.approx(nll - 2.0 * np.log(2 * np.pi), abs=1e-12)

    def test_loss_gradients(self, rng):
        flow = CouplingFlow(4, FlowConfig(n_blocks=2, hidden=(6,), activation="tanh"), cond_dim=2)
        g, c = rng.normal(size=(5, 4)), rng.normal(size=(5, 2))
        params = {}
        for name, net in flow.networks().items():
            params.update({f"{name}.{k}": p for k, p in net.params.items()})
        errors = gradcheck(lambda: cinn_loss(*flow.forward(g, c)), params)
        assert max(errors.values()) < 1e-5

    def test_inn_loss_gradients(self, rng):
        flow = CouplingFlow(4, FlowConfig(n_blocks=2, hidden=(6,), activation="tanh"))
        x, s = rng.normal(size=(5, 4)), rng.normal(size=(5, 2))
        params = {}
        for name, net in flow.networks().items():
            params.update({f"{name}.{k}": p for k, p in net.params.items()})

        def loss():
            y, logdet = flow.forward(x)
            return inn_loss(y[:, :2], s, y[:, 2:], logdet, 0.5)

        assert max(gradcheck(loss, params).values()) < 1e-5


class TestLosses:
    def test_inn_perfect_fit(self):
        s = np.array([[0.1, 0.2, 0.3]])
        assert inn_loss(s, s, np.zeros((1, 2)), np.zeros(1), 0.1).item() == 0.0

    def test_inn_unit_latent(self):
        s = np.zeros((1, 3))
        assert inn_loss(s, s, np.ones((1, 5)), np.zeros(1), 0.1).item() == pytest.approx(2.5)

    def test_inn_sigma_scaling(self):
        s_hat, s, z = np.array([[1.0, -2.0]]), np.zeros((1, 2)), np.zeros((1, 1))
        base = inn_loss(s_hat, s, z, np.zeros(1), 0.3).item()
        assert inn_loss(s_hat, s, z, np.zeros(1), 0.6).item() == pytest.approx(base / 4)

    def test_inn_sigma_must_be_positive(self):
        with pytest.raises(ConfigError):
            inn_loss(np.zeros((1, 2)), np.zeros((1, 2)), np.zeros((1, 1)), np.zeros(1), 0.0)

    def test_cinn(self):
        assert cinn_loss(np.zeros((2, 8)), np.zeros(2)).item() == 0.0
        assert cinn_loss(np.ones(8), 0.0).item() == pytest.approx(4.0)
        base = cinn_loss(np.ones((3, 8)), np.zeros(3)).item()
        assert cinn_loss(np.ones((3, 8)), np.full(3, 1.5)).item() == pytest.approx(base - 1.5)

    def test_inn_dims(self):
        assert inn_dims(5, 256) == (5, 256)
        assert inn_dims(5, 256, latent=3) == (3, 254)
        assert inn_dims(14, 2000, pad=1990) == (4, 1990)
        with pytest.raises(ConfigError):
            inn_dims(2, 3, latent=5, pad=1)


class TestFlowSolvers:
    @pytest.mark.parametrize("kind", ["inn", "cinn"])
    def test_proposals_and_checkpoint(self, kind, toy, toy_data, tiny_cfg, tmp_path):
        solver = make_solver(kind, toy, tiny_cfg)
        solver.train(toy_data)
        s = toy_data.test[1][0]
        ps = solver.propose(s, 6, seed=2)
        assert ps.designs.shape == (6, toy.d_g)
        assert np.all(toy.in_bounds(ps.designs))
        unit, _ = solver._propose(solver.spectra.transform(s), 6, np.random.default_rng(2))
        assert np.all(np.ptp(unit, axis=0) > 0)

        path = solver.save(tmp_path / f"{kind}.ibchk")
        np.testing.assert_array_equal(load_solver(path).propose(s, 6, seed=2).designs, ps.designs)
        stored = checkpoint.load(path)["block0.perm"]
        np.testing.assert_array_equal(stored, np.rint(stored))
        assert "tensor block0.perm 1" in path.read_text()

    def test_cinn_is_conditioned(self, toy, toy_data, tiny_cfg):
        solver = make_solver("cinn", toy, tiny_cfg)
        solver.train(toy_data)
        a, b = toy_data.test[1][:2]
        assert not np.array_equal(solver.propose(a, 4, seed=0).designs, solver.propose(b, 4, seed=0).designs)

    def test_cinn_latent_width(self, toy, tiny_cfg):
        with pytest.raises(ConfigError):
            make_solver("cinn", toy, tiny_cfg.model_copy(update={"flow_latent": 3}))

    def test_inn_bad_padding(self, toy, tiny_cfg):
        with pytest.raises(ConfigError):
            make_solver("inn", toy, tiny_cfg.model_copy(update={"flow_latent": 2, "flow_pad": 1}))

    @pytest.mark.slow
    def test_inn_learns_linear_forward(self, linear, tiny_cfg):
        data = generate_dataset(linear, counts=(1000, 200, 0), seed=5)
        cfg = tiny_cfg.model_copy(
            update={"epochs": 300, "batch_size": 64, "lr": 3e-3, "n_blocks": 4, "flow_hidden": [32, 32], "flow_sigma": 0.05}
        )
        solver = make_solver("inn", linear, cfg)
        solver.train(data)
        g, s = data.val
        s_hat = solver.simulate(solver.designs.to_unit(g))
        assert np.mean((s_hat - solver.spectra.transform(s)) ** 2) < 1e-3

    @pytest.mark.slow
    def test_cinn_latents_look_normal(self, toy, tiny_cfg):
        data = generate_dataset(toy, counts=(2000, 500, 0), seed=6)
        cfg = tiny_cfg.model_copy(
            update={"epochs": 150, "batch_size": 128, "lr": 3e-3, "n_blocks": 4, "flow_hidden": [32, 32]}
        )
        solver = make_solver("cinn", toy, cfg)
        solver.train(data)
        g, s = data.val
        z = solver.latents(solver.designs.to_unit(g), solver.spectra.transform(s))
        assert np.all(np.abs(z.mean(axis=0)) < 0.1)
        assert np.all(np.abs(z.var(axis=0) - 1.0) < 0.2)
