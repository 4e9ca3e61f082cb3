"""Parameter store, GRU cell, attention, MLP, encoders, and Adam."""

import numpy as np
import pytest

from tgaffinity.nn import (
    Adam,
    GRUCell,
    MLP,
    MultiHeadAttention,
    NodeEncoder,
    ParamStore,
    Tensor,
    TimeEncoder,
)
from tgaffinity.nn.gradcheck import finite_difference_check


class TestParamStore:
    def test_initialization_depends_only_on_seed_and_name(self):
        a = ParamStore(7).param("layer.w", (3, 4), 0.5)
        b = ParamStore(7).param("layer.w", (3, 4), 0.5)
        np.testing.assert_array_equal(a.data, b.data)

    def test_different_names_differ(self):
        store = ParamStore(0)
        a = store.param("a", (8,), 1.0)
        b = store.param("b", (8,), 1.0)
        assert np.max(np.abs(a.data - b.data)) > 1e-6

    def test_creation_order_is_irrelevant(self):
        first = ParamStore(3)
        first.param("x", (4,), 1.0)
        first.param("y", (4,), 1.0)
        second = ParamStore(3)
        second.param("y", (4,), 1.0)
        second.param("x", (4,), 1.0)
        np.testing.assert_array_equal(first["x"].data, second["x"].data)
        np.testing.assert_array_equal(first["y"].data, second["y"].data)

    def test_same_name_returns_same_tensor(self):
        store = ParamStore(0)
        assert store.param("w", (2,), 1.0) is store.param("w", (2,), 1.0)

    def test_shape_conflict_rejected(self):
        store = ParamStore(0)
        store.param("w", (2,), 1.0)
        with pytest.raises(ValueError, match="exists with shape"):
            store.param("w", (3,), 1.0)

    def test_scale_bounds(self):
        data = ParamStore(0).param("w", (1000,), 0.25).data
        assert np.all(np.abs(data) <= 0.25)

    def test_state_dict_roundtrip(self):
        store = ParamStore(0)
        store.param("w", (2, 2), 1.0)
        state = store.state_dict()
        store["w"].data[:] = 0.0
        store.load_state(state)
        np.testing.assert_array_equal(store["w"].data, state["w"])

    def test_npz_roundtrip(self, tmp_path):
        store = ParamStore(5)
        store.param("alpha", (3,), 1.0)
        store.param("beta", (2, 2), 1.0)
        path = str(tmp_path / "params.npz")
        store.save_npz(path)
        other = ParamStore(99)  # different seed; values come from the file
        other.load_npz(path)
        np.testing.assert_array_equal(other["alpha"].data, store["alpha"].data)
        np.testing.assert_array_equal(other["beta"].data, store["beta"].data)

    def test_zero_grads(self):
        store = ParamStore(0)
        w = store.param("w", (2,), 1.0)
        w.grad = np.ones(2)
        store.zero_grads()
        assert w.grad is None


class TestGRUCell:
    def test_all_zero_input_state_and_params_give_zero(self):
        store = ParamStore(0)
        gru = GRUCell(store, "cell", [("x", 3)], hidden_dim=4)
        for _, tensor in store.items():
            tensor.data[:] = 0.0
        out = gru([Tensor(np.zeros((2, 3)))], Tensor(np.zeros((2, 4))))
        np.testing.assert_array_equal(out.data, np.zeros((2, 4)))

    def test_matches_reference_formula(self):
        store = ParamStore(1)
        gru = GRUCell(store, "cell", [("a", 3), ("b", 2)], hidden_dim=4)
        rng = np.random.default_rng(2)
        xa, xb = rng.standard_normal((5, 3)), rng.standard_normal((5, 2))
        h = rng.standard_normal((5, 4))
        out = gru([Tensor(xa), Tensor(xb)], Tensor(h))

        gi = (
            xa @ store["cell.w_a"].data
            + xb @ store["cell.w_b"].data
            + store["cell.b_input"].data
        )
        gh = h @ store["cell.w_hidden"].data + store["cell.b_hidden"].data

        def sigmoid(v):
            return 1.0 / (1.0 + np.exp(-v))

        reset = sigmoid(gi[:, 0:4] + gh[:, 0:4])
        update = sigmoid(gi[:, 4:8] + gh[:, 4:8])
        candidate = np.tanh(gi[:, 8:12] + reset * gh[:, 8:12])
        expected = (1.0 - update) * candidate + update * h
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_segmented_equals_concatenated_weights(self):
        """Splitting the input weight by segment must not change the math."""
        split_store = ParamStore(0)
        split = GRUCell(split_store, "cell", [("a", 2), ("b", 3)], hidden_dim=3)
        joint_store = ParamStore(0)
        joint = GRUCell(joint_store, "cell", [("all", 5)], hidden_dim=3)
        # overwrite the joint input weight with the stacked split weights
        joint_store["cell.w_all"].data[:] = np.vstack(
            [split_store["cell.w_a"].data, split_store["cell.w_b"].data]
        )
        rng = np.random.default_rng(3)
        xa, xb = rng.standard_normal((4, 2)), rng.standard_normal((4, 3))
        h = rng.standard_normal((4, 3))
        out_split = split([Tensor(xa), Tensor(xb)], Tensor(h))
        out_joint = joint([Tensor(np.concatenate([xa, xb], axis=1))], Tensor(h))
        np.testing.assert_allclose(out_split.data, out_joint.data, atol=1e-12)

    def test_segment_count_validated(self):
        gru = GRUCell(ParamStore(0), "cell", [("a", 2)], hidden_dim=2)
        with pytest.raises(ValueError, match="segments"):
            gru([Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2)))], Tensor(np.zeros((1, 2))))

    def test_gradients(self):
        store = ParamStore(4)
        gru = GRUCell(store, "cell", [("x", 3)], hidden_dim=4)
        rng = np.random.default_rng(5)
        x, h = rng.standard_normal((2, 3)), rng.standard_normal((2, 4))

        def loss_fn():
            return (gru([Tensor(x)], Tensor(h)) * rng_weights).sum()

        rng_weights = rng.standard_normal((2, 4))
        report = finite_difference_check(loss_fn, dict(store.items()), num_probes=60, seed=0)
        assert report.passed(1e-5), report.failures


class TestMultiHeadAttention:
    def make(self, seed=0):
        store = ParamStore(seed)
        att = MultiHeadAttention(store, "att", center_dim=4, neighbor_dim=6, out_dim=4)
        return store, att

    def test_no_neighbors_is_root_projection(self):
        store, att = self.make()
        center = np.random.default_rng(0).standard_normal((1, 4))
        expected = center @ store["att.w_root"].data + store["att.bias"].data
        for neighbors in (None, Tensor(np.zeros((0, 6)))):
            np.testing.assert_allclose(att(Tensor(center), neighbors).data, expected, atol=1e-12)

    def test_neighbor_permutation_invariance(self):
        _, att = self.make(seed=2)
        rng = np.random.default_rng(3)
        center = Tensor(rng.standard_normal((1, 4)))
        neighbors = rng.standard_normal((5, 6))
        base = att(center, Tensor(neighbors)).data
        for _ in range(4):
            perm = rng.permutation(5)
            shuffled = att(center, Tensor(neighbors[perm])).data
            np.testing.assert_allclose(shuffled, base, atol=1e-12)

    def test_output_shape(self):
        _, att = self.make()
        out = att(Tensor(np.zeros((1, 4))), Tensor(np.zeros((3, 6))))
        assert out.shape == (1, 4)

    def test_gradients(self):
        store, att = self.make(seed=6)
        rng = np.random.default_rng(7)
        center = rng.standard_normal((1, 4))
        neighbors = rng.standard_normal((3, 6))
        weights = rng.standard_normal((1, 4))

        def loss_fn():
            return (att(Tensor(center), Tensor(neighbors)) * weights).sum()

        report = finite_difference_check(loss_fn, dict(store.items()), num_probes=60, seed=1)
        assert report.passed(1e-5), report.failures

    def test_head_count_validated(self):
        with pytest.raises(ValueError):
            MultiHeadAttention(ParamStore(0), "att", 2, 2, 2, num_heads=0)


class TestMLP:
    def test_matches_reference_formula(self):
        store = ParamStore(0)
        mlp = MLP(store, "net", 3, 5, 2)
        x = np.random.default_rng(1).standard_normal((4, 3))
        hidden = np.maximum(x @ store["net.w1"].data + store["net.b1"].data, 0.0)
        expected = hidden @ store["net.w2"].data + store["net.b2"].data
        np.testing.assert_allclose(mlp(Tensor(x)).data, expected, atol=1e-12)

    def test_gradients(self):
        store = ParamStore(2)
        mlp = MLP(store, "net", 3, 4, 2)
        x = np.random.default_rng(3).standard_normal((2, 3))

        def loss_fn():
            return (mlp(Tensor(x)) * 0.5).sum()

        report = finite_difference_check(loss_fn, dict(store.items()), num_probes=60, seed=2)
        assert report.passed(1e-5), report.failures


class TestEncoders:
    def test_time_encoder_is_cosine(self):
        store = ParamStore(0)
        enc = TimeEncoder(store, "time", 4)
        out = enc(2.5)
        np.testing.assert_allclose(out.data, np.cos(store["time.freq"].data * 2.5), atol=1e-15)
        np.testing.assert_array_equal(enc(0.0).data, np.ones((1, 4)))

    def test_node_encoder_cosine(self):
        store = ParamStore(0)
        enc = NodeEncoder(store, "node", 3)
        np.testing.assert_allclose(
            enc(2).data, np.cos(store["node.freq"].data * 2.0), atol=1e-15
        )

    def test_node_encoder_zero_mode_creates_no_param(self):
        store = ParamStore(0)
        enc = NodeEncoder(store, "node", 3, mode="zero")
        assert store.names() == []
        out = enc(5)
        np.testing.assert_array_equal(out.data, np.zeros((1, 3)))
        assert not out.requires_grad

    def test_node_encoder_mode_validated(self):
        with pytest.raises(ValueError):
            NodeEncoder(ParamStore(0), "node", 3, mode="identity")

    def test_encoder_gradients(self):
        store = ParamStore(1)
        time_enc = TimeEncoder(store, "time", 4)
        node_enc = NodeEncoder(store, "node", 4)

        def loss_fn():
            return (time_enc(1.3) * 2.0 + node_enc(3) * 0.5).sum()

        report = finite_difference_check(loss_fn, dict(store.items()), num_probes=40, seed=3)
        assert report.passed(1e-5), report.failures


class TestAdam:
    def test_matches_reference_updates(self):
        store = ParamStore(0)
        w = store.param("w", (4,), 1.0)
        optimizer = Adam(store, lr=0.05)
        reference = w.data.copy()
        m = np.zeros(4)
        v = np.zeros(4)
        rng = np.random.default_rng(1)
        for t in range(1, 6):
            grad = rng.standard_normal(4)
            w.grad = grad.copy()
            optimizer.step()
            m = m * 0.9
            m += (1.0 - 0.9) * grad
            v = v * 0.999
            v += (1.0 - 0.999) * grad * grad
            m_hat = m / (1.0 - 0.9 ** t)
            v_hat = v / (1.0 - 0.999 ** t)
            reference -= 0.05 * m_hat / (np.sqrt(v_hat) + 1e-8)
            np.testing.assert_array_equal(w.data, reference)

    def test_none_grad_skipped_entirely(self):
        store = ParamStore(0)
        w = store.param("w", (3,), 1.0)
        before = w.data.copy()
        Adam(store, lr=1.0).step()
        np.testing.assert_array_equal(w.data, before)

    def test_exactly_zero_grad_leaves_bits_unchanged(self):
        store = ParamStore(0)
        w = store.param("w", (3,), 1.0)
        before = w.data.copy()
        optimizer = Adam(store, lr=10.0)
        for _ in range(5):
            w.grad = np.zeros(3)
            optimizer.step()
        assert np.array_equal(
            w.data.view(np.uint64), before.view(np.uint64)
        ), "zero-gradient steps must be bitwise no-ops"

    def test_descends_a_quadratic(self):
        store = ParamStore(0)
        w = store.param("w", (2,), 1.0)
        optimizer = Adam(store, lr=0.1)
        for _ in range(200):
            optimizer.zero_grad()
            loss = (w * w).sum()
            loss.backward()
            optimizer.step()
        assert float((w.data ** 2).sum()) < 1e-4

    def test_lr_validated(self):
        with pytest.raises(ValueError):
            Adam(ParamStore(0), lr=0.0)
