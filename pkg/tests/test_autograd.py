"""Reverse-mode differentiation: op gradients, broadcasting, graph mechanics."""

import numpy as np
import pytest

from tgaffinity.nn import Tensor, concat, grad_enabled, log_softmax, no_grad, softmax
from tgaffinity.nn.gradcheck import finite_difference_check


def check_scalar_fn(build, shapes, seed=0, tol=1e-6):
    """Gradcheck a scalar function of freshly drawn parameter tensors."""
    rng = np.random.default_rng(seed)
    params = {
        f"p{i}": Tensor(rng.standard_normal(shape), requires_grad=True)
        for i, shape in enumerate(shapes)
    }

    def loss_fn():
        return build(*[params[f"p{i}"] for i in range(len(shapes))])

    report = finite_difference_check(loss_fn, params, num_probes=40, seed=seed)
    assert report.passed(tol), report.failures
    return report


class TestOpGradients:
    def test_add_sub_neg(self):
        check_scalar_fn(lambda a, b: (a + b - (-a)).sum(), [(3, 2), (3, 2)])

    def test_mul_div(self):
        def build(a, b):
            return (a * b / (b * b + 2.0)).sum()

        check_scalar_fn(build, [(4,), (4,)])

    def test_scalar_mixing(self):
        check_scalar_fn(lambda a: (2.0 * a + 1.0 - a / 4.0).sum(), [(5,)])
        check_scalar_fn(lambda a: (3.0 / (a * a + 1.0)).sum(), [(5,)])
        check_scalar_fn(lambda a: (1.0 - a).sum(), [(5,)])

    def test_matmul(self):
        check_scalar_fn(lambda a, b: (a @ b).sum(), [(3, 4), (4, 2)])

    def test_matmul_requires_2d(self):
        with pytest.raises(ValueError):
            Tensor(np.zeros(3)) @ Tensor(np.zeros(3))

    def test_transpose(self):
        check_scalar_fn(lambda a, b: (a.T @ b).sum(), [(4, 3), (4, 2)])

    def test_getitem_rows_and_slices(self):
        check_scalar_fn(lambda a: (a[1:3, :] * 2.0).sum(), [(4, 3)])
        check_scalar_fn(lambda a: a[0, 1] * 3.0, [(2, 2)])

    def test_getitem_repeated_rows_accumulate(self):
        x = Tensor(np.ones((3, 2)), requires_grad=True)
        loss = (x[0] + x[0] + x[1]).sum()
        loss.backward()
        np.testing.assert_array_equal(x.grad, [[2.0, 2.0], [1.0, 1.0], [0.0, 0.0]])

    def test_sum_axes_and_keepdims(self):
        check_scalar_fn(lambda a: (a.sum(axis=0) * 3.0).sum(), [(3, 4)])
        check_scalar_fn(lambda a: (a.sum(axis=1, keepdims=True) * a).sum(), [(3, 4)])

    def test_mean(self):
        check_scalar_fn(lambda a: a.mean(), [(6,)])
        check_scalar_fn(lambda a: (a.mean(axis=0) * 2.0).sum(), [(3, 4)])

    def test_nonlinearities(self):
        for fn in (
            lambda a: a.sigmoid().sum(),
            lambda a: a.tanh().sum(),
            lambda a: a.exp().sum(),
            lambda a: (a * a + 0.5).log().sum(),
            lambda a: a.cos().sum(),
        ):
            check_scalar_fn(fn, [(5,)])

    def test_relu_away_from_kink(self):
        x = Tensor(np.array([-2.0, -0.5, 0.5, 3.0]), requires_grad=True)
        x.relu().sum().backward()
        np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0, 1.0])

    def test_concat_routes_gradients(self):
        check_scalar_fn(lambda a, b: (concat([a, b], axis=-1) * 2.0).sum(), [(2, 3), (2, 2)])
        check_scalar_fn(lambda a, b: concat([a, b], axis=0).mean(), [(1, 3), (2, 3)])

    def test_softmax_and_log_softmax(self):
        check_scalar_fn(lambda a: (softmax(a, axis=-1) * np.arange(4.0)).sum(), [(2, 4)])
        check_scalar_fn(lambda a: -(log_softmax(a, axis=-1)[:, 0]).sum(), [(3, 4)])

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        probs = softmax(Tensor(rng.standard_normal((5, 7)) * 30.0))
        np.testing.assert_allclose(probs.data.sum(axis=-1), np.ones(5), atol=1e-12)
        assert np.all(np.isfinite(probs.data))


class TestBroadcasting:
    def test_bias_add_sums_over_batch(self):
        b = Tensor(np.zeros(3), requires_grad=True)
        x = Tensor(np.ones((4, 3)))
        ((x + b) * 2.0).sum().backward()
        np.testing.assert_array_equal(b.grad, [8.0, 8.0, 8.0])

    def test_keepdim_axis_broadcast(self):
        a = Tensor(np.ones((3, 1)), requires_grad=True)
        x = Tensor(np.full((3, 4), 2.0))
        (a * x).sum().backward()
        np.testing.assert_array_equal(a.grad, [[8.0], [8.0], [8.0]])

    def test_gradcheck_with_broadcast(self):
        check_scalar_fn(lambda a, b: ((a + b) * (a * b)).sum(), [(3, 4), (4,)])


class TestGraphMechanics:
    def test_reused_node_accumulates(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        y = x * x + x  # dy/dx = 2x + 1
        y.sum().backward()
        np.testing.assert_allclose(x.grad, [7.0])

    def test_backward_requires_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            (x * 2.0).backward()

    def test_deep_chain_does_not_overflow(self):
        # far deeper than the interpreter's recursion limit
        x = Tensor(np.array([1.0]), requires_grad=True)
        y = x
        for _ in range(5000):
            y = y + 0.0001
        y.sum().backward()
        np.testing.assert_allclose(x.grad, [1.0])

    def test_detach_cuts_history(self):
        x = Tensor(np.array([2.0]), requires_grad=True)
        y = (x * 3.0).detach()
        assert not y.requires_grad
        z = Tensor(y.data, requires_grad=True)
        (z * z).sum().backward()
        assert x.grad is None

    def test_no_grad_blocks_graph(self):
        x = Tensor(np.array([2.0]), requires_grad=True)
        with no_grad():
            assert not grad_enabled()
            y = x * 3.0
        assert grad_enabled()
        assert not y.requires_grad
        assert y._parents == ()

    def test_no_grad_restores_on_exception(self):
        with pytest.raises(RuntimeError):
            with no_grad():
                raise RuntimeError("boom")
        assert grad_enabled()

    def test_constant_tensors_collect_no_grad(self):
        x = Tensor(np.ones(3), requires_grad=True)
        c = Tensor(np.ones(3))
        (x * c).sum().backward()
        assert c.grad is None
        np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])

    def test_zero_grad_resets(self):
        x = Tensor(np.array([1.0]), requires_grad=True)
        (x * 2.0).sum().backward()
        x.zero_grad()
        assert x.grad is None


class TestNumpyInterop:
    def test_asarray_returns_data(self):
        x = Tensor(np.array([1.0, 2.0]))
        converted = np.asarray(x)
        assert converted.dtype == np.float64
        np.testing.assert_array_equal(converted, [1.0, 2.0])

    def test_array_priority_keeps_tensor_ops(self):
        x = Tensor(np.ones(2), requires_grad=True)
        y = np.ones(2) + x  # must come back as a Tensor, not an ndarray
        assert isinstance(y, Tensor)
        y.sum().backward()
        np.testing.assert_array_equal(x.grad, [1.0, 1.0])
