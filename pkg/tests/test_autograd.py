"""Backward-pass semantics and the finite-difference checker itself."""

import numpy as np
import pytest

import evtrack.tensor as T
from evtrack.errors import ContractError, GradCheckError
from evtrack.gradcheck import grad_check
from evtrack.tensor import Tensor, backward


class TestBackwardBasics:
    def test_sum_gives_ones(self):
        x = Tensor(np.random.default_rng(0).standard_normal((3, 4)),
                   requires_grad=True)
        backward(T.tsum(x))
        assert np.array_equal(x.grad, np.ones((3, 4), dtype=np.float32))

    def test_quadratic_gives_2x(self):
        x = Tensor(np.random.default_rng(1).standard_normal(5),
                   requires_grad=True, dtype=np.float64)
        backward(T.tsum(T.mul(x, x)))
        assert np.allclose(x.grad, 2 * x.data, atol=1e-12)

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ContractError, match="0-d"):
            backward(T.mul(x, x))

    def test_fanout_accumulates(self):
        x = Tensor(np.array([3.0]), requires_grad=True, dtype=np.float64)
        y = T.add(x, x)            # dy/dx = 2
        backward(T.tsum(T.mul(y, y)))  # d(4x^2)/dx = 8x
        assert np.allclose(x.grad, 8 * x.data)

    def test_grad_accumulates_across_calls(self):
        x = Tensor(np.ones(3), requires_grad=True)
        backward(T.tsum(x))
        backward(T.tsum(x))
        assert np.array_equal(x.grad, 2 * np.ones(3, dtype=np.float32))

    def test_no_grad_on_detached(self):
        x = Tensor(np.ones(3), requires_grad=True)
        d = x.detach()
        out = T.tsum(T.mul(T.as_tensor(d), Tensor(np.ones(3), requires_grad=True)))
        backward(out)
        assert x.grad is None

    def test_split_pieces_route_back(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True, dtype=np.float64)
        a, b = T.split(x, [1, 2], axis=1)
        backward(T.add(T.tsum(T.mul_scalar(a, 2.0)), T.tsum(b)))
        assert np.array_equal(x.grad, [[2, 1, 1], [2, 1, 1]])

    def test_take_scatters_back(self):
        x = Tensor(np.arange(8.0), requires_grad=True, dtype=np.float64)
        y = T.take(x, np.array([0, 3, 3]), axis=0)
        backward(T.tsum(y))
        assert np.array_equal(x.grad, [1, 0, 0, 2, 0, 0, 0, 0])

    def test_maxpool_routes_to_argmax_only(self):
        x = Tensor(np.array([[[[1.0, 2.0], [4.0, 3.0]]]]), requires_grad=True,
                   dtype=np.float64)
        backward(T.tsum(T.maxpool2d(x, 2, stride=1)))
        assert np.array_equal(x.grad, [[[[0, 0], [1, 0]]]])

    def test_maxpool_tie_first_rowmajor_cell(self):
        x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True, dtype=np.float64)
        backward(T.tsum(T.maxpool2d(x, 2, stride=1)))
        assert np.array_equal(x.grad, [[[[1, 0], [0, 0]]]])

    def test_avgpool_distributes_uniformly(self):
        x = Tensor(np.zeros((1, 1, 2, 2)), requires_grad=True, dtype=np.float64)
        backward(T.tsum(T.avgpool2d(x, 2, stride=1)))
        assert np.allclose(x.grad, 0.25)


class TestGradCheck:
    def test_matmul_small(self):
        rng = np.random.default_rng(2)
        a = Tensor(rng.standard_normal((3, 3)), requires_grad=True, dtype=np.float64)
        b = Tensor(rng.standard_normal((3, 3)), requires_grad=True, dtype=np.float64)
        err = grad_check(lambda x, y: T.tsum(T.matmul(x, y)), [a, b])
        assert err <= 1e-6

    def test_requires_float64(self):
        x = Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
        with pytest.raises(ContractError, match="float64"):
            grad_check(lambda t: T.tsum(t), [x])

    def test_non_finite_reported_with_coordinate(self):
        x = Tensor(np.array([1.0, -1.0]), requires_grad=True, dtype=np.float64)

        def fn(t):
            return T.tsum(T.tlog(t))  # log(-1) -> nan

        with pytest.raises(GradCheckError):
            grad_check(fn, [x])

    def test_detects_wrong_gradient(self):
        # a deliberately broken op: forward x^2, backward claims 3x
        def broken(t):
            out = T.mul(t, t)
            orig = out._backward
            out._backward = lambda g: (g * 3.0 * t.data,)
            return T.tsum(out)

        x = Tensor(np.array([1.0, 2.0]), requires_grad=True, dtype=np.float64)
        err = grad_check(broken, [x])
        assert err > 0.3
