"""Backend equivalence for the pooling kernels (compiled vs numpy)."""

import numpy as np
import pytest

from evtrack.kernels import _pool_np

try:
    from evtrack.kernels import _pool_ext
except ImportError:
    _pool_ext = None

needs_ext = pytest.mark.skipif(_pool_ext is None, reason="compiled kernels not built")

CASES = [(3, 2, 1), (2, 1, 0), (5, 3, 2), (9, 1, 4), (3, 1, 1), (1, 1, 0)]


@needs_ext
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("k,s,p", CASES)
def test_maxpool_bitwise_identical(dtype, k, s, p):
    rng = np.random.default_rng(hash((k, s, p)) % 2**32)
    x = np.ascontiguousarray(rng.standard_normal((2, 3, 11, 13)).astype(dtype))
    o1, a1 = _pool_np.maxpool2d_forward(x, k, k, s, s, p, p)
    o2, a2 = _pool_ext.maxpool2d_forward(x, k, k, s, s, p, p)
    assert np.array_equal(o1, o2)
    assert np.array_equal(a1, a2)
    g = np.ascontiguousarray(rng.standard_normal(o1.shape).astype(dtype))
    assert np.array_equal(_pool_np.maxpool2d_backward(g, a1, 11, 13),
                          _pool_ext.maxpool2d_backward(g, a2, 11, 13))


@needs_ext
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("k,s,p", CASES)
def test_avgpool_bitwise_identical(dtype, k, s, p):
    rng = np.random.default_rng(hash((k, s, p, 1)) % 2**32)
    x = np.ascontiguousarray(rng.standard_normal((2, 3, 11, 13)).astype(dtype))
    o1 = _pool_np.avgpool2d_forward(x, k, k, s, s, p, p)
    o2 = _pool_ext.avgpool2d_forward(x, k, k, s, s, p, p)
    assert np.array_equal(o1, o2)
    g = np.ascontiguousarray(rng.standard_normal(o1.shape).astype(dtype))
    assert np.array_equal(
        _pool_np.avgpool2d_backward(g, k, k, s, s, p, p, 11, 13),
        _pool_ext.avgpool2d_backward(g, k, k, s, s, p, p, 11, 13))


@pytest.mark.parametrize("impl", [p for p in (_pool_np, _pool_ext) if p is not None])
def test_tie_break_first_rowmajor(impl):
    x = np.ones((1, 1, 4, 4), dtype=np.float64)
    _, arg = impl.maxpool2d_forward(x, 2, 2, 2, 2, 0, 0)
    assert arg.reshape(-1).tolist() == [0, 2, 8, 10]


@pytest.mark.parametrize("impl", [p for p in (_pool_np, _pool_ext) if p is not None])
def test_padding_cells_never_take_argmax(impl):
    x = np.full((1, 1, 3, 3), -9.0, dtype=np.float64)
    out, arg = impl.maxpool2d_forward(x, 3, 3, 1, 1, 1, 1)
    assert (out == -9.0).all()
    # every argmax refers to a real cell
    assert ((arg >= 0) & (arg < 9)).all()
