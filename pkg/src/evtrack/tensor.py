"""Dense tensors with reverse-mode automatic differentiation.

Every network block in this package is built from the operations defined
here. Tensors wrap a numpy buffer and are treated as immutable once
created; an operation records its parents and a closure that maps the
output gradient to parent gradients. ``backward`` walks the graph in
reverse topological order and accumulates gradients additively on leaves.

Reduction order is fixed for a given shape (numpy's deterministic
reduction for matmul/sums, explicit row-major accumulation in the pooling
kernels), so repeated forward passes over identical inputs are
bit-identical.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

from . import opcount
from .errors import ContractError, DimensionError
from .kernels import (
    avgpool2d_backward,
    avgpool2d_forward,
    maxpool2d_backward,
    maxpool2d_forward,
    pool_out_size,
)

FLOAT_DTYPES = (np.float32, np.float64)

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """N-dimensional array plus optional autograd provenance.

    ``grad`` is populated (on graph leaves) by ``backward``. ``_backward``
    maps the incoming output gradient to one gradient per parent, or None
    for parents that do not require gradients.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None
        self._op = "leaf"

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, op={self._op})"

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return mul_scalar(self, other)

    def __rmul__(self, other):
        return mul_scalar(self, other)

    def __neg__(self):
        return mul_scalar(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def as_tensor(x, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    out._op = op
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- elementwise arithmetic ---------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise DimensionError(f"add: cannot broadcast {a.shape} with {b.shape}")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(data, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise DimensionError(f"sub: cannot broadcast {a.shape} with {b.shape}")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(data, (a, b), backward, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise DimensionError(f"mul: cannot broadcast {a.shape} with {b.shape}")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(data, (a, b), backward, "mul")


def mul_scalar(a: Tensor, s: float) -> Tensor:
    a = as_tensor(a)
    s = float(s)
    data = a.data * np.asarray(s, dtype=a.data.dtype)

    def backward(g):
        return (g * np.asarray(s, dtype=g.dtype),)

    return _make(data, (a,), backward, "mul_scalar")


def add_scalar(a: Tensor, s: float) -> Tensor:
    a = as_tensor(a)
    data = a.data + np.asarray(float(s), dtype=a.data.dtype)

    def backward(g):
        return (g,)

    return _make(data, (a,), backward, "add_scalar")


# -- nonlinearities -----------------------------------------------------------


def gelu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    phi = 0.5 * (1.0 + erf(xd * _INV_SQRT2))
    data = xd * phi

    def backward(g):
        pdf = np.exp(-0.5 * xd * xd) * _INV_SQRT2PI
        return (g * (phi + xd * pdf).astype(g.dtype, copy=False),)

    return _make(data.astype(xd.dtype, copy=False), (x,), backward, "gelu")


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    # Stable: never exponentiates a large positive argument.
    pos = xd >= 0
    z = np.where(pos, -xd, xd)
    ez = np.exp(z)
    data = np.where(pos, 1.0 / (1.0 + ez), ez / (1.0 + ez)).astype(xd.dtype, copy=False)

    def backward(g):
        return (g * data * (1.0 - data),)

    return _make(data, (x,), backward, "sigmoid")


def softplus(x: Tensor) -> Tensor:
    """log(1 + exp(x)), computed without overflow."""
    x = as_tensor(x)
    xd = x.data
    data = np.logaddexp(np.asarray(0.0, dtype=xd.dtype), xd).astype(xd.dtype, copy=False)

    def backward(g):
        pos = xd >= 0
        z = np.where(pos, -xd, xd)
        ez = np.exp(z)
        sig = np.where(pos, 1.0 / (1.0 + ez), ez / (1.0 + ez))
        return (g * sig,)

    return _make(data, (x,), backward, "softplus")


def tabs(x: Tensor) -> Tensor:
    """|x|; the subgradient at 0 is taken as 0."""
    x = as_tensor(x)
    data = np.abs(x.data)

    def backward(g):
        return (g * np.sign(x.data),)

    return _make(data, (x,), backward, "abs")


def texp(x: Tensor) -> Tensor:
    x = as_tensor(x)
    data = np.exp(x.data)

    def backward(g):
        return (g * data,)

    return _make(data, (x,), backward, "exp")


def tlog(x: Tensor) -> Tensor:
    x = as_tensor(x)
    data = np.log(x.data)

    def backward(g):
        return (g / x.data,)

    return _make(data, (x,), backward, "log")


# -- shape manipulation -------------------------------------------------------


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {x.shape} as {tuple(shape)}")
    orig = x.shape

    def backward(g):
        return (g.reshape(orig),)

    return _make(data, (x,), backward, "reshape")


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    if sorted(axes) != list(range(x.ndim)):
        raise DimensionError(f"transpose: axes {axes} invalid for ndim {x.ndim}")
    data = np.ascontiguousarray(x.data.transpose(axes))
    inv = tuple(np.argsort(axes))

    def backward(g):
        return (np.ascontiguousarray(g.transpose(inv)),)

    return _make(data, (x,), backward, "transpose")


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat: need at least one tensor")
    nd = tensors[0].ndim
    ax = axis % nd
    for t in tensors[1:]:
        if t.ndim != nd or any(
            i != ax and t.shape[i] != tensors[0].shape[i] for i in range(nd)
        ):
            raise DimensionError(
                f"concat: incompatible shapes {t.shape} vs {tensors[0].shape} on axis {axis}"
            )
    data = np.concatenate([t.data for t in tensors], axis=ax)
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, bounds, axis=ax))

    return _make(data, tensors, backward, "concat")


def split(x: Tensor, sizes: Sequence[int], axis: int) -> list[Tensor]:
    """Partition ``x`` into chunks of the given extents along ``axis``."""
    x = as_tensor(x)
    ax = axis % x.ndim
    if sum(sizes) != x.shape[ax]:
        raise DimensionError(
            f"split: sizes {tuple(sizes)} do not cover extent {x.shape[ax]} of {x.shape}"
        )
    pieces = []
    start = 0
    for s in sizes:
        sl = [slice(None)] * x.ndim
        sl[ax] = slice(start, start + s)
        sl = tuple(sl)
        data = np.ascontiguousarray(x.data[sl])

        def backward(g, sl=sl):
            full = np.zeros_like(x.data)
            full[sl] = g
            return (full,)

        pieces.append(_make(data, (x,), backward, "split"))
        start += s
    return pieces


# -- reductions ---------------------------------------------------------------


def take(x: Tensor, idx: np.ndarray, axis: int) -> Tensor:
    """Gather the given indices along one axis."""
    x = as_tensor(x)
    ax = axis % x.ndim
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1 or (idx.size and (idx.min() < 0 or idx.max() >= x.shape[ax])):
        raise DimensionError(f"take: bad indices for extent {x.shape[ax]}")
    data = np.take(x.data, idx, axis=ax)

    def backward(g):
        full = np.zeros_like(x.data)
        moved = np.moveaxis(full, ax, 0)
        np.add.at(moved, idx, np.moveaxis(g, ax, 0))
        return (full,)

    return _make(data, (x,), backward, "take")


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    data = x.data.sum(axis=axis, keepdims=keepdims, dtype=x.data.dtype)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).astype(x.data.dtype, copy=True),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).astype(x.data.dtype, copy=True),)

    return _make(data, (x,), backward, "sum")


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([x.shape[a] for a in axes]))
    return mul_scalar(tsum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# -- linear algebra -----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul: need >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: inner extents differ: {a.shape} x {b.shape}")
    try:
        data = np.matmul(a.data, b.data)
    except ValueError:
        raise DimensionError(f"matmul: batch extents not broadcastable: {a.shape} x {b.shape}")
    opcount.record_matmul(a.shape, b.shape, data.shape)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(data, (a, b), backward, "matmul")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"softmax: axis {axis} out of bounds for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True, dtype=x.data.dtype)

    def backward(g):
        dot = (g * data).sum(axis=axis, keepdims=True, dtype=g.dtype)
        return ((g - dot) * data,)

    return _make(data.astype(x.data.dtype, copy=False), (x,), backward, "softmax")


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(
            f"layernorm: gamma/beta {gamma.shape}/{beta.shape} do not match width {d}"
        )
    if eps <= 0:
        raise ContractError("layernorm: eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True, dtype=x.data.dtype)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True, dtype=x.data.dtype)
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.data.dtype))
    xhat = xc * inv
    data = xhat * gamma.data + beta.data

    def backward(g):
        gg = g * gamma.data
        m1 = gg.mean(axis=-1, keepdims=True, dtype=g.dtype)
        m2 = (gg * xhat).mean(axis=-1, keepdims=True, dtype=g.dtype)
        gx = (gg - m1 - xhat * m2) * inv
        axes = tuple(range(g.ndim - 1))
        ggamma = (g * xhat).sum(axis=axes, dtype=g.dtype)
        gbeta = g.sum(axis=axes, dtype=g.dtype)
        return gx, ggamma, gbeta

    return _make(data, (x, gamma, beta), backward, "layernorm")


# -- spatial operations -------------------------------------------------------


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        return int(v[0]), int(v[1])
    return int(v), int(v)


def conv2d(x: Tensor, w: Tensor, bias: Tensor | None = None,
           stride=1, padding=0) -> Tensor:
    """2-d cross-correlation of NCHW input with OIHW weights."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(f"conv2d: need 4-d input/weight, got {x.shape} and {w.shape}")
    B, C, H, W = x.shape
    O, Cw, kh, kw = w.shape
    if Cw != C:
        raise DimensionError(f"conv2d: input channels {C} != weight channels {Cw}")
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    if sh < 1 or sw < 1:
        raise ContractError("conv2d: stride must be >= 1")
    if kh > H + 2 * ph or kw > W + 2 * pw:
        raise DimensionError(
            f"conv2d: kernel ({kh},{kw}) larger than padded input "
            f"({H + 2 * ph},{W + 2 * pw})"
        )
    Ho = (H + 2 * ph - kh) // sh + 1
    Wo = (W + 2 * pw - kw) // sw + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::sh, ::sw]  # B,C,Ho,Wo,kh,kw
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
        B * Ho * Wo, C * kh * kw
    )
    wmat = w.data.reshape(O, C * kh * kw)
    out = cols @ wmat.T
    opcount.record_macs("conv2d", B * Ho * Wo * O * C * kh * kw)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (O,):
            raise DimensionError(f"conv2d: bias {bias.shape} does not match {O} filters")
        out = out + bias.data
    data = np.ascontiguousarray(out.reshape(B, Ho, Wo, O).transpose(0, 3, 1, 2))

    parents = (x, w) if bias is None else (x, w, bias)

    def backward(g):
        gmat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(B * Ho * Wo, O)
        gw = (gmat.T @ cols).reshape(O, C, kh, kw)
        gcols = (gmat @ wmat).reshape(B, Ho, Wo, C, kh, kw).transpose(0, 3, 1, 2, 4, 5)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + sh * Ho:sh, j:j + sw * Wo:sw] += gcols[:, :, :, :, i, j]
        gx = gxp[:, :, ph:ph + H, pw:pw + W]
        if bias is None:
            return gx, gw
        return gx, gw, gmat.sum(axis=0, dtype=g.dtype)

    return _make(data, parents, backward, "conv2d")


def _check_pool_args(x: Tensor, k, stride, padding, op: str):
    if x.ndim != 4:
        raise DimensionError(f"{op}: need 4-d input, got {x.shape}")
    kh, kw = _pair(k)
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    B, C, H, W = x.shape
    if sh < 1 or sw < 1 or kh < 1 or kw < 1:
        raise ContractError(f"{op}: kernel and stride must be >= 1")
    if ph >= kh or pw >= kw:
        raise ContractError(f"{op}: padding ({ph},{pw}) must be smaller than kernel ({kh},{kw})")
    if kh > H + 2 * ph or kw > W + 2 * pw:
        raise DimensionError(
            f"{op}: kernel ({kh},{kw}) larger than padded input ({H + 2 * ph},{W + 2 * pw})"
        )
    return kh, kw, sh, sw, ph, pw


def maxpool2d(x: Tensor, k, stride=1, padding=0) -> Tensor:
    """Per-window maximum. Padding is -inf filled, so padded cells never
    win; on ties the first cell in row-major window order takes the
    gradient."""
    x = as_tensor(x)
    kh, kw, sh, sw, ph, pw = _check_pool_args(x, k, stride, padding, "maxpool2d")
    data, arg = maxpool2d_forward(x.data, kh, kw, sh, sw, ph, pw)

    def backward(g):
        return (maxpool2d_backward(g, arg, x.shape[2], x.shape[3]),)

    return _make(data, (x,), backward, "maxpool2d")


def avgpool2d(x: Tensor, k, stride=1, padding=0) -> Tensor:
    """Per-window mean with a fixed k*k divisor (zero padding included)."""
    x = as_tensor(x)
    kh, kw, sh, sw, ph, pw = _check_pool_args(x, k, stride, padding, "avgpool2d")
    data = avgpool2d_forward(x.data, kh, kw, sh, sw, ph, pw)

    def backward(g):
        return (avgpool2d_backward(g, kh, kw, sh, sw, ph, pw, x.shape[2], x.shape[3]),)

    return _make(data, (x,), backward, "avgpool2d")


# -- graph traversal ----------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Reverse-topological gradient accumulation from a scalar loss.

    Gradients land on every reachable leaf (tensor without parents) that
    has ``requires_grad`` set, adding to whatever ``grad`` already holds.
    """
    if loss.data.ndim != 0:
        raise ContractError(f"backward: loss must be 0-d, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("backward: loss does not require grad")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=loss.data.dtype)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg


__all__ = [
    "Tensor", "as_tensor", "add", "sub", "mul", "mul_scalar", "add_scalar",
    "gelu", "sigmoid", "softplus", "tabs", "texp", "tlog",
    "reshape", "transpose", "concat", "split", "take", "tsum", "tmean",
    "matmul", "softmax", "layernorm", "conv2d", "maxpool2d", "avgpool2d",
    "backward", "pool_out_size",
]
