"""Minimal module/parameter system on top of the tensor engine.

Submodules and parameters register in attribute-assignment order, so the
dotted parameter names (e.g. ``pooler.stage2.proj.weight``) enumerate in
a deterministic order for a given configuration — the checkpoint format
relies on this.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Parameter:
    """Named trainable tensor; the name is assigned on registration."""

    def __init__(self, data: np.ndarray):
        self.tensor = Tensor(np.asarray(data), requires_grad=True)
        self.name = ""

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value: np.ndarray) -> None:
        # rebinds the buffer; graphs built from the old buffer stay valid
        self.tensor.data = np.asarray(value, dtype=self.tensor.data.dtype)

    def __repr__(self) -> str:
        return f"Parameter({self.name or '?'}, shape={self.tensor.shape})"


class Module:
    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, p in self._params.items():
            yield (f"{prefix}{name}", p)
        for name, m in self._modules.items():
            yield from m.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def bind_names(self, prefix: str = "") -> None:
        """Stamp each parameter with its dotted path."""
        for name, p in self.named_parameters(prefix):
            p.name = name

    def param_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.tensor.zero_grad()


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02,
                 dtype=np.float32) -> np.ndarray:
    """Normal draw clipped to +-2 std (the usual ViT init)."""
    v = rng.standard_normal(shape) * std
    return np.clip(v, -2.0 * std, 2.0 * std).astype(dtype)


class Linear(Module):
    def __init__(self, rng: np.random.Generator, in_dim: int, out_dim: int,
                 std: float = 0.02, zero_init: bool = False):
        super().__init__()
        if zero_init:
            w = np.zeros((in_dim, out_dim), dtype=np.float32)
        else:
            w = trunc_normal(rng, (in_dim, out_dim), std=std)
        self.weight = Parameter(w)
        self.bias = Parameter(np.zeros(out_dim, dtype=np.float32))

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(x, self.weight.tensor), self.bias.tensor)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.gain = Parameter(np.ones(dim, dtype=np.float32))
        self.offset = Parameter(np.zeros(dim, dtype=np.float32))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layernorm(x, self.gain.tensor, self.offset.tensor, self.eps)


class Conv2d(Module):
    def __init__(self, rng: np.random.Generator, in_ch: int, out_ch: int,
                 k: int, stride: int = 1, padding: int = 0, std: float = 0.02):
        super().__init__()
        self.weight = Parameter(trunc_normal(rng, (out_ch, in_ch, k, k), std=std))
        self.bias = Parameter(np.zeros(out_ch, dtype=np.float32))
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight.tensor, self.bias.tensor,
                        stride=self.stride, padding=self.padding)


class Mlp(Module):
    """Two linear layers around a GELU, the transformer feed-forward."""

    def __init__(self, rng: np.random.Generator, dim: int, ratio: int = 4):
        super().__init__()
        self.fc1 = Linear(rng, dim, dim * ratio)
        self.fc2 = Linear(rng, dim * ratio, dim)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(T.gelu(self.fc1(x)))
