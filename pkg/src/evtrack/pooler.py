"""Pooling-based event feature backbone.

Three stages with a total spatial stride of 16. Stage 1 reduces by 4x:
a 1x1 projection feeds a stride-2 max pool, whose output is projected
twice more and reduced by parallel stride-2 max and average pools that
are summed. Stages 2 and 3 each halve the grid with a learned 2x2
stride-2 stem, then combine a 1x1 shortcut with a multi-scale pooling
trunk followed by a 1x1 aggregation.

Multi-scale pooling splits channels into groups pooled at growing odd
kernel sizes (stride 1, same padding); from the configured group onwards
each group's input is summed with the previous group's output before
pooling, cascading coarse context into larger kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, DimensionError
from .nn import Conv2d, Module
from .tensor import Tensor
from .types import TokenSet


@dataclass
class BackboneConfig:
    in_channels: int = 2
    stage_channels: tuple[int, int, int] = (48, 96, 192)
    msp_groups: int = 4
    msp_kernels: tuple[int, ...] = (3, 5, 7, 9)
    cascade_from_group: int = 3  # 1-based index of the first cascaded group

    def validate(self) -> None:
        n = self.msp_groups
        if len(self.msp_kernels) != n:
            raise ConfigError(
                f"backbone: {len(self.msp_kernels)} kernels for {n} groups"
            )
        if any(k % 2 == 0 for k in self.msp_kernels):
            raise ConfigError(f"backbone: kernels must be odd, got {self.msp_kernels}")
        if list(self.msp_kernels) != sorted(set(self.msp_kernels)):
            raise ConfigError(
                f"backbone: kernels must be strictly increasing, got {self.msp_kernels}"
            )
        for c in self.stage_channels[1:]:
            if c % n:
                raise ConfigError(
                    f"backbone: stage width {c} not divisible by {n} groups"
                )
        if self.cascade_from_group not in (2, 3):
            raise ConfigError("backbone: cascade_from_group must be 2 or 3")


def multi_scale_pool(x: Tensor, kernels, cascade_from_group: int = 3,
                     capture: list | None = None) -> Tensor:
    """Channel-grouped max pooling with cascaded group inputs.

    Preserves shape: every group pools at stride 1 with same padding, and
    the group outputs are concatenated back along the channel axis.
    """
    n = len(kernels)
    C = x.shape[1]
    if C % n:
        raise ConfigError(f"multi_scale_pool: {C} channels not divisible by {n} groups")
    parts = T.split(x, [C // n] * n, axis=1)
    outs: list[Tensor] = []
    for i, (xi, k) in enumerate(zip(parts, kernels), start=1):
        src = xi if i < cascade_from_group else T.add(xi, outs[-1])
        gi = T.maxpool2d(src, k, stride=1, padding=(k - 1) // 2)
        outs.append(gi)
        if capture is not None:
            capture.append(gi.data)
    return T.concat(outs, axis=1)


class Stage1(Module):
    def __init__(self, rng: np.random.Generator, in_ch: int, out_ch: int):
        super().__init__()
        self.conv_in = Conv2d(rng, in_ch, out_ch, 1)
        self.conv_max = Conv2d(rng, out_ch, out_ch, 1)
        self.conv_avg = Conv2d(rng, out_ch, out_ch, 1)

    def __call__(self, x: Tensor) -> Tensor:
        f = T.maxpool2d(self.conv_in(x), 3, stride=2, padding=1)
        fi = T.maxpool2d(self.conv_max(f), 3, stride=2, padding=1)
        fj = T.avgpool2d(self.conv_avg(f), 3, stride=2, padding=1)
        return T.add(fi, fj)


class MspStage(Module):
    """Stride-2 stem, then 1x1 shortcut plus pooled trunk (used twice)."""

    def __init__(self, rng: np.random.Generator, in_ch: int, out_ch: int,
                 kernels, cascade_from_group: int):
        super().__init__()
        self.kernels = tuple(kernels)
        self.cascade_from_group = cascade_from_group
        self.stem = Conv2d(rng, in_ch, out_ch, 2, stride=2)
        self.shortcut = Conv2d(rng, out_ch, out_ch, 1)
        self.proj = Conv2d(rng, out_ch, out_ch, 1)

    def __call__(self, x: Tensor, capture: dict | None = None,
                 tag: str = "") -> Tensor:
        if x.shape[2] % 2 or x.shape[3] % 2:
            raise ConfigError(
                f"stage: spatial dims {x.shape[2]}x{x.shape[3]} must be even"
            )
        d = self.stem(x)
        groups: list | None = [] if capture is not None else None
        pooled = multi_scale_pool(d, self.kernels, self.cascade_from_group, groups)
        if capture is not None:
            capture[f"{tag}.groups"] = groups
            capture[f"{tag}.aggregate"] = pooled.data
        out = T.add(self.proj(pooled), self.shortcut(d))
        if capture is not None:
            capture[f"{tag}.out"] = out.data
        return out


class EventBackbone(Module):
    """Full three-stage backbone; 16x spatial reduction into tokens."""

    def __init__(self, rng: np.random.Generator, cfg: BackboneConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        c1, c2, c3 = cfg.stage_channels
        self.stage1 = Stage1(rng, cfg.in_channels, c1)
        self.stage2 = MspStage(rng, c1, c2, cfg.msp_kernels, cfg.cascade_from_group)
        self.stage3 = MspStage(rng, c2, c3, cfg.msp_kernels, cfg.cascade_from_group)

    def features(self, x: Tensor, capture: dict | None = None) -> Tensor:
        B, C, H, W = x.shape
        if H % 16 or W % 16:
            raise ConfigError(f"backbone: input {H}x{W} must be divisible by 16")
        if C != self.cfg.in_channels:
            raise DimensionError(
                f"backbone: expected {self.cfg.in_channels} input channels, got {C}"
            )
        f1 = self.stage1(x)
        if capture is not None:
            capture["stage1.out"] = f1.data
        f2 = self.stage2(f1, capture, "stage2")
        return self.stage3(f2, capture, "stage3")

    def tokens(self, x: Tensor, region: str, capture: dict | None = None) -> TokenSet:
        f = self.features(x, capture)
        B, d, h, w = f.shape
        tok = T.transpose(T.reshape(f, (B, d, h * w)), (0, 2, 1))
        return TokenSet(tok, (h, w), "event", region)

    def forward_pair(self, evt_template: Tensor, evt_search: Tensor
                     ) -> tuple[TokenSet, TokenSet]:
        return (self.tokens(evt_template, "template"),
                self.tokens(evt_search, "search"))
