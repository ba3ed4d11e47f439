"""Cross-attention fusion between the RGB and event token streams.

Two directed blocks per region: direction (i) enhances event tokens with
RGB-derived keys/values, direction (ii) enhances RGB tokens with
event-derived keys/values. Both directions read the pre-fusion inputs,
so the computation order is immaterial. Keys and values are spatially
downsampled before projection to cut the attention-score cost from
N x N to N x (N/k).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt

import numpy as np

from . import tensor as T
from .encoder import scaled_dot_attention
from .errors import ConfigError, DimensionError
from .nn import LayerNorm, Linear, Mlp, Module
from .tensor import Tensor
from .types import TokenSet

DIRECTIONS = ("both", "only_i", "only_ii", "none")
SCALE_MODES = ("sqrt_dk", "paper_dk")


@dataclass
class FusionConfig:
    downsample: int = 4
    scale_mode: str = "sqrt_dk"
    heads: int = 3
    mlp_ratio: int = 4
    directions: str = "both"

    def validate(self) -> None:
        if self.downsample < 1:
            raise ConfigError(f"fusion: downsample rate must be >= 1, got {self.downsample}")
        if self.scale_mode not in SCALE_MODES:
            raise ConfigError(f"fusion: unknown scale_mode {self.scale_mode!r}")
        if self.directions not in DIRECTIONS:
            raise ConfigError(f"fusion: unknown directions {self.directions!r}")


def downsample_kv(ts: TokenSet, k: int) -> TokenSet:
    """Reduce a token set's spatial resolution by a factor of k.

    If k is a perfect square s*s with s dividing both grid extents, the
    tokens are average-pooled over s x s grid blocks (exactly N/k tokens);
    otherwise every k-th token is taken in row-major order (ceil(N/k)
    tokens). k = 1 is the identity.
    """
    if k <= 0:
        raise ConfigError(f"downsample_kv: rate must be positive, got {k}")
    if k == 1:
        return ts
    h, w = ts.grid
    s = isqrt(k)
    if s * s == k and h % s == 0 and w % s == 0:
        B, N, d = ts.tokens.shape
        x = T.reshape(T.transpose(ts.tokens, (0, 2, 1)), (B, d, h, w))
        x = T.avgpool2d(x, s, stride=s, padding=0)
        x = T.transpose(T.reshape(x, (B, d, (h // s) * (w // s))), (0, 2, 1))
        return TokenSet(x, (h // s, w // s), ts.modality, ts.region)
    idx = np.arange(0, ts.count, k, dtype=np.int64)
    x = T.take(ts.tokens, idx, axis=1)
    return TokenSet(x, (1, len(idx)), ts.modality, ts.region)


class CrossAttention(Module):
    """Q from one stream, K/V from the (downsampled) other stream."""

    def __init__(self, rng: np.random.Generator, dim: int, cfg: FusionConfig):
        super().__init__()
        if dim % cfg.heads:
            raise ConfigError(f"fusion: width {dim} not divisible by {cfg.heads} heads")
        self.cfg = cfg
        self.q = Linear(rng, dim, dim)
        self.k = Linear(rng, dim, dim)
        self.v = Linear(rng, dim, dim)
        self.proj = Linear(rng, dim, dim)

    def __call__(self, q_src: TokenSet, kv_src: TokenSet,
                 return_probs: bool = False):
        if q_src.width != kv_src.width:
            raise DimensionError(
                f"cross_attend: widths differ: {q_src.width} vs {kv_src.width}"
            )
        kv = downsample_kv(kv_src, self.cfg.downsample)
        att = scaled_dot_attention(
            self.q(q_src.tokens), self.k(kv.tokens), self.v(kv.tokens),
            self.cfg.heads, self.cfg.scale_mode, return_probs=return_probs,
        )
        if return_probs:
            att, probs = att
            return self.proj(att), probs
        return self.proj(att)


class FusionBlock(Module):
    """Pre-norm cross-attention with residual, then a residual MLP."""

    def __init__(self, rng: np.random.Generator, dim: int, cfg: FusionConfig):
        super().__init__()
        self.ln_primary = LayerNorm(dim)
        self.ln_guide = LayerNorm(dim)
        self.attn = CrossAttention(rng, dim, cfg)
        self.ln_mlp = LayerNorm(dim)
        self.mlp = Mlp(rng, dim, cfg.mlp_ratio)

    def __call__(self, primary: TokenSet, guide: TokenSet) -> TokenSet:
        if primary.width != guide.width:
            raise DimensionError(
                f"fusion block: widths differ: {primary.width} vs {guide.width}"
            )
        qn = primary.with_tokens(self.ln_primary(primary.tokens))
        kn = guide.with_tokens(self.ln_guide(guide.tokens))
        y = T.add(primary.tokens, self.attn(qn, kn))
        out = T.add(y, self.mlp(self.ln_mlp(y)))
        return primary.with_tokens(out)


class RegionFusion(Module):
    """The two directed blocks of one region."""

    def __init__(self, rng: np.random.Generator, dim: int, cfg: FusionConfig):
        super().__init__()
        self.cfg = cfg
        if cfg.directions in ("both", "only_i"):
            self.i = FusionBlock(rng, dim, cfg)
        if cfg.directions in ("both", "only_ii"):
            self.ii = FusionBlock(rng, dim, cfg)

    def __call__(self, rgb: TokenSet, ev: TokenSet) -> tuple[TokenSet, TokenSet]:
        # both directions read the pre-fusion inputs
        ev_out = self.i(ev, rgb) if hasattr(self, "i") else ev
        rgb_out = self.ii(rgb, ev) if hasattr(self, "ii") else rgb
        return rgb_out, ev_out


class MutualFusion(Module):
    """Per-region mutually guided fusion of the two modalities."""

    def __init__(self, rng: np.random.Generator, dim: int, cfg: FusionConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.template = RegionFusion(rng, dim, cfg)
        self.search = RegionFusion(rng, dim, cfg)

    def __call__(self, rgb_t: TokenSet, ev_t: TokenSet,
                 rgb_s: TokenSet, ev_s: TokenSet
                 ) -> tuple[TokenSet, TokenSet, TokenSet, TokenSet]:
        for rgb, ev in ((rgb_t, ev_t), (rgb_s, ev_s)):
            if rgb.grid != ev.grid:
                raise DimensionError(
                    f"mutual_fuse: modality grids differ in {rgb.region}: "
                    f"{rgb.grid} vs {ev.grid}"
                )
        rgb_t2, ev_t2 = self.template(rgb_t, ev_t)
        rgb_s2, ev_s2 = self.search(rgb_s, ev_s)
        return rgb_t2, ev_t2, rgb_s2, ev_s2
