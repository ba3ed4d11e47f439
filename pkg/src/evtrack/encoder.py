"""One-stream transformer encoder for image crops.

Template and search crops are patch-embedded (separate learned positional
tables per region), concatenated along the token axis, passed jointly
through pre-norm self-attention blocks, and split back. The same encoder
doubles as the event-branch backbone in the "no pooling backbone"
ablation, consuming rendered event images with shared weights.
"""

from __future__ import annotations

import numpy as np

from . import opcount
from . import tensor as T
from .errors import ConfigError, DimensionError
from .nn import LayerNorm, Linear, Mlp, Module, Parameter, trunc_normal
from .tensor import Tensor
from .types import TokenSet


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, heads: int,
                         scale_mode: str = "sqrt_dk", return_probs: bool = False):
    """Multi-head scaled dot-product attention over [B,N,d] tensors.

    ``scale_mode`` selects the score divisor: sqrt(d_head) for the
    conventional scaling, or d_head itself ("paper_dk") for the literal
    division by the key dimension.
    """
    B, Nq, d = q.shape
    Nk = k.shape[1]
    if k.shape[2] != d or v.shape[2] != d:
        raise DimensionError(f"attention: widths differ: q {q.shape}, k {k.shape}, v {v.shape}")
    if v.shape[1] != Nk:
        raise DimensionError(f"attention: k/v token counts differ: {k.shape} vs {v.shape}")
    if d % heads:
        raise DimensionError(f"attention: width {d} not divisible by {heads} heads")
    dh = d // heads
    if scale_mode == "sqrt_dk":
        scale = 1.0 / np.sqrt(dh)
    elif scale_mode == "paper_dk":
        scale = 1.0 / dh
    else:
        raise ConfigError(f"attention: unknown scale_mode {scale_mode!r}")

    qh = T.transpose(T.reshape(q, (B, Nq, heads, dh)), (0, 2, 1, 3))
    kh = T.transpose(T.reshape(k, (B, Nk, heads, dh)), (0, 2, 1, 3))
    vh = T.transpose(T.reshape(v, (B, Nk, heads, dh)), (0, 2, 1, 3))
    with opcount.label("attn_scores"):
        scores = T.mul_scalar(T.matmul(qh, T.transpose(kh, (0, 1, 3, 2))), scale)
    probs = T.softmax(scores, axis=-1)
    out = T.matmul(probs, vh)
    out = T.reshape(T.transpose(out, (0, 2, 1, 3)), (B, Nq, d))
    if return_probs:
        return out, probs
    return out


class MhsaBlock(Module):
    """Pre-norm transformer block: x + MHSA(LN(x)), then x + MLP(LN(x))."""

    def __init__(self, rng: np.random.Generator, dim: int, heads: int,
                 mlp_ratio: int = 4):
        super().__init__()
        if dim % heads:
            raise ConfigError(f"mhsa: width {dim} not divisible by {heads} heads")
        self.heads = heads
        self.ln1 = LayerNorm(dim)
        self.q = Linear(rng, dim, dim)
        self.k = Linear(rng, dim, dim)
        self.v = Linear(rng, dim, dim)
        self.proj = Linear(rng, dim, dim)
        self.ln2 = LayerNorm(dim)
        self.mlp = Mlp(rng, dim, mlp_ratio)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.ln1(x)
        att = scaled_dot_attention(self.q(h), self.k(h), self.v(h), self.heads)
        x = T.add(x, self.proj(att))
        return T.add(x, self.mlp(self.ln2(x)))


class PatchEmbed(Module):
    """Non-overlapping patch flattening + linear projection + positional
    embedding, with separate tables for the template and search grids."""

    def __init__(self, rng: np.random.Generator, patch: int, in_ch: int, dim: int,
                 template_hw: tuple[int, int], search_hw: tuple[int, int]):
        super().__init__()
        self.patch = patch
        self.in_ch = in_ch
        self.dim = dim
        self.proj = Linear(rng, in_ch * patch * patch, dim)
        th, tw = template_hw
        sh, sw = search_hw
        self.grids = {"template": (th, tw), "search": (sh, sw)}
        self.pos_template = Parameter(trunc_normal(rng, (1, th * tw, dim)))
        self.pos_search = Parameter(trunc_normal(rng, (1, sh * sw, dim)))

    def __call__(self, img: Tensor, region: str, modality: str) -> TokenSet:
        B, C, H, W = img.shape
        p = self.patch
        if H % p or W % p:
            raise ConfigError(f"patch_embed: input {H}x{W} not divisible by patch {p}")
        if C != self.in_ch:
            raise DimensionError(f"patch_embed: expected {self.in_ch} channels, got {C}")
        gh, gw = H // p, W // p
        if (gh, gw) != self.grids[region]:
            raise DimensionError(
                f"patch_embed: grid ({gh},{gw}) does not match {region} table "
                f"{self.grids[region]}"
            )
        # [B,C,H,W] -> [B, gh*gw, C*p*p] with (c, py, px) ordering per patch
        x = T.reshape(img, (B, C, gh, p, gw, p))
        x = T.transpose(x, (0, 2, 4, 1, 3, 5))
        x = T.reshape(x, (B, gh * gw, C * p * p))
        tokens = self.proj(x)
        pos = self.pos_template if region == "template" else self.pos_search
        tokens = T.add(tokens, pos.tensor)
        return TokenSet(tokens, (gh, gw), modality, region)


class JointEncoder(Module):
    """Patch embed both regions, run joint self-attention, split back."""

    def __init__(self, rng: np.random.Generator, dim: int, layers: int, heads: int,
                 patch: int = 16, in_ch: int = 3, mlp_ratio: int = 4,
                 template_size: int = 128, search_size: int = 256):
        super().__init__()
        if dim % heads:
            raise ConfigError(f"encoder: width {dim} not divisible by {heads} heads")
        t = template_size // patch
        s = search_size // patch
        self.embed = PatchEmbed(rng, patch, in_ch, dim, (t, t), (s, s))
        self.layers = layers
        self._blocks: list[MhsaBlock] = []
        for i in range(layers):
            blk = MhsaBlock(rng, dim, heads, mlp_ratio)
            setattr(self, f"block{i}", blk)
            self._blocks.append(blk)

    def encode(self, template_img: Tensor, search_img: Tensor,
               modality: str = "rgb") -> tuple[TokenSet, TokenSet]:
        ts = self.embed(template_img, "template", modality)
        ss = self.embed(search_img, "search", modality)
        x = T.concat([ts.tokens, ss.tokens], axis=1)
        for blk in self._blocks:
            x = blk(x)
        t_tok, s_tok = T.split(x, [ts.count, ss.count], axis=1)
        return ts.with_tokens(t_tok), ss.with_tokens(s_tok)
