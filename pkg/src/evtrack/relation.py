"""Modality summation and joint template/search relation modelling."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .encoder import MhsaBlock
from .errors import DimensionError
from .nn import Module
from .types import TokenSet


def fuse_modalities(rgb_t: TokenSet, ev_t: TokenSet,
                    rgb_s: TokenSet, ev_s: TokenSet) -> tuple[TokenSet, TokenSet]:
    """Elementwise token addition per region; no rescaling is applied."""
    out = []
    for rgb, ev in ((rgb_t, ev_t), (rgb_s, ev_s)):
        if rgb.grid != ev.grid or rgb.width != ev.width:
            raise DimensionError(
                f"fuse_modalities: {rgb.region} grids/widths differ: "
                f"{rgb.grid}/{rgb.width} vs {ev.grid}/{ev.width}"
            )
        out.append(TokenSet(T.add(ev.tokens, rgb.tokens), rgb.grid, "fused", rgb.region))
    return out[0], out[1]


class RelationEncoder(Module):
    """Self-attention over the concatenated template+search tokens;
    returns only the search tokens (template first in the concat)."""

    def __init__(self, rng: np.random.Generator, dim: int, layers: int = 4,
                 heads: int = 3, mlp_ratio: int = 4):
        super().__init__()
        self.layers = layers
        self._blocks: list[MhsaBlock] = []
        for i in range(layers):
            blk = MhsaBlock(rng, dim, heads, mlp_ratio)
            setattr(self, f"block{i}", blk)
            self._blocks.append(blk)

    def __call__(self, f_t: TokenSet, f_s: TokenSet) -> TokenSet:
        if f_t.width != f_s.width:
            raise DimensionError(
                f"relation: widths differ: {f_t.width} vs {f_s.width}"
            )
        x = T.concat([f_t.tokens, f_s.tokens], axis=1)
        for blk in self._blocks:
            x = blk(x)
        _, s_tok = T.split(x, [f_t.count, f_s.count], axis=1)
        return f_s.with_tokens(s_tok)
