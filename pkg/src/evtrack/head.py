"""Center-based tracking head and training loss.

Each search token yields a score logit, two sub-cell offsets and two
box extents (offsets and extents through sigmoids). The box decodes from
the argmax score cell: center = (cell + offset) * stride, size =
extents * search size. The loss is binary cross-entropy between the
score map and a Gaussian bump centered on the ground-truth cell, plus a
weighted L1 on offsets/extents at that cell only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError
from .nn import Linear, Module
from .tensor import Tensor
from .types import BBox, TokenSet


@dataclass
class ScoreMap:
    scores: Tensor        # [B,h,w], sigmoid applied
    offsets: Tensor       # [B,2,h,w], sigmoid applied, (x, y)
    sizes: Tensor         # [B,2,h,w], sigmoid applied, (w, h) / search size
    score_logits: Tensor  # [B,h,w], kept for the numerically stable loss
    grid: tuple[int, int]
    search_size: int

    @property
    def stride(self) -> int:
        return self.search_size // self.grid[0]


class CenterHead(Module):
    def __init__(self, rng: np.random.Generator, dim: int,
                 loss_lambda: float = 5.0, sigma: float = 2.0):
        super().__init__()
        self.score = Linear(rng, dim, 1)
        self.offset = Linear(rng, dim, 2)
        self.size = Linear(rng, dim, 2)
        self.loss_lambda = loss_lambda
        self.sigma = sigma

    def __call__(self, ts: TokenSet, search_size: int = 256) -> ScoreMap:
        B = ts.tokens.shape[0]
        h, w = ts.grid
        logits = T.reshape(self.score(ts.tokens), (B, h, w))
        off = T.transpose(T.reshape(T.sigmoid(self.offset(ts.tokens)), (B, h, w, 2)),
                          (0, 3, 1, 2))
        size = T.transpose(T.reshape(T.sigmoid(self.size(ts.tokens)), (B, h, w, 2)),
                           (0, 3, 1, 2))
        return ScoreMap(scores=T.sigmoid(logits), offsets=off, sizes=size,
                        score_logits=logits, grid=(h, w), search_size=search_size)


def predict_box(sm: ScoreMap, batch_index: int = 0) -> BBox:
    """Decode the argmax cell (row-major tie-break) into a search-crop box."""
    h, w = sm.grid
    stride = sm.stride
    flat = int(np.argmax(sm.scores.data[batch_index]))
    iy, ix = divmod(flat, w)
    ox = float(sm.offsets.data[batch_index, 0, iy, ix])
    oy = float(sm.offsets.data[batch_index, 1, iy, ix])
    bw = float(sm.sizes.data[batch_index, 0, iy, ix]) * sm.search_size
    bh = float(sm.sizes.data[batch_index, 1, iy, ix]) * sm.search_size
    cx = (ix + ox) * stride
    cy = (iy + oy) * stride
    return BBox(x=cx - bw / 2.0, y=cy - bh / 2.0, w=bw, h=bh)


def _gaussian_target(grid: tuple[int, int], cell: tuple[int, int],
                     sigma: float) -> np.ndarray:
    h, w = grid
    cy, cx = cell
    ys, xs = np.mgrid[0:h, 0:w]
    d2 = (xs - cx) ** 2 + (ys - cy) ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma)).astype(np.float32)


def tracking_loss(sm: ScoreMap, gts: list[BBox], loss_lambda: float = 5.0,
                  sigma: float = 2.0) -> Tensor:
    """BCE(score map, Gaussian bump) + lambda * L1(offsets, sizes) at the
    ground-truth cell. ``gts`` holds one search-coordinate box per batch
    element."""
    B = sm.score_logits.shape[0]
    if len(gts) != B:
        raise ContractError(f"loss: {len(gts)} boxes for batch of {B}")
    h, w = sm.grid
    stride = sm.stride
    targets = np.zeros((B, h, w), dtype=np.float32)
    mask = np.zeros((B, 1, h, w), dtype=np.float32)
    tgt_off = np.zeros((B, 2), dtype=np.float32)
    tgt_size = np.zeros((B, 2), dtype=np.float32)
    for b, gt in enumerate(gts):
        if gt.w <= 0 or gt.h <= 0:
            raise ContractError(f"loss: degenerate gt box {gt}")
        cx, cy = gt.center
        if not (0 <= cx < sm.search_size and 0 <= cy < sm.search_size):
            raise ContractError(f"loss: gt center ({cx}, {cy}) outside search crop")
        ix = min(int(cx // stride), w - 1)
        iy = min(int(cy // stride), h - 1)
        targets[b] = _gaussian_target((h, w), (iy, ix), sigma)
        mask[b, 0, iy, ix] = 1.0
        tgt_off[b] = (cx / stride - ix, cy / stride - iy)
        tgt_size[b] = (gt.w / sm.search_size, gt.h / sm.search_size)

    t = Tensor(targets)
    z = sm.score_logits
    # per-cell BCE from logits: softplus(z) - t*z
    bce = T.tmean(T.sub(T.softplus(z), T.mul(t, z)))

    m = Tensor(mask)
    sel_off = T.tsum(T.mul(sm.offsets, m), axis=(2, 3))   # [B,2]
    sel_size = T.tsum(T.mul(sm.sizes, m), axis=(2, 3))
    l1 = T.add(T.tsum(T.tabs(T.sub(sel_off, Tensor(tgt_off)))),
               T.tsum(T.tabs(T.sub(sel_size, Tensor(tgt_size)))))
    l1 = T.mul_scalar(l1, 1.0 / B)
    return T.add(bce, T.mul_scalar(l1, loss_lambda))
