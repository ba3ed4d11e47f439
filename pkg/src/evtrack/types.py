"""Shared domain types: token sets, boxes, event frames, track samples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError
from .tensor import Tensor


@dataclass
class TokenSet:
    """Sequence of feature vectors with spatial provenance.

    ``tokens`` is [B, N, d]; ``grid`` is the (h, w) layout the tokens were
    flattened from in row-major order; ``modality`` is "rgb" or "event";
    ``region`` is "template" or "search".
    """

    tokens: Tensor
    grid: tuple[int, int]
    modality: str
    region: str

    def __post_init__(self):
        h, w = self.grid
        if self.tokens.ndim != 3 or self.tokens.shape[1] != h * w:
            raise DimensionError(
                f"TokenSet: tokens {self.tokens.shape} do not match grid {self.grid}"
            )

    @property
    def count(self) -> int:
        return self.tokens.shape[1]

    @property
    def width(self) -> int:
        return self.tokens.shape[2]

    def with_tokens(self, tokens: Tensor) -> "TokenSet":
        return TokenSet(tokens, self.grid, self.modality, self.region)


@dataclass
class BBox:
    """Axis-aligned box, (x, y) top-left corner, extents (w, h), pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ContractError(f"BBox: non-positive extents ({self.w}, {self.h})")

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)


@dataclass
class EventFrame:
    """Per-pixel positive/negative event counts over one frame interval."""

    width: int
    height: int
    pos_counts: np.ndarray
    neg_counts: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        for name, g in (("pos_counts", self.pos_counts), ("neg_counts", self.neg_counts)):
            if g.shape != (self.height, self.width):
                raise DimensionError(
                    f"EventFrame: {name} shape {g.shape} != ({self.height}, {self.width})"
                )
            if (g < 0).any():
                raise ContractError(f"EventFrame: negative entries in {name}")

    def planes(self) -> np.ndarray:
        """Stacked [2, H, W] float32 count planes (pos first)."""
        return np.stack([self.pos_counts, self.neg_counts]).astype(np.float32)

    @classmethod
    def from_planes(cls, planes: np.ndarray, frame_index: int = 0) -> "EventFrame":
        if planes.ndim != 3 or planes.shape[0] != 2:
            raise DimensionError(f"EventFrame: expected [2,H,W] planes, got {planes.shape}")
        h, w = planes.shape[1:]
        return cls(width=w, height=h,
                   pos_counts=planes[0].copy(), neg_counts=planes[1].copy(),
                   frame_index=frame_index)

    def total_events(self) -> int:
        return int(self.pos_counts.sum() + self.neg_counts.sum())


@dataclass
class TrackSample:
    """One training/eval pair: template and search crops of both modalities.

    Template crops cover 2x the nominal target side resized to 128x128;
    search crops cover 4x resized to 256x256. ``gt`` is expressed in
    search-crop pixel coordinates. Event crops are count planes [2,H,W].
    """

    rgb_template: np.ndarray
    rgb_search: np.ndarray
    evt_template: np.ndarray
    evt_search: np.ndarray
    gt: BBox
