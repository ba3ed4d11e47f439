"""Numpy pooling backend.

Window cells are scanned in row-major (di, dj) order in both forward and
backward so results are bit-identical to the compiled backend: strict '>'
updates keep the first maximum, average accumulation happens in the same
order, and scatter order in the backward passes matches the extension's
loop nest.
"""

from __future__ import annotations

import numpy as np


def pool_out_size(H: int, W: int, kh: int, kw: int, sh: int, sw: int,
                  ph: int, pw: int) -> tuple[int, int]:
    return (H + 2 * ph - kh) // sh + 1, (W + 2 * pw - kw) // sw + 1


def maxpool2d_forward(x: np.ndarray, kh: int, kw: int, sh: int, sw: int,
                      ph: int, pw: int):
    B, C, H, W = x.shape
    Ho, Wo = pool_out_size(H, W, kh, kw, sh, sw, ph, pw)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)),
                constant_values=-np.inf)
    best = np.full((B, C, Ho, Wo), -np.inf, dtype=x.dtype)
    arg = np.zeros((B, C, Ho, Wo), dtype=np.int64)
    oy = np.arange(Ho) * sh
    ox = np.arange(Wo) * sw
    for di in range(kh):
        iy = oy + di - ph  # unpadded row index per output row
        for dj in range(kw):
            ix = ox + dj - pw
            sl = xp[:, :, di:di + sh * Ho:sh, dj:dj + sw * Wo:sw]
            flat = (iy[:, None] * W + ix[None, :]).astype(np.int64)
            m = sl > best
            best = np.where(m, sl, best)
            arg = np.where(m, flat, arg)
    return best, arg


def maxpool2d_backward(g: np.ndarray, arg: np.ndarray, H: int, W: int) -> np.ndarray:
    B, C, Ho, Wo = g.shape
    gin = np.zeros((B * C, H * W), dtype=g.dtype)
    rows = np.repeat(np.arange(B * C), Ho * Wo)
    np.add.at(gin, (rows, arg.reshape(-1)), g.reshape(-1))
    return gin.reshape(B, C, H, W)


def avgpool2d_forward(x: np.ndarray, kh: int, kw: int, sh: int, sw: int,
                      ph: int, pw: int) -> np.ndarray:
    B, C, H, W = x.shape
    Ho, Wo = pool_out_size(H, W, kh, kw, sh, sw, ph, pw)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    acc = np.zeros((B, C, Ho, Wo), dtype=x.dtype)
    for di in range(kh):
        for dj in range(kw):
            acc = acc + xp[:, :, di:di + sh * Ho:sh, dj:dj + sw * Wo:sw]
    return acc / np.asarray(kh * kw, dtype=x.dtype)


def avgpool2d_backward(g: np.ndarray, kh: int, kw: int, sh: int, sw: int,
                       ph: int, pw: int, H: int, W: int) -> np.ndarray:
    B, C, Ho, Wo = g.shape
    gd = g / np.asarray(kh * kw, dtype=g.dtype)
    gp = np.zeros((B, C, H + 2 * ph, W + 2 * pw), dtype=g.dtype)
    for di in range(kh):
        for dj in range(kw):
            gp[:, :, di:di + sh * Ho:sh, dj:dj + sw * Wo:sw] += gd
    return np.ascontiguousarray(gp[:, :, ph:ph + H, pw:pw + W])
