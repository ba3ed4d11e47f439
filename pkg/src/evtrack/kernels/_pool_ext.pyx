# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled pooling kernels.

Loop nests mirror the numpy backend's accumulation order exactly
(row-major window scan, strict '>' for the max update, offset-major
scatter in the average backward) so both backends agree bit-for-bit.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef fused floating:
    float
    double


def pool_out_size(int H, int W, int kh, int kw, int sh, int sw, int ph, int pw):
    return (H + 2 * ph - kh) // sh + 1, (W + 2 * pw - kw) // sw + 1


def maxpool2d_forward(floating[:, :, :, ::1] x, int kh, int kw, int sh, int sw,
                      int ph, int pw):
    cdef int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef int Ho = (H + 2 * ph - kh) // sh + 1
    cdef int Wo = (W + 2 * pw - kw) // sw + 1
    if floating is float:
        out_np = np.empty((B, C, Ho, Wo), dtype=np.float32)
    else:
        out_np = np.empty((B, C, Ho, Wo), dtype=np.float64)
    arg_np = np.empty((B, C, Ho, Wo), dtype=np.int64)
    cdef floating[:, :, :, ::1] out = out_np
    cdef cnp.int64_t[:, :, :, ::1] arg = arg_np
    cdef int b, c, oy, ox, di, dj, iy, ix
    cdef floating best, v
    cdef cnp.int64_t besti
    cdef bint have
    for b in range(B):
        for c in range(C):
            for oy in range(Ho):
                for ox in range(Wo):
                    have = False
                    best = 0
                    besti = 0
                    for di in range(kh):
                        iy = oy * sh + di - ph
                        if iy < 0 or iy >= H:
                            continue
                        for dj in range(kw):
                            ix = ox * sw + dj - pw
                            if ix < 0 or ix >= W:
                                continue
                            v = x[b, c, iy, ix]
                            if not have or v > best:
                                best = v
                                besti = iy * W + ix
                                have = True
                    out[b, c, oy, ox] = best
                    arg[b, c, oy, ox] = besti
    return out_np, arg_np


def maxpool2d_backward(floating[:, :, :, ::1] g, cnp.int64_t[:, :, :, ::1] arg,
                       int H, int W):
    cdef int B = g.shape[0], C = g.shape[1], Ho = g.shape[2], Wo = g.shape[3]
    if floating is float:
        gin_np = np.zeros((B, C, H, W), dtype=np.float32)
    else:
        gin_np = np.zeros((B, C, H, W), dtype=np.float64)
    cdef floating[:, :, :, ::1] gin = gin_np
    cdef int b, c, oy, ox
    cdef cnp.int64_t f
    for b in range(B):
        for c in range(C):
            for oy in range(Ho):
                for ox in range(Wo):
                    f = arg[b, c, oy, ox]
                    gin[b, c, f // W, f % W] += g[b, c, oy, ox]
    return gin_np


def avgpool2d_forward(floating[:, :, :, ::1] x, int kh, int kw, int sh, int sw,
                      int ph, int pw):
    cdef int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef int Ho = (H + 2 * ph - kh) // sh + 1
    cdef int Wo = (W + 2 * pw - kw) // sw + 1
    if floating is float:
        out_np = np.empty((B, C, Ho, Wo), dtype=np.float32)
    else:
        out_np = np.empty((B, C, Ho, Wo), dtype=np.float64)
    cdef floating[:, :, :, ::1] out = out_np
    cdef floating acc, div = <floating> (kh * kw)
    cdef int b, c, oy, ox, di, dj, iy, ix
    for b in range(B):
        for c in range(C):
            for oy in range(Ho):
                for ox in range(Wo):
                    acc = 0
                    for di in range(kh):
                        iy = oy * sh + di - ph
                        if iy < 0 or iy >= H:
                            continue
                        for dj in range(kw):
                            ix = ox * sw + dj - pw
                            if ix < 0 or ix >= W:
                                continue
                            acc = acc + x[b, c, iy, ix]
                    out[b, c, oy, ox] = acc / div
    return out_np


def avgpool2d_backward(floating[:, :, :, ::1] g, int kh, int kw, int sh, int sw,
                       int ph, int pw, int H, int W):
    cdef int B = g.shape[0], C = g.shape[1], Ho = g.shape[2], Wo = g.shape[3]
    if floating is float:
        gin_np = np.zeros((B, C, H, W), dtype=np.float32)
    else:
        gin_np = np.zeros((B, C, H, W), dtype=np.float64)
    cdef floating[:, :, :, ::1] gin = gin_np
    cdef floating div = <floating> (kh * kw)
    cdef int b, c, oy, ox, di, dj, iy, ix
    # offset-major to match the numpy backend's accumulation order
    for di in range(kh):
        for dj in range(kw):
            for b in range(B):
                for c in range(C):
                    for oy in range(Ho):
                        iy = oy * sh + di - ph
                        if iy < 0 or iy >= H:
                            continue
                        for ox in range(Wo):
                            ix = ox * sw + dj - pw
                            if ix < 0 or ix >= W:
                                continue
                            gin[b, c, iy, ix] += g[b, c, oy, ox] / div
    return gin_np
