"""Brute-force reference implementations, independent of the library's
vectorized code paths. Everything here is plain Python loops over numpy
scalars/slices."""

import numpy as np


def matmul_oracle(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n), dtype=a.dtype)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for p in range(k):
                acc += a[i, p] * b[p, j]
            out[i, j] = acc
    return out


def conv2d_oracle(x, w, bias=None, stride=1, padding=0):
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    s, p = stride, padding
    Ho = (H + 2 * p - kh) // s + 1
    Wo = (W + 2 * p - kw) // s + 1
    out = np.zeros((B, O, Ho, Wo), dtype=x.dtype)
    for b in range(B):
        for o in range(O):
            for oy in range(Ho):
                for ox in range(Wo):
                    acc = 0.0
                    for c in range(C):
                        for i in range(kh):
                            for j in range(kw):
                                iy = oy * s + i - p
                                ix = ox * s + j - p
                                if 0 <= iy < H and 0 <= ix < W:
                                    acc += x[b, c, iy, ix] * w[o, c, i, j]
                    out[b, o, oy, ox] = acc + (bias[o] if bias is not None else 0.0)
    return out


def maxpool2d_oracle(x, k, stride=1, padding=0):
    B, C, H, W = x.shape
    s, p = stride, padding
    Ho = (H + 2 * p - k) // s + 1
    Wo = (W + 2 * p - k) // s + 1
    out = np.empty((B, C, Ho, Wo), dtype=x.dtype)
    for b in range(B):
        for c in range(C):
            for oy in range(Ho):
                for ox in range(Wo):
                    best = -np.inf
                    for i in range(k):
                        for j in range(k):
                            iy = oy * s + i - p
                            ix = ox * s + j - p
                            if 0 <= iy < H and 0 <= ix < W:
                                v = x[b, c, iy, ix]
                                if v > best:
                                    best = v
                    out[b, c, oy, ox] = best
    return out


def avgpool2d_oracle(x, k, stride=1, padding=0):
    B, C, H, W = x.shape
    s, p = stride, padding
    Ho = (H + 2 * p - k) // s + 1
    Wo = (W + 2 * p - k) // s + 1
    out = np.empty((B, C, Ho, Wo), dtype=x.dtype)
    for b in range(B):
        for c in range(C):
            for oy in range(Ho):
                for ox in range(Wo):
                    acc = x.dtype.type(0)
                    for i in range(k):
                        for j in range(k):
                            iy = oy * s + i - p
                            ix = ox * s + j - p
                            if 0 <= iy < H and 0 <= ix < W:
                                acc = acc + x[b, c, iy, ix]
                    out[b, c, oy, ox] = acc / x.dtype.type(k * k)
    return out


def softmax_oracle(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def layernorm_oracle(v, gamma, beta, eps=1e-5):
    mu = v.mean()
    var = ((v - mu) ** 2).mean()
    return (v - mu) / np.sqrt(var + eps) * gamma + beta


def event_crossings_oracle(levels, threshold):
    """Per-pixel quantizer replay for a 1-d log-intensity series."""
    ref = levels[0]
    pos, neg = [0], [0]
    for lv in levels[1:]:
        d = lv - ref
        n = int(abs(d) // threshold)
        if d > 0:
            pos.append(n)
            neg.append(0)
            ref += n * threshold
        else:
            pos.append(0)
            neg.append(n)
            ref -= n * threshold
    return pos, neg


def iou_raster_oracle(a, b, scale=1):
    """IoU by counting rasterized cells (boxes with integer coords)."""
    xs = range(int(min(a.x, b.x)) * scale, int(max(a.x + a.w, b.x + b.w)) * scale)
    ys = range(int(min(a.y, b.y)) * scale, int(max(a.y + a.h, b.y + b.h)) * scale)
    inter = union = 0
    for y in ys:
        for x in xs:
            ina = (a.x * scale <= x < (a.x + a.w) * scale
                   and a.y * scale <= y < (a.y + a.h) * scale)
            inb = (b.x * scale <= x < (b.x + b.w) * scale
                   and b.y * scale <= y < (b.y + b.h) * scale)
            inter += ina and inb
            union += ina or inb
    return inter / union
