"""Pooling kernel dispatch.

The compiled Cython backend is preferred when it was built; otherwise the
numpy backend is used. Both produce bit-identical results; the extension
is purely a speed-up. Set EVTRACK_KERNELS=numpy to force the fallback
(used by the benchmark and the backend-equivalence tests).
"""

from __future__ import annotations

import os

import numpy as np

from . import _pool_np

_forced = os.environ.get("EVTRACK_KERNELS", "").strip().lower()

_ext = None
if _forced != "numpy":
    try:
        from . import _pool_ext as _ext  # type: ignore[no-redef]
    except ImportError:
        _ext = None
        if _forced == "ext":
            raise ImportError(
                "EVTRACK_KERNELS=ext but the compiled pooling extension is "
                "not available; build it with 'python setup.py build_ext --inplace'"
            )

BACKEND = "ext" if _ext is not None else "numpy"
_impl = _ext if _ext is not None else _pool_np

pool_out_size = _pool_np.pool_out_size


def _c(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x)


def maxpool2d_forward(x, kh, kw, sh, sw, ph, pw):
    return _impl.maxpool2d_forward(_c(x), kh, kw, sh, sw, ph, pw)


def maxpool2d_backward(g, arg, H, W):
    return _impl.maxpool2d_backward(_c(g), _c(arg), H, W)


def avgpool2d_forward(x, kh, kw, sh, sw, ph, pw):
    return _impl.avgpool2d_forward(_c(x), kh, kw, sh, sw, ph, pw)


def avgpool2d_backward(g, kh, kw, sh, sw, ph, pw, H, W):
    return _impl.avgpool2d_backward(_c(g), kh, kw, sh, sw, ph, pw, H, W)
