"""Event-camera simulation over frame sequences.

Per pixel, a reference log-intensity tracks the scene; whenever a new
frame moves the log-intensity by at least the contrast threshold C, the
quantizer emits floor(|dL|/C) events of the corresponding polarity and
advances the reference by that many quanta. Frame 0 only initializes the
reference. This leaves the usual residual bound: the signed event sum
times C differs from the total log-intensity change by less than C.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError
from .types import EventFrame

LOG_EPS = 1e-3  # offset inside log(I + eps) so black pixels stay finite
SATURATION_COUNT = 3  # rendering saturates at this many events per pixel


def _luminance(frame: np.ndarray) -> np.ndarray:
    f = np.asarray(frame, dtype=np.float64)
    if f.ndim == 3:
        f = f.mean(axis=2)
    if f.ndim != 2:
        raise DimensionError(f"simulate_events: frame must be HxW or HxWx3, got {f.shape}")
    return f


def simulate_events(frames, threshold: float) -> list[EventFrame]:
    """Quantize log-intensity changes of a frame sequence into event counts.

    ``frames`` are grayscale or RGB arrays with intensities in [0, 1];
    RGB is reduced to mean luminance. Returns one EventFrame per input
    frame; the first is all zeros.
    """
    if threshold <= 0:
        raise ContractError(f"simulate_events: threshold must be positive, got {threshold}")
    frames = list(frames)
    if not frames:
        raise ContractError("simulate_events: empty frame sequence")

    ref = np.log(_luminance(frames[0]) + LOG_EPS)
    h, w = ref.shape
    out = [EventFrame(width=w, height=h,
                      pos_counts=np.zeros((h, w), dtype=np.int32),
                      neg_counts=np.zeros((h, w), dtype=np.int32),
                      frame_index=0)]
    for idx, frame in enumerate(frames[1:], start=1):
        lum = _luminance(frame)
        if lum.shape != (h, w):
            raise DimensionError(
                f"simulate_events: frame {idx} shape {lum.shape} != ({h}, {w})"
            )
        level = np.log(lum + LOG_EPS)
        delta = level - ref
        n = np.floor(np.abs(delta) / threshold).astype(np.int64)
        pos = np.where(delta > 0, n, 0)
        neg = np.where(delta < 0, n, 0)
        ref = ref + (pos - neg) * threshold
        out.append(EventFrame(width=w, height=h,
                              pos_counts=pos.astype(np.int32),
                              neg_counts=neg.astype(np.int32),
                              frame_index=idx))
    return out


def planes_to_image(planes: np.ndarray) -> np.ndarray:
    """Map [2,H,W] count planes to a float [3,H,W] image in [0,1].

    White background; positive events pull toward red, negative toward
    blue, saturating at SATURATION_COUNT events. With ip/in the saturated
    fractions: R = 1-in, B = 1-ip, G = 1-min(1, ip+in).
    """
    if planes.ndim != 3 or planes.shape[0] != 2:
        raise DimensionError(f"planes_to_image: expected [2,H,W], got {planes.shape}")
    ip = np.minimum(planes[0], SATURATION_COUNT) / SATURATION_COUNT
    im = np.minimum(planes[1], SATURATION_COUNT) / SATURATION_COUNT
    r = 1.0 - im
    g = 1.0 - np.minimum(1.0, ip + im)
    b = 1.0 - ip
    return np.stack([r, g, b]).astype(np.float32)


def render_event_image(ef: EventFrame) -> np.ndarray:
    """Render an event frame as a [H,W,3] uint8 image (see planes_to_image)."""
    img = planes_to_image(ef.planes())
    return np.rint(img * 255.0).clip(0, 255).astype(np.uint8).transpose(1, 2, 0)
