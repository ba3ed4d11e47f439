"""Feature-map export: per-group multi-scale activations, stage
aggregates, and per-modality score maps, written as grayscale PPMs.

Each map is reduced to its channel mean, min-max normalized to [0, 255]
(a constant map renders as uniform 128), and saved with a filename
encoding module/stage/group.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .model import TrackingModel
from .storage import write_ppm
from .types import TrackSample


def normalize_map(m: np.ndarray) -> np.ndarray:
    """Min-max to [0,255] uint8; constant maps map to 128."""
    m = np.asarray(m, dtype=np.float64)
    lo, hi = float(m.min()), float(m.max())
    if hi - lo < 1e-12:
        return np.full(m.shape, 128, dtype=np.uint8)
    return np.rint((m - lo) / (hi - lo) * 255.0).astype(np.uint8)


def _write_gray(path, m: np.ndarray) -> None:
    g = normalize_map(m)
    write_ppm(path, np.stack([g, g, g], axis=-1))


def _channel_mean(x: np.ndarray) -> np.ndarray:
    # [B,C,H,W] -> [H,W] for batch element 0
    return x[0].mean(axis=0)


def export_feature_maps(model: TrackingModel, sample: TrackSample,
                        outdir) -> list[str]:
    """Run the model on one sample and dump visualization PPMs.

    Returns the list of written filenames. Backbone maps come from the
    search branch; score maps are produced per modality and fused.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    batch = model.batch_arrays([sample])
    capture: dict | None = {} if model.cfg.pooler.enabled else None
    maps = model.modality_score_maps(batch, capture)

    written = []

    def emit(name: str, arr: np.ndarray) -> None:
        _write_gray(out / name, arr)
        written.append(name)

    if capture is not None:
        emit("pooler_stage1_out.ppm", _channel_mean(capture["stage1.out"]))
        for stage in ("stage2", "stage3"):
            for gi, g in enumerate(capture[f"{stage}.groups"], start=1):
                emit(f"pooler_{stage}_msp_group{gi}.ppm", _channel_mean(g))
            emit(f"pooler_{stage}_msp_aggregate.ppm",
                 _channel_mean(capture[f"{stage}.aggregate"]))
            emit(f"pooler_{stage}_out.ppm", _channel_mean(capture[f"{stage}.out"]))

    for modality, sm in maps.items():
        emit(f"score_map_{modality}.ppm", sm.scores.data[0])
    return written
