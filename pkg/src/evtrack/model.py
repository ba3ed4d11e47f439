"""Full tracking network: asymmetric two-modality backbone, mutual
fusion, relation modelling, center head.

Inputs per batch: RGB crops in [0,1] (shifted to zero mean) and event
count planes (log1p-compressed). With the pooling backbone disabled the
event crops are rendered to images and encoded by the *same* RGB encoder
(shared weights), which is the homogeneous-backbone ablation.
"""

from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .dataset import SEARCH_SIZE, TEMPLATE_SIZE
from .encoder import JointEncoder
from .errors import ConfigError
from .events import planes_to_image
from .fusion import FusionConfig, MutualFusion
from .head import CenterHead, ScoreMap, tracking_loss
from .nn import Module
from .pooler import BackboneConfig, EventBackbone
from .relation import RelationEncoder, fuse_modalities
from .tensor import Tensor
from .types import BBox, TokenSet, TrackSample


class TrackingModel(Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        d = cfg.d_model
        self.rgb = JointEncoder(
            rng, d, cfg.encoder.layers, cfg.encoder.heads,
            patch=cfg.encoder.patch, in_ch=3, mlp_ratio=cfg.encoder.mlp_ratio,
            template_size=TEMPLATE_SIZE, search_size=SEARCH_SIZE,
        )
        if cfg.pooler.enabled:
            bb = BackboneConfig(
                in_channels=cfg.pooler.in_channels,
                stage_channels=cfg.stage_channels(),
                msp_groups=cfg.pooler.msp_groups,
                msp_kernels=cfg.msp_kernels(),
                cascade_from_group=cfg.pooler.msp_cascade_from_group,
            )
            if bb.stage_channels[2] != d:
                raise ConfigError(
                    f"pooler output width {bb.stage_channels[2]} != d_model {d}"
                )
            self.pooler = EventBackbone(rng, bb)
        fus = FusionConfig(
            downsample=cfg.mgf.downsample, scale_mode=cfg.mgf.scale_mode,
            heads=cfg.mgf.heads, mlp_ratio=cfg.mgf.mlp_ratio,
            directions=cfg.mgf.directions,
        )
        self.mgf = MutualFusion(rng, d, fus)
        if cfg.rm.enabled:
            self.rm = RelationEncoder(rng, d, cfg.rm.layers, cfg.encoder.heads,
                                      cfg.encoder.mlp_ratio)
        self.head = CenterHead(rng, d, cfg.head.loss_lambda, cfg.head.sigma)
        self.bind_names()

    # -- input preparation --------------------------------------------------

    @staticmethod
    def _rgb_input(arr: np.ndarray) -> Tensor:
        return Tensor(arr.astype(np.float32) - 0.5)

    @staticmethod
    def _evt_input(arr: np.ndarray) -> Tensor:
        return Tensor(np.log1p(arr.astype(np.float32)))

    @staticmethod
    def _evt_as_image(arr: np.ndarray) -> Tensor:
        imgs = np.stack([planes_to_image(p) for p in arr])
        return Tensor(imgs - 0.5)

    @staticmethod
    def batch_arrays(samples: list[TrackSample]) -> dict[str, np.ndarray]:
        return {
            "rgb_template": np.stack([s.rgb_template for s in samples]),
            "rgb_search": np.stack([s.rgb_search for s in samples]),
            "evt_template": np.stack([s.evt_template for s in samples]),
            "evt_search": np.stack([s.evt_search for s in samples]),
        }

    # -- forward ------------------------------------------------------------

    def encode_modalities(self, batch: dict[str, np.ndarray], capture=None):
        rgb_t, rgb_s = self.rgb.encode(
            self._rgb_input(batch["rgb_template"]),
            self._rgb_input(batch["rgb_search"]), modality="rgb",
        )
        if self.cfg.pooler.enabled:
            ev_t = self.pooler.tokens(self._evt_input(batch["evt_template"]),
                                      "template", capture)
            ev_s = self.pooler.tokens(self._evt_input(batch["evt_search"]),
                                      "search", capture)
        else:
            ev_t, ev_s = self.rgb.encode(
                self._evt_as_image(batch["evt_template"]),
                self._evt_as_image(batch["evt_search"]), modality="event",
            )
        return rgb_t, ev_t, rgb_s, ev_s

    def forward(self, batch: dict[str, np.ndarray], capture=None) -> ScoreMap:
        rgb_t, ev_t, rgb_s, ev_s = self.encode_modalities(batch, capture)
        rgb_t, ev_t, rgb_s, ev_s = self.mgf(rgb_t, ev_t, rgb_s, ev_s)
        f_t, f_s = fuse_modalities(rgb_t, ev_t, rgb_s, ev_s)
        search = self.rm(f_t, f_s) if self.cfg.rm.enabled else f_s
        return self.head(search, SEARCH_SIZE)

    def loss(self, batch: dict[str, np.ndarray], gts: list[BBox]):
        sm = self.forward(batch)
        return tracking_loss(sm, gts, self.cfg.head.loss_lambda,
                             self.cfg.head.sigma), sm

    def modality_score_maps(self, batch: dict[str, np.ndarray],
                            capture=None) -> dict[str, ScoreMap]:
        """Score maps per modality (and fused), for visualization."""
        rgb_t, ev_t, rgb_s, ev_s = self.encode_modalities(batch, capture)
        rgb_t, ev_t, rgb_s, ev_s = self.mgf(rgb_t, ev_t, rgb_s, ev_s)
        out = {}
        for name, (ft, fs) in {
            "rgb": (rgb_t, rgb_s),
            "event": (ev_t, ev_s),
        }.items():
            search = self.rm(ft, fs) if self.cfg.rm.enabled else fs
            out[name] = self.head(search, SEARCH_SIZE)
        f_t, f_s = fuse_modalities(rgb_t, ev_t, rgb_s, ev_s)
        search = self.rm(f_t, f_s) if self.cfg.rm.enabled else f_s
        out["fused"] = self.head(search, SEARCH_SIZE)
        return out

    # -- checkpointing --------------------------------------------------------

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(name, p.data) for name, p in self.named_parameters()]

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(arrays))
        extra = sorted(set(arrays) - set(own))
        if missing or extra:
            raise ConfigError(
                f"checkpoint does not match model (missing {missing[:3]}, "
                f"unexpected {extra[:3]})"
            )
        for name, p in own.items():
            arr = arrays[name]
            if arr.shape != p.data.shape:
                raise ConfigError(
                    f"checkpoint: {name} shape {arr.shape} != {p.data.shape}"
                )
            p.data = arr.astype(p.data.dtype)
