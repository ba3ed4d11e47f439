"""Run configuration: typed defaults plus a line-oriented text format.

Files hold ``section.key = value`` lines with ``#`` comments. Every key
has a default; unknown keys are rejected so typos fail loudly. The same
``key=value`` syntax drives CLI overrides.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, ParseError


@dataclass
class EncoderConfig:
    patch: int = 16
    layers: int = 4
    heads: int = 3
    mlp_ratio: int = 4


@dataclass
class PoolerConfig:
    enabled: bool = True
    in_channels: int = 2
    stage_channels: str = "48,96,auto"  # 'auto' resolves to model.d_model
    msp_groups: int = 4
    msp_kernels: str = "3,5,7,9"
    msp_cascade_from_group: int = 3


@dataclass
class MgfConfig:
    downsample: int = 4
    scale_mode: str = "sqrt_dk"
    directions: str = "both"
    heads: int = 3
    mlp_ratio: int = 4


@dataclass
class RmConfig:
    enabled: bool = True
    layers: int = 4


@dataclass
class HeadConfig:
    loss_lambda: float = 5.0
    sigma: float = 2.0


@dataclass
class ModelConfig:
    d_model: int = 192
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    pooler: PoolerConfig = field(default_factory=PoolerConfig)
    mgf: MgfConfig = field(default_factory=MgfConfig)
    rm: RmConfig = field(default_factory=RmConfig)
    head: HeadConfig = field(default_factory=HeadConfig)

    def stage_channels(self) -> tuple[int, int, int]:
        parts = [p.strip() for p in self.pooler.stage_channels.split(",")]
        if len(parts) != 3:
            raise ConfigError(
                f"model.pooler.stage_channels needs 3 entries, got {parts}"
            )
        vals = tuple(self.d_model if p == "auto" else int(p) for p in parts)
        if any(v <= 0 for v in vals):
            raise ConfigError(f"model.pooler.stage_channels must be positive: {vals}")
        return vals

    def msp_kernels(self) -> tuple[int, ...]:
        return tuple(int(p) for p in self.pooler.msp_kernels.split(","))


@dataclass
class TrainConfig:
    epochs: int = 60
    lr: float = 1e-4
    batch: int = 8
    weight_decay: float = 1e-4
    seed: int = 0
    max_steps: int = 0  # 0 = no cap


@dataclass
class DataConfig:
    dir: str = "data"
    sequences: int = 20
    frames: int = 24
    seed: int = 7
    threshold: float = 0.15


@dataclass
class EvalConfig:
    data: str = ""       # empty = data.dir
    max_frames: int = 0  # 0 = all


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> None:
        m = self.model
        if m.d_model % m.encoder.heads:
            raise ConfigError(
                f"model.d_model {m.d_model} not divisible by encoder heads {m.encoder.heads}"
            )
        if m.d_model % m.mgf.heads:
            raise ConfigError(
                f"model.d_model {m.d_model} not divisible by mgf heads {m.mgf.heads}"
            )
        m.stage_channels()
        if self.train.batch < 1 or self.train.epochs < 0:
            raise ConfigError("train.batch must be >= 1 and train.epochs >= 0")
        if self.train.lr <= 0:
            raise ConfigError("train.lr must be positive")
        if self.data.threshold <= 0:
            raise ConfigError("data.threshold must be positive")


def _leaf_fields(cfg, prefix: str = "") -> dict[str, tuple[object, str]]:
    """Map dotted key -> (owner dataclass, attribute name)."""
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        key = f"{prefix}{f.name}"
        if hasattr(v, "__dataclass_fields__"):
            out.update(_leaf_fields(v, key + "."))
        else:
            out[key] = (cfg, f.name)
    return out


def _convert(raw: str, current) -> object:
    if isinstance(current, bool):
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def apply_overrides(cfg: RunConfig, pairs: list[tuple[str, str]],
                    source: str = "<override>") -> None:
    leaves = _leaf_fields(cfg)
    for key, raw in pairs:
        if key not in leaves:
            raise ConfigError(f"{source}: unknown config key {key!r}")
        owner, attr = leaves[key]
        try:
            setattr(owner, attr, _convert(raw, getattr(owner, attr)))
        except ValueError as exc:
            raise ConfigError(f"{source}: bad value for {key}: {exc}")


def parse_config_text(text: str, source: str = "<string>") -> RunConfig:
    cfg = RunConfig()
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(f"{source}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        pairs.append((key.strip(), raw.strip()))
    apply_overrides(cfg, pairs, source)
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    return parse_config_text(p.read_text(), source=str(p))


def config_to_text(cfg: RunConfig) -> str:
    lines = []
    for key, (owner, attr) in sorted(_leaf_fields(cfg).items()):
        v = getattr(owner, attr)
        if isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{key} = {v}\n")
    return "".join(lines)
