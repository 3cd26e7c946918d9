"""Pipeline configuration: a versioned, human-editable YAML document.

Every knob has a default; ``default_config()`` plus ``save_config`` /
``load_config`` round-trip exactly.  Variant names gate the ablation
switchboard and are validated at load time.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .model import ModelConfig
from .train import TrainConfig

CONFIG_VERSION = 1

VARIANTS = ("full", "no_inpainting", "no_discrepancy", "segmentation_alone",
            "no_noise_aug", "no_blur")
# variants that score with the trained discrepancy model
MODEL_VARIANTS = ("full", "no_inpainting", "no_noise_aug", "no_blur")

ROI_SOURCES = ("ground-truth", "predicted-segmentation")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class WindowConfig:
    patch_side: int = 200
    overlap: float = 0.7


@dataclass
class InpainterConfig:
    kind: str = "diffusion"  # or "command" for an external adapter
    tol: float = 1e-4
    max_iter: int = 2000
    command: list[str] | None = None


@dataclass
class AugmentConfig:
    blur_sigma: float = 1.0
    noise_fine_amplitude: float = 0.04
    noise_coarse_amplitude: float = 0.08
    noise_coarse_cell: int = 16


@dataclass
class DataConfig:
    source: str = "toy"  # "toy" (procedural) or "disk" (pre-labelled frames)
    root: str = ""  # for source="disk": directory with images/labels/roi trees
    roi_source: str = "ground-truth"
    road_ids: list[int] = field(default_factory=lambda: [1])
    train_frames: int = 64
    val_frames: int = 8
    eval_frames: int = 16
    frame_height: int = 128
    frame_width: int = 256
    cutout_bank: int = 40
    obstacle_count_min: int = 1
    obstacle_count_max: int = 6


@dataclass
class PipelineConfig:
    version: int = CONFIG_VERSION
    seed: int = 0
    variant: str = "full"
    jobs: int = 1
    checkpoint: str = ""  # default checkpoint for model-scored variants
    checkpoints: dict[str, str] = field(default_factory=dict)  # per-variant override
    data: DataConfig = field(default_factory=DataConfig)
    windows: WindowConfig = field(default_factory=WindowConfig)
    inpainter: InpainterConfig = field(default_factory=InpainterConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> None:
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {self.version!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; options: {VARIANTS}")
        if self.data.roi_source not in ROI_SOURCES:
            raise ConfigError(f"unknown roi source {self.data.roi_source!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not 0 <= self.windows.overlap < 1 or self.windows.patch_side < 2:
            raise ConfigError("invalid window plan")
        if self.data.source not in ("toy", "disk"):
            raise ConfigError(f"unknown data source {self.data.source!r}")
        if self.data.source == "disk" and not self.data.root:
            raise ConfigError("data.source 'disk' requires data.root")

    def checkpoint_for(self, variant: str) -> str:
        return self.checkpoints.get(variant, self.checkpoint)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "variant": self.variant,
            "jobs": self.jobs,
            "checkpoint": self.checkpoint,
            "checkpoints": dict(self.checkpoints),
            "data": asdict(self.data),
            "windows": asdict(self.windows),
            "inpainter": asdict(self.inpainter),
            "augment": asdict(self.augment),
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        try:
            cfg = cls(
                version=d.get("version", CONFIG_VERSION),
                seed=d.get("seed", 0),
                variant=d.get("variant", "full"),
                jobs=d.get("jobs", 1),
                checkpoint=d.get("checkpoint", ""),
                checkpoints=dict(d.get("checkpoints", {})),
                data=DataConfig(**d.get("data", {})),
                windows=WindowConfig(**d.get("windows", {})),
                inpainter=InpainterConfig(**d.get("inpainter", {})),
                augment=AugmentConfig(**d.get("augment", {})),
                model=ModelConfig.from_dict(d["model"]) if "model" in d else ModelConfig(),
                train=TrainConfig.from_dict(d["train"]) if "train" in d else TrainConfig(),
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg.validate()
        return cfg


def default_config() -> PipelineConfig:
    return PipelineConfig()


def toy_config(seed: int = 0) -> PipelineConfig:
    """Desk-scale defaults: small windows, small backbone, short training."""
    cfg = PipelineConfig(seed=seed)
    cfg.windows = WindowConfig(patch_side=64, overlap=0.7)
    cfg.inpainter = InpainterConfig(max_iter=600)
    cfg.model = ModelConfig(backbone="small")
    cfg.train = TrainConfig(epochs=10, lr=1e-3, batch_size=4, crop=(128, 256),
                            pos_weight=20.0, seed=seed)
    return cfg


def load_config(path) -> PipelineConfig:
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} is not a mapping")
    return PipelineConfig.from_dict(data)


def save_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(cfg.to_dict(), f, sort_keys=True, default_flow_style=False)


def config_text(cfg: PipelineConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)


def config_hash(cfg: PipelineConfig) -> str:
    """Stable digest of the pipeline configuration.

    Identifies the computation, so filesystem locations (checkpoint paths,
    dataset roots) are excluded: rerunning the same pipeline from another
    directory must reproduce outputs byte for byte, hash included.
    """
    d = cfg.to_dict()
    d.pop("checkpoint", None)
    d.pop("checkpoints", None)
    d.pop("jobs", None)  # parallelism never changes results
    d["data"].pop("root", None)
    canonical = json.dumps(d, sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def ensure_exists(path, kind: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{kind} not found: {p}")
    return p
