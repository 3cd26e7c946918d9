"""Two-stream discrepancy network.

Both streams (blurred original, inpainted) pass through one shared-weight
feature extractor.  At each of the four pyramid levels the streams are
fused two ways in parallel: channel concatenation followed by a 1x1
convolution, and a point-wise feature correlation appended as one extra
channel.  An up-convolution decoder with SeLU activations and per-level
skip connections produces a 2-class map; the obstacle-class softmax
probability, gated by the drivable-area mask, is the output heatmap.

Layer plan (for the parameter-count contract):
  backbone stage i: backbone_convs[i] times [3x3 conv -> ReLU], then 2x2
    max pool; stage output channels backbone_channels[i]
  fusion level i:   1x1 conv (2*C_i -> C_i), plus 1 correlation channel
  decoder:          from level 4 down: 2x2 stride-2 transposed conv ->
    SeLU -> concat skip (C_i + 1) -> 3x3 conv -> SeLU; final stage upsamples
    to full resolution, then a 3x3 conv -> SeLU and a 1x1 conv to 2 logits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

CORRELATION_EPS = 1e-8
BCE_EPS = 1e-7

BACKBONE_PRESETS = {
    "small": {"channels": (16, 32, 64, 96), "convs": (1, 1, 2, 2)},
    "vgg16": {"channels": (64, 128, 256, 512), "convs": (2, 2, 3, 3)},
}


@dataclass
class ModelConfig:
    backbone: str = "small"
    decoder_channels: tuple[int, ...] = (64, 48, 32, 16)
    pretrained_backbone: bool = False
    backbone_channels: tuple[int, ...] = ()
    backbone_convs: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.backbone_channels or not self.backbone_convs:
            try:
                preset = BACKBONE_PRESETS[self.backbone]
            except KeyError:
                raise ValueError(f"unknown backbone {self.backbone!r}; "
                                 f"options: {sorted(BACKBONE_PRESETS)}") from None
            self.backbone_channels = tuple(preset["channels"])
            self.backbone_convs = tuple(preset["convs"])
        self.backbone_channels = tuple(self.backbone_channels)
        self.backbone_convs = tuple(self.backbone_convs)
        self.decoder_channels = tuple(self.decoder_channels)
        if len(self.backbone_channels) < 2:
            raise ValueError("need at least 2 pyramid levels")
        if len(self.backbone_channels) != len(self.backbone_convs):
            raise ValueError("backbone channel and conv plans differ in length")
        if len(self.decoder_channels) != len(self.backbone_channels):
            raise ValueError(
                f"decoder needs {len(self.backbone_channels)} channel entries, "
                f"got {len(self.decoder_channels)}")

    @property
    def levels(self) -> int:
        return len(self.backbone_channels)

    def to_dict(self) -> dict:
        return {"backbone": self.backbone,
                "decoder_channels": list(self.decoder_channels),
                "pretrained_backbone": self.pretrained_backbone,
                "backbone_channels": list(self.backbone_channels),
                "backbone_convs": list(self.backbone_convs)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(backbone=d["backbone"],
                   decoder_channels=tuple(d["decoder_channels"]),
                   pretrained_backbone=d.get("pretrained_backbone", False),
                   backbone_channels=tuple(d.get("backbone_channels", ())),
                   backbone_convs=tuple(d.get("backbone_convs", ())))


def pointwise_correlation(feat_a: torch.Tensor, feat_b: torch.Tensor) -> torch.Tensor:
    """Per-location normalized inner product over channels, in [-1, 1].

    Symmetric in its arguments and (up to the stabilizing epsilon)
    invariant to positive per-pixel rescaling of either input.
    """
    if feat_a.shape != feat_b.shape:
        raise ValueError(f"feature shapes differ: {feat_a.shape} vs {feat_b.shape}")
    dot = (feat_a * feat_b).sum(dim=1, keepdim=True)
    norm_a = feat_a.norm(dim=1, keepdim=True)
    norm_b = feat_b.norm(dim=1, keepdim=True)
    return dot / (norm_a * norm_b + CORRELATION_EPS)


class _Backbone(nn.Module):
    """Shared-weight VGG-style pyramid; taps after each pooling stage."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        stages = []
        in_ch = 3
        for out_ch, n_convs in zip(cfg.backbone_channels, cfg.backbone_convs):
            layers = []
            for _ in range(n_convs):
                layers += [nn.Conv2d(in_ch, out_ch, 3, padding=1), nn.ReLU(inplace=True)]
                in_ch = out_ch
            layers.append(nn.MaxPool2d(2))
            stages.append(nn.Sequential(*layers))
        self.stages = nn.ModuleList(stages)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        taps = []
        for stage in self.stages:
            x = stage(x)
            taps.append(x)
        return taps


class DiscrepancyModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.backbone = _Backbone(cfg)
        self.fuse_convs = nn.ModuleList(
            [nn.Conv2d(2 * c, c, 1) for c in cfg.backbone_channels])

        dec = cfg.decoder_channels
        chans = cfg.backbone_channels
        ups = []
        merges = []
        in_ch = chans[-1] + 1  # deepest fused level + correlation channel
        for level in range(cfg.levels - 2, -1, -1):
            out_ch = dec[cfg.levels - 2 - level]
            ups.append(nn.ConvTranspose2d(in_ch, out_ch, 2, stride=2))
            merges.append(nn.Conv2d(out_ch + chans[level] + 1, out_ch, 3, padding=1))
            in_ch = out_ch
        self.ups = nn.ModuleList(ups)
        self.merges = nn.ModuleList(merges)
        self.final_up = nn.ConvTranspose2d(in_ch, dec[-1], 2, stride=2)
        self.final_conv = nn.Conv2d(dec[-1], dec[-1], 3, padding=1)
        self.head = nn.Conv2d(dec[-1], 2, 1)
        self.act = nn.SELU(inplace=True)

    @property
    def stride(self) -> int:
        return 2 ** self.cfg.levels

    def fused_pyramid(self, img_a: torch.Tensor, img_b: torch.Tensor) -> list[torch.Tensor]:
        taps_a = self.backbone(img_a)
        taps_b = self.backbone(img_b)
        fused = []
        for conv, a, b in zip(self.fuse_convs, taps_a, taps_b):
            mixed = conv(torch.cat([a, b], dim=1))
            corr = pointwise_correlation(a, b)
            fused.append(torch.cat([mixed, corr], dim=1))
        return fused

    def forward(self, img_a: torch.Tensor, img_b: torch.Tensor) -> torch.Tensor:
        """Obstacle probability map, shape (B, H, W); inputs (B, 3, H, W)
        in [0, 1] with H and W multiples of the pyramid stride."""
        if img_a.shape != img_b.shape:
            raise ValueError(f"stream shapes differ: {img_a.shape} vs {img_b.shape}")
        if img_a.shape[-1] % self.stride or img_a.shape[-2] % self.stride:
            raise ValueError(f"spatial dims must be multiples of {self.stride}")
        fused = self.fused_pyramid(img_a - 0.5, img_b - 0.5)
        x = fused[-1]
        for i, (up, merge) in enumerate(zip(self.ups, self.merges)):
            x = self.act(up(x))
            skip = fused[self.cfg.levels - 2 - i]
            x = self.act(merge(torch.cat([x, skip], dim=1)))
        x = self.act(self.final_up(x))
        x = self.act(self.final_conv(x))
        logits = self.head(x)
        return torch.softmax(logits, dim=1)[:, 1]

    @torch.no_grad()
    def heatmap(self, original_blurred: np.ndarray, inpainted: np.ndarray,
                roi: np.ndarray) -> np.ndarray:
        """Score one frame: (H, W, 3) arrays in [0, 1] to an (H, W) heatmap
        in [0, 1], exactly zero outside the ROI."""
        original_blurred = np.asarray(original_blurred, dtype=np.float32)
        inpainted = np.asarray(inpainted, dtype=np.float32)
        roi = np.asarray(roi).astype(bool)
        if original_blurred.shape != inpainted.shape:
            raise ValueError("stream shapes differ")
        if original_blurred.shape[:2] != roi.shape:
            raise ValueError("roi does not match image dimensions")
        h, w = roi.shape
        pad_h = (-h) % self.stride
        pad_w = (-w) % self.stride

        def prep(img: np.ndarray) -> torch.Tensor:
            t = torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))[None]
            if pad_h or pad_w:
                t = F.pad(t, (0, pad_w, 0, pad_h), mode="reflect")
            return t

        was_training = self.training
        self.eval()
        try:
            prob = self(prep(original_blurred), prep(inpainted))[0, :h, :w]
        finally:
            self.train(was_training)
        out = prob.numpy().astype(np.float32)
        out[~roi] = 0.0
        return out


def build_model(cfg: ModelConfig) -> DiscrepancyModel:
    model = DiscrepancyModel(cfg)
    if cfg.pretrained_backbone:
        load_pretrained_backbone(model)
    return model


def load_pretrained_backbone(model: DiscrepancyModel) -> None:
    """Copy torchvision VGG16 weights into a matching backbone."""
    if model.cfg.backbone != "vgg16":
        raise ValueError("pretrained weights only exist for the vgg16 backbone")
    try:
        from torchvision.models import VGG16_Weights, vgg16
    except ImportError as exc:
        raise RuntimeError("pretrained backbone requires torchvision") from exc
    source = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features
    src_convs = [m for m in source if isinstance(m, nn.Conv2d)]
    dst_convs = [m for stage in model.backbone.stages
                 for m in stage if isinstance(m, nn.Conv2d)]
    with torch.no_grad():
        for dst, src in zip(dst_convs, src_convs):
            dst.weight.copy_(src.weight)
            dst.bias.copy_(src.bias)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def weighted_bce(pred: torch.Tensor, target: torch.Tensor,
                 pos_weight: float = 20.0,
                 valid: torch.Tensor | None = None) -> torch.Tensor:
    """Class-weighted binary cross entropy over the valid pixels.

    ``pred`` holds obstacle probabilities (clamped away from {0, 1}),
    ``target`` is 0/1 with 255 meaning ignore; ``valid`` optionally masks
    out-of-ROI pixels.  The sum of per-pixel losses, each positive weighted
    by ``pos_weight``, is normalized by the total weight.  No valid pixels
    at all yields a zero loss.
    """
    p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS)
    mask = target != 255
    if valid is not None:
        mask = mask & valid.bool()
    if not bool(mask.any()):
        return pred.sum() * 0.0
    y = (target == 1).to(p.dtype)
    per_pixel = -(pos_weight * y * torch.log(p) + (1.0 - y) * torch.log1p(-p))
    weights = pos_weight * y + (1.0 - y)
    return (per_pixel * mask).sum() / (weights * mask).sum()
