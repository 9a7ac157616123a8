"""Patch discriminator over the 7-channel volume.

The network is a stack of stride-2 4x4 convolutions followed by two stride-1
4x4 convolutions, emitting a map of raw per-patch logits. Each output cell
scores one receptive-field patch of the input, so the loss is averaged over
local judgments rather than a single whole-image score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .errors import DomainError, ParameterError, ShapeError
from .imagecore import AlphaMatte, CompositeSample, compose, render_trimap_channel
from .netgen import stack_channels

_KERNEL = 4
_PAD = 1
_LEAK = 0.2


@dataclass(frozen=True)
class DiscriminatorConfig:
    base_width: int = 16
    n_layers: int = 1

    def __post_init__(self):
        if self.base_width < 1:
            raise ParameterError("base_width must be >= 1")
        if self.n_layers < 1:
            raise ParameterError("n_layers must be >= 1")


@dataclass(frozen=True)
class DiscVolume:
    """7 x H x W float array: composite RGB, background RGB, trimap scalar."""

    channels: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 3 or ch.shape[0] != 7:
            raise ShapeError(f"expected 7xHxW volume, got shape {ch.shape}")
        if not np.isfinite(ch).all():
            raise DomainError("discriminator volume contains non-finite values")
        if ch.min() < 0.0 or ch.max() > 1.0:
            raise DomainError("discriminator volume values must lie in [0, 1]")
        object.__setattr__(self, "channels", ch)


def _layer_geometry(n_layers: int) -> list[tuple[int, int]]:
    """(kernel, stride) for every conv in input-to-output order."""
    strides = [2] * n_layers + [1, 1]
    return [(_KERNEL, s) for s in strides]


def score_map_shape(cfg: DiscriminatorConfig, height: int, width: int) -> tuple[int, int]:
    """Closed-form output dims from repeated conv arithmetic
    n -> floor((n + 2*pad - kernel) / stride) + 1."""
    h, w = height, width
    for kernel, stride in _layer_geometry(cfg.n_layers):
        h = (h + 2 * _PAD - kernel) // stride + 1
        w = (w + 2 * _PAD - kernel) // stride + 1
        if h < 1 or w < 1:
            raise ShapeError(f"input {height}x{width} too small for {cfg.n_layers}-layer discriminator")
    return h, w


def receptive_field(cfg: DiscriminatorConfig) -> int:
    """Input pixels spanned by one output logit, ignoring padding clipping."""
    rf = 1
    for kernel, stride in reversed(_layer_geometry(cfg.n_layers)):
        rf = (rf - 1) * stride + kernel
    return rf


class Discriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.base_width
        layers: list[nn.Module] = [
            nn.Conv2d(7, w, _KERNEL, stride=2, padding=_PAD),
            nn.LeakyReLU(_LEAK, inplace=True),
        ]
        ch = w
        for i in range(1, cfg.n_layers + 1):
            prev, ch = ch, min(w * 2**i, w * 8)
            stride = 2 if i < cfg.n_layers else 1
            layers += [
                nn.Conv2d(prev, ch, _KERNEL, stride=stride, padding=_PAD, bias=False),
                nn.BatchNorm2d(ch),
                nn.LeakyReLU(_LEAK, inplace=True),
            ]
        # Raw logits; the adversarial losses apply the sigmoid internally.
        layers.append(nn.Conv2d(ch, 1, _KERNEL, stride=1, padding=_PAD))
        self.body = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != 7:
            raise ShapeError(f"expected (B, 7, H, W) input, got {tuple(x.shape)}")
        score_map_shape(self.cfg, x.shape[-2], x.shape[-1])
        return self.body(x)


def build_discriminator(cfg: DiscriminatorConfig) -> Discriminator:
    return Discriminator(cfg)


def make_real_volume(sample: CompositeSample) -> DiscVolume:
    """Real route: composite re-rendered from ground-truth alpha over the
    clean background, paired with the distorted background channels."""
    real_comp = compose(sample.foreground, sample.background_clean, sample.alpha_gt)
    return DiscVolume(
        stack_channels(
            real_comp.pixels,
            sample.background_distorted.pixels,
            render_trimap_channel(sample.trimap),
        )
    )


def make_fake_volume(sample: CompositeSample, alpha_pred: AlphaMatte) -> DiscVolume:
    """Fake route: composite re-rendered from the predicted alpha over the
    clean background; all other channels match the real route."""
    fake_comp = compose(sample.foreground, sample.background_clean, alpha_pred)
    return DiscVolume(
        stack_channels(
            fake_comp.pixels,
            sample.background_distorted.pixels,
            render_trimap_channel(sample.trimap),
        )
    )


def compose_tensors(fg: torch.Tensor, bg: torch.Tensor, alpha: torch.Tensor) -> torch.Tensor:
    """Differentiable (B,3,H,W) composite from (B,1,H,W) alpha."""
    return (alpha * fg + (1.0 - alpha) * bg).clamp(0.0, 1.0)


def volume_tensors(comp: torch.Tensor, bg_distorted: torch.Tensor, trimap_channel: torch.Tensor) -> torch.Tensor:
    """Differentiable (B,7,H,W) volume from batched channel groups."""
    return torch.cat([comp, bg_distorted, trimap_channel], dim=1)
