"""Generator: encoder-decoder from the 7-channel input volume to an alpha matte.

Input layout is [composite RGB | background RGB | trimap scalar]. The encoder
is a 4-stage residual network whose last two stages trade striding for
dilation, followed by a multi-rate dilated-convolution pyramid. The decoder
upsamples back to full resolution via bilinear interpolation, unpooling with
the stem's saved max-pool indices, and a transposed convolution, with skip
connections from the encoder and a final skip from the input RGB. Output is
a single sigmoid channel.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from . import checkpoint as ckpt
from .errors import CheckpointError, DomainError, ParameterError, ShapeError
from .imagecore import CompositeSample, render_trimap_channel

# stem conv /2, stem pool /2, stage-2 blocks /2; stages 3-4 are dilated.
TOTAL_STRIDE = 8


@dataclass(frozen=True)
class GeneratorConfig:
    base_width: int = 8
    stage_depths: tuple[int, int, int, int] = (1, 1, 1, 1)
    dilation_rates: tuple[int, int] = (2, 4)
    aspp_rates: tuple[int, ...] = (1, 2, 4)
    input_channels: int = 7
    pretrained_init: bool = False

    def __post_init__(self):
        if self.input_channels != 7:
            raise ParameterError("the generator input volume has exactly 7 channels")
        if self.base_width < 1:
            raise ParameterError("base_width must be >= 1")
        if len(self.stage_depths) != 4 or any(d < 1 for d in self.stage_depths):
            raise ParameterError("stage_depths must be 4 positive integers")
        if len(self.dilation_rates) != 2 or any(r < 1 for r in self.dilation_rates):
            raise ParameterError("dilation_rates must be two integers >= 1")
        if not self.aspp_rates or any(r < 1 for r in self.aspp_rates):
            raise ParameterError("aspp_rates must be a nonempty list of integers >= 1")

    @staticmethod
    def full_scale() -> "GeneratorConfig":
        return GeneratorConfig(base_width=64, stage_depths=(3, 4, 6, 3), aspp_rates=(1, 6, 12, 18))


@dataclass(frozen=True)
class InputVolume:
    """7 x H x W float array: composite RGB, background RGB, trimap scalar."""

    channels: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 3 or ch.shape[0] != 7:
            raise ShapeError(f"expected 7xHxW volume, got shape {ch.shape}")
        if not np.isfinite(ch).all():
            raise DomainError("input volume contains non-finite values")
        if ch.min() < 0.0 or ch.max() > 1.0:
            raise DomainError("input volume values must lie in [0, 1]")
        object.__setattr__(self, "channels", ch)

    @property
    def composite(self) -> np.ndarray:
        return self.channels[0:3]

    @property
    def background(self) -> np.ndarray:
        return self.channels[3:6]

    @property
    def trimap_channel(self) -> np.ndarray:
        return self.channels[6]


def stack_channels(composite: np.ndarray, background: np.ndarray, trimap_channel: np.ndarray) -> np.ndarray:
    """Stack HxWx3 composite, HxWx3 background, and HxW trimap into 7xHxW."""
    return np.concatenate(
        [
            composite.transpose(2, 0, 1),
            background.transpose(2, 0, 1),
            trimap_channel[None, :, :],
        ],
        axis=0,
    )


def assemble_input(sample: CompositeSample) -> InputVolume:
    """Build the generator input from a sample. The background channels carry
    the distorted background, matching what is available at test time."""
    return InputVolume(
        stack_channels(
            sample.composite.pixels,
            sample.background_distorted.pixels,
            render_trimap_channel(sample.trimap),
        )
    )


class ResidualBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int = 1, dilation: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=dilation, dilation=dilation, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=dilation, dilation=dilation, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        if stride != 1 or in_ch != out_ch:
            self.skip = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False), nn.BatchNorm2d(out_ch)
            )
        else:
            self.skip = nn.Identity()

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.skip(x))


def _stage(in_ch: int, out_ch: int, depth: int, stride: int, dilation: int) -> nn.Sequential:
    blocks = [ResidualBlock(in_ch, out_ch, stride=stride, dilation=dilation)]
    blocks += [ResidualBlock(out_ch, out_ch, dilation=dilation) for _ in range(depth - 1)]
    return nn.Sequential(*blocks)


class SpatialPyramid(nn.Module):
    """Parallel dilated convolutions plus an image-pooling branch.

    The pooling branch skips batch norm so single-sample training batches
    remain valid (its spatial extent is 1x1).
    """

    def __init__(self, in_ch: int, out_ch: int, rates: tuple[int, ...]):
        super().__init__()
        branches = []
        for rate in rates:
            if rate == 1:
                conv = nn.Conv2d(in_ch, out_ch, 1, bias=False)
            else:
                conv = nn.Conv2d(in_ch, out_ch, 3, padding=rate, dilation=rate, bias=False)
            branches.append(nn.Sequential(conv, nn.BatchNorm2d(out_ch), nn.ReLU(inplace=True)))
        self.branches = nn.ModuleList(branches)
        self.pool = nn.Sequential(
            nn.AdaptiveAvgPool2d(1), nn.Conv2d(in_ch, out_ch, 1), nn.ReLU(inplace=True)
        )
        self.project = nn.Sequential(
            nn.Conv2d(out_ch * (len(rates) + 1), out_ch, 1, bias=False),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        feats = [branch(x) for branch in self.branches]
        pooled = self.pool(x)
        feats.append(F.interpolate(pooled, size=x.shape[-2:], mode="bilinear", align_corners=False))
        return self.project(torch.cat(feats, dim=1))


class Generator(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.base_width
        d3, d4 = cfg.dilation_rates
        depths = cfg.stage_depths

        self.stem_conv = nn.Conv2d(7, w, 7, stride=2, padding=3, bias=False)
        self.stem_bn = nn.BatchNorm2d(w)
        self.stage1 = _stage(w, w, depths[0], stride=1, dilation=1)
        self.stage2 = _stage(w, 2 * w, depths[1], stride=2, dilation=1)
        self.stage3 = _stage(2 * w, 4 * w, depths[2], stride=1, dilation=d3)
        self.stage4 = _stage(4 * w, 8 * w, depths[3], stride=1, dilation=d4)
        self.pyramid = SpatialPyramid(8 * w, 4 * w, cfg.aspp_rates)

        skip_ch = max(w // 2, 1)
        self.skip_reduce = nn.Sequential(
            nn.Conv2d(w, skip_ch, 1, bias=False), nn.BatchNorm2d(skip_ch), nn.ReLU(inplace=True)
        )
        self.dec1 = nn.Sequential(
            nn.Conv2d(4 * w + skip_ch, w, 3, padding=1, bias=False),
            nn.BatchNorm2d(w),
            nn.ReLU(inplace=True),
        )
        self.dec2 = nn.Sequential(
            nn.Conv2d(2 * w, w, 3, padding=1, bias=False), nn.BatchNorm2d(w), nn.ReLU(inplace=True)
        )
        self.upconv = nn.ConvTranspose2d(w, w, 4, stride=2, padding=1, bias=False)
        self.up_bn = nn.BatchNorm2d(w)
        self.dec3 = nn.Sequential(
            nn.Conv2d(w + 3, w, 3, padding=1, bias=False), nn.BatchNorm2d(w), nn.ReLU(inplace=True)
        )
        self.head = nn.Conv2d(w, 1, 3, padding=1)

        if cfg.pretrained_init:
            # Channels 4-7 start at zero so externally loaded 3-channel stem
            # weights reproduce their original behavior at initialization.
            with torch.no_grad():
                self.stem_conv.weight[:, 3:].zero_()

    def encoder_features(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        stem = F.relu(self.stem_bn(self.stem_conv(x)))
        # Non-overlapping pooling keeps the saved indices unique, so the
        # decoder's unpooling is an exact inverse scatter with exact gradients.
        pooled, pool_idx = F.max_pool2d(stem, 2, stride=2, return_indices=True)
        s1 = self.stage1(pooled)
        s2 = self.stage2(s1)
        s3 = self.stage3(s2)
        s4 = self.stage4(s3)
        return {
            "stem": stem,
            "pool_idx": pool_idx,
            "stage1": s1,
            "stage2": s2,
            "stage3": s3,
            "stage4": s4,
            "pyramid": self.pyramid(s4),
        }

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != 7:
            raise ShapeError(f"expected (B, 7, H, W) input, got {tuple(x.shape)}")
        h, w = x.shape[-2:]
        if h % TOTAL_STRIDE or w % TOTAL_STRIDE:
            raise ShapeError(f"input dims {h}x{w} not divisible by encoder stride {TOTAL_STRIDE}")

        feats = self.encoder_features(x)
        up1 = F.interpolate(feats["pyramid"], scale_factor=2, mode="bilinear", align_corners=False)
        d1 = self.dec1(torch.cat([up1, self.skip_reduce(feats["stage1"])], dim=1))
        up2 = F.max_unpool2d(
            d1, feats["pool_idx"], 2, stride=2, output_size=feats["stem"].shape[-2:]
        )
        d2 = self.dec2(torch.cat([up2, feats["stem"]], dim=1))
        up3 = F.relu(self.up_bn(self.upconv(d2)))
        d3 = self.dec3(torch.cat([up3, x[:, 0:3]], dim=1))
        return torch.sigmoid(self.head(d3))


def build_generator(cfg: GeneratorConfig) -> Generator:
    return Generator(cfg)


def load_rgb_stem_weights(gen: Generator, kernel: np.ndarray) -> None:
    """Copy an externally pretrained 3-channel stem kernel into channels 1-3
    and zero channels 4-7."""
    weight = gen.stem_conv.weight
    expected = (weight.shape[0], 3, weight.shape[2], weight.shape[3])
    if tuple(kernel.shape) != expected:
        raise ShapeError(f"stem kernel shape {kernel.shape} != expected {expected}")
    with torch.no_grad():
        weight[:, 0:3] = torch.as_tensor(kernel, dtype=weight.dtype)
        weight[:, 3:].zero_()


def forward_generator(gen: Generator, volume: InputVolume) -> "AlphaMatte":
    """Deterministic inference: frozen batch-norm statistics, no gradients."""
    from .imagecore import AlphaMatte

    was_training = gen.training
    gen.eval()
    try:
        x = torch.from_numpy(volume.channels).to(torch.float32).unsqueeze(0)
        with torch.no_grad():
            out = gen(x)
    finally:
        gen.train(was_training)
    return AlphaMatte(out[0, 0].numpy().astype(np.float64))


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------


def state_arrays(module: nn.Module) -> dict[str, np.ndarray]:
    return {name: tensor.detach().cpu().numpy() for name, tensor in module.state_dict().items()}


def load_state_arrays(module: nn.Module, arrays: dict[str, np.ndarray]) -> None:
    state = {name: torch.from_numpy(np.ascontiguousarray(arr)) for name, arr in arrays.items()}
    module.load_state_dict(state)


def save_generator(path: str | Path, gen: Generator) -> None:
    config = {"kind": "generator", "generator_config": asdict(gen.cfg)}
    ckpt.save_checkpoint(path, config, state_arrays(gen))


def generator_config_from_dict(raw: dict) -> GeneratorConfig:
    return GeneratorConfig(
        base_width=raw["base_width"],
        stage_depths=tuple(raw["stage_depths"]),
        dilation_rates=tuple(raw["dilation_rates"]),
        aspp_rates=tuple(raw["aspp_rates"]),
        input_channels=raw["input_channels"],
        pretrained_init=raw["pretrained_init"],
    )


def load_generator(path: str | Path) -> Generator:
    config, arrays = ckpt.load_checkpoint(path)
    if config.get("kind") != "generator":
        raise CheckpointError(f"{path} is not a generator checkpoint (kind={config.get('kind')!r})")
    gen = Generator(generator_config_from_dict(config["generator_config"]))
    load_state_arrays(gen, arrays)
    gen.eval()
    return gen
