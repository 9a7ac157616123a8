"""Core image types, the linear compositing model, and trimap handling.

Arrays are float64 in [0, 1] internally; files are 8- or 16-bit PNG rasters.
All operations are pure functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from scipy.ndimage import binary_erosion

from .errors import DomainError, ImageIoError, ParameterError, ShapeError

# Trimap label values.
BACKGROUND = 0
UNKNOWN = 1
FOREGROUND = 2

_LABEL_TO_CHANNEL = np.array([0.0, 0.5, 1.0])
# On-disk 8-bit encoding of the three labels.
_LABEL_TO_UINT8 = np.array([0, 128, 255], dtype=np.uint8)


def _check_unit_range(values: np.ndarray, what: str) -> None:
    if not np.isfinite(values).all():
        raise DomainError(f"{what} contains NaN or infinite values")
    if values.min() < 0.0 or values.max() > 1.0:
        raise DomainError(f"{what} has values outside [0, 1]")


@dataclass(frozen=True)
class Image:
    """An H x W x 3 RGB raster with float values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ShapeError(f"expected HxWx3 pixel array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ShapeError("image must be at least 1x1")
        _check_unit_range(px, "image")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class AlphaMatte:
    """A per-pixel opacity map, H x W float values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 3 and v.shape[2] == 1:
            v = v[:, :, 0]
        if v.ndim != 2:
            raise ShapeError(f"expected HxW alpha array, got shape {v.shape}")
        _check_unit_range(v, "alpha matte")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Trimap:
    """Ternary label map: 0 = background, 1 = unknown, 2 = foreground.

    The scalar-channel rendering maps labels {0, 1, 2} to {0.0, 0.5, 1.0};
    the mapping round-trips exactly.
    """

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim == 3 and lab.shape[2] == 1:
            lab = lab[:, :, 0]
        if lab.ndim != 2:
            raise ShapeError(f"expected HxW label array, got shape {lab.shape}")
        if not np.isin(lab, (BACKGROUND, UNKNOWN, FOREGROUND)).all():
            raise DomainError("trimap labels must be in {0, 1, 2}")
        object.__setattr__(self, "labels", lab.astype(np.uint8))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def unknown_mask(self) -> np.ndarray:
        return self.labels == UNKNOWN


@dataclass(frozen=True)
class CompositeSample:
    """A bundled training/eval record.

    `composite` must reproduce compose(foreground, background_clean, alpha_gt)
    to within one quantization step of the storage bit depth.
    """

    foreground: Image
    background_clean: Image
    background_distorted: Image
    alpha_gt: AlphaMatte
    trimap: Trimap
    composite: Image
    quantization: float = field(default=1.0 / 255.0)

    def __post_init__(self):
        dims = {
            (m.height, m.width)
            for m in (
                self.foreground,
                self.background_clean,
                self.background_distorted,
                self.alpha_gt,
                self.trimap,
                self.composite,
            )
        }
        if len(dims) != 1:
            raise ShapeError(f"sample members have inconsistent dimensions: {sorted(dims)}")
        expected = compose(self.foreground, self.background_clean, self.alpha_gt)
        err = np.abs(expected.pixels - self.composite.pixels).max()
        if err > self.quantization:
            raise DomainError(
                f"composite deviates from compose(fg, bg, alpha) by {err:.3g} "
                f"(allowed {self.quantization:.3g})"
            )


def compose(fg: Image, bg: Image, alpha: AlphaMatte) -> Image:
    """Blend foreground over background: out = alpha*fg + (1-alpha)*bg."""
    if not (fg.height == bg.height == alpha.height and fg.width == bg.width == alpha.width):
        raise ShapeError(
            f"dimension mismatch: fg {fg.height}x{fg.width}, "
            f"bg {bg.height}x{bg.width}, alpha {alpha.height}x{alpha.width}"
        )
    a = alpha.values[:, :, None]
    out = a * fg.pixels + (1.0 - a) * bg.pixels
    # The blend is convex; clip only shaves float round-off at the endpoints.
    return Image(np.clip(out, 0.0, 1.0))


def generate_trimap(alpha: AlphaMatte, band_radius: int) -> Trimap:
    """Derive a trimap from ground-truth alpha.

    A pixel is foreground iff alpha == 1 over its entire (2r+1)^2 square
    neighborhood (clipped at image borders), background iff alpha == 0 over
    the whole neighborhood, and unknown otherwise.
    """
    if band_radius < 1:
        raise ParameterError(f"band_radius must be >= 1, got {band_radius}")
    size = 2 * band_radius + 1
    selem = np.ones((size, size), dtype=bool)
    # border_value=1 makes out-of-bounds neighbors count as inside the mask,
    # i.e. only in-image pixels constrain the label.
    fg = binary_erosion(alpha.values == 1.0, structure=selem, border_value=1)
    bg = binary_erosion(alpha.values == 0.0, structure=selem, border_value=1)
    labels = np.full(alpha.values.shape, UNKNOWN, dtype=np.uint8)
    labels[fg] = FOREGROUND
    labels[bg] = BACKGROUND
    return Trimap(labels)


def render_trimap_channel(trimap: Trimap) -> np.ndarray:
    """Scalar-channel encoding of a trimap: {0 -> 0.0, 1 -> 0.5, 2 -> 1.0}."""
    return _LABEL_TO_CHANNEL[trimap.labels]


def trimap_from_channel(channel: np.ndarray) -> Trimap:
    """Invert render_trimap_channel. Values must be exactly {0.0, 0.5, 1.0}."""
    channel = np.asarray(channel, dtype=np.float64)
    if channel.ndim == 3 and channel.shape[2] == 1:
        channel = channel[:, :, 0]
    if not np.isin(channel, _LABEL_TO_CHANNEL).all():
        raise DomainError("trimap channel values must be exactly {0.0, 0.5, 1.0}")
    return Trimap((channel * 2.0).astype(np.uint8))


# ---------------------------------------------------------------------------
# File I/O. PNG rasters, 8- or 16-bit; trimaps stored as {0, 128, 255}.
# ---------------------------------------------------------------------------

_BIT_DEPTH_SCALE = {8: 255, 16: 65535}


def _quantize(values: np.ndarray, bit_depth: int) -> np.ndarray:
    if bit_depth not in _BIT_DEPTH_SCALE:
        raise ParameterError(f"bit_depth must be 8 or 16, got {bit_depth}")
    scale = _BIT_DEPTH_SCALE[bit_depth]
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    return np.round(values * scale).astype(dtype)


def _read_raster(path: str | Path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIoError(f"cannot read image file: {path}")
    if raw.dtype == np.uint8:
        return raw.astype(np.float64) / 255.0
    if raw.dtype == np.uint16:
        return raw.astype(np.float64) / 65535.0
    raise ImageIoError(f"unsupported raster dtype {raw.dtype} in {path}")


def load_image(path: str | Path) -> Image:
    """Load an 8- or 16-bit PNG (or other cv2-readable raster) as an Image."""
    raster = _read_raster(path)
    if raster.ndim == 2:
        raster = np.repeat(raster[:, :, None], 3, axis=2)
    elif raster.shape[2] == 4:
        raster = raster[:, :, :3]
    return Image(raster[:, :, ::-1])  # BGR -> RGB


def save_image(img: Image, path: str | Path, bit_depth: int = 8) -> None:
    """Write an Image as PNG. Round-trip error is <= 1/(2^bit_depth - 1)."""
    raster = _quantize(img.pixels[:, :, ::-1], bit_depth)  # RGB -> BGR
    if not cv2.imwrite(str(path), raster):
        raise ImageIoError(f"cannot write image file: {path}")


def load_alpha(path: str | Path) -> AlphaMatte:
    raster = _read_raster(path)
    if raster.ndim == 3:
        raster = raster[:, :, 0]
    return AlphaMatte(raster)


def save_alpha(alpha: AlphaMatte, path: str | Path, bit_depth: int = 8) -> None:
    raster = _quantize(alpha.values, bit_depth)
    if not cv2.imwrite(str(path), raster):
        raise ImageIoError(f"cannot write alpha file: {path}")


def load_trimap(path: str | Path) -> Trimap:
    raw = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if raw is None:
        raise ImageIoError(f"cannot read trimap file: {path}")
    labels = np.full(raw.shape, UNKNOWN, dtype=np.uint8)
    labels[raw == 0] = BACKGROUND
    labels[raw == 255] = FOREGROUND
    if not np.isin(raw, _LABEL_TO_UINT8).all():
        raise DomainError(f"trimap file {path} has values outside {{0, 128, 255}}")
    return Trimap(labels)


def save_trimap(trimap: Trimap, path: str | Path) -> None:
    raster = _LABEL_TO_UINT8[trimap.labels]
    if not cv2.imwrite(str(path), raster):
        raise ImageIoError(f"cannot write trimap file: {path}")
