"""Background-reconstruction artifact simulation.

Two augmentation regimes over clean backgrounds:
  M (mild):  a random fraction of images receive one hexagonal blur patch.
  H (heavy): every image is globally blurred, then receives one patch.

The patch is a filled regular hexagon; inside it the background is replaced
by a Gaussian-blurred copy of itself sampled at a translated position.
Pixels outside the hexagon are left bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, shift as nd_shift

from .errors import DomainError, ParameterError, ShapeError
from .imagecore import Image

DIAMETER_RANGE = (120.0, 345.0)
# Hexagon 6-fold symmetry: rotations are drawn from a linearly spaced set of
# angles covering one symmetry sector [0, pi/3).
ROTATION_STEPS = 64
_SECTOR = math.pi / 3.0


@dataclass(frozen=True)
class HexPatchSpec:
    """Placement and blur parameters for one hexagonal patch.

    `diameter` is the vertex-to-vertex width of the regular hexagon, in
    pixels. `center` is (x, y). `translation` is the (dx, dy) offset at
    which the blurred background is resampled inside the patch.
    """

    center: tuple[float, float]
    diameter: float
    rotation: float
    blur_sigma: float
    translation: tuple[float, float]

    def validate(self, image_dims: tuple[int, int]) -> None:
        h, w = image_dims
        lo, hi = DIAMETER_RANGE
        if not lo <= self.diameter <= hi:
            raise DomainError(f"diameter {self.diameter} outside [{lo}, {hi}]")
        x, y = self.center
        if not (0 <= x < w and 0 <= y < h):
            raise DomainError(f"center {self.center} outside {w}x{h} image bounds")
        if self.blur_sigma < 0:
            raise DomainError("blur_sigma must be nonnegative")


@dataclass(frozen=True)
class DistortionConfig:
    mode: str = "M"
    m_distort_fraction: float = 0.5
    global_blur_sigma_range: tuple[float, float] = (1.0, 4.0)
    patch_sigma_range: tuple[float, float] = (2.0, 12.0)
    translation_range: tuple[float, float] = (-30.0, 30.0)
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("M", "H"):
            raise ParameterError(f"mode must be 'M' or 'H', got {self.mode!r}")
        if not 0.0 <= self.m_distort_fraction <= 1.0:
            raise ParameterError("m_distort_fraction must be in [0, 1]")
        for name in ("global_blur_sigma_range", "patch_sigma_range", "translation_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ParameterError(f"{name} has lo > hi: ({lo}, {hi})")
        lo, _ = self.global_blur_sigma_range
        if lo <= 0:
            raise ParameterError("global blur sigma must be positive")
        if self.patch_sigma_range[0] <= 0:
            raise ParameterError("patch blur sigma must be positive")


def sample_hex_patch(
    rng: np.random.Generator,
    image_dims: tuple[int, int],
    patch_sigma_range: tuple[float, float] = (2.0, 12.0),
    translation_range: tuple[float, float] = (-30.0, 30.0),
) -> HexPatchSpec:
    """Draw a random patch spec: center uniform over the image, diameter
    uniform over DIAMETER_RANGE, rotation from the linearly spaced angle set."""
    h, w = image_dims
    if h < 1 or w < 1:
        raise ShapeError(f"image dims must be >= 1x1, got {image_dims}")
    cx = rng.uniform(0.0, w)
    cy = rng.uniform(0.0, h)
    diameter = rng.uniform(*DIAMETER_RANGE)
    angles = np.linspace(0.0, _SECTOR, ROTATION_STEPS, endpoint=False)
    rotation = float(angles[rng.integers(0, ROTATION_STEPS)])
    sigma = rng.uniform(*patch_sigma_range)
    dx = rng.uniform(*translation_range)
    dy = rng.uniform(*translation_range)
    return HexPatchSpec(
        center=(float(cx), float(cy)),
        diameter=float(diameter),
        rotation=rotation,
        blur_sigma=float(sigma),
        translation=(float(dx), float(dy)),
    )


def hex_mask(spec: HexPatchSpec, image_dims: tuple[int, int]) -> np.ndarray:
    """Rasterize the filled regular hexagon as an HxW boolean mask.

    A regular hexagon is the intersection of three slabs: |(p-c).u_k| <= a
    for the three edge-normal directions u_k and apothem a = (sqrt(3)/4) d.
    """
    h, w = image_dims
    # The mask depends on rotation only mod pi/3.
    rot = float(np.mod(spec.rotation, _SECTOR))
    apothem = spec.diameter * math.sqrt(3.0) / 4.0
    cx, cy = spec.center
    ys, xs = np.mgrid[0:h, 0:w]
    px = xs - cx
    py = ys - cy
    mask = np.ones((h, w), dtype=bool)
    for k in range(3):
        theta = rot + math.pi / 6.0 + k * _SECTOR
        proj = px * math.cos(theta) + py * math.sin(theta)
        mask &= np.abs(proj) <= apothem
    return mask


def apply_patch_blur(bg: Image, spec: HexPatchSpec) -> Image:
    """Replace the hexagonal region with a blurred, translated copy of the
    background. Outside the hexagon the output is bit-identical to the input.

    Out-of-bounds samples use edge replication; fractional translations are
    linearly interpolated.
    """
    dims = (bg.height, bg.width)
    spec.validate(dims)
    mask = hex_mask(spec, dims)
    if not mask.any():
        return Image(bg.pixels.copy())

    degraded = bg.pixels
    if spec.blur_sigma > 0:
        degraded = gaussian_filter(degraded, sigma=(spec.blur_sigma, spec.blur_sigma, 0.0), mode="nearest")
    dx, dy = spec.translation
    if dx != 0.0 or dy != 0.0:
        # out[y, x] = degraded[y + dy, x + dx]
        degraded = nd_shift(degraded, shift=(-dy, -dx, 0.0), order=1, mode="nearest")
    degraded = np.clip(degraded, 0.0, 1.0)

    out = bg.pixels.copy()
    out[mask] = degraded[mask]
    return Image(out)


def distort_background(bg: Image, cfg: DistortionConfig, rng: np.random.Generator) -> Image:
    """Apply one distortion draw to a background image.

    Mode M: with probability m_distort_fraction apply one hex patch,
    otherwise return the input unchanged. Mode H: global Gaussian blur with
    sigma drawn from global_blur_sigma_range, then one hex patch.
    """
    dims = (bg.height, bg.width)
    if cfg.mode == "M":
        if rng.uniform() >= cfg.m_distort_fraction:
            return Image(bg.pixels.copy())
        spec = sample_hex_patch(rng, dims, cfg.patch_sigma_range, cfg.translation_range)
        return apply_patch_blur(bg, spec)

    sigma = rng.uniform(*cfg.global_blur_sigma_range)
    blurred = gaussian_filter(bg.pixels, sigma=(sigma, sigma, 0.0), mode="nearest")
    base = Image(np.clip(blurred, 0.0, 1.0))
    spec = sample_hex_patch(rng, dims, cfg.patch_sigma_range, cfg.translation_range)
    return apply_patch_blur(base, spec)


def derived_rng(base_seed: int, image_index: int) -> np.random.Generator:
    """Per-image RNG stream; images can be processed in parallel."""
    return np.random.default_rng(np.random.SeedSequence([base_seed, image_index]))
