"""Deterministic synthetic foregrounds and backgrounds for desk-scale runs.

Foreground mattes are built from signed-distance fields of disks and line
segments with soft feathered edges, so every alpha has solid opaque cores,
solid transparent surroundings, and a genuine fractional band in between.
Backgrounds are low-resolution random color grids upsampled smoothly.
"""

from __future__ import annotations

import cv2
import numpy as np

from .errors import ParameterError
from .imagecore import AlphaMatte, Image

_FG_STREAM = 10
_BG_STREAM = 11

# Alpha values this close to an endpoint snap to it so trimaps get solid
# foreground/background cores.
_SNAP = 0.005


def _pool_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, index]))


def _smooth_field(rng: np.random.Generator, dims: tuple[int, int], cells: int) -> np.ndarray:
    height, width = dims
    grid = rng.uniform(0.0, 1.0, size=(cells, cells, 3))
    field = cv2.resize(grid, (width, height), interpolation=cv2.INTER_CUBIC)
    return np.clip(field, 0.0, 1.0)


def _segment_distance(yy: np.ndarray, xx: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    v = p1 - p0
    ty, tx = yy - p0[0], xx - p0[1]
    t = np.clip((ty * v[0] + tx * v[1]) / (v @ v), 0.0, 1.0)
    return np.hypot(ty - t * v[0], tx - t * v[1])


def synth_background(rng: np.random.Generator, dims: tuple[int, int] = (96, 96)) -> Image:
    """Smooth random color field."""
    return Image(_smooth_field(rng, dims, cells=6))


def synth_foreground(
    rng: np.random.Generator,
    dims: tuple[int, int] = (96, 96),
    n_disks: int = 2,
    n_strokes: int = 2,
) -> tuple[Image, AlphaMatte]:
    """Random matte (union of feathered disks and strokes) plus a color."""
    height, width = dims
    if min(height, width) < 32:
        raise ParameterError("synthetic foregrounds need dims of at least 32")
    yy, xx = np.mgrid[0:height, 0:width] + 0.5
    alpha = np.zeros((height, width))
    for _ in range(n_disks):
        cy = rng.uniform(0.3 * height, 0.7 * height)
        cx = rng.uniform(0.3 * width, 0.7 * width)
        radius = rng.uniform(0.14, 0.26) * min(height, width)
        feather = rng.uniform(1.5, 4.0)
        dist = np.hypot(yy - cy, xx - cx)
        alpha = np.maximum(alpha, np.clip((radius - dist) / feather + 0.5, 0.0, 1.0))
    for _ in range(n_strokes):
        p0 = np.array([rng.uniform(0.15 * height, 0.85 * height), rng.uniform(0.15 * width, 0.85 * width)])
        angle = rng.uniform(0.0, 2.0 * np.pi)
        length = rng.uniform(0.3, 0.6) * min(height, width)
        p1 = p0 + length * np.array([np.sin(angle), np.cos(angle)])
        dist = _segment_distance(yy, xx, p0, p1)
        radius = rng.uniform(1.0, 3.0)
        feather = rng.uniform(1.0, 2.5)
        alpha = np.maximum(alpha, np.clip((radius - dist) / feather + 0.5, 0.0, 1.0))
    alpha[alpha >= 1.0 - _SNAP] = 1.0
    alpha[alpha <= _SNAP] = 0.0
    color = _smooth_field(rng, dims, cells=4)
    return Image(color), AlphaMatte(alpha)


def synth_foreground_pool(
    count: int, dims: tuple[int, int], seed: int
) -> list[tuple[Image, AlphaMatte]]:
    return [synth_foreground(_pool_rng(seed, _FG_STREAM, i), dims) for i in range(count)]


def synth_background_pool(count: int, dims: tuple[int, int], seed: int) -> list[Image]:
    return [synth_background(_pool_rng(seed, _BG_STREAM, i), dims) for i in range(count)]
