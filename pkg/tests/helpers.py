"""Shared builders for structured test inputs."""

import numpy as np

from bgmatte.imagecore import AlphaMatte, CompositeSample, Image, compose, generate_trimap


def soft_disk_alpha(rng: np.random.Generator, h: int, w: int) -> AlphaMatte:
    """One feathered disk: solid core, solid surroundings, fractional band."""
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    cy = rng.uniform(0.4 * h, 0.6 * h)
    cx = rng.uniform(0.4 * w, 0.6 * w)
    radius = rng.uniform(0.2, 0.3) * min(h, w)
    dist = np.hypot(yy - cy, xx - cx)
    alpha = np.clip((radius - dist) / 2.0 + 0.5, 0.0, 1.0)
    alpha[alpha >= 0.995] = 1.0
    alpha[alpha <= 0.005] = 0.0
    return AlphaMatte(alpha)


def make_sample(rng: np.random.Generator, h: int = 32, w: int = 32, band_radius: int = 2) -> CompositeSample:
    fg = Image(rng.uniform(0.0, 1.0, (h, w, 3)))
    bg = Image(rng.uniform(0.0, 1.0, (h, w, 3)))
    alpha = soft_disk_alpha(rng, h, w)
    return CompositeSample(
        foreground=fg,
        background_clean=bg,
        background_distorted=bg,
        alpha_gt=alpha,
        trimap=generate_trimap(alpha, band_radius),
        composite=compose(fg, bg, alpha),
    )
