"""The three matting loss terms and their unweighted sum.

All losses are means, so values are resolution independent. The alpha and
compositional terms are plain L1 distances; the adversarial terms are binary
cross-entropy over patch score logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .errors import DegenerateInputError, ParameterError, ShapeError

REGION_ALL = "all-pixels"
REGION_UNKNOWN = "unknown-only"


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term loss values; l_total is their plain left-to-right sum."""

    l_alpha: float
    l_comp: float
    l_gan: float
    l_total: float


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x))


def alpha_loss(alpha_pred, alpha_gt, trimap=None, region_mode: str = REGION_ALL) -> torch.Tensor:
    """Mean absolute difference of predicted and ground-truth alpha.

    region_mode selects all pixels (default) or only the trimap's unknown
    region.
    """
    pred = _as_tensor(alpha_pred)
    gt = _as_tensor(alpha_gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"alpha shapes differ: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    diff = (pred - gt).abs()
    if region_mode == REGION_ALL:
        return diff.mean()
    if region_mode != REGION_UNKNOWN:
        raise ParameterError(f"unknown region_mode {region_mode!r}")
    if trimap is None:
        raise ParameterError("unknown-only alpha loss requires a trimap")
    labels = trimap.labels if hasattr(trimap, "labels") else trimap
    mask = torch.as_tensor(np.asarray(labels) == 1)
    if mask.shape != diff.shape[-2:]:
        raise ShapeError(f"trimap shape {tuple(mask.shape)} != alpha dims {tuple(diff.shape[-2:])}")
    selected = diff[..., mask]
    if selected.numel() == 0:
        raise DegenerateInputError("no unknown pixels in trimap")
    return selected.mean()


def comp_loss(alpha_pred, alpha_gt, fg, bg) -> torch.Tensor:
    """Mean absolute difference between the composites built with predicted
    and ground-truth alpha (both over the ground-truth fg/bg pair)."""
    pred = _as_tensor(alpha_pred)
    gt = _as_tensor(alpha_gt)
    f = _as_tensor(fg)
    b = _as_tensor(bg)
    if pred.shape != gt.shape:
        raise ShapeError(f"alpha shapes differ: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    if f.shape != b.shape:
        raise ShapeError(f"fg/bg shapes differ: {tuple(f.shape)} vs {tuple(b.shape)}")
    if f.shape[-2:] != pred.shape[-2:]:
        raise ShapeError(
            f"image spatial dims {tuple(f.shape[-2:])} != alpha dims {tuple(pred.shape[-2:])}"
        )
    a_p = _broadcast_alpha(pred, f)
    a_g = _broadcast_alpha(gt, f)
    comp_pred = a_p * f + (1.0 - a_p) * b
    comp_gt = a_g * f + (1.0 - a_g) * b
    return (comp_pred - comp_gt).abs().mean()


def _broadcast_alpha(alpha: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
    if alpha.dim() == image.dim():
        return alpha
    if alpha.dim() == image.dim() - 1:
        return alpha.unsqueeze(-3)
    raise ShapeError(
        f"cannot broadcast alpha of rank {alpha.dim()} against image of rank {image.dim()}"
    )


def gan_loss_g(fake_scores) -> torch.Tensor:
    """Generator adversarial term: fake patch logits labeled real."""
    fake = _as_tensor(fake_scores)
    return F.binary_cross_entropy_with_logits(fake, torch.ones_like(fake))


def gan_loss_d(real_scores, fake_scores) -> torch.Tensor:
    """Discriminator term: mean of real-labeled-real and fake-labeled-fake."""
    real = _as_tensor(real_scores)
    fake = _as_tensor(fake_scores)
    loss_real = F.binary_cross_entropy_with_logits(real, torch.ones_like(real))
    loss_fake = F.binary_cross_entropy_with_logits(fake, torch.zeros_like(fake))
    return 0.5 * (loss_real + loss_fake)


def total_loss(
    l_alpha,
    l_comp,
    l_gan,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> LossBreakdown:
    """Combine the three terms. Weights default to the unweighted sum."""
    w_a, w_c, w_g = weights
    a = float(l_alpha) * w_a
    c = float(l_comp) * w_c
    g = float(l_gan) * w_g
    return LossBreakdown(l_alpha=a, l_comp=c, l_gan=g, l_total=a + c + g)
