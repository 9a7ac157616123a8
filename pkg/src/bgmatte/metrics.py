"""AlphaMatting benchmark metrics: SAD, MSE, GRAD, CONN.

Conventions (matching published benchmark tables):
  SAD   sum of |pred - gt| over the eval region, divided by 1000
  MSE   mean of (pred - gt)^2 over the eval region
  GRAD  sum of squared differences of Gaussian-derivative gradient
        magnitudes over the eval region, divided by 1000
  CONN  sum of |phi(pred) - phi(gt)| over the eval region, divided by 1000,
        where phi is each pixel's degree of connectedness to the largest
        fully-opaque region under a 0 -> 1 threshold sweep

The eval region defaults to the trimap's unknown pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, DomainError, ParameterError, ShapeError
from .imagecore import AlphaMatte, Trimap

EVAL_UNKNOWN = "unknown-only"
EVAL_ALL = "all-pixels"

CONN_PHI_TOLERANCE = 0.15


@dataclass(frozen=True)
class MetricReport:
    """All four metrics for one prediction/ground-truth pair."""

    sad: float
    mse: float
    grad: float
    conn: float
    eval_region: str = EVAL_UNKNOWN

    def __post_init__(self):
        for name in ("sad", "mse", "grad", "conn"):
            if getattr(self, name) < 0:
                raise DomainError(f"metric {name} is negative")

    def as_dict(self) -> dict[str, float]:
        return {"sad": self.sad, "mse": self.mse, "grad": self.grad, "conn": self.conn}


def _alpha_values(x) -> np.ndarray:
    if isinstance(x, AlphaMatte):
        return x.values
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ShapeError(f"expected HxW alpha array, got shape {arr.shape}")
    return arr


def _region_mask(trimap, shape: tuple[int, int], eval_region: str) -> np.ndarray:
    if eval_region not in (EVAL_UNKNOWN, EVAL_ALL):
        raise ParameterError(f"unknown eval_region {eval_region!r}")
    if eval_region == EVAL_ALL:
        return np.ones(shape, dtype=bool)
    if trimap is None:
        raise ParameterError("unknown-only evaluation requires a trimap")
    labels = trimap.labels if isinstance(trimap, Trimap) else Trimap(np.asarray(trimap)).labels
    if labels.shape != shape:
        raise ShapeError(f"trimap shape {labels.shape} != alpha shape {shape}")
    return labels == 1


def _check_pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    p = _alpha_values(pred)
    g = _alpha_values(gt)
    if p.shape != g.shape:
        raise ShapeError(f"pred shape {p.shape} != gt shape {g.shape}")
    return p, g


def sad(pred, gt, trimap=None, eval_region: str = EVAL_UNKNOWN) -> float:
    p, g = _check_pair(pred, gt)
    mask = _region_mask(trimap, p.shape, eval_region)
    return float(np.abs(p - g)[mask].sum() / 1000.0)


def mse(pred, gt, trimap=None, eval_region: str = EVAL_UNKNOWN) -> float:
    p, g = _check_pair(pred, gt)
    mask = _region_mask(trimap, p.shape, eval_region)
    n = int(mask.sum())
    if n == 0:
        raise DegenerateInputError("MSE over an empty eval region is undefined")
    d = (p - g)[mask]
    return float((d * d).sum() / n)


def _gauss(x: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-(x**2) / (2.0 * sigma**2)) / (sigma * math.sqrt(2.0 * math.pi))


def _dgauss(x: np.ndarray, sigma: float) -> np.ndarray:
    return -x * _gauss(x, sigma) / sigma**2


def gaussian_derivative_kernel(sigma: float, epsilon: float = 1e-2) -> np.ndarray:
    """First-order Gaussian derivative kernel (x-derivative), L2-normalized.

    The support half-size truncates the Gaussian where it falls below
    epsilon of its peak mass, as in the reference benchmark protocol.
    """
    halfsize = int(np.ceil(sigma * math.sqrt(-2.0 * math.log(math.sqrt(2.0 * math.pi) * sigma * epsilon))))
    coords = np.arange(-halfsize, halfsize + 1, dtype=np.float64)
    kernel = _gauss(coords[:, None], sigma) * _dgauss(coords[None, :], sigma)
    return kernel / np.sqrt(np.sum(kernel * kernel))


def gaussian_gradient_magnitude(values: np.ndarray, sigma: float) -> np.ndarray:
    """Gradient magnitude from first-order Gaussian derivative filters."""
    kx = gaussian_derivative_kernel(sigma)
    if min(values.shape) < kx.shape[0]:
        raise ShapeError(
            f"image {values.shape} smaller than the {kx.shape[0]}x{kx.shape[0]} derivative kernel"
        )
    gx = ndimage.convolve(values, kx, mode="nearest")
    gy = ndimage.convolve(values, kx.T, mode="nearest")
    return np.sqrt(gx * gx + gy * gy)


def grad_error(pred, gt, trimap=None, sigma: float = 1.4, eval_region: str = EVAL_UNKNOWN) -> float:
    p, g = _check_pair(pred, gt)
    mask = _region_mask(trimap, p.shape, eval_region)
    diff = gaussian_gradient_magnitude(p, sigma) - gaussian_gradient_magnitude(g, sigma)
    return float((diff * diff)[mask].sum() / 1000.0)


def _threshold_grid(theta_step: float) -> np.ndarray:
    n = round(1.0 / theta_step)
    if n < 1 or abs(n * theta_step - 1.0) > 1e-9:
        raise ParameterError(f"theta_step {theta_step} must evenly divide 1.0")
    return np.arange(n + 1, dtype=np.float64) / n


def _largest_component(binary: np.ndarray) -> np.ndarray:
    """Largest 4-connected component; ties broken by scanline label order."""
    labels, count = ndimage.label(binary)
    if count == 0:
        return np.zeros_like(binary, dtype=bool)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def connectedness_threshold_map(pred: np.ndarray, gt: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Per-pixel largest threshold at which the pixel is still part of the
    largest component of the jointly thresholded pred/gt mattes.

    Pixels that never drop out (including sweeps where the joint map becomes
    empty) keep the value 1.
    """
    l_map = np.full(pred.shape, -1.0)
    for i in range(1, len(thresholds)):
        t = thresholds[i]
        joint = (pred >= t) & (gt >= t)
        if not joint.any():
            continue
        omega = _largest_component(joint)
        dropped = (l_map == -1.0) & ~omega
        l_map[dropped] = thresholds[i - 1]
    l_map[l_map == -1.0] = 1.0
    return l_map


def conn_error(
    pred,
    gt,
    trimap=None,
    theta_step: float = 0.1,
    eval_region: str = EVAL_UNKNOWN,
) -> float:
    p, g = _check_pair(pred, gt)
    mask = _region_mask(trimap, p.shape, eval_region)
    if not mask.any():
        raise DegenerateInputError("connectivity error over an empty eval region is undefined")
    thresholds = _threshold_grid(theta_step)
    l_map = connectedness_threshold_map(p, g, thresholds)
    pred_d = p - l_map
    gt_d = g - l_map
    pred_phi = 1.0 - pred_d * (pred_d >= CONN_PHI_TOLERANCE)
    gt_phi = 1.0 - gt_d * (gt_d >= CONN_PHI_TOLERANCE)
    return float(np.abs(pred_phi - gt_phi)[mask].sum() / 1000.0)


def evaluate_pair(
    pred,
    gt,
    trimap=None,
    eval_region: str = EVAL_UNKNOWN,
    grad_sigma: float = 1.4,
    conn_theta_step: float = 0.1,
) -> MetricReport:
    """Compute all four metrics for one pair."""
    return MetricReport(
        sad=sad(pred, gt, trimap, eval_region),
        mse=mse(pred, gt, trimap, eval_region),
        grad=grad_error(pred, gt, trimap, grad_sigma, eval_region),
        conn=conn_error(pred, gt, trimap, conn_theta_step, eval_region),
        eval_region=eval_region,
    )
