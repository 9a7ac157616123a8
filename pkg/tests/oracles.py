"""Independent brute-force reference implementations.

Everything here favors obviousness over speed: per-pixel scans, explicit
kernel-offset loops over edge-padded arrays, and stack-based flood fill.
The test suite compares the package's vectorized code against these.
"""

import math

import numpy as np

CONN_TOLERANCE = 0.15


def trimap_oracle(alpha: np.ndarray, band_radius: int) -> np.ndarray:
    """Per-pixel neighborhood scan. A pixel is foreground when alpha is 1
    over its whole (clipped) square neighborhood, background when alpha is 0
    over it, unknown otherwise."""
    h, w = alpha.shape
    r = band_radius
    out = np.empty((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            neigh = alpha[max(0, y - r) : y + r + 1, max(0, x - r) : x + r + 1]
            if alpha[y, x] == 1.0 and (neigh == 1.0).all():
                out[y, x] = 2
            elif alpha[y, x] == 0.0 and (neigh == 0.0).all():
                out[y, x] = 0
            else:
                out[y, x] = 1
    return out


def sad_oracle(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    total = 0.0
    for y in range(pred.shape[0]):
        for x in range(pred.shape[1]):
            if mask[y, x]:
                total += abs(pred[y, x] - gt[y, x])
    return total / 1000.0


def mse_oracle(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    total = 0.0
    count = 0
    for y in range(pred.shape[0]):
        for x in range(pred.shape[1]):
            if mask[y, x]:
                d = pred[y, x] - gt[y, x]
                total += d * d
                count += 1
    return total / count


def grad_kernel_oracle(sigma: float, epsilon: float = 1e-2) -> np.ndarray:
    """Outer product of a Gaussian (rows) and its first derivative (columns),
    L2-normalized, with support truncated where the tails fall below epsilon."""
    half = math.ceil(sigma * math.sqrt(-2.0 * math.log(math.sqrt(2.0 * math.pi) * sigma * epsilon)))
    size = 2 * half + 1
    kernel = np.empty((size, size))
    norm = sigma * math.sqrt(2.0 * math.pi)
    for i in range(size):
        for j in range(size):
            y, x = i - half, j - half
            gauss_y = math.exp(-y * y / (2.0 * sigma * sigma)) / norm
            dgauss_x = -x * math.exp(-x * x / (2.0 * sigma * sigma)) / norm / (sigma * sigma)
            kernel[i, j] = gauss_y * dgauss_x
    return kernel / math.sqrt((kernel * kernel).sum())


def convolve_oracle(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """True 2D convolution (kernel flipped) with edge replication, as an
    explicit loop over kernel offsets."""
    half = kernel.shape[0] // 2
    h, w = image.shape
    padded = np.pad(image, half, mode="edge")
    out = np.zeros_like(image)
    for a in range(-half, half + 1):
        for b in range(-half, half + 1):
            out += padded[half - a : half - a + h, half - b : half - b + w] * kernel[a + half, b + half]
    return out


def grad_error_oracle(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray, sigma: float = 1.4) -> float:
    kernel = grad_kernel_oracle(sigma)
    mag = []
    for values in (pred, gt):
        gx = convolve_oracle(values, kernel)
        gy = convolve_oracle(values, kernel.T)
        mag.append(np.sqrt(gx * gx + gy * gy))
    total = 0.0
    for y in range(pred.shape[0]):
        for x in range(pred.shape[1]):
            if mask[y, x]:
                d = mag[0][y, x] - mag[1][y, x]
                total += d * d
    return total / 1000.0


def largest_component_oracle(binary: np.ndarray) -> np.ndarray:
    """Largest 4-connected component by stack flood fill; a strict size
    comparison keeps the earliest component (scanline order) on ties."""
    h, w = binary.shape
    seen = np.zeros((h, w), dtype=bool)
    best: list[tuple[int, int]] = []
    for y in range(h):
        for x in range(w):
            if not binary[y, x] or seen[y, x]:
                continue
            component = []
            stack = [(y, x)]
            seen[y, x] = True
            while stack:
                cy, cx = stack.pop()
                component.append((cy, cx))
                for ny, nx in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                    if 0 <= ny < h and 0 <= nx < w and binary[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            if len(component) > len(best):
                best = component
    mask = np.zeros((h, w), dtype=bool)
    for y, x in best:
        mask[y, x] = True
    return mask


def conn_l_map_oracle(pred: np.ndarray, gt: np.ndarray, theta_step: float = 0.1) -> np.ndarray:
    """Exhaustive threshold sweep: for each pixel, the largest threshold at
    which it still belonged to the largest jointly thresholded component.
    Sweeps where the joint map is empty are skipped; pixels that never drop
    out end at 1."""
    n = round(1.0 / theta_step)
    thresholds = np.arange(n + 1, dtype=np.float64) / n
    h, w = pred.shape
    l_map = -np.ones((h, w))
    for i in range(1, n + 1):
        t = thresholds[i]
        joint = (pred >= t) & (gt >= t)
        if not joint.any():
            continue
        omega = largest_component_oracle(joint)
        for y in range(h):
            for x in range(w):
                if l_map[y, x] == -1.0 and not omega[y, x]:
                    l_map[y, x] = thresholds[i - 1]
    l_map[l_map == -1.0] = 1.0
    return l_map


def conn_error_oracle(
    pred: np.ndarray, gt: np.ndarray, mask: np.ndarray, theta_step: float = 0.1
) -> float:
    l_map = conn_l_map_oracle(pred, gt, theta_step)
    h, w = pred.shape
    error_field = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            dp = pred[y, x] - l_map[y, x]
            dg = gt[y, x] - l_map[y, x]
            phi_p = 1.0 - dp if dp >= CONN_TOLERANCE else 1.0
            phi_g = 1.0 - dg if dg >= CONN_TOLERANCE else 1.0
            error_field[y, x] = abs(phi_p - phi_g)
    return float(error_field[mask].sum() / 1000.0)


def gaussian_blur_oracle(image: np.ndarray, sigma: float) -> np.ndarray:
    """Dense (non-separable) Gaussian blur per channel: sum-normalized kernel
    with radius int(4*sigma + 0.5), edge replication."""
    radius = int(4.0 * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-0.5 * (x / sigma) ** 2)
    k1 /= k1.sum()
    kernel = np.outer(k1, k1)
    h, w = image.shape[:2]
    out = np.zeros_like(image)
    for c in range(image.shape[2]):
        padded = np.pad(image[:, :, c], radius, mode="edge")
        for a in range(2 * radius + 1):
            for b in range(2 * radius + 1):
                out[:, :, c] += padded[a : a + h, b : b + w] * kernel[a, b]
    return out


def integer_shift_oracle(image: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """out[y, x] = image[y + dy, x + dx] with edge clamping."""
    h, w = image.shape[:2]
    ys = np.clip(np.arange(h) + dy, 0, h - 1)
    xs = np.clip(np.arange(w) + dx, 0, w - 1)
    return image[np.ix_(ys, xs)]
