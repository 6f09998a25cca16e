"""Classical image resamplers: nearest neighbor, bilinear, and bicubic.

Supports integer upscale factors 2 and 4 plus the matching downscales 1/2
and 1/4, a 5x5 Gaussian blur, and blur-then-decimate pyramid downsampling.

Conventions:
  - half-pixel-center alignment: src = (dst + 0.5) / scale - 0.5
  - borders clamp to the edge pixel for every kernel
  - bicubic uses the Keys convolution kernel with a = -0.5
  - nearest neighbor breaks exact half-way ties toward the smaller index,
    which makes 2x upscaling exact 2x2 block replication and 1/2
    downscaling top-left-of-block decimation
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .tensor import as_tensor


class InterpKind(Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"
    BICUBIC = "bicubic"


VALID_SCALES = (2.0, 4.0, 0.5, 0.25)

_TAPS = {InterpKind.NEAREST: 1, InterpKind.BILINEAR: 2, InterpKind.BICUBIC: 4}


def cubic_kernel(x):
    """Keys cubic convolution kernel with a = -0.5, evaluated elementwise."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    near = (1.5 * x - 2.5) * x * x + 1.0
    far = ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def _check_scale(scale) -> float:
    s = float(scale)
    if s not in VALID_SCALES:
        raise ValueError(f"unsupported scale {scale!r}; expected one of 2, 4, 1/2, 1/4")
    return s


def _axis_coords(n_dst: int, scale: float) -> np.ndarray:
    return (np.arange(n_dst, dtype=np.float64) + 0.5) / scale - 0.5


@dataclass(frozen=True)
class AxisPlan:
    """Per-output-pixel source taps and kernel weights along one axis.

    `indices` are already clamped to the valid source range (clamped taps
    may coincide at the borders); `matrix` is the dense (n_dst, n_src)
    scatter of the weights, so resampling one axis is a matrix product.
    """

    indices: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray


def _plan_axis(kind: InterpKind, scale: float, n_src: int) -> AxisPlan:
    n_dst = int(np.floor(n_src * scale + 0.5))
    src = _axis_coords(n_dst, scale)
    if kind is InterpKind.NEAREST:
        # round-half-down: ties at x.5 pick the smaller source index
        idx = np.ceil(src - 0.5).astype(np.int64)[:, None]
        wts = np.ones((n_dst, 1), dtype=np.float64)
    elif kind is InterpKind.BILINEAR:
        i0 = np.floor(src).astype(np.int64)
        f = src - i0
        idx = np.stack([i0, i0 + 1], axis=1)
        wts = np.stack([1.0 - f, f], axis=1)
    else:
        i0 = np.floor(src).astype(np.int64)
        f = src - i0
        idx = np.stack([i0 - 1, i0, i0 + 1, i0 + 2], axis=1)
        wts = np.stack(
            [cubic_kernel(1.0 + f), cubic_kernel(f), cubic_kernel(1.0 - f), cubic_kernel(2.0 - f)],
            axis=1,
        )
    idx = np.clip(idx, 0, n_src - 1)
    matrix = np.zeros((n_dst, n_src), dtype=np.float64)
    rows = np.repeat(np.arange(n_dst), idx.shape[1])
    np.add.at(matrix, (rows, idx.ravel()), wts.ravel())
    return AxisPlan(indices=idx, weights=wts, matrix=matrix)


@dataclass(frozen=True)
class ResamplePlan:
    kind: InterpKind
    scale: float
    src_h: int
    src_w: int
    dst_h: int
    dst_w: int
    rows: AxisPlan
    cols: AxisPlan


_PLAN_CACHE: dict = {}


def plan_resample(kind: InterpKind, scale, src_h: int, src_w: int) -> ResamplePlan:
    """Build (or fetch from cache) the tap/weight plan for a resample."""
    s = _check_scale(scale)
    key = (kind, s, src_h, src_w)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        rows = _plan_axis(kind, s, src_h)
        cols = _plan_axis(kind, s, src_w)
        plan = ResamplePlan(
            kind=kind,
            scale=s,
            src_h=src_h,
            src_w=src_w,
            dst_h=rows.matrix.shape[0],
            dst_w=cols.matrix.shape[0],
            rows=rows,
            cols=cols,
        )
        _PLAN_CACHE[key] = plan
    return plan


def _apply_axes(row_m: np.ndarray, col_m: np.ndarray, batch: np.ndarray) -> np.ndarray:
    # batch (N, H, W, C) -> (N, row_m.rows, col_m.rows, C), separable product
    t = np.tensordot(row_m, batch, axes=(1, 1))  # (H', N, W, C)
    t = np.tensordot(col_m, t, axes=(1, 2))  # (W', H', N, C)
    return np.ascontiguousarray(t.transpose(2, 1, 0, 3))


def resample_batch(batch: np.ndarray, kind: InterpKind, scale) -> np.ndarray:
    """Resample a (N, H, W, C) stack; each channel is handled independently."""
    batch = np.asarray(batch, dtype=np.float64)
    plan = plan_resample(kind, scale, batch.shape[1], batch.shape[2])
    return _apply_axes(plan.rows.matrix, plan.cols.matrix, batch)


def resample(image, kind: InterpKind, scale) -> np.ndarray:
    """Resample one (H, W, C) image by 2, 4, 1/2 or 1/4.

    Output values are not clamped; clamping to [0, 255] happens only at
    image write-out.
    """
    image = as_tensor(image)
    return resample_batch(image[np.newaxis], kind, scale)[0]


def resample_backward_batch(grad: np.ndarray, kind: InterpKind, scale, src_h: int, src_w: int) -> np.ndarray:
    """Transpose of `resample_batch`: scatter output gradients back to sources.

    Each source pixel accumulates the kernel-weighted gradients of every
    output pixel it contributed to.
    """
    grad = np.asarray(grad, dtype=np.float64)
    plan = plan_resample(kind, scale, src_h, src_w)
    if grad.shape[1] != plan.dst_h or grad.shape[2] != plan.dst_w:
        raise ValueError(
            f"gradient spatial dims {grad.shape[1:3]} do not match plan output "
            f"({plan.dst_h}, {plan.dst_w})"
        )
    return _apply_axes(plan.rows.matrix.T, plan.cols.matrix.T, grad)


def resample_backward(grad, kind: InterpKind, scale, src_h: int, src_w: int) -> np.ndarray:
    grad = as_tensor(grad)
    return resample_backward_batch(grad[np.newaxis], kind, scale, src_h, src_w)[0]


def gaussian_kernel_2d(size: int = 5, sigma: float = 1.0) -> np.ndarray:
    """Normalized 2-D Gaussian kernel (sums to 1)."""
    if size % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {size}")
    r = np.arange(size, dtype=np.float64) - size // 2
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def gaussian_blur(image, kernel_size: int = 5, sigma: float = 1.0) -> np.ndarray:
    """Convolve each channel with a normalized Gaussian, clamp-to-edge borders."""
    image = as_tensor(image)
    k = gaussian_kernel_2d(kernel_size, sigma)
    pad = kernel_size // 2
    h, w, _ = image.shape
    padded = np.pad(image, ((pad, pad), (pad, pad), (0, 0)), mode="edge")
    out = np.zeros_like(image)
    for dy in range(kernel_size):
        for dx in range(kernel_size):
            out += k[dy, dx] * padded[dy : dy + h, dx : dx + w, :]
    return out


def pyramid_downsample(image, factor: int) -> np.ndarray:
    """Gaussian-blur (5x5, sigma 1) then decimate by 2, log2(factor) times."""
    image = as_tensor(image)
    if factor not in (2, 4):
        raise ValueError(f"pyramid factor must be 2 or 4, got {factor}")
    h, w, _ = image.shape
    if h % factor or w % factor:
        raise ValueError(f"image dims {(h, w)} not divisible by factor {factor}")
    out = image
    for _ in range(factor.bit_length() - 1):
        out = gaussian_blur(out, 5, 1.0)[::2, ::2, :]
    return out
