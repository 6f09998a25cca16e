"""PSNR and SSIM over RGB jointly and over Y, Cb, Cr separately.

PSNR treats all elements of the compared arrays as one population
(peak 255 by default). SSIM uses the reference configuration: 11x11
Gaussian window with sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 255,
averaged over all fully-inside windows. The RGB SSIM is the mean of the
three per-channel values.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import data as _data
from .tensor import ShapeMismatchError, as_tensor

METRIC_FIELDS = ("P_RGB", "S_RGB", "P_Y", "S_Y", "P_Cb", "S_Cb", "P_Cr", "S_Cr")

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 255.0

# BT.601 full-range RGB -> YCbCr
_YCC_MATRIX = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YCC_OFFSET = np.array([0.0, 128.0, 128.0])


def psnr(a, b, peak: float = DYNAMIC_RANGE) -> float:
    """10 log10(peak^2 / MSE); +inf when the inputs are identical."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - size // 2
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x: np.ndarray, window: np.ndarray) -> np.ndarray:
    # separable valid-mode correlation along both axes
    k = window.size
    t = np.lib.stride_tricks.sliding_window_view(x, k, axis=0) @ window
    return np.lib.stride_tricks.sliding_window_view(t, k, axis=1) @ window


def ssim(a, b) -> float:
    """Mean structural similarity of two single-channel images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if b.ndim == 3 and b.shape[2] == 1:
        b = b[:, :, 0]
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatchError("ssim expects single-channel images")
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(
            f"image {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    w = _gaussian_window()
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    var_a = _filter_valid(a * a, w) - mu_a * mu_a
    var_b = _filter_valid(b * b, w) - mu_b * mu_b
    cov = _filter_valid(a * b, w) - mu_a * mu_b
    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    ssim_map = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(np.mean(ssim_map))


def ssim_rgb(a, b) -> float:
    """Mean of per-channel SSIM over the three RGB channels."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean([ssim(a[:, :, c], b[:, :, c]) for c in range(a.shape[2])]))


def rgb_to_ycbcr(image) -> np.ndarray:
    """BT.601 full-range conversion; output values are not clamped."""
    image = as_tensor(image)
    if image.shape[2] != 3:
        raise ShapeMismatchError(f"expected 3 channels, got {image.shape[2]}")
    return image @ _YCC_MATRIX.T + _YCC_OFFSET


def ycbcr_to_rgb(image) -> np.ndarray:
    """Exact inverse of `rgb_to_ycbcr` (no clamping)."""
    image = as_tensor(image)
    inv = np.linalg.inv(_YCC_MATRIX)
    return (image - _YCC_OFFSET) @ inv.T


@dataclass(frozen=True)
class EvalReport:
    """Per-image and mean PSNR/SSIM over RGB, Y, Cb and Cr."""

    per_image: tuple  # ((name, {field: value}), ...)
    mean: dict

    def to_tsv(self) -> str:
        lines = ["image\t" + "\t".join(METRIC_FIELDS)]
        for name, fields in self.per_image:
            lines.append(name + "\t" + "\t".join(_fmt(fields[f]) for f in METRIC_FIELDS))
        lines.append("MEAN\t" + "\t".join(_fmt(self.mean[f]) for f in METRIC_FIELDS))
        return "\n".join(lines) + "\n"

    def to_kv(self) -> str:
        lines = []
        for name, fields in self.per_image:
            for f in METRIC_FIELDS:
                lines.append(f"image.{name}.{f}: {fields[f]!r}")
        for f in METRIC_FIELDS:
            lines.append(f"mean.{f}: {self.mean[f]!r}")
        return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.6f}"


def _image_metrics(sr: np.ndarray, hr: np.ndarray) -> dict:
    ycc_sr = rgb_to_ycbcr(sr)
    ycc_hr = rgb_to_ycbcr(hr)
    fields = {
        "P_RGB": psnr(sr, hr),
        "S_RGB": ssim_rgb(sr, hr),
    }
    for idx, ch in enumerate(("Y", "Cb", "Cr")):
        fields[f"P_{ch}"] = psnr(ycc_sr[:, :, idx], ycc_hr[:, :, idx])
        fields[f"S_{ch}"] = ssim(ycc_sr[:, :, idx], ycc_hr[:, :, idx])
    return fields


def evaluate(upscale, hr_images, degradation, scale: int) -> EvalReport:
    """Degrade each HR image, run `upscale` on the LR result, clamp to
    [0, 255], and report all eight metric fields plus their means.

    `upscale` is any callable mapping an LR tensor to an HR-sized tensor;
    `degradation` may be None, in which case the (cropped) HR image itself
    is passed through. Images are cropped to dims divisible by `scale`.
    """
    rows = []
    for name, hr in hr_images:
        hr = _data.crop_to_multiple(hr, scale)
        lr = _data.degrade(hr, degradation, scale) if degradation is not None else hr
        sr = np.clip(as_tensor(upscale(lr)), 0.0, 255.0)
        if sr.shape != hr.shape:
            raise ShapeMismatchError(
                f"{name}: upscaled shape {sr.shape} does not match ground truth {hr.shape}"
            )
        rows.append((name, _image_metrics(sr, hr)))
    if not rows:
        raise ValueError("no images to evaluate")
    mean = {f: float(np.mean([fields[f] for _, fields in rows])) for f in METRIC_FIELDS}
    return EvalReport(per_image=tuple(rows), mean=mean)
